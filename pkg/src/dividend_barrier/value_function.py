"""Closed-form return functions ``g(x, b)`` and ``f(x) = g(x, b0)`` (case I).

Everything below the barrier is a positive multiple of one barrier-independent
*shape* function ``S``::

    S(x) = s1 * (exp(r+(alpha) x) - exp(r-(alpha) x))          0 <= x < x_alpha
    S(x) = (mu a(x) - 2 delta) / (2c) * S'(x),
           S'(x) = ((a(x) - u) / (alpha - u)) ** (-p)            x_alpha <= x < x_beta
    S(x) = A' exp(r+(beta)(x - x_beta)) + B' exp(r-(beta)(x - x_beta))   x >= x_beta

with ``p = mu^2 / (mu^2 + 2 c sigma^2)`` and ``s1`` chosen so that
``S(x_alpha) = (alpha mu - 2 delta) / (2c)``.  The middle expression is the
first integral of the HJB equation on the band where the control is
interior, ``(mu a / 2 - delta) g' = c g``; the integral form
``(alpha mu - 2 delta)/(2c) + int exp(-mu/sigma^2 int dv/a(v)) dy`` is equal to
it and is used by the tests as an independent quadrature oracle.

For a barrier ``b``, ``g(x, b) = S(x) / S'(b)`` on ``[0, b)`` and
``g(x, b) = x - b + S(b) / S'(b)`` above it.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, DomainError, NumericalError, UnsupportedCaseError
from .model import (CaseLabel, ModelParams, characteristic_roots, classify_case,
                    drift_parameter, transform_G, transform_G_inverse)


def _require_case_one(params: ModelParams):
    case = classify_case(params)
    if case is not CaseLabel.CaseI:
        raise UnsupportedCaseError(case)


def _slope_factor(params: ModelParams) -> float:
    # K = (mu^2 + 2 c sigma^2) / (mu sigma^2): a'(x) = K (1 - u / a(x))
    return (params.mu ** 2 + 2.0 * params.c * params.sigma2) / (params.mu * params.sigma2)


def compute_x_alpha(params: ModelParams) -> float:
    """Reserve level where the unconstrained maximiser first reaches ``alpha``."""
    _require_case_one(params)
    rp, rm = characteristic_roots(params, params.alpha)
    s2a = params.alpha * params.sigma2
    arg = rm * (params.mu + s2a * rm) / (rp * (params.mu + s2a * rp))
    if not arg > 0:
        raise DomainError(f"x_alpha log argument is not positive ({arg})")
    x_alpha = math.log(arg) / (rp - rm)
    if not x_alpha > 0:
        raise DomainError(f"x_alpha must be positive, got {x_alpha}")
    return x_alpha


def compute_x_beta(params: ModelParams, u: float | None = None) -> float:
    """Reserve level where the interior control reaches ``beta``.

    ``u`` defaults to :func:`drift_parameter`; passing
    ``printed_drift_parameter(params)`` reproduces the published table value.
    """
    _require_case_one(params)
    if u is None:
        u = drift_parameter(params)
    scale = params.mu * params.sigma2 / (params.mu ** 2 + 2.0 * params.c * params.sigma2)
    x_alpha = compute_x_alpha(params)
    log_term = math.log((params.beta - u) / (params.alpha - u)) if u > 0 else 0.0
    return scale * (params.beta - params.alpha) + scale * u * log_term + x_alpha


def middle_a(x, params: ModelParams):
    """Interior control ``a(x)`` on ``[x_alpha, x_beta]`` (scalar or array)."""
    shape = _shape(params)
    xs = np.asarray(x, dtype=float)
    tol = 1e-12 * max(1.0, shape.x_beta)
    if np.any(xs < shape.x_alpha - tol) or np.any(xs > shape.x_beta + tol):
        raise DomainError(f"middle_a defined on [{shape.x_alpha}, {shape.x_beta}]")
    out = shape.middle_a_array(xs)
    return float(out) if out.ndim == 0 else out


class _Shape:
    """Barrier-independent pieces for one parameter set (built once, cached)."""

    def __init__(self, params: ModelParams):
        _require_case_one(params)
        self.params = params
        p = params
        self.u = drift_parameter(p)
        self.K = _slope_factor(p)
        self.p = p.mu ** 2 / (p.mu ** 2 + 2.0 * p.c * p.sigma2)
        self.ra = characteristic_roots(p, p.alpha)
        self.rb = characteristic_roots(p, p.beta)
        self.x_alpha = compute_x_alpha(p)
        self.x_beta = compute_x_beta(p)
        self.g_alpha = transform_G(p.alpha, self.u)
        rpa, rma = self.ra
        self.level_alpha = (p.alpha * p.mu - 2.0 * p.delta) / (2.0 * p.c)
        self.s1 = self.level_alpha / (math.exp(rpa * self.x_alpha) - math.exp(rma * self.x_alpha))
        self.eta = ((p.beta - self.u) / (p.alpha - self.u)) ** (-self.p)
        self.xi = (p.beta * p.mu - 2.0 * p.delta) / (2.0 * p.c) * self.eta
        rpb, rmb = self.rb
        # coefficients of the beta branch relative to x_beta
        self.Ap = (self.eta - self.xi * rmb) / (rpb - rmb)
        self.Bp = (self.xi * rpb - self.eta) / (rpb - rmb)

    # -- middle band ------------------------------------------------------
    def middle_a_array(self, xs):
        flat = np.atleast_1d(xs).ravel()
        out = np.array([transform_G_inverse(self.K * (x - self.x_alpha) + self.g_alpha, self.u)
                        for x in flat])
        return out.reshape(np.shape(xs))

    def _middle(self, xs):
        a = self.middle_a_array(xs)
        d1 = ((a - self.u) / (self.params.alpha - self.u)) ** (-self.p)
        s0 = (self.params.mu * a - 2.0 * self.params.delta) / (2.0 * self.params.c) * d1
        d2 = -self.params.mu * d1 / (self.params.sigma2 * a)
        return s0, d1, d2

    def branch(self, name, x):
        """Evaluate one branch formula (``"alpha"``, ``"middle"``, ``"beta"``) at ``x``.

        Lets callers compare one-sided limits at the thresholds exactly.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if name == "alpha":
            rp, rm = self.ra
            ep, em = np.exp(rp * x), np.exp(rm * x)
            return (self.s1 * (ep - em), self.s1 * (rp * ep - rm * em),
                    self.s1 * (rp * rp * ep - rm * rm * em))
        if name == "middle":
            return self._middle(x)
        if name == "beta":
            rp, rm = self.rb
            ep = self.Ap * np.exp(rp * (x - self.x_beta))
            em = self.Bp * np.exp(rm * (x - self.x_beta))
            return ep + em, rp * ep + rm * em, rp * rp * ep + rm * rm * em
        raise ValueError(f"unknown branch {name!r}")

    # -- piecewise evaluation -----------------------------------------------
    def eval(self, x):
        """Return ``(S, S', S'')`` at array ``x >= 0``."""
        x = np.asarray(x, dtype=float)
        s0 = np.empty_like(x)
        s1 = np.empty_like(x)
        s2 = np.empty_like(x)
        lo = x < self.x_alpha
        hi = x >= self.x_beta
        mid = ~(lo | hi)
        for mask, name in ((lo, "alpha"), (mid, "middle"), (hi, "beta")):
            if np.any(mask):
                s0[mask], s1[mask], s2[mask] = self.branch(name, x[mask])
        return s0, s1, s2

    def curvature_beta(self, b):
        """``S''(b) / S'(b)`` on the beta branch (the ``l`` function)."""
        rp, rm = self.rb
        dx = b - self.x_beta
        ep, em = self.Ap * math.exp(rp * dx), self.Bp * math.exp(rm * dx)
        return (rp * rp * ep + rm * rm * em) / (rp * ep + rm * em)


@functools.lru_cache(maxsize=256)
def _shape(params: ModelParams) -> _Shape:
    return _Shape(params)


def closed_form_b0(params: ModelParams) -> float | None:
    """Explicit ``b0`` candidate, or ``None`` when its log argument is not positive."""
    sh = _shape(params)
    rp, rm = sh.rb
    num = rm * rm * (sh.eta - sh.xi * rp)
    den = rp * rp * (sh.eta - sh.xi * rm)
    if not (num > 0 and den > 0):
        return None
    return sh.x_beta + math.log(num / den) / (rp - rm)


@functools.lru_cache(maxsize=256)
def solve_b0(params: ModelParams) -> float:
    """Unconstrained optimal barrier: root of ``l(b) = g''(b-)/g'(b-)`` above ``x_beta``."""
    sh = _shape(params)
    lfun = sh.curvature_beta
    lo = sh.x_beta
    if lfun(lo) >= 0:
        raise BracketError("g'' is already non-negative at x_beta; no barrier b0 > x_beta")
    span = max(sh.x_beta, 1.0)
    cap = sh.x_beta + 1e6 * span
    width = 1.0
    hi = lo + width
    while lfun(hi) < 0:
        lo = hi
        width *= 2.0
        hi = sh.x_beta + width
        if hi > cap:
            raise BracketError(f"no sign change of l on [x_beta, x_beta + 1e6*{span}]")
    b0 = brentq(lfun, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(b0)


@dataclass(frozen=True)
class ValueFunctionSolution:
    """Return function ``g(., b)`` for one parameter set and barrier.

    ``A``, ``B`` and ``k3``, ``k4`` refer to exponentials centred at ``b0``.
    """

    params: ModelParams
    b: float
    b0: float
    x_alpha: float
    x_beta: float
    u: float
    k1: float
    k2: float
    k3: float
    k4: float
    A: float
    B: float
    xi: float
    eta: float

    @property
    def is_optimal_barrier(self) -> bool:
        """Whether ``b >= b0`` (the HJB verification holds beyond ``b``)."""
        return self.b >= self.b0 * (1 - 1e-12)

    @property
    def _scale(self) -> float:
        # g = scale * S below the barrier
        return self.k2

    def _eval(self, x):
        sh = _shape(self.params)
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("g is defined for x >= 0")
        below = x < self.b
        v0 = np.empty_like(x)
        v1 = np.empty_like(x)
        v2 = np.empty_like(x)
        if np.any(below):
            s0, s1, s2 = sh.eval(x[below])
            v0[below] = self._scale * s0
            v1[below] = self._scale * s1
            v2[below] = self._scale * s2
        if np.any(~below):
            v0[~below] = x[~below] - self.b + self.value_at_barrier
            v1[~below] = 1.0
            v2[~below] = 0.0
        return v0, v1, v2

    @functools.cached_property
    def value_at_barrier(self) -> float:
        s0, _, _ = _shape(self.params).eval(np.array([self.b]))
        return float(self._scale * s0[0])

    def value(self, x):
        v = self._eval(x)[0]
        return float(v) if v.ndim == 0 else v

    def derivative(self, x):
        v = self._eval(x)[1]
        return float(v) if v.ndim == 0 else v

    def second_derivative(self, x):
        """``g''``; at ``x >= b`` this is the right limit 0 (see :meth:`curvature_at_barrier`)."""
        v = self._eval(x)[2]
        return float(v) if v.ndim == 0 else v

    def derivatives(self, x):
        return self._eval(x)

    def curvature_at_barrier(self) -> float:
        """``g''(b-)``."""
        _, _, s2 = _shape(self.params).eval(np.array([self.b]))
        return float(self._scale * s2[0])

    def smooth_fit_gaps(self) -> dict:
        """One-sided value and slope mismatches at ``x_alpha``, ``x_beta`` and ``b``.

        Each entry maps a label to ``(|g(p-) - g(p+)|, |g'(p-) - g'(p+)|)``, where
        both sides are evaluated with their own branch formula at ``p`` itself.
        """
        sh = _shape(self.params)
        k = self._scale
        gaps = {}
        for label, point, left, right in (("x_alpha", self.x_alpha, "alpha", "middle"),
                                          ("x_beta", self.x_beta, "middle", "beta")):
            if point < self.b:
                l0, l1, _ = sh.branch(left, point)
                r0, r1, _ = sh.branch(right, point)
                gaps[label] = (float(abs(k * (l0[0] - r0[0]))), float(abs(k * (l1[0] - r1[0]))))
        s0, s1, _ = sh.eval(np.array([self.b]))
        gaps["b"] = (float(abs(k * s0[0] - self.value_at_barrier)), float(abs(k * s1[0] - 1.0)))
        return gaps

    def hjb_residual(self, x):
        """``max_{a in [alpha, beta]} h(x, a)`` with ``h = 0.5 s^2 a^2 g'' + (mu a - delta) g' - c g``."""
        g0, g1, g2 = self._eval(x)
        a = hamiltonian_argmax(self.params, g1, g2)
        p = self.params
        return 0.5 * p.sigma2 * a * a * g2 + (p.mu * a - p.delta) * g1 - p.c * g0

    def dg_db(self, x):
        return dg_db(x, self.params, self.b)


def hamiltonian_argmax(params: ModelParams, g1, g2):
    """Maximiser over ``[alpha, beta]`` of ``0.5 s^2 a^2 g2 + mu a g1`` (vectorised)."""
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    al, be = params.alpha, params.beta

    def h(a):
        return 0.5 * params.sigma2 * a * a * g2 + params.mu * a * g1

    with np.errstate(divide="ignore", invalid="ignore"):
        interior = np.clip(-params.mu * g1 / (params.sigma2 * g2), al, be)
    endpoint = np.where(h(be) >= h(al), be, al)
    return np.where(g2 < 0, interior, endpoint)


def coefficients(params: ModelParams, b: float):
    """``(k1, k2, k3, k4, A, B, xi, eta)`` for barrier ``b``."""
    sol = solve_value_function(params, b)
    return sol.k1, sol.k2, sol.k3, sol.k4, sol.A, sol.B, sol.xi, sol.eta


def solve_value_function(params: ModelParams, b: float | None = None) -> ValueFunctionSolution:
    """Build ``g(., b)``; ``b=None`` gives ``f = g(., b0)``.

    Any ``b > 0`` is accepted.  For ``b < b0`` the function is still the
    expected discounted dividends of the feedback control reflected at ``b``
    but ``g''(b-) < 0`` and it is not optimal beyond ``b``.
    """
    sh = _shape(params)
    b0 = solve_b0(params)
    if b is None:
        b = b0
    b = float(b)
    if not b > 0 or not math.isfinite(b):
        raise DomainError(f"barrier must be positive and finite, got {b}")
    _, s1, _ = sh.eval(np.array([b]))
    slope = float(s1[0])
    if not slope > 0 or not math.isfinite(slope):
        raise NumericalError(f"degenerate normalisation S'(b)={slope} at b={b}")
    k2 = 1.0 / slope
    rp, rm = sh.rb
    A = sh.Ap * math.exp(rp * (b0 - sh.x_beta))
    B = sh.Bp * math.exp(rm * (b0 - sh.x_beta))
    return ValueFunctionSolution(
        params=params, b=b, b0=b0, x_alpha=sh.x_alpha, x_beta=sh.x_beta, u=sh.u,
        k1=sh.s1 * k2, k2=k2, k3=A * k2, k4=B * k2, A=A, B=B, xi=sh.xi, eta=sh.eta,
    )


def g(x, sol: ValueFunctionSolution):
    return sol.value(x)


def f(x, params: ModelParams):
    return solve_value_function(params).value(x)


def dg_db(x, params: ModelParams, b: float):
    """Analytic ``dg/db``: ``-S(min(x, b)) * S''(b) / S'(b)^2``.

    Non-positive for ``b >= b0`` since ``S''(b) >= 0`` there.
    """
    sh = _shape(params)
    x = np.asarray(x, dtype=float)
    _, s1b, s2b = sh.eval(np.array([float(b)]))
    s0, _, _ = sh.eval(np.minimum(x, b))
    out = -s0 * s2b[0] / s1b[0] ** 2
    return float(out) if out.ndim == 0 else out


def thresholds(params: ModelParams) -> tuple[float, float]:
    sh = _shape(params)
    return sh.x_alpha, sh.x_beta
