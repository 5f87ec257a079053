"""Barrier choice under a ruin-probability constraint ``P[tau <= T] <= epsilon``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .errors import ConfigError, DomainError, UnattainableRiskError
from .model import ModelParams, RiskConstraint
from .survival import solve_survival
from .value_function import ValueFunctionSolution, solve_b0, solve_value_function

SEARCH_CAP_DOUBLINGS = 20


@dataclass(frozen=True)
class ConstrainedOptimum:
    params: ModelParams
    T: float
    epsilon: float
    b0: float
    b_star: float
    constrained: bool
    psi_b0: float
    psi_b_star: float
    epsilon0: float
    value_fn: ValueFunctionSolution
    # filled by optimal_value for a query reserve x
    x: float | None = None
    cost_of_safety: float | None = None
    value_ratio: float | None = None


def lower_bound_epsilon0(b0: float, params: ModelParams, T: float) -> float:
    """Closed-form lower bound on the ruin probability by ``T`` from ``b0``.

    ``4 (1 - Phi(b0 / (alpha sigma sqrt T)))^2 / exp(T/sigma^2 * m^2)`` with
    ``m = max(mu - delta/beta, |mu - delta/alpha|)``; evaluated in logs.
    """
    if not b0 > 0:
        raise DomainError(f"b0 must be > 0, got {b0}")
    if not T > 0:
        raise DomainError(f"T must be > 0, got {T}")
    p = params
    m = max(p.mu - p.delta / p.beta, abs(p.mu - p.delta / p.alpha))
    log_tail = float(log_ndtr(-b0 / (p.alpha * p.sigma * math.sqrt(T))))
    return math.exp(math.log(4.0) + 2.0 * log_tail - T / p.sigma2 * m * m)


def barrier_ruin(b: float, params: ModelParams, T: float, nx: int = 2000, nt: int = 4000) -> float:
    """``psi(T, b)``: ruin probability by ``T`` starting at the barrier."""
    return solve_survival(b, params, T, nx=nx, nt=nt, keep="final").ruin(b)


def solve_b_star(params: ModelParams, T: float, epsilon: float, nx: int = 2000, nt: int = 4000,
                 rtol: float = 1e-7) -> ConstrainedOptimum:
    """Smallest barrier ``b >= b0`` with ``psi(T, b) <= epsilon``.

    Upper end found by doubling from ``b0``; then bisection keeping
    ``psi(lo) > epsilon >= psi(hi)`` until ``hi - lo <= rtol * hi``, so the
    leftmost crossing is returned when ``psi`` is flat within the tolerance.
    """
    RiskConstraint(T, epsilon)
    b0 = solve_b0(params)
    eps0 = lower_bound_epsilon0(b0, params, T)
    psi = lambda b: barrier_ruin(b, params, T, nx, nt)  # noqa: E731
    psi0 = psi(b0)
    if psi0 <= epsilon:
        return ConstrainedOptimum(params, T, epsilon, b0, b0, False, psi0, psi0, eps0,
                                  solve_value_function(params, b0))
    lo, hi = b0, 2.0 * b0
    psi_hi = psi(hi)
    doublings = 1
    while psi_hi > epsilon:
        if doublings >= SEARCH_CAP_DOUBLINGS:
            raise UnattainableRiskError(
                f"risk level {epsilon} unattainable at search cap b = 2^{SEARCH_CAP_DOUBLINGS} b0"
                f" = {hi!r} (psi = {psi_hi!r})")
        lo, hi = hi, 2.0 * hi
        psi_hi = psi(hi)
        doublings += 1
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        pm = psi(mid)
        if pm <= epsilon:
            hi, psi_hi = mid, pm
        else:
            lo = mid
    return ConstrainedOptimum(params, T, epsilon, b0, hi, True, psi0, psi_hi, eps0,
                              solve_value_function(params, hi))


def risk_capital(b: float, params: ModelParams, T: float, epsilon: float, nx: int = 2000,
                 nt: int = 4000) -> float:
    """Smallest initial reserve ``x`` in ``[0, b]`` with ``psi(T, x) <= epsilon``.

    ``psi(T, .)`` is the piecewise-linear interpolant of the grid values, so
    the answer is found exactly by inverting the first segment that crosses.
    """
    if not 0 < epsilon <= 1:
        raise ConfigError(f"epsilon must lie in (0, 1], got {epsilon}")
    if epsilon >= 1.0:
        return 0.0
    grid = solve_survival(b, params, T, nx=nx, nt=nt, keep="final")
    psi = 1.0 - grid.final
    psi[0] = 1.0
    if psi[-1] > epsilon:
        raise UnattainableRiskError(
            f"risk level {epsilon} unattainable: even x = b = {b!r} has psi = {psi[-1]!r}")
    i = int(np.argmax(psi <= epsilon))
    x0, x1 = grid.x[i - 1], grid.x[i]
    p0, p1 = psi[i - 1], psi[i]
    return float(x0 + (p0 - epsilon) / (p0 - p1) * (x1 - x0))


def optimal_value(x: float, params: ModelParams, T: float, epsilon: float, nx: int = 2000,
                  nt: int = 4000):
    """``(optimum, V(x))``; ``V = f`` when the constraint is slack, else ``g(., b*)``."""
    if not x >= 0:
        raise DomainError(f"x must be >= 0, got {x}")
    opt = solve_b_star(params, T, epsilon, nx=nx, nt=nt)
    free = solve_value_function(params, opt.b0)
    g0 = float(free.value(x))
    V = float(opt.value_fn.value(x)) if opt.constrained else g0
    ratio = V / g0 if g0 > 0 else 1.0
    opt = ConstrainedOptimum(**{**opt.__dict__, "x": float(x),
                                "cost_of_safety": g0 - V, "value_ratio": ratio})
    return opt, V
