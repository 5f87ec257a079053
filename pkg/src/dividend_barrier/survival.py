"""Survival probability ``phi^b(t, x)`` of the reflected, controlled reserve.

Solves::

    phi_t = 0.5 a*(x)^2 sigma^2 phi_xx + (a*(x) mu - delta) phi_x   on (0, b)
    phi(0, x) = 1,  phi(t, 0) = 0,  phi_x(t, b) = 0

with Crank-Nicolson in time after a few fully implicit start-up steps, and a
three-point non-uniform stencil in space.  Grid nodes sit exactly on
``x_alpha`` and ``x_beta`` whenever those lie inside ``(0, b)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import ConfigError, DomainError
from .model import ModelParams
from .policy import FeedbackPolicy

MIN_SEGMENT_INTERVALS = 8


@dataclass(frozen=True)
class SurvivalGrid:
    b: float
    T: float
    nx: int
    nt: int
    x: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    # shape (len(t), len(x)); only the last row is kept when solved with keep="final"
    values: np.ndarray = field(repr=False)

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def survival(self, x) -> float:
        """``phi(T, x)``, linear interpolation between nodes."""
        x = float(x)
        if x < 0 or x > self.b * (1 + 1e-12):
            raise DomainError(f"x must lie in [0, b={self.b}], got {x}")
        return float(np.interp(min(x, self.b), self.x, self.final))

    def ruin(self, x) -> float:
        return min(1.0, max(0.0, 1.0 - self.survival(x)))

    def to_csv(self, path, every_t: int = 1, every_x: int = 1):
        """Write ``(t, x, phi)`` triples (optionally thinned)."""
        times = self.t if len(self.t) == len(self.values) else self.t[-1:]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "phi"])
            for i in range(0, len(times), every_t):
                row = self.values[i]
                for j in range(0, len(self.x), every_x):
                    w.writerow([repr(float(times[i])), repr(float(self.x[j])), repr(float(row[j]))])


def build_grid(b: float, nx: int, breakpoints=()) -> np.ndarray:
    """Piecewise-uniform nodes on ``[0, b]`` that include every breakpoint in ``(0, b)``."""
    pts = sorted({0.0, float(b), *[float(p) for p in breakpoints if 0.0 < p < b]})
    lengths = np.diff(pts)
    counts = np.maximum(MIN_SEGMENT_INTERVALS, np.rint(nx * lengths / b).astype(int))
    # give any rounding surplus/deficit to the longest segment
    counts[np.argmax(lengths)] += nx - counts.sum()
    if counts.min() < 1:
        raise ConfigError(f"nx={nx} too small for {len(lengths)} segments")
    pieces = [np.linspace(pts[k], pts[k + 1], counts[k] + 1)[:-1] for k in range(len(lengths))]
    pieces.append(np.array([pts[-1]]))
    return np.concatenate(pieces)


def assemble_operator(x, diffusion, drift, upper="neumann"):
    """Tridiagonal generator on the unknowns ``x[1:]`` (or ``x[1:-1]`` for Dirichlet top).

    Returns ``(lower, diag, upper)`` coefficient arrays.  ``diffusion`` is the
    coefficient of ``phi_xx`` (i.e. ``0.5 a^2 sigma^2``).
    """
    x = np.asarray(x, dtype=float)
    n = len(x) - 1
    hm = np.empty(n + 1)
    hp = np.empty(n + 1)
    hm[1:] = np.diff(x)
    hp[:-1] = np.diff(x)
    hm[0] = hp[0]
    hp[n] = hm[n]  # ghost node mirrors x[n-1] across b
    D = np.asarray(diffusion, dtype=float)
    V = np.asarray(drift, dtype=float)
    s = hm + hp
    lo = D * 2.0 / (hm * s) - V * hp / (hm * s)
    di = -D * 2.0 / (hm * hp) + V * (hp - hm) / (hm * hp)
    up = D * 2.0 / (hp * s) + V * hm / (hp * s)
    if upper == "neumann":
        lo[n] += up[n]
        up[n] = 0.0
        idx = slice(1, n + 1)
    elif upper == "dirichlet":
        idx = slice(1, n)
    else:
        raise ValueError(f"unknown upper boundary {upper!r}")
    return lo[idx].copy(), di[idx].copy(), up[idx].copy()


def max_cell_peclet(x, diffusion, drift) -> float:
    h = np.maximum(np.r_[np.diff(x), np.diff(x)[-1]], np.r_[np.diff(x)[0], np.diff(x)])
    return float(np.max(np.abs(drift) * h / (2.0 * np.asarray(diffusion))))


@nb.njit(cache=True)
def _factor(lo, di, up, theta, dt):
    # Thomas factorisation of (I - theta*dt*L)
    n = di.shape[0]
    a = -theta * dt * lo
    b = 1.0 - theta * dt * di
    c = -theta * dt * up
    cp = np.empty(n)
    m = np.empty(n)
    m[0] = b[0]
    cp[0] = c[0] / m[0]
    for i in range(1, n):
        m[i] = b[i] - a[i] * cp[i - 1]
        cp[i] = c[i] / m[i]
    return a, m, cp


@nb.njit(cache=True)
def _step(phi, lo, di, up, theta, dt, a, m, cp, out):
    n = phi.shape[0]
    w = (1.0 - theta) * dt
    # right-hand side (I + (1-theta) dt L) phi; neighbours outside are zero
    rhs = np.empty(n)
    for i in range(n):
        r = phi[i] + w * di[i] * phi[i]
        if i > 0:
            r += w * lo[i] * phi[i - 1]
        if i < n - 1:
            r += w * up[i] * phi[i + 1]
        rhs[i] = r
    # forward/backward sweeps
    d = np.empty(n)
    d[0] = rhs[0] / m[0]
    for i in range(1, n):
        d[i] = (rhs[i] - a[i] * d[i - 1]) / m[i]
    out[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = d[i] - cp[i] * out[i + 1]


@nb.njit(cache=True)
def _march(phi0, lo, di, up, dt, nt, n_implicit, keep_all):
    n = phi0.shape[0]
    a1, m1, c1 = _factor(lo, di, up, 1.0, dt)
    a2, m2, c2 = _factor(lo, di, up, 0.5, dt)
    rows = nt + 1 if keep_all else 1
    hist = np.empty((rows, n))
    cur = phi0.copy()
    if keep_all:
        hist[0] = cur
    nxt = np.empty(n)
    for k in range(nt):
        if k < n_implicit:
            _step(cur, lo, di, up, 1.0, dt, a1, m1, c1, nxt)
        else:
            _step(cur, lo, di, up, 0.5, dt, a2, m2, c2, nxt)
        cur, nxt = nxt, cur
        if keep_all:
            hist[k + 1] = cur
    if not keep_all:
        hist[0] = cur
    return hist


def solve_parabolic(x, diffusion, drift, T, nt, upper="neumann", initial=None,
                    n_implicit=2, keep="all"):
    """March ``phi_t = D phi_xx + V phi_x`` from ``t=0`` to ``T``; zero Dirichlet at ``x[0]``.

    With ``upper="dirichlet"`` the top node is also held at zero.  Returns the
    node values (including boundary nodes) at every step, or only at ``T``.
    """
    x = np.asarray(x, dtype=float)
    lo, di, up = assemble_operator(x, diffusion, drift, upper)
    n_unknown = len(di)
    phi0 = np.ones(n_unknown) if initial is None else np.asarray(initial, float)[1:1 + n_unknown]
    dt = T / nt
    hist = _march(phi0, lo, di, up, dt, int(nt), int(n_implicit), keep == "all")
    full = np.zeros((hist.shape[0], len(x)))
    full[:, 1:1 + n_unknown] = hist
    if keep == "all":
        full[0, 1:] = 1.0 if initial is None else np.asarray(initial, float)[1:]
        full[0, 0] = 1.0 if initial is None else float(np.asarray(initial)[0])
    return full


def solve_survival(b: float, params: ModelParams, T: float, nx: int = 2000, nt: int = 4000,
                   keep: str = "all", n_implicit: int = 2) -> SurvivalGrid:
    """Survival probability on ``[0, T] x [0, b]`` under the optimal feedback control."""
    if not (b > 0 and math.isfinite(b)):
        raise ConfigError(f"barrier must be positive, got {b}")
    if not T > 0:
        raise ConfigError(f"T must be positive, got {T}")
    if int(nx) != nx or int(nt) != nt or nx < 100 or nt < 100:
        raise ConfigError(f"need integer nx >= 100 and nt >= 100, got nx={nx}, nt={nt}")
    if keep not in ("all", "final"):
        raise ConfigError(f"keep must be 'all' or 'final', got {keep!r}")
    policy = FeedbackPolicy.from_params(params)
    nx = int(nx)
    while True:
        x = build_grid(b, nx, (policy.x_alpha, policy.x_beta))
        a = np.asarray(policy.a_star(x), dtype=float)
        D = 0.5 * a * a * params.sigma2
        V = a * params.mu - params.delta
        if max_cell_peclet(x, D, V) <= 1.0:
            break
        nx *= 2
    values = solve_parabolic(x, D, V, T, int(nt), upper="neumann", keep=keep,
                             n_implicit=n_implicit)
    t = np.linspace(0.0, T, int(nt) + 1)
    if keep == "all":
        # phi(0, 0) is the corner of incompatible data; the boundary value applies for t > 0
        values[0, 0] = 1.0
    return SurvivalGrid(b=float(b), T=float(T), nx=len(x) - 1, nt=int(nt), x=x, t=t, values=values)


def ruin_probability(b: float, x: float, T: float, params: ModelParams, nx: int = 2000,
                     nt: int = 4000) -> float:
    """``psi^b(T, x) = 1 - phi^b(T, x)``."""
    if x < 0 or x > b:
        raise DomainError(f"x must lie in [0, b], got x={x}, b={b}")
    grid = solve_survival(b, params, T, nx=nx, nt=nt, keep="final")
    return grid.ruin(x)
