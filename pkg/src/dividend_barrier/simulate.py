"""Monte Carlo for the reflected controlled reserve, plus a band-exit oracle.

Paths are advanced by Euler-Maruyama, reflected at ``b`` by projection and
killed at the first grid time with ``R <= 0``.  Optionally both boundaries get
Brownian-bridge corrections, which remove the O(sqrt(dt)) monitoring bias.  Normals come from a Philox
stream keyed by the seed and indexed by path id, so a path's trajectory does
not depend on how the batch is sharded or how many threads run it.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numba as nb
import numpy as np
from scipy.special import log_ndtr

from .errors import ConfigError, DomainError, TruncationError
from .model import ModelParams
from .policy import FeedbackPolicy, PolicyTable
from .rng import ZIG_F, ZIG_K, ZIG_W, fill_normals, fill_uniforms, split_seed

RNG_BLOCK = 1024
LANES = 4
TAG_STEP, TAG_BRIDGE, TAG_BAND, TAG_MAX = 0, 1, 2, 3


class Estimate(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    n_paths: int = 100_000
    seed: int = 0
    antithetic: bool = False
    shard_size: int = 8192
    workers: int = 1
    # "grid": projection at b, ruin only when a grid value is <= 0; "bridge":
    # Brownian-bridge corrections between grid times at both b and 0
    monitoring: str = "grid"

    def __post_init__(self):
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be > 0, got {self.dt!r}")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ConfigError(f"n_paths must be a positive integer, got {self.n_paths!r}")
        if self.antithetic and self.n_paths % 2:
            raise ConfigError("antithetic sampling needs an even n_paths")
        if int(self.seed) != self.seed or not 0 <= self.seed < 1 << 64:
            raise ConfigError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        if self.shard_size < 2 or self.shard_size % 2:
            raise ConfigError("shard_size must be an even integer >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.monitoring not in ("grid", "bridge"):
            raise ConfigError(f"monitoring must be 'grid' or 'bridge', got {self.monitoring!r}")

    def steps(self, T: float) -> tuple[int, float]:
        """Number of steps and the effective step (``T/n``) for horizon ``T``."""
        if not T > 0:
            raise ConfigError(f"T must be > 0, got {T}")
        if self.dt > T:
            raise ConfigError(f"dt={self.dt} exceeds the horizon T={T}")
        n = max(1, int(round(T / self.dt)))
        return n, T / n


@dataclass(frozen=True)
class SimBatch:
    x: float
    b: float
    T: float
    config: SimConfig
    ruin_fraction: Estimate
    discounted_dividends: Estimate
    # nan for paths that survive to T
    ruin_times: np.ndarray = field(repr=False)
    dividends: np.ndarray = field(repr=False)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path", "ruin_time", "discounted_dividends"])
            for i, (tau, J) in enumerate(zip(self.ruin_times, self.dividends)):
                w.writerow([i, "" if math.isnan(tau) else repr(float(tau)), repr(float(J))])


@nb.njit(inline="always")
def _control(R, alpha, beta, x_alpha, x_beta, table, inv_h):
    if R < x_alpha:
        return alpha
    if R >= x_beta:
        return beta
    pos = (R - x_alpha) * inv_h
    i = int(pos)
    if i >= table.shape[0] - 1:
        return table[table.shape[0] - 1]
    w = pos - i
    return table[i] + w * (table[i + 1] - table[i])


@nb.njit(inline="always")
def _bridge_max(R, Rn, s2dt, u):
    """Running max of a Brownian bridge from ``R`` to ``Rn`` with variance ``s2dt``."""
    d = Rn - R
    return 0.5 * (R + Rn + math.sqrt(d * d - 2.0 * s2dt * math.log(1.0 - u)))


def _make_path_kernel(bridge: bool, record: bool):
    """Compile one path stepper with the two switches baked in as constants.

    Without ``bridge`` a step is reflected by projection and ruin is checked at
    grid times.  With ``bridge`` the coefficients are frozen over the step and
    the step is exact for that frozen motion: dividends are the excess of the
    bridge maximum over ``b`` (the Skorokhod map over the step) and ruin also
    happens with the bridge probability of touching 0.  Either correction is
    only drawn when its probability exceeds exp(-39).
    """

    @nb.njit(nogil=True)
    def one_path(x0, b, mu, sigma, delta, c, alpha, beta, x_alpha, x_beta, table, n_steps, dt,
                 stream, sign, k0, k1, zbuf, ubuf, mbuf, pre, post, L):
        inv_h = (table.shape[0] - 1) / (x_beta - x_alpha) if x_beta > x_alpha else 0.0
        sdt = math.sqrt(dt)
        vol2dt = sigma * sigma * dt
        disc_step = math.exp(-c * dt)
        disc = 1.0
        R = x0
        J = 0.0
        cum = 0.0
        if record:
            pre[0] = R
            post[0] = R
            L[0] = 0.0
        if R <= 0.0:
            return 0.0, 0.0, 0
        n_blocks = (n_steps + RNG_BLOCK - 1) // RNG_BLOCK
        for blk in range(n_blocks):
            fill_normals(zbuf, blk, stream, TAG_STEP, k0, k1, ZIG_K, ZIG_W, ZIG_F)
            have_u = False
            have_m = False
            base = blk * RNG_BLOCK
            for j in range(min(RNG_BLOCK, n_steps - base)):
                a = _control(R, alpha, beta, x_alpha, x_beta, table, inv_h)
                Rn = R + (a * mu - delta) * dt + a * sigma * sdt * sign * zbuf[j]
                disc *= disc_step
                if record:
                    pre[base + j + 1] = Rn
                dL = 0.0
                if bridge:
                    s2dt = a * a * vol2dt
                    if Rn >= b or (b - R) * (b - Rn) < 19.5 * s2dt:
                        if not have_m:
                            fill_uniforms(mbuf, blk, stream, TAG_MAX, k0, k1)
                            have_m = True
                        dL = max(0.0, _bridge_max(R, Rn, s2dt, mbuf[j]) - b)
                    Rn -= dL
                    dead = Rn <= 0.0
                    # exp(-39) < 1e-17: skip the libm call far from 0
                    if not dead and R * Rn < 19.5 * s2dt:
                        p = math.exp(-2.0 * R * Rn / s2dt)
                        if not have_u:
                            fill_uniforms(ubuf, blk, stream, TAG_BRIDGE, k0, k1)
                            have_u = True
                        dead = ubuf[j] < p
                else:
                    dead = Rn <= 0.0
                    if not dead and Rn > b:
                        dL = Rn - b
                        Rn = b
                if dead:
                    if record:
                        post[base + j + 1] = Rn
                        L[base + j + 1] = cum
                    return (base + j + 1) * dt, J, base + j + 1
                if dL > 0.0:
                    J += disc * dL
                    cum += dL
                R = Rn
                if record:
                    post[base + j + 1] = R
                    L[base + j + 1] = cum
        return np.nan, J, n_steps

    @nb.njit(nogil=True)
    def batch(x0, b, mu, sigma, delta, c, alpha, beta, x_alpha, x_beta, table,
              n_steps, dt, first, count, k0, k1, antithetic, out_tau, out_J):
        # LANES paths advance in lockstep; independent chains hide the latency
        # of the policy lookup.  Each lane still reads only its own stream.
        inv_h = (table.shape[0] - 1) / (x_beta - x_alpha) if x_beta > x_alpha else 0.0
        sdt = math.sqrt(dt)
        vol2dt = sigma * sigma * dt
        disc_step = math.exp(-c * dt)
        z = np.empty((LANES, RNG_BLOCK))
        u = np.empty((LANES, RNG_BLOCK))
        um = np.empty((LANES, RNG_BLOCK))
        R = np.empty(LANES)
        J = np.empty(LANES)
        live = np.zeros(LANES, dtype=np.bool_)
        have_u = np.zeros(LANES, dtype=np.bool_)
        have_m = np.zeros(LANES, dtype=np.bool_)
        stream = np.empty(LANES, dtype=np.int64)
        sign = np.empty(LANES)
        for g in range(0, count, LANES):
            n_live = 0
            for l in range(LANES):
                j = g + l
                live[l] = False
                if j < count:
                    pid = first + j
                    stream[l] = pid // 2 if antithetic else pid
                    sign[l] = -1.0 if (antithetic and pid % 2 == 1) else 1.0
                    R[l] = x0
                    J[l] = 0.0
                    out_J[j] = 0.0
                    out_tau[j] = np.nan
                    if x0 <= 0.0:
                        out_tau[j] = 0.0
                    else:
                        live[l] = True
                        n_live += 1
            disc = 1.0
            blk = 0
            while n_live > 0 and blk * RNG_BLOCK < n_steps:
                base = blk * RNG_BLOCK
                for l in range(LANES):
                    have_u[l] = False
                    have_m[l] = False
                    if live[l]:
                        fill_normals(z[l], blk, stream[l], TAG_STEP, k0, k1, ZIG_K, ZIG_W, ZIG_F)
                for j in range(min(RNG_BLOCK, n_steps - base)):
                    disc *= disc_step
                    for l in range(LANES):
                        if live[l]:
                            r = R[l]
                            a = _control(r, alpha, beta, x_alpha, x_beta, table, inv_h)
                            Rn = r + (a * mu - delta) * dt + a * sigma * sdt * sign[l] * z[l, j]
                            dL = 0.0
                            if bridge:
                                s2dt = a * a * vol2dt
                                if Rn >= b or (b - r) * (b - Rn) < 19.5 * s2dt:
                                    if not have_m[l]:
                                        fill_uniforms(um[l], blk, stream[l], TAG_MAX, k0, k1)
                                        have_m[l] = True
                                    dL = max(0.0, _bridge_max(r, Rn, s2dt, um[l, j]) - b)
                                Rn -= dL
                                dead = Rn <= 0.0
                                if not dead and r * Rn < 19.5 * s2dt:
                                    p = math.exp(-2.0 * r * Rn / s2dt)
                                    if not have_u[l]:
                                        fill_uniforms(u[l], blk, stream[l], TAG_BRIDGE, k0, k1)
                                        have_u[l] = True
                                    dead = u[l, j] < p
                            else:
                                dead = Rn <= 0.0
                                if not dead and Rn > b:
                                    dL = Rn - b
                                    Rn = b
                            if dead:
                                live[l] = False
                                n_live -= 1
                                out_tau[g + l] = (base + j + 1) * dt
                            else:
                                J[l] += disc * dL
                            R[l] = Rn
                    if n_live == 0:
                        break
                blk += 1
            for l in range(LANES):
                if g + l < count:
                    out_J[g + l] = J[l]

    return one_path, batch


_KERNELS = {}


def _kernels(bridge: bool, record: bool):
    key = (bool(bridge), bool(record))
    if key not in _KERNELS:
        _KERNELS[key] = _make_path_kernel(*key)
    return _KERNELS[key]


def _check_start(x, b):
    if not b > 0:
        raise ConfigError(f"barrier must be positive, got {b}")
    if not 0 <= x <= b:
        raise DomainError(f"initial reserve must lie in [0, b]; got x={x}, b={b}")


def _mean_se(values: np.ndarray, antithetic: bool) -> Estimate:
    # antithetic pairs are averaged first; fsum makes the merge order-free
    units = 0.5 * (values[0::2] + values[1::2]) if antithetic else values
    n = len(units)
    mean = math.fsum(units) / n
    if n < 2:
        return Estimate(mean, float("nan"))
    var = math.fsum((units - mean) ** 2) / (n - 1)
    return Estimate(mean, math.sqrt(var / n))


def _run_reflected(x, b, params, T, config, table: PolicyTable):
    n_steps, dt = config.steps(T)
    k0, k1 = split_seed(config.seed)
    tau = np.empty(config.n_paths)
    J = np.empty(config.n_paths)
    starts = range(0, config.n_paths, config.shard_size)
    _, batch = _kernels(config.monitoring == "bridge", False)

    def shard(first):
        count = min(config.shard_size, config.n_paths - first)
        batch(float(x), float(b), params.mu, params.sigma, params.delta, params.c,
              params.alpha, params.beta, table.x_alpha, table.x_beta, table.values,
              n_steps, dt, first, count, k0, k1, config.antithetic,
              tau[first:first + count], J[first:first + count])

    if config.workers == 1:
        for s in starts:
            shard(s)
    else:
        with ThreadPoolExecutor(config.workers) as pool:
            list(pool.map(shard, starts))
    return tau, J


def simulate_reflected(x: float, b: float, params: ModelParams, T: float,
                       config: SimConfig = SimConfig(), policy_table: PolicyTable | None = None
                       ) -> SimBatch:
    """Ruin fraction by ``T`` and discounted dividends paid before ``min(tau, T)``."""
    _check_start(x, b)
    table = policy_table or FeedbackPolicy.from_params(params).tabulate()
    tau, J = _run_reflected(x, b, params, T, config, table)
    ruined = (~np.isnan(tau)).astype(float)
    return SimBatch(x=float(x), b=float(b), T=float(T), config=config,
                    ruin_fraction=_mean_se(ruined, config.antithetic),
                    discounted_dividends=_mean_se(J, config.antithetic),
                    ruin_times=tau, dividends=J)


def long_horizon(c: float, tail: float = 1e-4) -> float:
    """Smallest round horizon with ``exp(-c T) < tail``."""
    return math.floor(math.log(1.0 / tail) / c) + 1.0


def estimate_J(x: float, b: float, params: ModelParams, T_long: float | None = None,
               config: SimConfig = SimConfig()) -> Estimate:
    """Monte Carlo ``E[int_0^tau e^{-ct} dL]`` truncated at ``T_long``."""
    if T_long is None:
        T_long = long_horizon(params.c)
    if math.exp(-params.c * T_long) >= 1e-4:
        raise ConfigError(f"T_long={T_long} too short: exp(-c T_long) must be < 1e-4")
    return simulate_reflected(x, b, params, T_long, config).discounted_dividends


def simulate_path(x: float, b: float, params: ModelParams, T: float, dt: float = 1e-3,
                  seed: int = 0, path: int = 0, bridge: bool = False):
    """One trajectory: ``(t, pre-reflection R, reflected R, cumulative L)`` up to ruin or ``T``."""
    _check_start(x, b)
    n_steps, dt = SimConfig(dt=dt, n_paths=1, seed=seed).steps(T)
    table = FeedbackPolicy.from_params(params).tabulate()
    k0, k1 = split_seed(seed)
    pre = np.empty(n_steps + 1)
    post = np.empty(n_steps + 1)
    L = np.empty(n_steps + 1)
    one_path, _ = _kernels(bridge, True)
    _, _, n = one_path(float(x), float(b), params.mu, params.sigma, params.delta, params.c,
                       params.alpha, params.beta, table.x_alpha, table.x_beta, table.values,
                       n_steps, dt, path, 1.0, k0, k1, np.empty(RNG_BLOCK), np.empty(RNG_BLOCK),
                       np.empty(RNG_BLOCK),
                       pre, post, L)
    t = dt * np.arange(n + 1)
    return t, pre[:n + 1], post[:n + 1], L[:n + 1]


# --- band-exit oracle -------------------------------------------------------

def _log_phi_diff(lo, hi):
    """``log(Phi(hi) - Phi(lo))`` for ``lo < hi`` without cancellation in either tail."""
    if lo > 0:
        a, b = log_ndtr(-lo), log_ndtr(-hi)
    else:
        a, b = log_ndtr(hi), log_ndtr(lo)
    return a + math.log1p(-math.exp(b - a))


def band_drift(params: ModelParams, printed: bool = False) -> float:
    """Drift of ``R / (sigma beta)`` under constant control ``beta``.

    ``printed=True`` returns ``(beta mu - delta)/sigma``, which does not match
    the ``sigma beta`` scaling of the band limits.
    """
    m = params.beta * params.mu - params.delta
    return m / params.sigma if printed else m / (params.sigma * params.beta)


def bm_band_stay_probability(b1: float, b2: float, params: ModelParams, T: float,
                             start: float | None = None, K: int = 200,
                             printed_drift: bool = False, tol: float = 1e-12) -> float:
    """P(constant-control-``beta`` reserve stays inside ``(b1, b2)`` up to ``T``).

    Image series for Brownian motion with drift in a strip, each image term
    integrated in closed form through normal CDF differences.  ``K`` caps
    the number of images on each side.
    """
    if not b1 < b2:
        raise DomainError(f"need b1 < b2, got {b1}, {b2}")
    if not T > 0:
        raise DomainError(f"T must be > 0, got {T}")
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    if start is None:
        start = 0.5 * (b1 + b2)
    if not b1 < start < b2:
        return 0.0
    scale = params.sigma * params.beta
    lo, hi, x = b1 / scale, b2 / scale, start / scale
    m = band_drift(params, printed_drift)
    w = hi - lo
    rt = math.sqrt(T)

    def term(k):
        s = 2.0 * k * w
        direct = -m * s + _log_phi_diff((lo - x + s - m * T) / rt, (hi - x + s - m * T) / rt)
        image = m * (2.0 * lo - 2.0 * x - s) + _log_phi_diff(
            (x - lo + s - m * T) / rt, (hi + x - 2.0 * lo + s - m * T) / rt)
        return math.exp(direct) - math.exp(image)

    total = term(0)
    for k in range(1, K + 1):
        tp, tm = term(k), term(-k)
        total += tp + tm
        if abs(tp) < tol and abs(tm) < tol:
            return min(1.0, max(0.0, total))
    raise TruncationError(f"band series not converged after K={K} images")


@nb.njit(nogil=True, cache=True)
def _band_kernel(y0, lo, hi, m, n_steps, dt, first, count, k0, k1, out):
    sdt = math.sqrt(dt)
    zbuf = np.empty(RNG_BLOCK)
    for j in range(count):
        pid = first + j
        y = y0
        p = 1.0
        for k in range(n_steps):
            i = k % RNG_BLOCK
            if i == 0:
                fill_normals(zbuf, k // RNG_BLOCK, pid, TAG_BAND, k0, k1, ZIG_K, ZIG_W, ZIG_F)
            yn = y + m * dt + sdt * zbuf[i]
            if yn <= lo or yn >= hi:
                p = 0.0
                break
            # Brownian-bridge probability of touching either side between grid points
            p *= (1.0 - math.exp(-2.0 * (y - lo) * (yn - lo) / dt)) * \
                 (1.0 - math.exp(-2.0 * (hi - y) * (hi - yn) / dt))
            y = yn
        out[j] = p


def band_stay_mc(b1: float, b2: float, params: ModelParams, T: float,
                 config: SimConfig = SimConfig(), start: float | None = None) -> Estimate:
    """Monte Carlo oracle for :func:`bm_band_stay_probability`.

    Constant control ``beta`` has constant coefficients, so grid increments are
    exact and the bridge factor removes the discrete-monitoring bias.
    """
    if not b1 < b2:
        raise DomainError(f"need b1 < b2, got {b1}, {b2}")
    if start is None:
        start = 0.5 * (b1 + b2)
    n_steps, dt = config.steps(T)
    scale = params.sigma * params.beta
    m = (params.beta * params.mu - params.delta) / scale
    k0, k1 = split_seed(config.seed)
    out = np.empty(config.n_paths)
    for first in range(0, config.n_paths, config.shard_size):
        count = min(config.shard_size, config.n_paths - first)
        _band_kernel(start / scale, b1 / scale, b2 / scale, m, n_steps, dt, first, count,
                     k0, k1, out[first:first + count])
    return _mean_se(out, False)
