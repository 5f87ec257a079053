"""Optimal feedback business-activity rate ``a*(x)``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, drift_parameter
from .value_function import _shape, middle_a


@dataclass(frozen=True)
class FeedbackPolicy:
    params: ModelParams
    x_alpha: float
    x_beta: float

    @classmethod
    def from_params(cls, params: ModelParams) -> "FeedbackPolicy":
        sh = _shape(params)
        return cls(params=params, x_alpha=sh.x_alpha, x_beta=sh.x_beta)

    def a_star(self, x):
        """``alpha`` below ``x_alpha``, interior ``a(x)`` on the band, ``beta`` from ``x_beta``."""
        xs = np.asarray(x, dtype=float)
        out = np.where(xs < self.x_alpha, self.params.alpha, self.params.beta)
        band = (xs >= self.x_alpha) & (xs < self.x_beta)
        if np.any(band):
            out = out.astype(float)
            out[band] = middle_a(xs[band], self.params)
        return float(out) if out.ndim == 0 else out

    __call__ = a_star

    def slope(self, x):
        """``a*'(x)``: ``K (1 - u/a(x))`` inside the band, 0 outside (right derivative)."""
        xs = np.asarray(x, dtype=float)
        p = self.params
        K = (p.mu ** 2 + 2.0 * p.c * p.sigma2) / (p.mu * p.sigma2)
        u = drift_parameter(p)
        out = np.zeros_like(xs)
        band = (xs >= self.x_alpha) & (xs < self.x_beta)
        if np.any(band):
            out[band] = K * (1.0 - u / np.asarray(middle_a(xs[band], p)))
        return float(out) if out.ndim == 0 else out

    def lipschitz_bound(self) -> float:
        """``sup a*'``, attained at ``x_beta`` because ``K (1 - u/a)`` grows with ``a``."""
        p = self.params
        K = (p.mu ** 2 + 2.0 * p.c * p.sigma2) / (p.mu * p.sigma2)
        return K * (1.0 - drift_parameter(p) / p.beta)

    def tabulate(self, n: int = 1 << 16) -> "PolicyTable":
        """Uniform table of ``a*`` on ``[x_alpha, x_beta]`` for fast lookups."""
        grid = np.linspace(self.x_alpha, self.x_beta, n)
        values = np.asarray(middle_a(grid, self.params), dtype=float)
        values[0], values[-1] = self.params.alpha, self.params.beta
        # linear interpolation error <= max|a''| h^2 / 8; a'' = K u a' / a^2
        h = grid[1] - grid[0]
        p = self.params
        K = (p.mu ** 2 + 2.0 * p.c * p.sigma2) / (p.mu * p.sigma2)
        u = drift_parameter(p)
        err = K * u * self.lipschitz_bound() / p.alpha ** 2 * h * h / 8.0
        return PolicyTable(self.params.alpha, self.params.beta, self.x_alpha, self.x_beta,
                           values, float(err))


@dataclass(frozen=True)
class PolicyTable:
    alpha: float
    beta: float
    x_alpha: float
    x_beta: float
    values: np.ndarray = field(repr=False)
    interpolation_error: float = 0.0

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        out = np.interp(xs, np.linspace(self.x_alpha, self.x_beta, len(self.values)), self.values)
        out = np.where(xs < self.x_alpha, self.alpha, np.where(xs >= self.x_beta, self.beta, out))
        return float(out) if out.ndim == 0 else out


def a_star(x, params: ModelParams):
    return FeedbackPolicy.from_params(params).a_star(x)
