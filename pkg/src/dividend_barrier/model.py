"""Model constants, case classification and the elementary closed-form pieces.

The reserve follows ``dR = (a*mu - delta) dt + a*sigma dW - dL`` with the
business activity rate ``a`` restricted to ``[alpha, beta]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class ModelParams:
    """Diffusion and market constants.

    ``sigma`` is the volatility (not the variance); use :meth:`from_sigma2`
    when the variance is the natural input.
    """

    mu: float
    sigma: float
    delta: float
    c: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("mu", "sigma", "delta", "c", "alpha", "beta"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name} must be a finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.mu <= 0:
            raise ConfigError(f"mu must be > 0, got {self.mu}")
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be > 0, got {self.sigma}")
        if self.c <= 0:
            raise ConfigError(f"c must be > 0, got {self.c}")
        if self.delta < 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}")
        if not 0 < self.alpha < self.beta:
            raise ConfigError(f"need 0 < alpha < beta, got alpha={self.alpha}, beta={self.beta}")
        if self.beta * self.mu <= self.delta:
            raise ConfigError("need beta*mu > delta (nondegenerate drift at a=beta)")

    @classmethod
    def from_sigma2(cls, mu, sigma2, delta, c, alpha, beta):
        return cls(mu=mu, sigma=math.sqrt(sigma2), delta=delta, c=c, alpha=alpha, beta=beta)

    @property
    def sigma2(self) -> float:
        return self.sigma * self.sigma

    def replace(self, **changes) -> "ModelParams":
        """Copy with some fields changed; accepts ``sigma2`` as an alias."""
        if "sigma2" in changes:
            changes["sigma"] = math.sqrt(changes.pop("sigma2"))
        fields = dict(mu=self.mu, sigma=self.sigma, delta=self.delta, c=self.c,
                      alpha=self.alpha, beta=self.beta)
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class RiskConstraint:
    T: float
    epsilon: float

    def __post_init__(self):
        if not (isinstance(self.T, (int, float)) and math.isfinite(self.T) and self.T > 0):
            raise ConfigError(f"T must be > 0, got {self.T!r}")
        if not (isinstance(self.epsilon, (int, float)) and 0 < self.epsilon < 1):
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "epsilon", float(self.epsilon))


class CaseLabel(enum.Enum):
    CaseI = "I"
    CaseII = "II"
    CaseIII = "III"


def classify_case(params: ModelParams) -> CaseLabel:
    ratio = 2.0 * params.delta / params.mu
    if ratio < params.alpha:
        return CaseLabel.CaseI
    if ratio < params.beta:
        return CaseLabel.CaseII
    return CaseLabel.CaseIII


def characteristic_roots(params: ModelParams, a: float) -> tuple[float, float]:
    """Roots of ``0.5*sigma^2*a^2*r^2 + (mu*a - delta)*r - c = 0``.

    Returned as ``(r_plus, r_minus)`` with ``r_plus > 0 > r_minus``.  The
    smaller-magnitude root is computed from Vieta's product to avoid
    cancellation.
    """
    if not a > 0:
        raise DomainError(f"control level must be > 0, got {a}")
    q = params.mu * a - params.delta
    s2a2 = params.sigma2 * a * a
    disc = math.sqrt(q * q + 2.0 * s2a2 * params.c)
    prod = -2.0 * params.c / s2a2
    if q >= 0:
        r_minus = (-q - disc) / s2a2
        r_plus = prod / r_minus
    else:
        r_plus = (-q + disc) / s2a2
        r_minus = prod / r_plus
    return r_plus, r_minus


def drift_parameter(params: ModelParams) -> float:
    """``u = 2*delta*mu / (mu^2 + 2*c*sigma^2)``, the pole of the middle-band ODE."""
    return 2.0 * params.delta * params.mu / (params.mu ** 2 + 2.0 * params.c * params.sigma2)


def printed_drift_parameter(params: ModelParams) -> float:
    """Variant with ``c**2`` in the denominator.

    Does not satisfy the middle-band ODE; kept only to reproduce published
    threshold values (see ``compute_x_beta(..., u=...)``).
    """
    return 2.0 * params.delta * params.mu / (params.mu ** 2 + 2.0 * params.c ** 2 * params.sigma2)


def transform_G(z: float, u: float) -> float:
    """``G(z) = z + u*log(z - u)`` on ``z > u``."""
    if not z > u:
        raise DomainError(f"G is defined for z > u; got z={z}, u={u}")
    if u == 0.0:
        return float(z)
    return z + u * math.log(z - u)


def transform_G_inverse(y: float, u: float) -> float:
    """Unique ``z > u`` with ``G(z) = y``.

    Works on ``w = z - u``, solving ``w + u*log(w) = y - u`` by Newton's method
    safeguarded with (geometric) bisection inside a doubling/halving bracket.
    """
    if u < 0:
        raise DomainError(f"u must be >= 0, got {u}")
    if u == 0.0:
        if not y > 0:
            raise DomainError(f"G^-1 with u=0 requires y > 0, got {y}")
        return float(y)
    rhs = y - u

    def F(w):
        return w + u * math.log(w) - rhs

    lo = hi = 1.0
    while F(hi) < 0:
        hi *= 2.0
    while F(lo) > 0:
        lo *= 0.5 if lo > 1e-3 else 1e-3
        if lo < 1e-300:
            raise DomainError(f"G^-1({y}) lies closer to u={u} than double precision resolves")
    w = min(max(rhs, lo), hi) if rhs > 0 else math.sqrt(lo) * math.sqrt(hi)
    for _ in range(500):
        fw = F(w)
        if fw == 0:
            break
        if fw > 0:
            hi = w
        else:
            lo = w
        w_new = w - fw / (1.0 + u / w)
        if not lo < w_new < hi:
            w_new = math.sqrt(lo) * math.sqrt(hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        if abs(w_new - w) <= 1e-16 * w + 1e-300:
            w = w_new
            break
        w = w_new
    else:  # pragma: no cover - bracket guarantees convergence
        raise DomainError(f"G^-1({y}) did not converge")
    return u + w
