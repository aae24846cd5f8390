"""Prior distributions for profile parameters.

Bounded priors (uniform, beta, scaled beta) live on ``[lo, hi]`` and are
sampled through a logistic transform; the normal prior lives on the real line
and is sampled as is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import BadPrior

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _log_sigmoid(u):
    return -np.logaddexp(0.0, -u)


_sigmoid = expit


@dataclass(frozen=True)
class ScaledBeta:
    """Beta(alpha, beta) stretched onto ``[lo, hi]``."""

    alpha: float
    beta: float
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        _check_positive("alpha", self.alpha)
        _check_positive("beta", self.beta)
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise BadPrior(f"prior bounds must satisfy lo < hi, got [{self.lo}, {self.hi}]")

    bounded = True

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    @property
    def _log_norm(self) -> float:
        return (
            math.lgamma(self.alpha)
            + math.lgamma(self.beta)
            - math.lgamma(self.alpha + self.beta)
            + math.log(self.hi - self.lo)
        )

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.lo) / (self.hi - self.lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            # the (k - 1) * log(z) terms vanish for k == 1, also at the edges
            la = (self.alpha - 1.0) * np.log(z) if self.alpha != 1.0 else 0.0
            lb = (self.beta - 1.0) * np.log1p(-z) if self.beta != 1.0 else 0.0
            out = la + lb - self._log_norm
        out = np.where((z < 0) | (z > 1), -np.inf, out)
        return out[()] if out.ndim == 0 else out

    def log_density_unconstrained(self, u: float) -> tuple[float, float]:
        """Log prior plus log-Jacobian at unconstrained ``u``, and its derivative."""
        a, b = self.alpha, self.beta
        lp = (a * _log_sigmoid(u) + b * _log_sigmoid(-u)
              - math.lgamma(a) - math.lgamma(b) + math.lgamma(a + b))
        s = float(_sigmoid(u))
        return float(lp), a * (1.0 - s) - b * s

    def mean(self) -> float:
        return self.lo + (self.hi - self.lo) * self.alpha / (self.alpha + self.beta)

    def sample(self, rng: np.random.Generator, size=None):
        return self.lo + (self.hi - self.lo) * rng.beta(self.alpha, self.beta, size=size)

    def dsl(self, fmt) -> str:
        return f"scaledbeta({fmt(self.alpha)}, {fmt(self.beta)}, {fmt(self.lo)}, {fmt(self.hi)})"


@dataclass(frozen=True)
class Uniform(ScaledBeta):
    """Uniform on ``[lo, hi]``; identical to ``ScaledBeta(1, 1, lo, hi)``."""

    def __init__(self, lo: float, hi: float):
        object.__setattr__(self, "alpha", 1.0)
        object.__setattr__(self, "beta", 1.0)
        object.__setattr__(self, "lo", float(lo))
        object.__setattr__(self, "hi", float(hi))
        self.__post_init__()

    def __repr__(self):
        return f"Uniform(lo={self.lo!r}, hi={self.hi!r})"

    def dsl(self, fmt) -> str:
        return f"uniform({fmt(self.lo)}, {fmt(self.hi)})"


@dataclass(frozen=True)
class Beta(ScaledBeta):
    """Beta(alpha, beta) on the unit interval."""

    def __init__(self, alpha: float, beta: float):
        object.__setattr__(self, "alpha", float(alpha))
        object.__setattr__(self, "beta", float(beta))
        object.__setattr__(self, "lo", 0.0)
        object.__setattr__(self, "hi", 1.0)
        self.__post_init__()

    def __repr__(self):
        return f"Beta(alpha={self.alpha!r}, beta={self.beta!r})"

    def dsl(self, fmt) -> str:
        return f"beta({fmt(self.alpha)}, {fmt(self.beta)})"


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise BadPrior(f"normal mean must be finite, got {self.mu}")
        _check_positive("sigma", self.sigma)

    bounded = False

    @property
    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        out = -0.5 * z * z - math.log(self.sigma) - _LOG_SQRT_2PI
        return out[()] if out.ndim == 0 else out

    def log_density_unconstrained(self, u: float) -> tuple[float, float]:
        z = (u - self.mu) / self.sigma
        return (-0.5 * z * z - math.log(self.sigma) - _LOG_SQRT_2PI,
                -z / self.sigma)

    def mean(self) -> float:
        return self.mu

    def sample(self, rng: np.random.Generator, size=None):
        return rng.normal(self.mu, self.sigma, size=size)

    def dsl(self, fmt) -> str:
        return f"normal({fmt(self.mu)}, {fmt(self.sigma)})"


Prior = ScaledBeta | Normal


def _check_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise BadPrior(f"prior parameter {name} must be positive, got {value}")


# -- constraining transform -------------------------------------------------
def transform(prior: Prior, u: float) -> tuple[float, float]:
    """Map unconstrained ``u`` to the prior's support.

    Returns ``(x, log_jacobian)``.  Bounded priors use
    ``x = lo + (hi - lo) * logistic(u)``; the normal prior is the identity.
    """
    if not prior.bounded:
        return float(u), 0.0
    lo, hi = prior.support
    x = lo + (hi - lo) * float(_sigmoid(u))
    logj = math.log(hi - lo) + float(_log_sigmoid(u)) + float(_log_sigmoid(-u))
    return x, logj


def inverse_transform(prior: Prior, x: float) -> float:
    if not prior.bounded:
        return float(x)
    lo, hi = prior.support
    z = (x - lo) / (hi - lo)
    return math.log(z) - math.log1p(-z)


def constrain(priors, u: np.ndarray) -> np.ndarray:
    """Vectorised :func:`transform` (values only) over the last axis of ``u``."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    for k, prior in enumerate(priors):
        if prior.bounded:
            lo, hi = prior.support
            out[..., k] = lo + (hi - lo) * _sigmoid(u[..., k])
        else:
            out[..., k] = u[..., k]
    return out


def unconstrain(priors, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for k, prior in enumerate(priors):
        if prior.bounded:
            lo, hi = prior.support
            z = (x[..., k] - lo) / (hi - lo)
            out[..., k] = np.log(z) - np.log1p(-z)
        else:
            out[..., k] = x[..., k]
    return out
