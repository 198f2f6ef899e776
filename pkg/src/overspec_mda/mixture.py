"""The unbalanced two-component mixture ``(1-p) N(-theta, s I) + p N(theta, s I)``.

Link functions
--------------
``tilt(p, x) = (p e^x - (1-p) e^-x) / (p e^x + (1-p) e^-x)`` is the
responsibility-weighted sign that drives the EM location update, and
``c_p(x) = p e^x + (1-p) e^-x`` is the factor that makes the mixture density
``(2 pi s)^(-d/2) exp(-(|x|^2 + |theta|^2) / (2 s)) c_p(theta.x / s)``.
With ``b = log(p / (1-p)) / 2`` both have overflow-free forms::

    tilt(p, x) = tanh(x + b)
    log c_p(x) = log(4 p (1-p)) / 2 + log cosh(x + b)

Near ``x = 0`` the second form loses relative accuracy (its two terms cancel),
so :func:`log_c` switches to ``log1p(p expm1(x) + (1-p) expm1(-x))`` there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .numerics import QuadratureRule, RngStream

_LOG_2PI = math.log(2.0 * math.pi)
_SMALL_X = 1.0


def check_weight(p) -> float:
    p = float(p)
    if not (0.5 < p < 1.0):
        raise InvalidArgumentError(
            f"mixture weight p must lie strictly inside (1/2, 1), got {p!r}; "
            "map p < 1/2 to (-theta, 1 - p) first"
        )
    return p


def _half_log_odds(p):
    return 0.5 * math.log(p / (1.0 - p))


def tilt(p, x):
    """Overflow-safe ``t_p(x)``; returns values in ``(-1, 1)``."""
    p = check_weight(p)
    return np.tanh(np.asarray(x, dtype=float) + _half_log_odds(p))


def _log_cosh(y):
    a = np.abs(y)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def log_c(p, x):
    """``log(p e^x + (1-p) e^-x)`` without overflow and without cancellation near 0."""
    p = check_weight(p)
    x = np.asarray(x, dtype=float)
    far = 0.5 * math.log(4.0 * p * (1.0 - p)) + _log_cosh(x + _half_log_odds(p))
    xs = np.clip(x, -_SMALL_X, _SMALL_X)
    near = np.log1p(p * np.expm1(xs) + (1.0 - p) * np.expm1(-xs))
    out = np.where(np.abs(x) <= _SMALL_X, near, far)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Location ``theta`` (length d), shared variance ``sigma_sq``, fixed weight ``p``."""

    theta: np.ndarray
    sigma_sq: float
    p: float

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if theta.size < 1:
            raise InvalidArgumentError("theta must have at least one coordinate")
        if not np.all(np.isfinite(theta)):
            raise InvalidArgumentError("theta must be finite")
        theta.setflags(write=False)
        sigma_sq = float(self.sigma_sq)
        if not (sigma_sq > 0.0 and math.isfinite(sigma_sq)):
            raise InvalidArgumentError(f"sigma_sq must be positive and finite, got {sigma_sq!r}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma_sq", sigma_sq)
        object.__setattr__(self, "p", check_weight(self.p))

    @classmethod
    def canonical(cls, theta, sigma_sq, p):
        """Build params for any ``p`` in (0, 1) minus 1/2, flipping ``theta`` if ``p < 1/2``."""
        p = float(p)
        if 0.0 < p < 0.5:
            return cls(-np.asarray(theta, dtype=float), sigma_sq, 1.0 - p)
        return cls(theta, sigma_sq, p)

    @property
    def d(self) -> int:
        return self.theta.size

    @property
    def theta_norm(self) -> float:
        return float(np.linalg.norm(self.theta))

    def __repr__(self):
        return f"MixtureParams(theta={self.theta.tolist()}, sigma_sq={self.sigma_sq!r}, p={self.p!r})"


def log_density(x, params: MixtureParams):
    """Log-density of the mixture at ``x`` (shape ``(d,)`` or ``(n, d)``)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (params.d,) or x.ndim not in (1, 2):
        raise InvalidArgumentError(
            f"expected points of dimension {params.d}, got array of shape {x.shape}"
        )
    s = params.sigma_sq
    sq = np.sum(x * x, axis=-1) + params.theta_norm**2
    return (
        -0.5 * params.d * (_LOG_2PI + math.log(s))
        - sq / (2.0 * s)
        + log_c(params.p, (x @ params.theta) / s)
    )


def sample_mixture(params: MixtureParams, n: int, rng: RngStream) -> np.ndarray:
    """Draw ``n`` rows: ``+theta`` w.p. ``p`` else ``-theta``, plus ``N(0, sigma_sq I)`` noise."""
    n = int(n)
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    signs = np.where(rng.uniform(n) < params.p, 1.0, -1.0)
    noise = rng.normal((n, params.d))
    return signs[:, None] * params.theta[None, :] + math.sqrt(params.sigma_sq) * noise


def kl_radial(theta_norm, sigma_sq, p, d, rule: QuadratureRule):
    """``KL[N(0, I) || mixture]`` as a function of ``|theta|`` and ``sigma_sq``.

    Broadcasts over array-valued ``theta_norm``/``sigma_sq``.  Written as
    ``(d/2)(u - log1p(u)) + t^2/(2s) - E[log c_p(t Z / s)]`` with ``u = 1/s - 1``
    so the constant ``(d/2)(1 + log 2 pi)`` never has to be subtracted.
    """
    p = check_weight(p)
    t = np.asarray(theta_norm, dtype=float)
    s = np.asarray(sigma_sq, dtype=float)
    if np.any(s <= 0.0):
        raise InvalidArgumentError("sigma_sq must be positive")
    u = 1.0 / s - 1.0
    scale_term = 0.5 * d * (u - np.log1p(u))
    a = np.asarray(t / s)[..., None] * rule.nodes
    expected_log_c = log_c(p, a) @ rule.weights
    out = scale_term + t * t / (2.0 * s) - expected_log_c
    return float(out) if np.ndim(out) == 0 else out


def kl_vs_standard_normal(params: MixtureParams, rule: QuadratureRule) -> float:
    """Exact ``KL[N(0, I) || G(theta, sigma_sq)]`` via the radial 1-D reduction."""
    return kl_radial(params.theta_norm, params.sigma_sq, params.p, params.d, rule)


def neg_loglik_radial(theta_norm, sigma_sq, p, d, rule: QuadratureRule):
    """``-E[log f(Z)]`` for ``Z ~ N(0, I_d)``; equals ``KL + (d/2)(1 + log 2 pi)``."""
    return 0.5 * d * (1.0 + _LOG_2PI) + kl_radial(theta_norm, sigma_sq, p, d, rule)
