"""Two-class mixture discriminant analysis built on the overspecified fit.

Data: ``Y`` uniform on ``{-1, +1}`` and ``X | Y = y ~ N(y mu, I)``.  The
folded points ``X_i Y_i`` all follow ``N(mu, I)``, so one mixture
``G(mu_hat, theta, sigma^2) = (1-p) N(mu_hat - theta, sigma^2 I) + p N(mu_hat + theta, sigma^2 I)``
is fitted to them (EM runs on the residuals ``X_i Y_i - mu_hat``).  The
classifier predicts ``+1`` iff ``f(x; mu_hat) > f(x; -mu_hat)`` with the same
``(theta, sigma^2)`` in both densities; ties go to ``-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .mixture import MixtureParams, log_density
from .numerics import QuadratureRule, RngStream
from .sample_em import IterationBudget, SampleContext, fit

_Z95 = 1.959963984540054


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        y = np.array(self.labels, dtype=float).reshape(-1)
        if x.ndim != 2 or x.shape[0] != y.size:
            raise InvalidArgumentError(
                f"features must be n x d with n = len(labels); got {x.shape} and {y.size} labels"
            )
        if y.size < 2:
            raise InvalidArgumentError("a dataset needs at least two points")
        if not np.all(np.abs(y) == 1.0):
            raise InvalidArgumentError("labels must be exactly -1 or +1")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True, eq=False)
class MdaModel:
    """Fitted class location ``mu_hat`` and the shared overspecified mixture."""

    mu_hat: np.ndarray
    mixture: MixtureParams

    def __post_init__(self):
        mu = np.array(self.mu_hat, dtype=float).reshape(-1)
        if mu.size != self.mixture.d:
            raise InvalidArgumentError(
                f"mu_hat has dimension {mu.size} but the mixture has {self.mixture.d}"
            )
        mu.setflags(write=False)
        object.__setattr__(self, "mu_hat", mu)

    @property
    def d(self) -> int:
        return self.mu_hat.size

    @classmethod
    def lda(cls, mu_hat, p: float = 0.8) -> "MdaModel":
        """The degenerate model ``theta = 0``, ``sigma^2 = 1`` (plain LDA)."""
        mu_hat = np.asarray(mu_hat, dtype=float).reshape(-1)
        return cls(mu_hat, MixtureParams(np.zeros(mu_hat.size), 1.0, p))


def generate_labeled(mu, n: int, rng: RngStream) -> LabeledDataset:
    """Draw ``n`` pairs with Rademacher labels and ``X | Y ~ N(Y mu, I)``."""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    n = int(n)
    if n < 2:
        raise InvalidArgumentError(f"n must be >= 2, got {n}")
    y = rng.rademacher(n)
    x = y[:, None] * mu[None, :] + rng.normal((n, mu.size))
    return LabeledDataset(x, y)


def estimate_mu(ds: LabeledDataset) -> np.ndarray:
    """``(1/n) sum_i X_i Y_i``."""
    return ds.labels @ ds.features / ds.n


def fit_mda(
    ds: LabeledDataset,
    theta0,
    budget: IterationBudget = IterationBudget(),
    p: float = 0.8,
    rule: QuadratureRule | None = None,
):
    """Estimate ``mu_hat`` once, then run sample EM on ``X_i Y_i - mu_hat``.

    ``theta0`` must lie below the smaller of the two initialization radii.

    Returns
    -------
    (MdaModel, EmTrace)
    """
    mu_hat = estimate_mu(ds)
    residuals = ds.labels[:, None] * ds.features - mu_hat[None, :]
    ctx = SampleContext(residuals, p)
    params, trace = fit(ctx, theta0, budget, rule=rule, radius_kind="conservative")
    return MdaModel(mu_hat, params), trace


def _as_points(model: MdaModel, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (model.d,) or x.ndim not in (1, 2):
        raise InvalidArgumentError(f"expected points of dimension {model.d}, got shape {x.shape}")
    return x


def class_log_densities(model: MdaModel, x):
    """``(log f(x; mu_hat), log f(x; -mu_hat))`` with the fitted ``(theta, sigma^2)``."""
    x = _as_points(model, x)
    return (
        log_density(x - model.mu_hat, model.mixture),
        log_density(x + model.mu_hat, model.mixture),
    )


def decision_function(model: MdaModel, x):
    """Log-likelihood ratio ``log f(x; mu_hat) - log f(x; -mu_hat)``."""
    plus, minus = class_log_densities(model, x)
    return plus - minus


def classify(model: MdaModel, x):
    """``+1`` where the plus-class density is strictly larger, else ``-1``."""
    score = decision_function(model, x)
    out = np.where(score > 0.0, 1, -1)
    return int(out) if out.ndim == 0 else out


def bayes_risk(mu_norm: float) -> float:
    """``Phi(-|mu|)``, the error of the Bayes classifier ``sign(mu . x)``."""
    mu_norm = float(mu_norm)
    if mu_norm < 0.0:
        raise InvalidArgumentError(f"mu_norm must be non-negative, got {mu_norm}")
    return 0.5 * math.erfc(mu_norm / math.sqrt(2.0))


def _check_test_size(n, floor):
    n = int(n)
    if n < floor:
        raise InvalidArgumentError(f"Monte Carlo size must be at least {floor}, got {n}")
    return n


def estimate_error(model: MdaModel, mu, n_test: int, rng: RngStream):
    """Misclassification rate on ``n_test`` fresh pairs and its 95% CI half-width."""
    n_test = _check_test_size(n_test, 1000)
    ds = generate_labeled(mu, n_test, rng)
    rate = float(np.mean(classify(model, ds.features) != ds.labels))
    half = _Z95 * math.sqrt(rate * (1.0 - rate) / n_test)
    return rate, half


def estimate_excess_risk(model: MdaModel, mu, n_test: int, rng: RngStream):
    """Excess risk over Bayes and its standard error, from ``n_test`` fresh points.

    Uses ``excess = E[|2 eta(X) - 1| 1{h(X) != h*(X)}]`` where
    ``eta(x) = P(Y = 1 | x) = 1 / (1 + exp(-2 mu . x))`` and ``h*`` is the
    Bayes rule.  This conditions out the label noise, so the estimate is
    nonnegative and its error is far smaller than that of the difference of
    two error rates.  Given the same ``rng`` state it reads the same draws
    as :func:`estimate_error`.
    """
    n_test = _check_test_size(n_test, 1000)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    ds = generate_labeled(mu, n_test, rng)
    s = ds.features @ mu
    margin = np.tanh(np.abs(s))  # |2 eta - 1|
    bayes = np.where(s > 0.0, 1, -1)
    disagree = classify(model, ds.features) != bayes
    vals = margin * disagree
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_test))


def tv_gap_estimate(model: MdaModel, mu, sign: int, n_mc: int, rng: RngStream):
    """Total variation between ``N(sign mu, I)`` and the fitted class density.

    Monte Carlo estimate of ``(1/2) E[|1 - f(X) / phi(X - sign mu)|]`` with
    ``X ~ N(sign mu, I)``.  Returns ``(value, standard error)``.
    """
    if sign not in (1, -1):
        raise InvalidArgumentError(f"sign must be +1 or -1, got {sign!r}")
    n_mc = _check_test_size(n_mc, 10_000)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.size != model.d:
        raise InvalidArgumentError(f"mu has dimension {mu.size}, model has {model.d}")
    noise = rng.normal((n_mc, model.d))
    x = sign * mu[None, :] + noise
    plus, minus = class_log_densities(model, x)
    fitted = plus if sign == 1 else minus
    log_true = -0.5 * model.d * math.log(2.0 * math.pi) - 0.5 * np.sum(noise * noise, axis=1)
    vals = 0.5 * np.abs(-np.expm1(fitted - log_true))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_mc))
