"""Finite-sample EM for the overspecified mixture fitted to ``N(0, I)`` data.

With ``U = sum_i |Z_i|^2`` the updates are::

    theta' = (1/n) sum_i tilt(theta . Z_i / (U/(n d) - |theta|^2/d)) Z_i
    sigma'^2 = U/(n d) - |theta'|^2 / d

The second line keeps every iterate on the empirical analogue of the
population surface ``sigma^2 + |theta|^2/d = const``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVarianceError, InvalidArgumentError, PreconditionError
from .mixture import MixtureParams, check_weight, kl_vs_standard_normal, tilt
from .numerics import QuadratureRule, gauss_hermite_rule, rng_stream, stream_id
from .population import EmTrace, PopulationSetting, init_radius, m

DENOMINATOR_FLOOR = 1e-10
_CHUNK = 1 << 21


@dataclass(frozen=True, eq=False)
class SampleContext:
    """An immutable sample ``Z`` (``n x d``) together with the fixed weight ``p``."""

    data: np.ndarray
    p: float
    sum_sq: float = field(init=False)

    def __post_init__(self):
        z = np.array(self.data, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if z.ndim != 2:
            raise InvalidArgumentError(f"data must be an n x d matrix, got shape {z.shape}")
        if z.shape[0] < 2 or z.shape[1] < 1:
            raise InvalidArgumentError(f"need n >= 2 and d >= 1, got shape {z.shape}")
        if not np.all(np.isfinite(z)):
            raise InvalidArgumentError("data contain non-finite values")
        z.setflags(write=False)
        object.__setattr__(self, "data", z)
        object.__setattr__(self, "p", check_weight(self.p))
        object.__setattr__(self, "sum_sq", float(np.sum(z * z)))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def second_moment(self) -> float:
        """``U / (n d)``: the conserved value of ``sigma^2 + |theta|^2 / d``."""
        return self.sum_sq / (self.n * self.d)

    def __repr__(self):
        return f"SampleContext(n={self.n}, d={self.d}, p={self.p!r})"


def _denominator(ctx: SampleContext, theta_sq, iteration=None):
    den = ctx.second_moment - np.asarray(theta_sq, dtype=float) / ctx.d
    if np.any(den <= DENOMINATOR_FLOOR):
        where = "" if iteration is None else f" at iteration {iteration}"
        raise DegenerateVarianceError(
            f"variance denominator U/(nd) - |theta|^2/d = {float(np.min(den)):.3g} "
            f"is not above {DENOMINATOR_FLOOR:g}{where}",
            iteration=iteration,
        )
    return den


def em_step(ctx: SampleContext, params: MixtureParams, iteration=None) -> MixtureParams:
    """One EM update of ``(theta, sigma^2)`` with ``p`` held fixed.

    Raises
    ------
    InvalidArgumentError
        If ``params`` has a different dimension or weight than ``ctx``.
    DegenerateVarianceError
        If the variance denominator is not above 1e-10.
    """
    if params.d != ctx.d:
        raise InvalidArgumentError(f"theta has dimension {params.d}, data have {ctx.d}")
    if params.p != ctx.p:
        raise InvalidArgumentError(f"params.p = {params.p} differs from the sample's p = {ctx.p}")
    theta = params.theta
    den = _denominator(ctx, theta @ theta, iteration)
    w = tilt(ctx.p, (ctx.data @ theta) / den)
    new_theta = (w @ ctx.data) / ctx.n
    new_sigma = ctx.second_moment - float(new_theta @ new_theta) / ctx.d
    if new_sigma <= DENOMINATOR_FLOOR:
        raise DegenerateVarianceError(
            f"updated variance {new_sigma:.3g} is not positive", iteration=iteration
        )
    return MixtureParams(new_theta, new_sigma, ctx.p)


def sample_operator(ctx: SampleContext, theta_norm, direction=None):
    """Scalar sample map ``m_n(theta)`` along a unit ``direction`` (default ``e_1``).

    ``m_n(theta) = (1/n) sum_i tilt(theta z_i / (U/(nd) - theta^2/d)) z_i`` with
    ``z_i`` the projections of the rows onto ``direction``.  Vectorized over
    ``theta_norm``.  At ``theta = 0`` this is ``(2p - 1)`` times the mean
    projection, which is not zero for a finite sample.
    """
    if direction is None:
        direction = np.zeros(ctx.d)
        direction[0] = 1.0
    u = np.asarray(direction, dtype=float).reshape(-1)
    if u.size != ctx.d:
        raise InvalidArgumentError(f"direction has dimension {u.size}, data have {ctx.d}")
    norm = np.linalg.norm(u)
    if not abs(norm - 1.0) < 1e-9:
        raise InvalidArgumentError(f"direction must be a unit vector, got norm {norm}")
    t = np.asarray(theta_norm, dtype=float)
    if np.any(t < 0.0):
        raise InvalidArgumentError("theta_norm must be non-negative")
    scale = t / _denominator(ctx, t * t)
    z = ctx.data @ u
    flat = scale.reshape(-1)
    out = np.empty(flat.size)
    step = max(1, _CHUNK // ctx.n)
    for i in range(0, flat.size, step):
        block = flat[i : i + step, None] * z[None, :]
        out[i : i + step] = tilt(ctx.p, block) @ z / ctx.n
    out = out.reshape(scale.shape)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class IterationBudget:
    """Iteration count ``T = max(ceil(c2 log(n / log(1/delta))), t_min)``.

    ``tol`` is the early-exit threshold on ``|theta_{t+1} - theta_t|``.
    ``alpha`` only enters the sample-size condition
    ``n >= log(1/delta)^(1/(2 alpha))`` and is recorded for provenance.
    """

    c2: float = 3.0
    delta: float = 0.05
    t_min: int = 10
    tol: float = 1e-12
    alpha: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InvalidArgumentError(f"delta must lie in (0, 1), got {self.delta!r}")
        if not 0.0 < self.alpha < 0.5:
            raise InvalidArgumentError(f"alpha must lie in (0, 1/2), got {self.alpha!r}")
        if self.c2 <= 0.0 or int(self.t_min) < 1 or self.tol < 0.0:
            raise InvalidArgumentError("c2 must be positive, t_min >= 1 and tol >= 0")

    def iterations(self, n: int) -> int:
        ratio = n / math.log(1.0 / self.delta)
        raw = math.ceil(self.c2 * math.log(ratio)) if ratio > 1.0 else 0
        return max(raw, int(self.t_min))

    def sample_size_ok(self, n: int) -> bool:
        return n >= math.log(1.0 / self.delta) ** (1.0 / (2.0 * self.alpha))


def fit(
    ctx: SampleContext,
    theta0,
    budget: IterationBudget = IterationBudget(),
    rule: QuadratureRule | None = None,
    radius_kind: str = "sample",
):
    """Run sample EM from ``theta0`` for the budgeted number of iterations.

    ``sigma_0^2`` is placed on the empirical surface,
    ``U/(nd) - |theta_0|^2/d``.  The trace logs ``|theta_t|``, ``sigma_t^2``
    and ``KL[N(0, I) || G(theta_t, sigma_t^2)]``.

    Returns
    -------
    (MixtureParams, EmTrace)

    Raises
    ------
    PreconditionError
        If ``|theta0|`` is not below the initialization radius of
        ``radius_kind`` (see :func:`overspec_mda.population.init_radius`).
    DegenerateVarianceError
        If the variance denominator collapses; ``.iteration`` says when.
    """
    rule = gauss_hermite_rule() if rule is None else rule
    theta0 = np.asarray(theta0, dtype=float).reshape(-1)
    if theta0.size != ctx.d:
        raise InvalidArgumentError(f"theta0 has dimension {theta0.size}, data have {ctx.d}")
    setting = PopulationSetting(ctx.d, ctx.p, rule)
    radius = init_radius(setting, radius_kind)
    norm0 = float(np.linalg.norm(theta0))
    if not norm0 < radius:
        raise PreconditionError(
            f"|theta0| = {norm0:.6g} is not below the {radius_kind} initialization radius "
            f"{radius:.6g} (d={ctx.d}, p={ctx.p})",
            radius=radius,
        )
    sigma0 = float(_denominator(ctx, norm0 * norm0, iteration=0))
    params = MixtureParams(theta0, sigma0, ctx.p)
    T = budget.iterations(ctx.n)
    trace = EmTrace(
        context={
            "n": ctx.n,
            "d": ctx.d,
            "p": ctx.p,
            "T": T,
            "delta": budget.delta,
            "alpha": budget.alpha,
            "sample_size_ok": budget.sample_size_ok(ctx.n),
        }
    )
    trace.append(0, params.theta_norm, params.sigma_sq, kl_vs_standard_normal(params, rule))
    for t in range(1, T + 1):
        new = em_step(ctx, params, iteration=t)
        moved = float(np.linalg.norm(new.theta - params.theta))
        params = new
        trace.append(t, params.theta_norm, params.sigma_sq, kl_vs_standard_normal(params, rule))
        if moved < budget.tol:
            break
    return params, trace


@dataclass(frozen=True)
class PerturbationStats:
    """Per-seed ``sup |m_n - m|`` over ``[0, r]`` and their summary.

    ``sups`` is the raw gap; ``centered_sups`` subtracts the ``theta = 0``
    offset ``m_n(0)``, i.e. ``sup |m_n(theta) - m_n(0) - m(theta)|``.
    """

    n: int
    r: float
    sups: np.ndarray
    centered_sups: np.ndarray

    @property
    def median(self) -> float:
        return float(np.median(self.sups))

    @property
    def centered_median(self) -> float:
        return float(np.median(self.centered_sups))

    def quantiles(self, qs=(0.1, 0.25, 0.5, 0.75, 0.9)) -> dict:
        return {float(q): float(np.quantile(self.sups, q)) for q in qs}


def perturbation_sup(
    setting: PopulationSetting,
    n: int,
    r: float,
    grid_size: int = 41,
    seeds: int = 50,
    base_seed: int = 0,
) -> PerturbationStats:
    """Sup over ``theta`` in ``[0, r]`` of ``|m_n(theta) - m(theta)|`` for fresh samples.

    Seed ``k`` draws ``n`` points of ``N(0, I_d)`` from stream
    ``stream_id(n_index, k)`` of ``base_seed`` where ``n_index`` is derived
    from ``n`` so different sample sizes never share draws.
    """
    n, seeds, grid_size = int(n), int(seeds), int(grid_size)
    if n < 2 or seeds < 1 or grid_size < 1:
        raise InvalidArgumentError("need n >= 2, seeds >= 1 and grid_size >= 1")
    r = float(r)
    radius = init_radius(setting)
    if not 0.0 <= r <= radius:
        raise PreconditionError(
            f"r = {r:.6g} must lie in [0, {radius:.6g}] (d={setting.d}, p={setting.p})",
            radius=radius,
        )
    grid = np.linspace(0.0, r, grid_size) if r > 0.0 else np.zeros(1)
    pop = m(grid, setting)
    sups = np.empty(seeds)
    centered = np.empty(seeds)
    tag = int(math.log2(n) * 64) & 0x7FFF
    for k in range(seeds):
        rng = rng_stream(base_seed, stream_id(1, tag, n & 0x7FFF, k))
        ctx = SampleContext(rng.normal((n, setting.d)), setting.p)
        vals = np.atleast_1d(sample_operator(ctx, grid))
        sups[k] = np.max(np.abs(vals - pop))
        centered[k] = np.max(np.abs(vals - vals[0] - pop))
    return PerturbationStats(n=n, r=r, sups=sups, centered_sups=centered)
