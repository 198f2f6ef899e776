"""Population EM for the overspecified mixture, reduced to the norm of theta.

When the data are ``N(0, I_d)`` the population EM iterates stay on the
surface ``sigma^2 = 1 - |theta|^2 / d`` and only ``|theta|`` matters.  This
module works with that scalar:

* ``m(theta)``: the one-step map ``E[tilt(theta Z / (1 - theta^2/d)) Z]``,
* ``ell(theta)``: the negative expected log-likelihood on the surface,
* ``ell_prime``: its closed-form derivative,

plus the initialization radii, the contraction factor, a trace runner, and a
grid-based property report (contraction, convexity, the gradient-domination
inequality and a lower bound on ``m``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, NumericalDomainError, PreconditionError
from .mixture import check_weight, kl_radial, tilt
from .numerics import QuadratureRule, gauss_hermite_rule

FD_STEP = 1e-5
GRID_LOWER_EDGE = 1e-4
PROPERTY_SLACK = 1e-8
KL_FLOOR = 1e-15


@dataclass(frozen=True)
class PopulationSetting:
    d: int
    p: float
    rule: QuadratureRule = field(default_factory=gauss_hermite_rule, repr=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise InvalidArgumentError(f"dimension d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "p", check_weight(self.p))

    @property
    def q(self) -> float:
        """``1 - (2p - 1)^2 / 2``, the contraction constant at ``theta = 0``."""
        return 1.0 - (2.0 * self.p - 1.0) ** 2 / 2.0


@dataclass(frozen=True)
class TraceEntry:
    t: int
    theta_norm: float
    sigma_sq: float
    kl: float


@dataclass
class EmTrace:
    """Per-iteration record of an EM run.

    ``context`` describes where the trace came from (a ``PopulationSetting``
    or a dict for sample runs).
    """

    entries: list = field(default_factory=list)
    context: object = None

    def append(self, t, theta_norm, sigma_sq, kl):
        self.entries.append(TraceEntry(int(t), float(theta_norm), float(sigma_sq), float(kl)))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def theta_norm(self) -> np.ndarray:
        return np.array([e.theta_norm for e in self.entries])

    @property
    def sigma_sq(self) -> np.ndarray:
        return np.array([e.sigma_sq for e in self.entries])

    @property
    def kl(self) -> np.ndarray:
        return np.array([e.kl for e in self.entries])

    def kl_ratios(self) -> np.ndarray:
        kl = self.kl
        return kl[1:] / kl[:-1]


def _surface_variance(theta_norm, setting: PopulationSetting):
    t = np.asarray(theta_norm, dtype=float)
    if np.any(t < 0.0):
        raise InvalidArgumentError("theta_norm must be non-negative")
    s = 1.0 - t * t / setting.d
    if np.any(s <= 0.0):
        raise NumericalDomainError(
            f"theta_norm^2 must be below d = {setting.d} (sigma^2 = 1 - theta^2/d would be <= 0)"
        )
    return t, s


def m(theta_norm, setting: PopulationSetting):
    """Population EM map on norms, ``E[tilt(theta Z / (1 - theta^2/d)) Z]``.

    Accepts a scalar or an array of norms.
    """
    t, s = _surface_variance(theta_norm, setting)
    # fold onto z > 0: E[f(Z) Z] = E[(f(Z) - f(-Z)) Z; Z > 0], so m(0) = 0 exactly
    pos = setting.rule.nodes > 0.0
    z = setting.rule.nodes[pos]
    a = np.asarray(t / s)[..., None] * z
    vals = (tilt(setting.p, a) - tilt(setting.p, -a)) * z
    out = vals @ setting.rule.weights[pos]
    return float(out) if np.ndim(out) == 0 else out


def pop_em_step(theta_norm: float, setting: PopulationSetting):
    """One population EM step: ``(m(theta), 1 - m(theta)^2 / d)``."""
    nxt = m(theta_norm, setting)
    return nxt, 1.0 - nxt * nxt / setting.d


def ell_zero(d: int) -> float:
    return 0.5 * d * math.log(2.0 * math.pi) + 0.5 * d


def kl_on_surface(theta_norm, setting: PopulationSetting):
    """``ell(theta) - ell(0)``, i.e. the KL of the mixture on the EM surface."""
    t, s = _surface_variance(theta_norm, setting)
    return kl_radial(t, s, setting.p, setting.d, setting.rule)


def ell(theta_norm, setting: PopulationSetting):
    """Radial risk ``(d/2) log(2 pi s) + (d + theta^2)/(2 s) - E[log c_p(theta Z / s)]``.

    Here ``s = 1 - theta^2/d``.  Evaluated as ``ell(0) + kl_on_surface`` which
    is the same quantity without the large constant inside the cancellation.
    """
    return ell_zero(setting.d) + kl_on_surface(theta_norm, setting)


def ell_prime(theta_norm, setting: PopulationSetting):
    """``(1 + theta^2/d) / (1 - theta^2/d)^2 * (theta - m(theta))``."""
    t, s = _surface_variance(theta_norm, setting)
    out = (1.0 + t * t / setting.d) / (s * s) * (t - m(t, setting))
    return float(out) if np.ndim(out) == 0 else out


def contraction_radius(setting: PopulationSetting) -> float:
    """Largest ``theta0`` for which the contraction factor stays below one."""
    q = setting.q
    return math.sqrt(setting.d * (2.0 + q - math.sqrt(8.0 * q + q * q)) / 2.0)


def lower_bound_radius(d: int) -> float:
    """``1 / (sqrt 2 + 1 / (sqrt 2 d))``: validity range of :func:`m_lower_bound`."""
    return 1.0 / (math.sqrt(2.0) + 1.0 / (math.sqrt(2.0) * d))


def sample_radius_cap(d: int) -> float:
    """``1 / (1 + sqrt(1 + 1/d))``: the cap used for finite-sample guarantees."""
    return 1.0 / (1.0 + math.sqrt(1.0 + 1.0 / d))


def init_radius(setting: PopulationSetting, kind: str = "population") -> float:
    """Admissible initialization radius.

    ``kind="population"``
        ``min(contraction_radius, 1 / (sqrt 2 + 1/(sqrt 2 d)))``; used for
        population EM and for the classification guarantees.
    ``kind="sample"``
        ``min(contraction_radius, 1 / (1 + sqrt(1 + 1/d)))``; used by
        sample EM fitting.
    ``kind="conservative"``
        The smaller of the two.
    """
    first = contraction_radius(setting)
    if kind == "population":
        return min(first, lower_bound_radius(setting.d))
    if kind == "sample":
        return min(first, sample_radius_cap(setting.d))
    if kind == "conservative":
        return min(first, lower_bound_radius(setting.d), sample_radius_cap(setting.d))
    raise InvalidArgumentError(f"unknown radius kind {kind!r}")


def contraction_rho(theta0_norm: float, setting: PopulationSetting) -> float:
    """``(1 + theta0^2/d) / (1 - theta0^2/d)^2 * q``; below one inside the radius."""
    radius = contraction_radius(setting)
    theta0_norm = float(theta0_norm)
    if not 0.0 <= theta0_norm < radius:
        raise PreconditionError(
            f"theta0 = {theta0_norm:.6g} must lie in [0, {radius:.6g}) for the contraction "
            f"factor to be below one (d={setting.d}, p={setting.p})",
            radius=radius,
        )
    r = theta0_norm * theta0_norm / setting.d
    return (1.0 + r) / (1.0 - r) ** 2 * setting.q


def geometric_rate_bound(theta0_norm: float, setting: PopulationSetting) -> float:
    """Per-step KL ratio bound ``1 / (1 + c2)``.

    ``c1 = (1 - theta0^2/d)^2 / (1 + theta0^2/d)`` and ``c2 = c1 - q``.  When
    ``c2 <= 0`` the bound is not informative (it is >= 1 or undefined); then
    ``inf`` is returned for ``c2 <= -1``.
    """
    r = float(theta0_norm) ** 2 / setting.d
    c1 = (1.0 - r) ** 2 / (1.0 + r)
    c2 = c1 - setting.q
    if c2 <= -1.0:
        return math.inf
    return 1.0 / (1.0 + c2)


def run_population_em(
    theta0_norm: float, T: int, setting: PopulationSetting, enforce_radius: bool = True
) -> EmTrace:
    """Iterate ``theta <- m(theta)`` for ``T`` steps, logging norm, variance and KL.

    Stops early once the KL falls below 1e-15.

    Parameters
    ----------
    enforce_radius : bool
        When true (the default) a start outside :func:`init_radius` raises
        :class:`PreconditionError`.  Pass ``False`` to trace the map from a
        start where the convergence guarantee does not apply; only
        ``theta0^2 < d`` is then required.
    """
    radius = init_radius(setting)
    theta = float(theta0_norm)
    if theta < 0.0:
        raise InvalidArgumentError("theta0_norm must be non-negative")
    if enforce_radius and not theta < radius:
        raise PreconditionError(
            f"theta0 = {theta:.6g} is outside the initialization radius {radius:.6g} "
            f"(d={setting.d}, p={setting.p})",
            radius=radius,
        )
    if int(T) < 1:
        raise InvalidArgumentError(f"T must be >= 1, got {T!r}")
    trace = EmTrace(context=setting)
    sigma_sq = 1.0 - theta * theta / setting.d
    trace.append(0, theta, sigma_sq, kl_on_surface(theta, setting))
    for t in range(1, int(T) + 1):
        if trace.entries[-1].kl < KL_FLOOR:
            break
        theta, sigma_sq = pop_em_step(theta, setting)
        trace.append(t, theta, sigma_sq, kl_on_surface(theta, setting))
    return trace


def m_lower_bound(theta_norm, setting: PopulationSetting):
    """``4p(1-p) (1 - 4 theta^2 / (1 - theta^2/d)^2) theta`` on its validity range."""
    t = np.asarray(theta_norm, dtype=float)
    hi = lower_bound_radius(setting.d)
    if np.any(t < 0.0) or np.any(t > hi):
        raise PreconditionError(
            f"the lower bound on m holds only for theta in [0, {hi:.6g}] (d={setting.d})",
            radius=hi,
        )
    s = 1.0 - t * t / setting.d
    p = setting.p
    out = 4.0 * p * (1.0 - p) * (1.0 - 4.0 * t * t / (s * s)) * t
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    worst_margin: float
    n_points: int


@dataclass(frozen=True)
class PropertyReport:
    d: int
    p: float
    theta0: float
    rho: float
    radius: float
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def lemma3_property_report(
    setting: PopulationSetting, theta0_norm: float, grid_size: int = 200
) -> PropertyReport:
    """Check the structural properties of ``m`` and ``ell`` on ``[1e-4, theta0]``.

    Margins are ``rhs - lhs`` style slacks; a check passes when its worst
    margin is ``>= -1e-8`` (``> 0`` for the derivative bound ``m' < 1``).

    * ``m_prime_below_one``: centered difference of ``m`` with ``h = 1e-5``.
    * ``contraction``: ``rho * theta - m(theta)``.
    * ``convexity``: second differences of ``ell`` along the grid.
    * ``gradient_domination``: ``ell'^2 - (1 - rho)(ell - ell(0))``.
    * ``m_lower_bound``: ``m(theta) - bound(theta)`` where the bound is valid.
    """
    rho = contraction_rho(theta0_norm, setting)
    grid_size = int(grid_size)
    if grid_size < 3:
        raise InvalidArgumentError("grid_size must be at least 3")
    lo = min(GRID_LOWER_EDGE, float(theta0_norm))
    grid = np.linspace(lo, float(theta0_norm), grid_size)
    h = FD_STEP

    m_vals = m(grid, setting)
    below = grid - h
    # m is odd, so m(-x) = -m(x) covers a grid that reaches zero
    m_below = np.sign(below) * m(np.abs(below), setting)
    m_prime = (m(grid + h, setting) - m_below) / (2.0 * h)
    gap = kl_on_surface(grid, setting)
    second_diff = gap[2:] - 2.0 * gap[1:-1] + gap[:-2]
    dl = ell_prime(grid, setting)

    checks = []
    margin = 1.0 - m_prime
    checks.append(PropertyCheck("m_prime_below_one", bool(np.all(margin > 0.0)), float(margin.min()), grid.size))
    margin = rho * grid - m_vals
    checks.append(PropertyCheck("contraction", bool(margin.min() >= -PROPERTY_SLACK), float(margin.min()), grid.size))
    checks.append(
        PropertyCheck(
            "convexity", bool(second_diff.min() >= -PROPERTY_SLACK), float(second_diff.min()), second_diff.size
        )
    )
    margin = dl * dl - (1.0 - rho) * gap
    checks.append(
        PropertyCheck("gradient_domination", bool(margin.min() >= -PROPERTY_SLACK), float(margin.min()), grid.size)
    )
    valid = grid <= lower_bound_radius(setting.d)
    if valid.any():
        margin = m_vals[valid] - m_lower_bound(grid[valid], setting)
        checks.append(
            PropertyCheck("m_lower_bound", bool(margin.min() >= -PROPERTY_SLACK), float(margin.min()), int(valid.sum()))
        )
    else:
        checks.append(PropertyCheck("m_lower_bound", True, math.inf, 0))

    return PropertyReport(
        d=setting.d,
        p=setting.p,
        theta0=float(theta0_norm),
        rho=rho,
        radius=init_radius(setting),
        checks=tuple(checks),
    )
