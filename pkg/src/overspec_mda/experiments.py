"""Experiment runners behind the ``overspec-mda`` command.

Each ``run_*`` function takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentResult`: one :class:`ResultTable`, a summary dict (slopes
with standard errors, medians, diagnostics) and named boolean checks.
:func:`write_outputs` turns a result into a CSV, a JSON summary and,
optionally, an SVG plot.

Random streams are keyed by ``(base_seed, stream_id(experiment tag, ...))``,
so every replication is independent of execution order and of ``jobs``.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from ._version import __version__
from .errors import DegenerateVarianceError, InvalidArgumentError, PreconditionError
from .mda import bayes_risk, estimate_error, estimate_excess_risk, fit_mda, generate_labeled, tv_gap_estimate
from .numerics import MAX_QUAD_ORDER, gauss_hermite_rule, rng_stream, stream_id
from .population import (
    PopulationSetting,
    contraction_radius,
    geometric_rate_bound,
    init_radius,
    lemma3_property_report,
    run_population_em,
)
from .sample_em import IterationBudget, SampleContext, fit, perturbation_sup

EXPERIMENTS = ("pop-trace", "kl-vs-n", "mda-error", "perturbation", "properties")

KL_SLOPE_BAND = (-1.25, -0.80)
PERTURBATION_SLOPE_BAND = (-0.65, -0.35)
RATIO_SLACK = 1e-10
KL_RESOLUTION = 1e-14
LINEARITY_BAND = (1.0, 3.0)
NOISE_SE = 3.0
_Z95 = 1.959963984540054

_TAGS = {"kl-vs-n": 10, "mda-train": 20, "mda-test": 21, "mda-tv": 22}

_DEFAULTS = {
    "pop-trace": dict(d=(2,), p=(0.6, 0.8, 0.9), theta0=(0.2, 0.05), iterations=40),
    "kl-vs-n": dict(d=(2,), p=(0.8,), theta0=(0.2, 0.05), n_list=(100, 316, 1000, 3162, 10000)),
    "mda-error": dict(d=(2,), p=(0.8,), theta0=(0.2, 0.05), n_list=(1000, 10000, 100000)),
    "perturbation": dict(d=(2,), p=(0.8,), n_list=(100, 1000, 10000), seeds=50, grid_size=41),
    "properties": dict(d=(1, 2, 10), p=(0.6, 0.8, 0.9), theta0=(), grid_size=200),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment needs; tuples allow sweeps over ``d`` and ``p``.

    ``theta0`` is either a single norm (placed along ``e_1``) or a full
    vector.  For ``properties`` an empty ``theta0`` means
    ``theta0_fraction * init_radius`` for each ``(d, p)``.
    """

    experiment: str
    d: tuple = (2,)
    p: tuple = (0.8,)
    theta0: tuple = (0.2, 0.05)
    n_list: tuple = (100, 1000, 10000)
    seeds: int = 10
    replications: int = 10
    delta: float = 0.05
    alpha: float = 0.25
    quadrature_order: int = 64
    output_dir: str = "results"
    iterations: int = 40
    mu_norm: float = 1.0
    n_test: int = 200_000
    n_mc: int = 200_000
    radius: float = 0.2
    grid_size: int = 41
    theta0_fraction: float = 0.9
    base_seed: int = 0
    strict_radius: bool = False
    plot: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidArgumentError(
                f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}"
            )
        for name in ("d", "p", "theta0", "n_list"):
            object.__setattr__(self, name, tuple(_as_tuple(getattr(self, name))))
        try:
            object.__setattr__(self, "d", tuple(_as_count(v) for v in self.d))
            object.__setattr__(self, "n_list", tuple(_as_count(v) for v in self.n_list))
            object.__setattr__(self, "p", tuple(float(v) for v in self.p))
            object.__setattr__(self, "theta0", tuple(float(v) for v in self.theta0))
        except ValueError as exc:
            raise InvalidArgumentError(f"malformed list value: {exc}") from None
        if not self.d or any(v < 1 for v in self.d):
            raise InvalidArgumentError("d must list positive dimensions")
        if not self.p or any(not 0.5 < v < 1.0 for v in self.p):
            raise InvalidArgumentError("every p must lie strictly inside (1/2, 1)")
        if any(v < 2 for v in self.n_list):
            raise InvalidArgumentError("every sample size must be at least 2")
        for name in ("seeds", "replications", "iterations", "grid_size", "jobs", "n_test", "n_mc"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise InvalidArgumentError("delta must lie in (0, 1)")
        if not 0.0 < self.alpha < 0.5:
            raise InvalidArgumentError("alpha must lie in (0, 1/2)")
        if not 1 <= int(self.quadrature_order) <= MAX_QUAD_ORDER:
            raise InvalidArgumentError(f"quadrature_order must lie in [1, {MAX_QUAD_ORDER}]")
        if self.radius < 0.0 or self.mu_norm < 0.0 or not 0.0 < self.theta0_fraction:
            raise InvalidArgumentError("radius and mu_norm must be >= 0, theta0_fraction > 0")
        if any(not math.isfinite(v) for v in self.theta0):
            raise InvalidArgumentError("theta0 must be finite")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out

    def sha256(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def budget(self) -> IterationBudget:
        return IterationBudget(delta=self.delta, alpha=self.alpha)

    def rule(self):
        return gauss_hermite_rule(int(self.quadrature_order))

    def theta0_vector(self, d: int) -> np.ndarray:
        if len(self.theta0) == 1:
            out = np.zeros(d)
            out[0] = abs(self.theta0[0])
            return out
        if len(self.theta0) == d:
            return np.array(self.theta0)
        raise InvalidArgumentError(
            f"theta0 has {len(self.theta0)} entries; give one norm or a vector of length d={d}"
        )


def _as_count(v) -> int:
    """Integer from ``3``, ``"3"`` or ``"1e4"``; rejects non-integral values."""
    f = float(v)
    if not f.is_integer():
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _as_tuple(value):
    if isinstance(value, str):
        return [v for v in (s.strip() for s in value.split(",")) if v]
    if np.ndim(value) == 0:
        return [value]
    return list(value)


_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_ALIASES = {"reps": "replications", "quad_order": "quadrature_order", "out": "output_dir"}


def _coerce(name: str, raw):
    default = _CONFIG_FIELDS[name].default
    if isinstance(default, tuple):
        return tuple(_as_tuple(raw))
    if isinstance(raw, str):
        raw = raw.strip()
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise InvalidArgumentError(f"{name} expects a boolean, got {raw!r}")
        try:
            if isinstance(default, int):
                return _as_count(raw)
            if isinstance(default, float):
                return float(raw)
        except ValueError:
            raise InvalidArgumentError(f"{name} expects a number, got {raw!r}") from None
    return raw


def read_config_file(path) -> dict:
    """Parse a ``key = value`` file (``#`` comments, no section header needed)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read config file {path}: {exc}") from None
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string("[config]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise InvalidArgumentError(f"malformed config file {path}: {exc}") from None
    out = {}
    for key, value in parser["config"].items():
        name = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if name not in _CONFIG_FIELDS:
            raise InvalidArgumentError(f"unknown config key {key!r} in {path}")
        out[name] = value
    return out


def build_config(experiment: str | None = None, file_values: dict | None = None, **flags) -> ExperimentConfig:
    """Merge defaults < config file < flags (``None`` flags are ignored)."""
    file_values = dict(file_values or {})
    experiment = experiment or file_values.pop("experiment", None)
    file_values.pop("experiment", None)
    if experiment is None:
        raise InvalidArgumentError("no experiment given")
    if experiment not in EXPERIMENTS:
        raise InvalidArgumentError(f"unknown experiment {experiment!r}")
    merged = dict(_DEFAULTS[experiment])
    for source in (file_values, {k: v for k, v in flags.items() if v is not None}):
        for key, value in source.items():
            name = _ALIASES.get(key, key)
            if name not in _CONFIG_FIELDS:
                raise InvalidArgumentError(f"unknown config key {key!r}")
            merged[name] = _coerce(name, value)
    return ExperimentConfig(experiment=experiment, **merged)


@dataclass
class ResultTable:
    """Rows of numbers under a fixed schema plus a JSON-serializable metadata dict."""

    schema: tuple
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.schema = tuple(self.schema)
        for row in self.rows:
            self._check(row)

    def _check(self, row):
        if len(row) != len(self.schema):
            raise InvalidArgumentError(f"row has {len(row)} values, schema has {len(self.schema)}")

    def append(self, row):
        row = tuple(row)
        self._check(row)
        self.rows.append(row)

    def column(self, name) -> list:
        i = self.schema.index(name)
        return [row[i] for row in self.rows]

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.schema)
            for row in self.rows:
                writer.writerow([_format_cell(v) for v in row])
        meta = path.with_suffix(".meta.json")
        meta.write_text(json.dumps(self.metadata, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "ResultTable":
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            schema = next(reader)
            rows = [tuple(_parse_cell(v) for v in row) for row in reader]
        meta = path.with_suffix(".meta.json")
        metadata = json.loads(meta.read_text(encoding="utf-8")) if meta.exists() else {}
        return cls(schema, rows, metadata)


def _format_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _parse_cell(s: str):
    if s in ("true", "false"):
        return s == "true"
    for kind in (int, float):
        try:
            return kind(s)
        except ValueError:
            pass
    return s


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    se: float
    intercept: float
    n_points: int

    def within(self, band) -> bool:
        return band[0] <= self.slope <= band[1]

    def to_dict(self) -> dict:
        return {"slope": self.slope, "se": self.se, "intercept": self.intercept, "n_points": self.n_points}


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` on ``log x`` with its standard error.

    Returns ``(SlopeFit or None, diagnostic)``; ``None`` when fewer than two
    distinct positive ``x`` values with positive ``y`` remain.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    dropped = int((~keep).sum())
    x, y = x[keep], y[keep]
    if np.unique(x).size < 2:
        return None, "slope undefined: fewer than two distinct sample sizes with positive values"
    res = stats.linregress(np.log(x), np.log(y))
    se = float(res.stderr) if x.size > 2 else math.nan
    note = "" if dropped == 0 else f"{dropped} non-positive points excluded"
    if x.size < 4:
        note = (note + "; " if note else "") + f"only {x.size} sizes, slope is fragile"
    return SlopeFit(float(res.slope), se, float(res.intercept), int(x.size)), note


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    table: ResultTable
    summary: dict
    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _metadata(cfg: ExperimentConfig, seeds) -> dict:
    return {
        "version": __version__,
        "config": cfg.to_dict(),
        "config_sha256": cfg.sha256(),
        "seeds": seeds,
    }


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# population traces


def _p_ordering_holds(traces: dict) -> bool:
    """KL strictly lower for larger p at every t >= 1 (finished traces sit at their floor)."""
    ps = sorted(traces)
    length = max(len(tr) for tr in traces.values())
    padded = {}
    for p in ps:
        kl = traces[p].kl
        padded[p] = (np.concatenate([kl, np.full(length - kl.size, kl[-1])]), kl.size)
    for lo, hi in zip(ps[:-1], ps[1:]):
        kl_lo, len_lo = padded[lo]
        kl_hi, len_hi = padded[hi]
        for t in range(1, length):
            if t >= len_lo and t >= len_hi:
                break
            if not kl_hi[t] < kl_lo[t]:
                return False
    return True


def _rate_ordering_holds(traces: dict, steps: int = 5) -> bool:
    """Geometric mean of the first per-step KL ratios decreases in p."""
    rates = []
    for p in sorted(traces):
        r = traces[p].kl_ratios()[:steps]
        rates.append(float(np.exp(np.mean(np.log(r)))))
    return all(b < a for a, b in zip(rates[:-1], rates[1:]))


def run_pop_trace(cfg: ExperimentConfig) -> ExperimentResult:
    """KL of population EM iterates versus iteration, one block per ``(d, p)``.

    Starts outside the convergence radius are traced and flagged in the
    ``in_radius`` column unless ``strict_radius`` is set, in which case they
    raise :class:`PreconditionError`.
    """
    rule = cfg.rule()
    schema = ("d", "p", "t", "theta_norm", "sigma_sq", "kl", "kl_ratio", "ratio_bound", "in_radius")
    table = ResultTable(schema, metadata=_metadata(cfg, []))
    checks, summary = {}, {"outside_radius": [], "rates": {}}
    for d in cfg.d:
        theta0 = float(np.linalg.norm(cfg.theta0_vector(d)))
        traces = {}
        for p in cfg.p:
            setting = PopulationSetting(d, p, rule)
            radius = init_radius(setting)
            inside = theta0 < radius
            if not inside:
                if cfg.strict_radius:
                    raise PreconditionError(
                        f"theta0 = {theta0:.6g} is outside the initialization radius {radius:.6g} "
                        f"(d={d}, p={p})",
                        radius=radius,
                    )
                summary["outside_radius"].append({"d": d, "p": p, "radius": radius})
            tr = run_population_em(theta0, cfg.iterations, setting, enforce_radius=False)
            traces[p] = tr
            bound = geometric_rate_bound(theta0, setting)
            kl = tr.kl
            prev = None
            for e in tr:
                ratio = math.nan if prev is None else e.kl / prev
                table.append((d, p, e.t, e.theta_norm, e.sigma_sq, e.kl, ratio, bound, inside))
                prev = e.kl
            # steps taken from a KL still above the resolution floor
            active = kl[:-1] >= KL_RESOLUTION
            checks[f"monotone_d{d}_p{p:g}"] = bool(np.all(kl[1:][active] < kl[:-1][active]))
            ratios = tr.kl_ratios()[active]
            checks[f"ratio_bound_d{d}_p{p:g}"] = bool(np.all(ratios <= bound + RATIO_SLACK))
            r = tr.kl_ratios()[:5]
            summary["rates"][f"d{d}_p{p:g}"] = {
                "ratio_bound": bound,
                "first_ratios": [float(v) for v in r],
                "radius": radius,
            }
        if len(traces) > 1:
            checks[f"p_ordering_d{d}"] = _p_ordering_holds(traces)
            checks[f"rate_ordering_d{d}"] = _rate_ordering_holds(traces)
    return ExperimentResult(cfg, table, summary, checks)


# ---------------------------------------------------------------------------
# KL versus n


def run_kl_vs_n(cfg: ExperimentConfig) -> ExperimentResult:
    """Final KL of sample EM fits on ``N(0, I)`` data across sample sizes.

    The reported slope regresses ``log(mean KL)`` on ``log n``;
    ``slope_mean_log_kl`` regresses the per-size mean of ``log KL`` instead.
    """
    d, p = cfg.d[0], cfg.p[0]
    rule = cfg.rule()
    theta0 = cfg.theta0_vector(d)
    budget = cfg.budget()
    schema = ("n", "rep", "status", "iterations", "theta_norm", "sigma_sq", "kl")
    seeds = [[i, r] for i in range(len(cfg.n_list)) for r in range(cfg.replications)]
    table = ResultTable(schema, metadata=_metadata(cfg, seeds))

    def one(task):
        i, r = task
        n = cfg.n_list[i]
        rng = rng_stream(cfg.base_seed, stream_id(_TAGS["kl-vs-n"], i, r))
        ctx = SampleContext(rng.normal((n, d)), p)
        try:
            params, trace = fit(ctx, theta0, budget, rule=rule)
        except DegenerateVarianceError as exc:
            return (n, r, f"failed: degenerate at iteration {exc.iteration}", -1, math.nan, math.nan, math.nan)
        return (n, r, "ok", len(trace) - 1, params.theta_norm, params.sigma_sq, trace[-1].kl)

    for row in _map(one, seeds, cfg.jobs):
        table.append(row)

    ok = [row for row in table.rows if row[2] == "ok"]
    sizes = sorted(set(cfg.n_list))
    mean_kl = {n: float(np.mean([r[6] for r in ok if r[0] == n])) for n in sizes if any(r[0] == n for r in ok)}
    mean_log = {n: float(np.mean(np.log([r[6] for r in ok if r[0] == n and r[6] > 0]))) for n in mean_kl}
    fit_mean, note = loglog_slope(list(mean_kl), list(mean_kl.values()))
    fit_log = None
    if len(mean_log) >= 2:
        res = stats.linregress(np.log(list(mean_log)), list(mean_log.values()))
        fit_log = SlopeFit(float(res.slope), float(res.stderr) if len(mean_log) > 2 else math.nan,
                           float(res.intercept), len(mean_log))
    summary = {
        "failed_replications": len(table) - len(ok),
        "mean_kl": {str(n): v for n, v in mean_kl.items()},
        "slope": None if fit_mean is None else fit_mean.to_dict(),
        "slope_mean_log_kl": None if fit_log is None else fit_log.to_dict(),
        "diagnostic": note,
    }
    checks = {}
    if fit_mean is not None:
        checks["slope_in_band"] = fit_mean.within(KL_SLOPE_BAND)
    return ExperimentResult(cfg, table, summary, checks)


# ---------------------------------------------------------------------------
# MDA excess risk


def run_mda_error(cfg: ExperimentConfig) -> ExperimentResult:
    """Excess risk of the fitted MDA classifier over Bayes across training sizes.

    ``excess_risk`` is the conditional estimator of
    :func:`~overspec_mda.mda.estimate_excess_risk`; ``excess_risk_naive`` is
    the error rate minus ``Phi(-|mu|)`` on the same test points.  Test and
    TV draws depend on the seed only, so every ``n`` is scored on the same
    points.
    """
    d, p = cfg.d[0], cfg.p[0]
    if len(set(cfg.n_list)) < 3:
        raise InvalidArgumentError("mda-error needs at least three distinct sample sizes")
    if cfg.n_test < 100_000:
        raise InvalidArgumentError("mda-error needs n_test >= 100000")
    rule = cfg.rule()
    theta0 = cfg.theta0_vector(d)
    budget = cfg.budget()
    mu = np.zeros(d)
    mu[0] = cfg.mu_norm
    bayes = bayes_risk(cfg.mu_norm)
    schema = (
        "n", "seed", "status", "error", "ci", "excess_risk", "excess_se", "excess_risk_naive",
        "tv_plus", "tv_plus_se", "tv_minus", "tv_minus_se", "sandwich_ok", "theta_norm", "sigma_sq",
    )
    tasks = [[i, s] for i in range(len(cfg.n_list)) for s in range(cfg.seeds)]
    table = ResultTable(schema, metadata=_metadata(cfg, tasks))

    def one(task):
        i, s = task
        n = cfg.n_list[i]
        train = rng_stream(cfg.base_seed, stream_id(_TAGS["mda-train"], i, s))
        ds = generate_labeled(mu, n, train)
        try:
            model, _ = fit_mda(ds, theta0, budget, p=p, rule=rule)
        except DegenerateVarianceError as exc:
            nan = math.nan
            return (n, s, f"failed: degenerate at iteration {exc.iteration}") + (nan,) * 9 + (False, nan, nan)
        test_id = stream_id(_TAGS["mda-test"], s)
        err, ci = estimate_error(model, mu, cfg.n_test, rng_stream(cfg.base_seed, test_id))
        exc_v, exc_se = estimate_excess_risk(model, mu, cfg.n_test, rng_stream(cfg.base_seed, test_id))
        tp, tp_se = tv_gap_estimate(model, mu, 1, cfg.n_mc, rng_stream(cfg.base_seed, stream_id(_TAGS["mda-tv"], s, 0)))
        tm, tm_se = tv_gap_estimate(model, mu, -1, cfg.n_mc, rng_stream(cfg.base_seed, stream_id(_TAGS["mda-tv"], s, 1)))
        ok = exc_v <= tp + tm + NOISE_SE * math.sqrt(exc_se**2 + tp_se**2 + tm_se**2)
        return (n, s, "ok", err, ci, exc_v, exc_se, err - bayes, tp, tp_se, tm, tm_se, ok,
                model.mixture.theta_norm, model.mixture.sigma_sq)

    for row in _map(one, tasks, cfg.jobs):
        table.append(row)

    ok_rows = [r for r in table.rows if r[2] == "ok"]
    sizes = sorted(set(cfg.n_list))
    medians = {n: float(np.median([r[5] for r in ok_rows if r[0] == n])) for n in sizes}
    naive_medians = {n: float(np.median([r[7] for r in ok_rows if r[0] == n])) for n in sizes}
    slope, note = loglog_slope(sizes, [medians[n] for n in sizes])
    med = [medians[n] for n in sizes]
    summary = {
        "bayes_risk": bayes,
        "failed_runs": len(table) - len(ok_rows),
        "median_excess_risk": {str(n): v for n, v in medians.items()},
        "median_excess_risk_naive": {str(n): v for n, v in naive_medians.items()},
        "slope": None if slope is None else slope.to_dict(),
        "diagnostic": note,
    }
    checks = {
        "median_nonincreasing": all(b <= a for a, b in zip(med[:-1], med[1:])),
        "sandwich": all(r[12] for r in ok_rows),
        # ci is a 1.96-SE half-width; allow 3 SE like the sandwich check
        "above_bayes_within_noise": all(r[7] >= -r[4] * NOISE_SE / _Z95 for r in ok_rows),
    }
    return ExperimentResult(cfg, table, summary, checks)


# ---------------------------------------------------------------------------
# perturbation


def run_perturbation(cfg: ExperimentConfig) -> ExperimentResult:
    """``sup |m_n - m|`` over ``[0, r]`` versus ``n``, plus the same at ``r/2``.

    ``sup_gap`` is the raw gap.  ``centered_gap`` removes the offset
    ``m_n(0) = (2p - 1) mean(z)``, which does not shrink with ``r``; the
    linearity-in-``r`` check uses it.
    """
    d, p = cfg.d[0], cfg.p[0]
    setting = PopulationSetting(d, p, cfg.rule())
    schema = ("n", "seed", "r", "sup_gap", "centered_gap")
    seeds = list(range(cfg.seeds))
    table = ResultTable(schema, metadata=_metadata(cfg, seeds))
    radii = (cfg.radius, cfg.radius / 2.0) if cfg.radius > 0.0 else (0.0,)
    medians, centered = {}, {}
    sizes = sorted(set(cfg.n_list))
    for n in sizes:
        for r in radii:
            st = perturbation_sup(setting, n, r, cfg.grid_size, cfg.seeds, cfg.base_seed)
            for k in range(cfg.seeds):
                table.append((n, k, r, float(st.sups[k]), float(st.centered_sups[k])))
            medians[(n, r)] = st.median
            centered[(n, r)] = st.centered_median
    r0 = radii[0]
    slope, note = loglog_slope(sizes, [medians[(n, r0)] for n in sizes])
    cslope, _ = loglog_slope(sizes, [centered[(n, r0)] for n in sizes])
    summary = {
        "median_sup": {f"{n}@{r:g}": v for (n, r), v in medians.items()},
        "median_centered": {f"{n}@{r:g}": v for (n, r), v in centered.items()},
        "slope": None if slope is None else slope.to_dict(),
        "slope_centered": None if cslope is None else cslope.to_dict(),
        "diagnostic": note,
    }
    checks = {}
    if slope is not None:
        checks["slope_in_band"] = slope.within(PERTURBATION_SLOPE_BAND)
    if len(radii) == 2:
        ratios = [centered[(n, radii[0])] / centered[(n, radii[1])] for n in sizes]
        summary["linearity_ratios"] = ratios
        checks["linear_in_r"] = all(LINEARITY_BAND[0] <= q <= LINEARITY_BAND[1] for q in ratios)
    return ExperimentResult(cfg, table, summary, checks)


# ---------------------------------------------------------------------------
# structural property suite


def run_properties(cfg: ExperimentConfig) -> ExperimentResult:
    """Property report for each ``(d, p)``; starts past the contraction radius are skipped."""
    rule = cfg.rule()
    schema = ("d", "p", "theta0", "rho", "radius", "property", "status", "worst_margin", "n_points")
    table = ResultTable(schema, metadata=_metadata(cfg, []))
    all_pass, skipped = True, 0
    for d in cfg.d:
        for p in cfg.p:
            setting = PopulationSetting(d, p, rule)
            radius = init_radius(setting)
            if cfg.theta0:
                theta0 = float(np.linalg.norm(cfg.theta0))
            else:
                theta0 = cfg.theta0_fraction * radius
            try:
                report = lemma3_property_report(setting, theta0, cfg.grid_size)
            except PreconditionError:
                skipped += 1
                table.append((d, p, theta0, math.nan, contraction_radius(setting), "all", "skipped: radius", math.nan, 0))
                continue
            for c in report.checks:
                status = "pass" if c.passed else "fail"
                all_pass &= c.passed
                table.append((d, p, theta0, report.rho, radius, c.name, status, c.worst_margin, c.n_points))
    summary = {"skipped": skipped, "rows": len(table)}
    return ExperimentResult(cfg, table, summary, {"all_properties": bool(all_pass)})


RUNNERS = {
    "pop-trace": run_pop_trace,
    "kl-vs-n": run_kl_vs_n,
    "mda-error": run_mda_error,
    "perturbation": run_perturbation,
    "properties": run_properties,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg)


# ---------------------------------------------------------------------------
# output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def summary_document(result: ExperimentResult) -> dict:
    cfg = result.config
    return _jsonable(
        {
            "version": __version__,
            "experiment": cfg.experiment,
            "config": cfg.to_dict(),
            "config_sha256": cfg.sha256(),
            "passed": result.passed,
            "checks": result.checks,
            "summary": result.summary,
        }
    )


def write_outputs(result: ExperimentResult, out_dir=None) -> dict:
    """Write ``<experiment>.csv`` (+ ``.meta.json``), ``<experiment>.summary.json`` and maybe an SVG."""
    cfg = result.config
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.experiment
    paths = {"csv": out / f"{stem}.csv", "summary": out / f"{stem}.summary.json"}
    result.table.to_csv(paths["csv"])
    doc = json.dumps(summary_document(result), sort_keys=True, indent=2)
    paths["summary"].write_text(doc + "\n", encoding="utf-8")
    if cfg.plot:
        svg = plot_result(result)
        if svg is not None:
            paths["svg"] = out / f"{stem}.svg"
            paths["svg"].write_text(svg, encoding="utf-8")
    return paths


def plot_result(result: ExperimentResult):
    """An SVG line plot for the experiment, or ``None`` when there is nothing to draw."""
    from .plotting import svg_line_plot

    t = result.table
    kind = result.config.experiment
    if kind == "pop-trace":
        series = {}
        for d, p, step, kl in zip(t.column("d"), t.column("p"), t.column("t"), t.column("kl")):
            if kl > 0:
                series.setdefault(f"d={d}, p={p:g}", ([], []))
                series[f"d={d}, p={p:g}"][0].append(step)
                series[f"d={d}, p={p:g}"][1].append(kl)
        return svg_line_plot(series, log_y=True, title="KL versus iteration", xlabel="t", ylabel="KL")
    if kind == "kl-vs-n":
        pts = sorted((int(k), v) for k, v in result.summary["mean_kl"].items())
        series = {"mean final KL": ([a for a, _ in pts], [b for _, b in pts])}
        return svg_line_plot(series, log_x=True, log_y=True, title="Final KL versus n", xlabel="n", ylabel="KL")
    if kind == "mda-error":
        pts = sorted((int(k), v) for k, v in result.summary["median_excess_risk"].items() if v > 0)
        series = {"median excess risk": ([a for a, _ in pts], [b for _, b in pts])}
        return svg_line_plot(series, log_x=True, log_y=True, title="Excess risk versus n", xlabel="n", ylabel="excess")
    if kind == "perturbation":
        r0 = result.config.radius
        pts = sorted(
            (int(k.split("@")[0]), v) for k, v in result.summary["median_sup"].items() if k.endswith(f"@{r0:g}")
        )
        series = {"median sup gap": ([a for a, _ in pts], [b for _, b in pts])}
        return svg_line_plot(series, log_x=True, log_y=True, title="sup |m_n - m| versus n", xlabel="n", ylabel="gap")
    return None
