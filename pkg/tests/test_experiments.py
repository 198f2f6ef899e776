import json
import math

import numpy as np
import pytest

from overspec_mda.errors import InvalidArgumentError, PreconditionError
from overspec_mda.experiments import (
    ExperimentConfig,
    ResultTable,
    build_config,
    loglog_slope,
    read_config_file,
    run_experiment,
    run_kl_vs_n,
    run_mda_error,
    run_perturbation,
    run_pop_trace,
    run_properties,
    summary_document,
    write_outputs,
)
from overspec_mda.plotting import svg_line_plot


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig("nope")
    for bad in (dict(p=(0.5,)), dict(delta=1.0), dict(alpha=0.5), dict(seeds=0), dict(n_list=(1,)),
                dict(quadrature_order=0), dict(d=(0,))):
        with pytest.raises(InvalidArgumentError):
            ExperimentConfig("kl-vs-n", **bad)
    cfg = ExperimentConfig("kl-vs-n", n_list="100, 1e3", p="0.7")
    assert cfg.n_list == (100, 1000) and cfg.p == (0.7,)
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig("kl-vs-n", n_list="10.5")


def test_theta0_vector():
    cfg = ExperimentConfig("pop-trace", theta0=(0.3,))
    np.testing.assert_array_equal(cfg.theta0_vector(3), [0.3, 0.0, 0.0])
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig("pop-trace", theta0=(0.1, 0.2)).theta0_vector(3)


def test_config_precedence(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# comment\nseeds = 7\nreps = 3\np = 0.7, 0.9\nplot = yes\n")
    values = read_config_file(path)
    cfg = build_config("pop-trace", values, seeds=11)
    assert cfg.seeds == 11 and cfg.replications == 3 and cfg.p == (0.7, 0.9) and cfg.plot
    assert build_config("pop-trace").p == (0.6, 0.8, 0.9)
    path.write_text("bogus = 1\n")
    with pytest.raises(InvalidArgumentError):
        read_config_file(path)
    with pytest.raises(InvalidArgumentError):
        read_config_file(tmp_path / "missing.cfg")
    with pytest.raises(InvalidArgumentError):
        build_config("pop-trace", {"seeds": "many"})


def test_config_hash_stable():
    a = ExperimentConfig("kl-vs-n")
    assert a.sha256() == ExperimentConfig("kl-vs-n").sha256()
    assert a.sha256() != ExperimentConfig("kl-vs-n", seeds=3).sha256()


def test_result_table_roundtrip(tmp_path):
    t = ResultTable(("n", "x", "ok", "tag"), metadata={"a": [1, 2.5], "b": {"c": "d"}})
    t.append((10, 0.1, True, "ok"))
    t.append((20, math.pi, False, "failed: x"))
    with pytest.raises(InvalidArgumentError):
        t.append((1, 2))
    t.to_csv(tmp_path / "t.csv")
    back = ResultTable.from_csv(tmp_path / "t.csv")
    assert back.schema == t.schema and back.rows == t.rows and back.metadata == t.metadata
    assert back.column("x")[1] == math.pi


def test_loglog_slope():
    n = np.array([10, 100, 1000, 10000])
    fit, note = loglog_slope(n, 3 * n**-0.5)
    assert fit.slope == pytest.approx(-0.5) and fit.se == pytest.approx(0.0, abs=1e-12)
    assert note == ""
    fit, note = loglog_slope([100, 100], [1.0, 2.0])
    assert fit is None and "undefined" in note


def test_pop_trace_blocks():
    res = run_pop_trace(ExperimentConfig("pop-trace", p=(0.8,), iterations=1))
    assert len(res.table) == 2
    res = run_pop_trace(ExperimentConfig("pop-trace", p=(0.6, 0.8, 0.9), iterations=30))
    t = res.table
    assert set(t.column("p")) == {0.6, 0.8, 0.9}
    for p in (0.6, 0.8, 0.9):
        kl = np.array([k for q, k in zip(t.column("p"), t.column("kl")) if q == p])
        assert np.all(np.diff(kl) < 0)
    assert res.checks["rate_ordering_d2"]
    assert all(v for k, v in res.checks.items() if k.startswith(("monotone", "ratio_bound")))
    assert [e["p"] for e in res.summary["outside_radius"]] == [0.6]


def test_pop_trace_absolute_ordering_fails_early():
    # at t = 1 the p = 0.6 trace sits below p = 0.8 because it starts far lower
    res = run_pop_trace(ExperimentConfig("pop-trace", p=(0.6, 0.8), iterations=5))
    assert not res.checks["p_ordering_d2"]
    res = run_pop_trace(ExperimentConfig("pop-trace", p=(0.8, 0.9), iterations=20))
    assert res.checks["p_ordering_d2"]


def test_pop_trace_strict_radius():
    with pytest.raises(PreconditionError, match="radius"):
        run_pop_trace(ExperimentConfig("pop-trace", p=(0.6,), strict_radius=True))


def test_kl_vs_n_small():
    cfg = ExperimentConfig("kl-vs-n", n_list=(200, 800, 3200), replications=4)
    res = run_kl_vs_n(cfg)
    assert len(res.table) == 12
    assert res.summary["slope"]["slope"] < 0
    assert res.summary["failed_replications"] == 0
    single = run_kl_vs_n(ExperimentConfig("kl-vs-n", n_list=(200,), replications=2))
    assert single.summary["slope"] is None and "undefined" in single.summary["diagnostic"]
    assert "slope_in_band" not in single.checks


def test_kl_vs_n_jobs_do_not_change_results():
    cfg = ExperimentConfig("kl-vs-n", n_list=(200, 400), replications=3)
    a = run_kl_vs_n(cfg).table.rows
    b = run_kl_vs_n(ExperimentConfig("kl-vs-n", n_list=(200, 400), replications=3, jobs=3)).table.rows
    assert a == b


def test_mda_error_small():
    cfg = ExperimentConfig("mda-error", n_list=(500, 2000, 8000), seeds=3, n_test=100_000, n_mc=20_000)
    res = run_mda_error(cfg)
    assert len(res.table) == 9
    assert res.checks["sandwich"] and res.checks["above_bayes_within_noise"]
    assert all(v >= 0 for v in res.table.column("excess_risk"))
    with pytest.raises(InvalidArgumentError):
        run_mda_error(ExperimentConfig("mda-error", n_list=(500, 2000), n_test=100_000))
    with pytest.raises(InvalidArgumentError):
        run_mda_error(ExperimentConfig("mda-error", n_test=1000))


def test_perturbation_small():
    res = run_perturbation(ExperimentConfig("perturbation", n_list=(100, 1000, 10000), seeds=10, grid_size=11))
    assert set(res.table.column("r")) == {0.2, 0.1}
    assert res.summary["slope"]["slope"] < 0
    assert res.checks["linear_in_r"]
    zero = run_perturbation(ExperimentConfig("perturbation", n_list=(100, 1000), seeds=3, radius=0.0))
    assert all(v == 0.0 for v in zero.table.column("centered_gap"))


def test_properties_with_skips():
    res = run_properties(ExperimentConfig("properties", d=(1, 2), p=(0.8,), grid_size=50))
    assert res.checks["all_properties"]
    assert set(res.table.column("status")) == {"pass"}
    assert len(res.table) == 10
    far = run_properties(ExperimentConfig("properties", d=(2,), p=(0.6,), theta0=(5.0,), grid_size=50))
    assert far.table.column("status") == ["skipped: radius"]
    assert far.summary["skipped"] == 1


def test_outputs_are_reproducible(tmp_path):
    cfg = ExperimentConfig("kl-vs-n", n_list=(200, 800), replications=2, plot=True)
    paths_a = write_outputs(run_experiment(cfg), tmp_path / "a")
    paths_b = write_outputs(run_experiment(cfg), tmp_path / "b")
    for key in ("csv", "summary", "svg"):
        assert paths_a[key].read_bytes() == paths_b[key].read_bytes()
    doc = json.loads(paths_a["summary"].read_text())
    assert doc["config_sha256"] == cfg.sha256() and doc["version"]
    assert list(doc) == sorted(doc)
    header = paths_a["csv"].read_text().splitlines()[0]
    assert header == "n,rep,status,iterations,theta_norm,sigma_sq,kl"
    assert "<svg" in paths_a["svg"].read_text()
    assert summary_document(run_experiment(cfg))["passed"] in (True, False)


def test_svg_plot_handles_empty_and_log():
    assert svg_line_plot({"a": ([1, 2], [0.0, -1.0])}, log_y=True) is None
    svg = svg_line_plot({"a": ([1, 10, 100], [1, 0.1, 0.01]), "b <&>": ([1, 100], [2, 2])}, log_x=True, log_y=True)
    assert svg.count("<polyline") == 2 and "b &lt;&amp;&gt;" in svg


def test_more_replications_shrink_slope_se():
    # a single regression SE is noisy, so compare averages over independent base seeds
    nl = (100, 316, 1000, 3162)
    se = {}
    for reps in (6, 12):
        se[reps] = np.mean(
            [
                run_kl_vs_n(ExperimentConfig("kl-vs-n", n_list=nl, replications=reps, base_seed=100 + b)).summary["slope"]["se"]
                for b in range(10)
            ]
        )
    assert se[12] < se[6]
