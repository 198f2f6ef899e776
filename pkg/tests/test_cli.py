import json

import pytest

from overspec_mda import __version__
from overspec_mda.cli import EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE, main


def test_properties_passes(tmp_path, capsys):
    code = main(["properties", "--d", "1,2", "--p", "0.8", "--grid-size", "40", "--out", str(tmp_path)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "PASS  all_properties" in out
    assert (tmp_path / "properties.csv").exists()


def test_failed_check_exits_one(tmp_path, capsys):
    code = main(["pop-trace", "--p", "0.6,0.8", "--iterations", "5", "--out", str(tmp_path)])
    assert code == EXIT_CHECK_FAILED
    assert "FAIL  p_ordering_d2" in capsys.readouterr().out


def test_radius_violation_exits_two(tmp_path, capsys):
    code = main(["pop-trace", "--p", "0.6", "--strict-radius", "--out", str(tmp_path)])
    assert code == EXIT_USAGE
    assert "radius" in capsys.readouterr().err


def test_bad_flags_exit_two(tmp_path):
    assert main(["kl-vs-n", "--p", "0.4", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["kl-vs-n", "--config", str(tmp_path / "missing"), "--out", str(tmp_path)]) == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["kl-vs-n", "--seeds", "many"])
    assert info.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == EXIT_USAGE


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n_list = 200, 400\nreps = 2\nseeds = 4\n")
    out = tmp_path / "o"
    code = main(["kl-vs-n", "--config", str(cfg), "--reps", "3", "--out", str(out), "--plot"])
    assert code in (EXIT_OK, EXIT_CHECK_FAILED)
    doc = json.loads((out / "kl-vs-n.summary.json").read_text())
    assert doc["config"]["replications"] == 3 and doc["config"]["seeds"] == 4
    assert doc["config"]["n_list"] == [200, 400]
    assert doc["version"] == __version__
    assert (out / "kl-vs-n.svg").exists()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out
