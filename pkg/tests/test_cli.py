import csv
import io
import math
import subprocess
import sys

import pytest

from nonlocal_lab import __version__
from nonlocal_lab.cli import main
from nonlocal_lab.config import ConfigError, parse_config
from nonlocal_lab.experiments import read_csv_body, resolve_threads, run_experiment


def rows_of(path):
    return list(csv.DictReader(io.StringIO(read_csv_body(path))))


def metadata_of(path):
    meta = {}
    for line in path.read_text().splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta.setdefault(k, v)
    return meta


# parsing ------------------------------------------------------------------


def test_minimal_config_defaults():
    cfg = parse_config("experiment = torsion-sweep\n")
    assert cfg.r == 1.0 and cfg.truncation == 4.0 and cfg.n_interior == 256
    assert cfg.L == [1.0] and cfg.seed == [0] and cfg.s == [0.5]
    assert cfg.delta == 0.1 and cfg.cg_tolerance == 1e-10 and cfg.precond == "diagonal"
    assert cfg.warnings == []


def test_comments_lists_and_whitespace():
    cfg = parse_config("""
        # sweep over two seeds
        experiment = osc-sweep   # trailing comment
        L = 1, 2,4
        seed=3,4
    """)
    assert cfg.experiment == "osc-sweep" and cfg.L == [1.0, 2.0, 4.0] and cfg.seed == [3, 4]


def test_s_out_of_range_cites_interval():
    with pytest.raises(ConfigError) as info:
        parse_config("experiment = torsion-sweep\ns = 1.5\n")
    assert any("line 2" in e and "(0, 1)" in e for e in info.value.errors)


def test_duplicate_key_last_wins_with_warning():
    cfg = parse_config("experiment = torsion-sweep\nL = 1\nL = 2, 4\n")
    assert cfg.L == [2.0, 4.0]
    assert len(cfg.warnings) == 1 and "line 3" in cfg.warnings[0] and "'L'" in cfg.warnings[0]


def test_all_errors_reported_with_lines():
    text = "experiment = torsion-sweep\nbogus = 1\nL = 0.5\nn_interior = 7\nprecond = ilu\nno equals sign\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    lines = [e.split(":")[0] for e in info.value.errors]
    assert lines == ["line 2", "line 3", "line 4", "line 5", "line 6"]


def test_missing_experiment_and_unparsable_value():
    with pytest.raises(ConfigError) as info:
        parse_config("r = abc\n")
    msgs = " ".join(info.value.errors)
    assert "missing required key 'experiment'" in msgs and "line 1: r" in msgs


@pytest.mark.parametrize("line", [
    "experiment = unknown", "X = 1.0", "family = spiral", "seed = -1", "cg_tolerance = 2",
    "max_iter = 0", "R = -1", "grid_resolution = 16", "dyadic_base = 3", "n_radii = 2",
    "n_list = 256, 7", "X_list = 1", "probes = 1.5", "cell_size = 0", "delta = -0.1",
])
def test_range_checks(line):
    with pytest.raises(ConfigError):
        parse_config("experiment = torsion-sweep\n" + line + "\n")


def test_experiment_specific_checks():
    with pytest.raises(ConfigError):
        parse_config("experiment = s-limit\ns = 0.4\n")
    with pytest.raises(ConfigError):
        parse_config("experiment = harnack-classical\nR = 2\n")


def test_digest_tracks_content():
    a = parse_config("experiment = torsion-sweep\n")
    b = parse_config("# comment\nexperiment = torsion-sweep\nX = 4\n")
    c = parse_config("experiment = torsion-sweep\nL = 2\n")
    assert a.digest() == b.digest() != c.digest()


# running ------------------------------------------------------------------


def test_torsion_sweep_unit_L(tmp_path):
    cfg = parse_config("experiment = torsion-sweep\nL = 1\nn_interior = 64\n")
    res = run_experiment(cfg, tmp_path)
    assert res.status == 0
    rows = rows_of(res.path)
    assert len(rows) == 1
    assert rows[0]["inf_half_scaled"] == rows[0]["inf_half"]
    meta = metadata_of(res.path)
    assert meta["version"] == __version__ and meta["complete"] == "true"
    assert meta["config_hash"] == cfg.digest() and meta["seed"] == "0"


def test_harnack_classical_row(tmp_path):
    res = run_experiment(parse_config("experiment = harnack-classical\nL = 4\n"), tmp_path)
    row = rows_of(res.path)[0]
    assert float(row["sup"]) == pytest.approx(7.389, abs=1e-3)
    assert float(row["c_H"]) >= math.exp(4.0) * (1 - 1e-12)
    assert round(float(row["c_H"]), 2) == 54.60


def test_rows_round_trip_exactly(tmp_path):
    res = run_experiment(parse_config("experiment = tail-check\ns = 0.3, 0.7\n"), tmp_path)
    for row, raw in zip(res.rows, rows_of(res.path)):
        assert float(raw["tail"]) == row["tail"]
        assert math.isclose(float(raw["tail"]), 1 / float(raw["s"]), rel_tol=1e-12)


def test_bodies_identical_across_runs(tmp_path):
    text = ("experiment = osc-sweep\nL = 1, 8\nseed = 0, 1\nn_interior = 64\n")
    a = run_experiment(parse_config(text), tmp_path / "a", threads=1)
    b = run_experiment(parse_config(text), tmp_path / "b", threads=3)
    assert read_csv_body(a.path) == read_csv_body(b.path)


@pytest.mark.parametrize("text", [
    "experiment = s-limit\nfamily = constant\ns = 0.6, 0.9\nn_interior = 64\n",
    "experiment = convergence-study\nfamily = constant\nn_list = 32, 64\nX_list = 4, 8\n",
])
def test_other_experiments(tmp_path, text):
    res = run_experiment(parse_config(text), tmp_path)
    assert res.status == 0 and rows_of(res.path)


def test_convergence_study_changes(tmp_path):
    text = "experiment = convergence-study\nfamily = constant\nn_list = 64, 128\nX_list = 4, 8\n"
    res = run_experiment(parse_config(text), tmp_path)
    assert res.constants["max_rel_change_n"] < 0.02
    assert res.constants["max_rel_change_X"] < 0.01


def test_solver_failure_writes_partial_and_flags(tmp_path):
    cfg = parse_config("experiment = torsion-sweep\nL = 1, 2\nmax_iter = 1\nn_interior = 32\n")
    res = run_experiment(cfg, tmp_path)
    assert res.status == 1
    meta = metadata_of(res.path)
    assert meta["complete"] == "false" and "error" in meta
    assert rows_of(res.path) == []


def test_outputs_stay_in_directory(tmp_path):
    out = tmp_path / "results"
    run_experiment(parse_config("experiment = tail-check\n"), out)
    assert [p.name for p in tmp_path.iterdir()] == ["results"]
    assert [p.name for p in out.iterdir()] == ["tail-check.csv"]


# command line -------------------------------------------------------------


def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.cfg"
    good.write_text("experiment = tail-check\n")
    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment = tail-check\ns = 1.5\nfoo = 1\n")
    failing = tmp_path / "fail.cfg"
    failing.write_text("experiment = torsion-sweep\nmax_iter = 1\nn_interior = 32\n")

    assert main(["validate", "--config", str(good)]) == 0
    assert main(["validate", "--config", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "line 3" in err
    assert main(["validate", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["run", "--config", str(good), "--output", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "tail-check.csv").exists()
    assert main(["run", "--config", str(failing), "--output", str(tmp_path / "o")]) == 1
    assert main(["run", "--config", str(good), "--threads", "0"]) == 2
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip().endswith(__version__)


def test_cli_duplicate_warning(tmp_path, capsys):
    cfg = tmp_path / "dup.cfg"
    cfg.write_text("experiment = tail-check\ns = 0.5\ns = 0.25\n")
    assert main(["validate", "--config", str(cfg)]) == 0
    assert "warning: line 3: duplicate key 's'" in capsys.readouterr().err


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("LAB_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.delenv("LAB_THREADS")
    assert resolve_threads(None) == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "nonlocal_lab", "version"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == __version__
