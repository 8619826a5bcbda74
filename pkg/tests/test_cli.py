import csv
import json

import pytest

from tcnot.cli import CSV_COLUMNS, main, point_seed
from tcnot.config import ConfigError, RunConfig, load_config


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_appends_identical_rows(tmp_path, capsys):
    out = tmp_path / "r.csv"
    argv = ["run", "--experiment", "2scqm", "--d", "3", "--p", "0.01", "--shots", "1500", "--seed", "7", "--output", str(out)]
    assert main(argv) == 0
    assert main(argv + ["--threads", "2"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 3 and lines[1] == lines[2]
    meta = json.loads((tmp_path / "r.csv.json").read_text())
    assert len(meta["rows"]) == 2 and "logical_Z_M0" in meta["rows"][0]["observable_failures"]
    assert "p_L=" in capsys.readouterr().out


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["run", "--experiment", "scqm", "--decoder", "single_update"]) == 2
    assert "does not apply" in capsys.readouterr().err
    assert main(["run", "--bogus", "1"]) == 2
    cfg = tmp_path / "c.cfg"
    cfg.write_text("experiment = 2scqm\nshotz = 10\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert main(["run", "--d", "4"]) == 2


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nexperiment = tcnot\ndecoder = single_update\nd = 5\np_grid = 0.001, 0.002\n")
    c = load_config(str(cfg), {"d": 3})
    assert (c.experiment, c.decoder, c.d, c.p_grid) == ("tcnot", "single_update", 3, (0.001, 0.002))
    with pytest.raises(ConfigError):
        load_config(None, {"experimnt": "x"})
    assert RunConfig("teleport").decoder == "teleport"


def test_env_var_sets_default_output(tmp_path, monkeypatch):
    monkeypatch.setenv("TCNOT_OUTPUT_DIR", str(tmp_path / "out"))
    assert main(["run", "--shots", "100"]) == 0
    assert (tmp_path / "out" / "results.csv").exists()


def test_sweep_is_resumable(tmp_path, capsys):
    out = tmp_path / "s.csv"
    argv = ["sweep", "--experiment", "2scqm", "--d-list", "3,5", "--p-grid", "0.004,0.006,0.008,0.01,0.012",
            "--shots", "400", "--output", str(out)]
    assert main(argv) == 0
    first = rows(out)
    assert len(first) == 10
    assert {int(r["seed"]) for r in first} == {point_seed(0, d, p) for d in (3, 5) for p in (0.004, 0.006, 0.008, 0.01, 0.012)}
    # drop the last three rows as if interrupted, then rerun
    text = out.read_text().splitlines()
    out.write_text("\n".join(text[:-3]) + "\n")
    capsys.readouterr()
    assert main(argv) == 0
    log = capsys.readouterr().out
    assert log.count("skip") == 7
    assert rows(out) == first


def _write(path, pts):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for d, p, pl, s in pts:
            w.writerow(["2scqm", "mwpm", d, p, 0.0, "none", "circuit", 10**6, 0, 0, int(pl * 1e6), pl, pl - 1.96 * s, pl + 1.96 * s, 0])


def test_fit_synthetic_and_failures(tmp_path, capsys):
    good = tmp_path / "g.csv"
    pts = []
    for d in (3, 5, 7):
        for p in (0.008, 0.009, 0.01, 0.011, 0.012):
            x = (p - 0.01) * d
            pts.append((d, p, 0.1 + 8 * x + 40 * x * x, 0.001))
    _write(good, pts)
    assert main(["fit", str(good)]) == 0
    report = json.loads((tmp_path / "g.csv.fit.json").read_text())
    assert report["success"] and abs(report["p_t"] - 0.01) < 1e-4
    assert "p_t = 1.0000%" in capsys.readouterr().out
    single = tmp_path / "one.csv"
    _write(single, [p for p in pts if p[0] == 3])
    assert main(["fit", str(single)]) == 3
    assert main(["fit", str(good), "--metric", "logical_Z_M0"]) == 2  # no sidecar


def test_lssa_command(capsys):
    assert main(["lssa", "xx_merge", "--d", "4", "--b", "1"]) == 0
    assert "ratio = 23/16" in capsys.readouterr().out
    assert main(["lssa", "tcnot_ordered"]) == 0
    assert "5/4" in capsys.readouterr().out
    assert main(["lssa", "tcnot_multi", "--n", "0"]) == 2
