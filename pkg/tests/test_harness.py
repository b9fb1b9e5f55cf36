import json
import os

import numpy as np
import pytest

from covdetect import ConfigError
from covdetect.harness import load_config, run, write_record
from covdetect.harness.cli import main
from covdetect.harness.output import read_csv_table

SMALL = """\
N = 30
K = 3
L = 8
M = 32
trials = 4
n_samples = 40
n_thresholds = 11
L_list = [4, 6]
K_list = [2, 6]
"""


def _cfg(tmp_path, text=SMALL, **over):
    path = tmp_path / "exp.cfg"
    path.write_text(text)
    return load_config(str(path), overrides={"seed": 1, **over})


class TestConfig:
    def test_defaults(self, tmp_path):
        cfg = _cfg(tmp_path)
        assert cfg.threshold_max == 2.0 and cfg.noise_for(10) == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "text,line",
        [("N = 30\nbogus = 1\n", 2), ("N = 30\nN = 40\n", 2), ("trials = -3\n", 1), ("kind = pentagon\n", 1),
         ("N = 10\nK = 20\n", 2), ("just text\n", 1), ("L_list = [1, 2.5]\n", 1), ("M =\n", 1)],
    )
    def test_errors_have_line_numbers(self, tmp_path, text, line):
        with pytest.raises(ConfigError) as err:
            _cfg(tmp_path, text)
        assert err.value.lineno == line
        assert f":{line}:" in str(err.value)

    def test_seed_required(self, tmp_path):
        path = tmp_path / "x.cfg"
        path.write_text("N = 30\n")
        with pytest.raises(ConfigError):
            load_config(str(path))


@pytest.mark.parametrize("experiment", ["phase", "phase-embed", "roc", "error-dist", "compare-nnls", "joint"])
def test_every_experiment_runs(tmp_path, experiment):
    cfg = _cfg(tmp_path, SMALL + ("b = 1\n" if experiment in ("joint", "phase-embed") else ""), experiment=experiment)
    rec = run(cfg)
    paths = write_record(rec, str(tmp_path / "out"))
    assert paths and all(os.path.exists(p) for p in paths)


def test_phase_columns_and_determinism(tmp_path):
    cfg = _cfg(tmp_path)
    p1 = write_record(run(cfg), str(tmp_path / "a"))
    cfg.threads = 3
    p2 = write_record(run(cfg), str(tmp_path / "b"))
    for a, b in zip(p1, p2):
        assert open(a, "rb").read() == open(b, "rb").read()
    comments, rows = read_csv_table(p1[0])
    assert list(rows[0])[:6] == ["L", "K", "L2_over_N", "K_over_N", "success_fraction", "n_trials"]
    assert any("covdetect 0.1.0" in c for c in comments)


def test_roc_writes_two_tables(tmp_path):
    rec = run(_cfg(tmp_path, experiment="roc"))
    assert set(rec.tables) == {"predicted", "simulated"}
    assert set(rec.tables["predicted"][0]) == {"l_th", "pfa", "pmd"}


def test_compare_shares_covariances(tmp_path):
    rec = run(_cfg(tmp_path, experiment="compare-nnls"))
    assert rec.extra["cov_digests"]["mle"] == rec.extra["cov_digests"]["nnls"]
    assert {r["arm"] for r in rec.tables["compare"]} == {"mle", "nnls"}
    single = run(_cfg(tmp_path, SMALL + 'arms = ["mle"]\n', experiment="compare-nnls"))
    assert {r["arm"] for r in single.tables["compare"]} == {"mle"}


class TestCli:
    def test_json_and_determinism(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(SMALL)
        args = ["phase", "--config", str(cfg), "--seed", "3", "--format", "json"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b"), "--threads", "2"]) == 0
        a = (tmp_path / "a" / "phase.json").read_bytes()
        assert a == (tmp_path / "b" / "phase.json").read_bytes()
        assert json.loads(a)["tables"]["phase"][0]["L"] == 4

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("N = 30\nfoo = 2\n")
        assert main(["phase", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path)]) == 2
        assert "c.cfg:2" in capsys.readouterr().err

    def test_experiment_mismatch(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("experiment = roc\n")
        assert main(["phase", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path)]) == 2

    def test_env_threads(self, tmp_path, monkeypatch):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(SMALL)
        monkeypatch.setenv("COVDETECT_THREADS", "2")
        assert main(["phase", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "o")]) == 0
