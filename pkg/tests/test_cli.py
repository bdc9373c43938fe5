import os

import pytest

from gflowlab.cli import main
from gflowlab.runlog import parse_csv

CFG = """
[env]
kind = micro
name = diamond
[objective]
kind = tb
[backward]
kind = tlm
[training]
iterations = 40
batch_size = 4
lr = 0.05
[metrics]
eval_every = 20
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(CFG)
    return str(p)


def test_train_writes_three_files(cfg_file, tmp_path):
    out = str(tmp_path / "runA")
    rc = main(["train", "--config", cfg_file, "--seed", "1", "--out", out])
    assert rc == 0
    assert sorted(os.listdir(out)) == ["checkpoint.final", "config.resolved", "metrics.csv"]
    cols = parse_csv(os.path.join(out, "metrics.csv"))
    assert cols["iteration"] == [0, 20, 40]
    assert all(s == 1 for s in cols["seed"])


def test_train_set_override_recorded(cfg_file, tmp_path):
    out = str(tmp_path / "runB")
    rc = main(["train", "--config", cfg_file, "--out", out,
               "--set", "backward.kind=uniform"])
    assert rc == 0
    resolved = open(os.path.join(out, "config.resolved")).read()
    assert "kind = uniform" in resolved


def test_train_invalid_key_exit1(cfg_file, tmp_path, capsys):
    rc = main(["train", "--config", cfg_file, "--out", str(tmp_path / "x"),
               "--set", "training.bogus=1"])
    assert rc == 1
    assert "training.bogus" in capsys.readouterr().err


def test_train_numerical_abort_exit2(cfg_file, tmp_path):
    out = str(tmp_path / "runC")
    rc = main(["train", "--config", cfg_file, "--out", out,
               "--set", "training.logz_lr=1e200", "--set", "training.iterations=60"])
    assert rc == 2
    assert os.path.exists(os.path.join(out, "metrics.csv"))  # partial CSV retained


def test_resolved_config_reproduces_csv(cfg_file, tmp_path):
    out1 = str(tmp_path / "r1")
    assert main(["train", "--config", cfg_file, "--seed", "5", "--out", out1]) == 0
    out2 = str(tmp_path / "r2")
    assert main(["train", "--config", os.path.join(out1, "config.resolved"),
                 "--out", out2]) == 0
    b1 = open(os.path.join(out1, "metrics.csv"), "rb").read()
    b2 = open(os.path.join(out2, "metrics.csv"), "rb").read()
    assert b1 == b2


def test_gflowlab_out_env_default(cfg_file, tmp_path, monkeypatch):
    root = tmp_path / "envroot"
    monkeypatch.setenv("GFLOWLAB_OUT", str(root))
    monkeypatch.chdir(tmp_path)
    rc = main(["train", "--config", cfg_file])
    assert rc == 0
    assert (root / "metrics.csv").exists()


def test_sweep(cfg_file, tmp_path):
    out = str(tmp_path / "sweep")
    rc = main(["sweep", "--config", cfg_file, "--lrs", "0.05,0.02",
               "--seeds", "1,2", "--out", out])
    assert rc == 0
    dirs = sorted(d for d in os.listdir(out) if d.startswith("lr"))
    assert len(dirs) == 4
    summary = open(os.path.join(out, "summary.csv")).read().splitlines()
    assert summary[0].startswith("backward,objective,lr,num_seeds")
    assert len(summary) == 3  # two lr groups
    for line in summary[1:]:
        assert line.split(",")[3] == "2"


def test_sweep_empty_lists_exit1(cfg_file, tmp_path, capsys):
    rc = main(["sweep", "--config", cfg_file, "--lrs", "", "--seeds", "1",
               "--out", str(tmp_path / "s2")])
    assert rc == 1


def test_oracle_all_checks_pass(tmp_path, capsys):
    rc = main(["oracle", "--set", "env.kind=micro", "--set", "env.name=diamond"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "proposition1" in out and "ok" in out


def test_oracle_cap_exceeded_exit1(tmp_path, capsys):
    # d4 H8 hypergrid has ~6e14 trajectories: enumeration-backed checks refuse
    rc = main(["oracle", "--set", "env.kind=hypergrid", "--set", "env.dims=4",
               "--set", "env.side=8", "--checks", "marginal"])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_oracle_tolerance_violation_exit3(monkeypatch, capsys):
    from gflowlab.oracle import CheckResult
    import gflowlab.cli as cli

    monkeypatch.setattr(cli, "run_checks",
                        lambda env, which, seed: [CheckResult("prop1", 1.0, 1e-10, False)])
    rc = main(["oracle", "--set", "env.kind=micro", "--set", "env.name=diamond"])
    assert rc == 3
    captured = capsys.readouterr()
    assert "FAIL" in captured.out
    assert "out of tolerance" in captured.err


def test_sweep_parallel_jobs(cfg_file, tmp_path):
    out = str(tmp_path / "sweep_par")
    rc = main(["sweep", "--config", cfg_file, "--lrs", "0.05",
               "--seeds", "1,2", "--out", out, "--jobs", "2"])
    assert rc == 0
    assert os.path.exists(os.path.join(out, "summary.csv"))
