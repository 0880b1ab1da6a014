import csv
import json

import numpy as np
import pytest

from qreceiver.cli import PLAN_COLUMNS, config_hash, load_config, main, resolve_workers
from qreceiver.env import helstrom_bound
from qreceiver.harness import CURVE_COLUMNS, SWEEP_COLUMNS
from qreceiver.bandit import BANDIT_COLUMNS


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


SMALL = """
[experiment]
T = 1500
n_agents = 2
[bandit]
T = 300
n_agents = 10
[sweep]
parameter = p_f
values = 0.5, 1.0
eval_episode = 800
[plan]
n_alpha = 3
L_max = 2
"""


def run(tmp_path, command, *extra, config=SMALL, out="out"):
    cfg = write(tmp_path, config)
    outdir = tmp_path / out
    code = main([command, "--config", cfg, "--out", str(outdir), "--workers", "1", *extra])
    return code, outdir


def test_unknown_keys_and_sections_are_errors(tmp_path, capsys):
    code, _ = run(tmp_path, "plan", config="[receiver]\nalhpa = 0.4\n")
    assert code == 1
    assert "alhpa" in capsys.readouterr().err
    code, _ = run(tmp_path, "plan", config="[recevier]\nalpha = 0.4\n")
    assert code == 1


def test_bad_values_are_config_errors(tmp_path):
    assert run(tmp_path, "train", config="[receiver]\nL = two\n")[0] == 1
    assert run(tmp_path, "train", config="[policy]\nkind = softmax\n")[0] == 1
    assert run(tmp_path, "sweep", config="[sweep]\nparameter = beta\n")[0] == 1
    assert main(["plan", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "o")]) == 1


def test_capacity_error_exit_code(tmp_path):
    code, _ = run(tmp_path, "train", config="[receiver]\nL = 5\n[experiment]\nT = 5\nn_agents = 1\n")
    assert code == 2


def test_config_hash_ignores_key_order(tmp_path):
    a = load_config(write(tmp_path, "[noise]\np_dc = 0.1\np_f = 0.2\n", "a.ini"))
    b = load_config(write(tmp_path, "[noise]\np_f = 0.2\np_dc = 0.1\n", "b.ini"))
    assert config_hash(a) == config_hash(b)
    c = load_config(write(tmp_path, "[noise]\np_f = 0.3\n", "c.ini"))
    assert config_hash(a) != config_hash(c)


def test_worker_resolution(monkeypatch):
    monkeypatch.setenv("QRECEIVER_WORKERS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(2) == 2
    monkeypatch.delenv("QRECEIVER_WORKERS")
    assert resolve_workers(None) >= 1


def test_plan(tmp_path):
    code, out = run(tmp_path, "plan")
    assert code == 0
    header, rows = read_csv(out / "plan.csv")
    assert tuple(header) == PLAN_COLUMNS
    assert len(rows) == 2 * 2 * 3
    for alpha, L, mode, p, gap, hom in rows:
        assert float(gap) == pytest.approx(float(p) - helstrom_bound(float(alpha)))
        assert float(gap) <= 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["outputs"] == ["plan.csv"]
    assert manifest["config_hash"] == config_hash(manifest["config"])


def test_plan_zero_amplitude_row(tmp_path):
    code, out = run(tmp_path, "plan", config="[plan]\nalpha_sq_min = 0\nalpha_sq_max = 0\nn_alpha = 1\nL_max = 3\n")
    assert code == 0
    _, rows = read_csv(out / "plan.csv")
    assert all(float(r[3]) == pytest.approx(0.5) for r in rows)


def test_train_is_byte_reproducible(tmp_path):
    code, out1 = run(tmp_path, "train", out="a")
    assert code == 0
    cfg = write(tmp_path, SMALL)
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    for name in ("train.csv", "qtable_agent0.csv"):
        assert (out1 / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header, rows = read_csv(out1 / "train.csv")
    assert tuple(header) == CURVE_COLUMNS
    assert rows[-1][0] == "1500"


def test_seed_flag_changes_output(tmp_path):
    run(tmp_path, "train", out="a")
    run(tmp_path, "train", "--seed", "99", out="b")
    assert (tmp_path / "a" / "train.csv").read_bytes() != (tmp_path / "b" / "train.csv").read_bytes()
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["base_seed"] == 99


def test_bandit(tmp_path):
    code, out = run(tmp_path, "bandit")
    assert code == 0
    names = sorted(p.name for p in out.glob("bandit_*.csv"))
    assert names == ["bandit_0.3-greedy.csv", "bandit_TS.csv", "bandit_UCB-1.csv"]
    header, rows = read_csv(out / "bandit_TS.csv")
    assert tuple(header) == BANDIT_COLUMNS
    regret = [float(r[1]) for r in rows]
    assert regret == sorted(regret)


def test_bandit_zero_horizon(tmp_path):
    code, out = run(tmp_path, "bandit", config="[bandit]\nT = 0\nstrategies = thompson\n")
    assert code == 0
    header, rows = read_csv(out / "bandit_TS.csv")
    assert rows == []


def test_sweep(tmp_path):
    code, out = run(tmp_path, "sweep")
    assert code == 0
    header, rows = read_csv(out / "sweep.csv")
    assert tuple(header) == SWEEP_COLUMNS
    assert float(rows[0][3]) == pytest.approx(0.5, abs=1e-9)
    assert float(rows[0][2]) == pytest.approx(0.5, abs=1e-9)


def test_eval_fresh_and_trained(tmp_path):
    code, out = run(tmp_path, "train", out="t")
    snap = out / "qtable_agent0.csv"
    code, ev = run(tmp_path, "eval", "--snapshot", str(snap), out="e")
    assert code == 0
    header, rows = read_csv(ev / "eval.csv")
    assert header == ["beta_0", "beta_1", "o_1", "o_2", "q_diff", "ml_guess"]
    assert len(rows) == 21 * 21 * 4
    assert {r[5] for r in rows} == {"0", "1"}


def test_eval_fresh_snapshot_has_zero_differences(tmp_path):
    from qreceiver.agents import QTable

    snap = tmp_path / "fresh.csv"
    QTable(5, 2).write_snapshot(snap)
    code, ev = run(tmp_path, "eval", "--snapshot", str(snap), config="[receiver]\nbeta_points = 5\n")
    assert code == 0
    _, rows = read_csv(ev / "eval.csv")
    assert all(float(r[4]) == 0.0 for r in rows)


def test_eval_mismatch_is_an_error(tmp_path):
    from qreceiver.agents import QTable

    snap = tmp_path / "fresh.csv"
    QTable(5, 2).write_snapshot(snap)
    assert run(tmp_path, "eval", "--snapshot", str(snap))[0] == 1
    assert run(tmp_path, "eval")[0] == 1


def test_rerun_from_manifest(tmp_path):
    code, out = run(tmp_path, "bandit", "--seed", "4", out="a")
    assert code == 0
    again = tmp_path / "b"
    assert main(["bandit", "--config", str(out / "manifest.json"), "--out", str(again), "--workers", "1"]) == 0
    for f in out.glob("*.csv"):
        assert f.read_bytes() == (again / f.name).read_bytes()
    m1 = json.loads((out / "manifest.json").read_text())
    m2 = json.loads((again / "manifest.json").read_text())
    assert m1["config_hash"] == m2["config_hash"]
