"""Command-line entry point: ``qreceiver {plan,train,bandit,sweep,eval}``.

Every command reads an INI config (all keys optional, unknown keys rejected),
writes CSV files into ``--out`` and finishes with a ``manifest.json``.
Exit codes: 0 success, 1 configuration error, 2 capacity error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import itertools
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .agents import POLICY_KINDS, SCHEDULES, PolicySpec, QTable
from .bandit import (
    BANDIT_COLUMNS,
    make_problem_from_displacements,
    problem_1_displacements,
    problem_2_displacements,
    regret_rows,
    run_bandit_ensemble,
)
from .env import NoiseConfig, ReceiverConfig, default_beta_grid, helstrom_bound, homodyne_limit
from .errors import CapacityError
from .harness import (
    CURVE_COLUMNS,
    SWEEP_COLUMNS,
    SWEEP_PARAMETERS,
    ExperimentConfig,
    curve_rows,
    geometric_checkpoints,
    run_ensemble,
    sweep,
)
from .planner import ActionTree, BeliefGrid, dp_optimal_value, maximum_likelihood_guesses

log = logging.getLogger("qreceiver")

WORKERS_ENV = "QRECEIVER_WORKERS"
PLAN_COLUMNS = ("alpha", "L", "attenuation_mode", "P_star", "P_star_minus_helstrom", "homodyne")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _words(text: str) -> list[str]:
    return [x for x in text.replace(",", " ").split()]


# section -> key -> (parser, default)
SCHEMA = {
    "receiver": {
        "alpha": (float, 0.4),
        "L": (int, 2),
        "beta_min": (float, -1.0),
        "beta_max": (float, 1.0),
        "beta_points": (int, 21),
        "attenuation_mode": (str, "fixed"),
        "p0": (float, 0.5),
        "theta_points": (int, 11),
    },
    "noise": {"p_dc": (float, 0.0), "p_f": (float, 0.0)},
    "policy": {
        "kind": (str, "epsilon_greedy"),
        "epsilon": (float, 0.3),
        "tau": (float, 200.0),
        "epsilon0": (float, 0.01),
        "confidence_schedule": (str, "UCB-1"),
    },
    "experiment": {
        "T": (int, 500_000),
        "n_agents": (int, 24),
        "base_seed": (int, 0),
        "per_decade": (int, 25),
    },
    "bandit": {
        "problem": (int, 1),
        "alpha": (float, 0.4),
        "strategies": (_words, ["epsilon_greedy", "UCB-1", "thompson"]),
        "epsilon": (float, 0.3),
        "T": (int, 10_000),
        "n_agents": (int, 1000),
    },
    "plan": {
        "alpha_sq_min": (float, 0.01),
        "alpha_sq_max": (float, 2.0),
        "n_alpha": (int, 20),
        "L_min": (int, 1),
        "L_max": (int, 5),
        "modes": (_words, ["fixed", "adaptive"]),
        "belief_points": (int, 1001),
    },
    "sweep": {
        "parameter": (str, "p_dc"),
        "values": (_floats, [0.0, 0.25, 0.5, 0.75, 1.0]),
        "eval_episode": (int, 100_000),
    },
    "eval": {"snapshot": (str, "")},
}


def _manifest_as_ini(path: str) -> configparser.ConfigParser:
    """The config recorded in a run manifest, so a run can be repeated from it."""
    try:
        with open(path) as fh:
            recorded = json.load(fh)["config"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path} is not a run manifest: {exc}") from exc
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for sec, values in recorded.items():
        parser[sec] = {k: " ".join(map(str, v)) if isinstance(v, list) else str(v) for k, v in values.items()}
    return parser


def load_config(path: str | None) -> dict:
    """Parsed config with defaults filled in, as plain JSON-able values.

    ``path`` is an INI file or the ``manifest.json`` of an earlier run.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file {path} does not exist")
        if path.endswith(".json"):
            parser = _manifest_as_ini(path)
        else:
            try:
                parser.read(path)
            except configparser.Error as exc:
                raise ConfigError(str(exc)) from exc
    cfg = {sec: {k: default for k, (_, default) in keys.items()} for sec, keys in SCHEMA.items()}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            conv = SCHEMA[sec][key][0]
            try:
                cfg[sec][key] = conv(raw.strip())
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key} = {raw!r}: {exc}") from exc
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def receiver_from(cfg: dict) -> ReceiverConfig:
    r, n = cfg["receiver"], cfg["noise"]
    return ReceiverConfig(
        alpha=r["alpha"],
        L=r["L"],
        beta_grid=default_beta_grid(r["beta_points"], r["beta_min"], r["beta_max"]),
        attenuation_mode=r["attenuation_mode"],
        priors=(r["p0"], 1.0 - r["p0"]),
        noise=NoiseConfig(n["p_dc"], n["p_f"]),
        theta_points=r["theta_points"],
    )


def policy_from(section: dict) -> PolicySpec:
    return PolicySpec(
        kind=section["kind"],
        epsilon=section["epsilon"],
        tau=section["tau"],
        epsilon0=section["epsilon0"],
        confidence_schedule=section["confidence_schedule"],
    )


def experiment_from(cfg: dict) -> ExperimentConfig:
    e = cfg["experiment"]
    return ExperimentConfig(
        receiver=receiver_from(cfg),
        policy=policy_from(cfg["policy"]),
        T=e["T"],
        n_agents=e["n_agents"],
        checkpoints=geometric_checkpoints(e["T"], e["per_decade"]),
        base_seed=e["base_seed"],
    )


def bandit_strategy(token: str, epsilon: float) -> PolicySpec:
    if token in SCHEDULES:
        return PolicySpec("ucb", confidence_schedule=token)
    if token == "ucb":
        return PolicySpec("ucb")
    if token in POLICY_KINDS:
        return PolicySpec(token, epsilon=epsilon)
    raise ConfigError(f"unknown bandit strategy {token!r}")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


# commands ----------------------------------------------------------------------


def cmd_plan(cfg: dict, out: Path, workers: int) -> list[str]:
    p = cfg["plan"]
    base = receiver_from(cfg)
    alphas = np.sqrt(np.linspace(p["alpha_sq_min"], p["alpha_sq_max"], p["n_alpha"]))
    if p["L_min"] < 1 or p["L_max"] < p["L_min"]:
        raise ConfigError("plan needs 1 <= L_min <= L_max")
    rows = []
    for mode in p["modes"]:
        for L in range(p["L_min"], p["L_max"] + 1):
            for a in alphas:
                rc = ReceiverConfig(
                    alpha=float(a), L=L, beta_grid=base.beta_grid, attenuation_mode=mode,
                    priors=base.priors, noise=base.noise, theta_points=base.theta_points,
                )
                v = dp_optimal_value(float(a), rc, BeliefGrid(p["belief_points"]))
                rows.append((float(a), L, mode, v, v - helstrom_bound(a), homodyne_limit(a)))
            log.info("plan %s L=%d done", mode, L)
    write_csv(out / "plan.csv", PLAN_COLUMNS, rows)
    return ["plan.csv"]


def cmd_train(cfg: dict, out: Path, workers: int) -> list[str]:
    exp = experiment_from(cfg)
    curves, tables = run_ensemble(exp, workers, return_tables=True)
    write_csv(out / "train.csv", CURVE_COLUMNS, curve_rows(curves, exp.receiver))
    tables[0].write_snapshot(out / "qtable_agent0.csv")
    return ["train.csv", "qtable_agent0.csv"]


def cmd_bandit(cfg: dict, out: Path, workers: int) -> list[str]:
    b = cfg["bandit"]
    displacements = {1: problem_1_displacements, 2: problem_2_displacements}.get(b["problem"])
    if displacements is None:
        raise ConfigError("bandit problem must be 1 or 2")
    noise = receiver_from(cfg).noise
    problem = make_problem_from_displacements(b["alpha"], displacements(b["alpha"]), noise)
    base_seed = cfg["experiment"]["base_seed"]
    checkpoints = geometric_checkpoints(b["T"], cfg["experiment"]["per_decade"])
    names = []
    for token in b["strategies"]:
        strategy = bandit_strategy(token, b["epsilon"])
        ens = run_bandit_ensemble(problem, strategy, b["T"], b["n_agents"], base_seed)
        name = f"bandit_{strategy.label}.csv"
        write_csv(out / name, BANDIT_COLUMNS, regret_rows(ens, problem, checkpoints))
        names.append(name)
    return names


def cmd_sweep(cfg: dict, out: Path, workers: int) -> list[str]:
    s = cfg["sweep"]
    if s["parameter"] not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
    exp = experiment_from(cfg)
    points = sweep(s["parameter"], s["values"], exp, s["eval_episode"], workers)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, [(p.value, p.R_t, p.P_t, p.P_star) for p in points])
    return ["sweep.csv"]


def eval_rows(table: QTable, receiver: ReceiverConfig, use_posterior: bool) -> list[tuple]:
    """Guess-stage value difference and model ML guess per full history."""
    score = table.posterior_mean() if use_posterior else table.q
    g, L = table.g, table.L
    thetas = [np.full(2**ell, act.theta) for ell, act in enumerate(receiver.fixed_actions([0] * L))]
    rows = []
    for acts in itertools.product(range(g), repeat=L):
        tree = ActionTree(
            [np.full(2**ell, receiver.beta_grid[a]) for ell, a in enumerate(acts)],
            thetas,
            np.zeros(2**L, dtype=int),
        )
        ml = maximum_likelihood_guesses(receiver.alpha, tree, receiver)
        for leaf, outcomes in enumerate(itertools.product((0, 1), repeat=L)):
            h = 0
            for a, o in zip(acts, outcomes):
                h = (h * g + a) * 2 + o
            s = table.row_start(L, h)
            rows.append(
                tuple(receiver.beta_grid[a] for a in acts) + outcomes
                + (float(score[s + 1] - score[s]), int(ml[leaf]))
            )
    return rows


def cmd_eval(cfg: dict, out: Path, workers: int) -> list[str]:
    path = cfg["eval"]["snapshot"]
    if not path:
        raise ConfigError("eval needs a snapshot (--snapshot or [eval] snapshot)")
    if not os.path.exists(path):
        raise ConfigError(f"snapshot {path} does not exist")
    receiver = receiver_from(cfg)
    if receiver.attenuation_mode != "fixed":
        raise ConfigError("eval applies to agents, which use fixed attenuations")
    table = QTable.read_snapshot(path, receiver.n_beta, receiver.L)
    L = receiver.L
    columns = tuple(f"beta_{i}" for i in range(L)) + tuple(f"o_{i + 1}" for i in range(L)) + ("q_diff", "ml_guess")
    rows = eval_rows(table, receiver, cfg["policy"]["kind"] == "thompson")
    write_csv(out / "eval.csv", columns, rows)
    return ["eval.csv"]


COMMANDS = {"plan": cmd_plan, "train": cmd_train, "bandit": cmd_bandit, "sweep": cmd_sweep, "eval": cmd_eval}


def resolve_workers(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}={env!r} is not an integer") from None
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI config file")
    common.add_argument("--seed", type=int, help="base seed; agent i uses seed + i")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    common.add_argument("--workers", type=int, help=f"worker processes (default: ${WORKERS_ENV} or CPU count)")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="qreceiver", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "eval":
            p.add_argument("--snapshot", metavar="PATH", help="Q-table snapshot CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    started = time.perf_counter()
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["experiment"]["base_seed"] = args.seed
        workers = resolve_workers(args.workers)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "eval" and args.snapshot:
            cfg["eval"]["snapshot"] = args.snapshot
        outputs = COMMANDS[args.command](cfg, out, workers)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest = {
        "command": args.command,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "base_seed": cfg["experiment"]["base_seed"],
        "version": __version__,
        "duration_s": round(time.perf_counter() - started, 3),
        "outputs": outputs,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
