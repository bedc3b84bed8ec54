"""Command-line surface tying the offline pipeline together.

Subcommands: gen-data, fit-value, learn-mpc, eval, sweep, verify-theorem1.
Parameters resolve with precedence: command-line flag, then the command's
block in the JSON config file (with a top-level "seed" as a shared
fallback), then the OFFLINE_MPC_SEED environment variable (seed only), then
built-in defaults. Every artifact gets a `<artifact>.provenance.json`
sidecar recording the tool version, a hash of the fully resolved
configuration, and the seed — no timestamps, so reruns are byte-identical.

Exit codes: 0 success, 1 numerical failure (message names the stage),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__, tasks
from .core import DatasetFormatError, NumericalError, load_dataset, save_dataset
from .datagen import BehaviorPolicy, generate
from .envs import ModelMismatch, make_plant
from .eval_harness import (
    EvalReport,
    EvalRow,
    MpcController,
    SweepConfig,
    compute_aggregates,
    mean_return,
    plot_report,
    reference_return,
    relative_performance,
    sweep,
    write_aggregates_csv,
    write_failures_csv,
    write_report_csv,
)
from .mpc import load_mpc, save_mpc, verify_value_equivalence
from .offline_learner import LearnConfig, learn, write_learn_trace
from .value_net import MlpValueFunction, TdFitConfig, fit_td, normalizer_from_data


class UsageError(Exception):
    """Invalid arguments, config, or input files; maps to exit code 2."""


# ---------------------------------------------------------------------------
# config resolution


def _load_block(args) -> tuple:
    """Return (command config block, top-level seed) from the JSON config."""
    path = getattr(args, "config", None)
    if path is None:
        return {}, None
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise UsageError("config file must contain a JSON object")
    block = data.get(args.block_name, {})
    if not isinstance(block, dict):
        raise UsageError(f"config block {args.block_name!r} must be a JSON object")
    return block, data.get("seed")


def _resolve(args, block: dict, name: str, default=None):
    """Flag value if given, else config-block value, else default."""
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    if name in block:
        return block[name]
    return default


def _resolve_seed(args, block: dict, global_seed) -> int:
    candidates = (
        getattr(args, "seed", None),
        block.get("seed"),
        global_seed,
        os.environ.get("OFFLINE_MPC_SEED"),
    )
    for candidate in candidates:
        if candidate is not None:
            try:
                return int(candidate)
            except (TypeError, ValueError):
                raise UsageError(f"seed must be an integer, got {candidate!r}")
    return 0


def _require_env(env) -> str:
    if env is None:
        raise UsageError("--env is required")
    if env not in tasks.TASK_IDS:
        raise UsageError(f"unknown environment {env!r}; expected one of {tasks.TASK_IDS}")
    return env


def _int_list(value, flag: str) -> tuple:
    if value is None:
        return None
    if isinstance(value, str):
        value = [tok for tok in value.split(",") if tok.strip()]
    try:
        return tuple(int(v) for v in value)
    except (TypeError, ValueError):
        raise UsageError(f"{flag} must be a comma-separated list of integers")


def _float_list(value, flag: str) -> tuple:
    if value is None:
        return None
    if isinstance(value, str):
        value = [tok for tok in value.split(",") if tok.strip()]
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise UsageError(f"{flag} must be a comma-separated list of numbers")


def _str_list(value) -> tuple:
    if value is None:
        return None
    if isinstance(value, str):
        return tuple(tok.strip() for tok in value.split(",") if tok.strip())
    return tuple(str(v) for v in value)


# ---------------------------------------------------------------------------
# provenance


def _config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _write_provenance(artifact_path, resolved: dict, seed: int) -> None:
    payload = {
        "tool_version": __version__,
        "config_hash": _config_hash(resolved),
        "seed": int(seed),
    }
    with open(str(artifact_path) + ".provenance.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# checked artifact loading


def _load_dataset_checked(path):
    try:
        return load_dataset(path)
    except (OSError, DatasetFormatError) as exc:
        raise UsageError(f"cannot load dataset {path}: {exc}")


def _load_value_checked(path) -> MlpValueFunction:
    try:
        return MlpValueFunction.load(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot load value network {path}: {exc}")


def _load_mpc_checked(path):
    try:
        return load_mpc(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot load scheme {path}: {exc}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args) -> int:
    block, global_seed = _load_block(args)
    seed = _resolve_seed(args, block, global_seed)
    env = _require_env(_resolve(args, block, "env"))
    alpha = float(_resolve(args, block, "alpha", 0.0))
    episodes = int(_resolve(args, block, "episodes", 100))
    steps = int(_resolve(args, block, "steps", 100))
    gamma = float(_resolve(args, block, "gamma", tasks.TASK_GAMMA))
    kind = str(_resolve(args, block, "policy", "mixture"))
    noise_scale = float(_resolve(args, block, "noise_scale", 0.5))
    epsilon = float(_resolve(args, block, "epsilon", 1.0))
    anneal = bool(_resolve(args, block, "anneal", True))
    mismatch_seed = int(_resolve(args, block, "mismatch_seed", seed))
    out = str(_resolve(args, block, "out", "dataset.csv"))
    resolved = {
        "command": "gen-data",
        "env": env,
        "alpha": alpha,
        "episodes": episodes,
        "steps": steps,
        "gamma": gamma,
        "policy": kind,
        "noise_scale": noise_scale,
        "epsilon": epsilon,
        "anneal": anneal,
        "mismatch_seed": mismatch_seed,
        "seed": seed,
        "out": out,
    }
    plant = make_plant(env, alpha)
    mpc1 = None
    if kind != "uniform_random":
        mismatch = ModelMismatch.sample(env, alpha, mismatch_seed)
        mpc1 = tasks.build_nominal_mpc(env, mismatch)
    policy = BehaviorPolicy(
        kind=kind, noise_scale=noise_scale, epsilon=epsilon, anneal=anneal, mpc=mpc1
    )
    dataset = generate(plant, policy, episodes, steps, seed=seed, gamma=gamma)
    save_dataset(dataset, out)
    _write_provenance(out, resolved, seed)
    print(f"wrote {out}: {len(dataset)} transitions ({episodes} episodes x {steps} steps)")
    return 0


def _parse_hidden(value) -> tuple:
    widths = _int_list(value, "--hidden")
    if widths is None:
        widths = tasks.VALUE_HIDDEN_WIDTHS
    if not widths or any(w < 1 for w in widths):
        raise UsageError("--hidden needs at least one positive layer width")
    return widths


def cmd_fit_value(args) -> int:
    block, global_seed = _load_block(args)
    seed = _resolve_seed(args, block, global_seed)
    data = _resolve(args, block, "data")
    if data is None:
        raise UsageError("--data is required")
    out = str(_resolve(args, block, "out", "value.json"))
    epochs = int(_resolve(args, block, "epochs", 200))
    learning_rate = float(_resolve(args, block, "learning_rate", 1e-3))
    batch_size = int(_resolve(args, block, "batch_size", 256))
    target_refresh = int(_resolve(args, block, "target_refresh", 100))
    hidden = _parse_hidden(_resolve(args, block, "hidden"))
    trace = _resolve(args, block, "trace")
    resolved = {
        "command": "fit-value",
        "data": str(data),
        "out": out,
        "epochs": epochs,
        "learning_rate": learning_rate,
        "batch_size": batch_size,
        "target_refresh": target_refresh,
        "hidden": list(hidden),
        "trace": None if trace is None else str(trace),
        "seed": seed,
    }
    dataset = _load_dataset_checked(data)
    input_map = tasks.value_input_map(dataset.meta.env_id)
    states, _, _, _ = dataset.arrays()
    X = np.stack([input_map(s) for s in states]) if input_map is not None else states
    mean, std = normalizer_from_data(X)
    v0 = MlpValueFunction.initialize(
        [X.shape[1], *hidden, 1], seed=seed, input_mean=mean, input_std=std
    )
    cfg = TdFitConfig(
        learning_rate=learning_rate,
        batch_size=batch_size,
        epochs=epochs,
        target_refresh_interval=target_refresh,
        seed=seed,
    )
    fitted, losses = fit_td(v0, dataset, cfg, input_map=input_map)
    fitted.save(out)
    _write_provenance(out, resolved, seed)
    if trace is not None:
        with open(trace, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss"])
            for i, loss in enumerate(losses, start=1):
                writer.writerow([i, repr(float(loss))])
        _write_provenance(trace, resolved, seed)
    final = f"final TD loss {losses[-1]:.6g}" if losses else "no training epochs"
    print(f"wrote {out}: fit on {len(dataset)} transitions, {final}")
    return 0


def cmd_learn_mpc(args) -> int:
    block, global_seed = _load_block(args)
    seed = _resolve_seed(args, block, global_seed)
    data = _resolve(args, block, "data")
    value = _resolve(args, block, "value")
    if data is None or value is None:
        raise UsageError("--data and --value are required")
    out = str(_resolve(args, block, "out", "mpc.json"))
    learn_model = bool(_resolve(args, block, "learn_model", False))
    alpha = float(_resolve(args, block, "alpha", 0.0))
    mismatch_seed = int(_resolve(args, block, "mismatch_seed", seed))
    init = _resolve(args, block, "init")
    epochs = int(_resolve(args, block, "epochs", 100))
    learning_rate = float(_resolve(args, block, "learning_rate", 1e-3))
    batch_size = int(_resolve(args, block, "batch_size", 256))
    l2_weight = _resolve(args, block, "l2_weight")
    trace = _resolve(args, block, "trace")
    resolved = {
        "command": "learn-mpc",
        "data": str(data),
        "value": str(value),
        "out": out,
        "learn_model": learn_model,
        "alpha": alpha,
        "mismatch_seed": mismatch_seed,
        "init": None if init is None else str(init),
        "epochs": epochs,
        "learning_rate": learning_rate,
        "batch_size": batch_size,
        "l2_weight": None if l2_weight is None else float(l2_weight),
        "trace": None if trace is None else str(trace),
        "seed": seed,
    }
    dataset = _load_dataset_checked(data)
    vphi = _load_value_checked(value)
    env = dataset.meta.env_id
    if env not in tasks.TASK_IDS:
        raise UsageError(f"dataset has unknown environment {env!r}")
    if init is not None:
        theta_init = _load_mpc_checked(init)
    else:
        mismatch = ModelMismatch.sample(env, alpha, mismatch_seed)
        theta_init = tasks.build_nominal_mpc(env, mismatch)
    cfg = LearnConfig(
        theta_init=theta_init,
        learn_model=learn_model,
        l2_weight=None if l2_weight is None else float(l2_weight),
        learning_rate=learning_rate,
        batch_size=batch_size,
        epochs=epochs,
        seed=seed,
    )
    scheme, trace_rows = learn(vphi, dataset, cfg, input_map=tasks.value_input_map(env))
    save_mpc(scheme, out)
    _write_provenance(out, resolved, seed)
    if trace is not None:
        write_learn_trace(trace_rows, trace)
        _write_provenance(trace, resolved, seed)
    print(
        f"wrote {out}: residual rms {trace_rows[0]['residual_rms']:.6g} -> "
        f"{trace_rows[-1]['residual_rms']:.6g} over {epochs} epochs"
        f" (model {'learned' if learn_model else 'fixed'})"
    )
    return 0


def cmd_eval(args) -> int:
    block, global_seed = _load_block(args)
    seed = _resolve_seed(args, block, global_seed)
    env = _require_env(_resolve(args, block, "env"))
    alpha = float(_resolve(args, block, "alpha", 0.0))
    mpc_path = _resolve(args, block, "mpc")
    steps = int(_resolve(args, block, "steps", 100))
    gamma = float(_resolve(args, block, "gamma", tasks.TASK_GAMMA))
    mismatch_seed = int(_resolve(args, block, "mismatch_seed", seed))
    default_label = "mpc1" if mpc_path is None else "learned"
    label = str(_resolve(args, block, "label", default_label))
    out = str(_resolve(args, block, "out", "report.csv"))
    resolved = {
        "command": "eval",
        "env": env,
        "alpha": alpha,
        "mpc": None if mpc_path is None else str(mpc_path),
        "steps": steps,
        "gamma": gamma,
        "mismatch_seed": mismatch_seed,
        "label": label,
        "out": out,
        "seed": seed,
    }
    if mpc_path is not None:
        scheme = _load_mpc_checked(mpc_path)
    else:
        scheme = tasks.build_nominal_mpc(env, ModelMismatch.sample(env, alpha, mismatch_seed))
    plant = make_plant(env, alpha)
    sweep_cfg = SweepConfig(env_id=env, seeds=(seed,), eval_steps=steps, gamma=gamma)
    j_ref = reference_return(sweep_cfg, alpha)
    J = mean_return(
        plant, MpcController(scheme), tasks.eval_initial_states(env), steps, gamma
    )
    rel = relative_performance(J, j_ref)
    report = EvalReport(
        task=env,
        rows=[
            EvalRow(
                task=env, scheme=label, alpha=alpha, seed=seed, J=J, J_ref=j_ref, rel=rel
            )
        ],
    )
    write_report_csv(report, out)
    _write_provenance(out, resolved, seed)
    print(f"{label} on {env} at alpha={alpha:g}: J={J:.6g} J_ref={j_ref:.6g} rel={rel:.4f}")
    return 0


def cmd_sweep(args) -> int:
    block, global_seed = _load_block(args)
    seed_flag = getattr(args, "seed", None)
    alphas = _float_list(_resolve(args, block, "alphas"), "--alphas")
    seeds = _int_list(_resolve(args, block, "seeds"), "--seeds")
    if seeds is None:
        base = _resolve_seed(args, block, global_seed)
        n_seeds = int(_resolve(args, block, "n_seeds", 10))
        seeds = tuple(range(base, base + n_seeds))
    elif seed_flag is not None:
        raise UsageError("--seed and --seeds are mutually exclusive for sweep")
    env = _require_env(_resolve(args, block, "env"))
    schemes = _str_list(_resolve(args, block, "schemes"))
    config = SweepConfig(
        env_id=env,
        alphas=alphas,
        seeds=seeds,
        schemes=schemes if schemes is not None else ("mpc1", "mpc2", "mpc3"),
        episodes=int(_resolve(args, block, "episodes", 100)),
        episode_length=int(_resolve(args, block, "steps", 100)),
        eval_steps=int(_resolve(args, block, "eval_steps", 100)),
        gamma=float(_resolve(args, block, "gamma", tasks.TASK_GAMMA)),
        value_widths=_parse_hidden(_resolve(args, block, "hidden")),
        value_epochs=int(_resolve(args, block, "value_epochs", 200)),
        value_learning_rate=float(_resolve(args, block, "value_learning_rate", 1e-3)),
        value_batch_size=int(_resolve(args, block, "value_batch_size", 256)),
        learn_epochs=int(_resolve(args, block, "learn_epochs", 100)),
        learn_learning_rate=float(_resolve(args, block, "learn_learning_rate", 1e-3)),
        learn_batch_size=int(_resolve(args, block, "learn_batch_size", 256)),
        l2_weight=(
            None
            if _resolve(args, block, "l2_weight") is None
            else float(_resolve(args, block, "l2_weight"))
        ),
        jobs=int(_resolve(args, block, "jobs", 1)),
    )
    out_dir = str(_resolve(args, block, "out_dir", "sweep_out"))
    resolved = {"command": "sweep", "out_dir": out_dir, **asdict(config)}
    report = sweep(config)
    os.makedirs(out_dir, exist_ok=True)
    provenance_seed = seeds[0]
    report_path = os.path.join(out_dir, "report.csv")
    write_report_csv(report, report_path)
    _write_provenance(report_path, resolved, provenance_seed)
    agg_path = os.path.join(out_dir, "aggregates.csv")
    write_aggregates_csv(compute_aggregates(report.rows), agg_path)
    _write_provenance(agg_path, resolved, provenance_seed)
    plot_path = os.path.join(out_dir, "relative_performance.png")
    plot_report(report, plot_path)
    _write_provenance(plot_path, resolved, provenance_seed)
    if report.failures:
        fail_path = os.path.join(out_dir, "failures.csv")
        write_failures_csv(report.failures, fail_path)
        _write_provenance(fail_path, resolved, provenance_seed)
        for failure in report.failures:
            print(
                f"cell failed: alpha={failure.alpha:g} seed={failure.seed} "
                f"stage={failure.stage}: {failure.message}",
                file=sys.stderr,
            )
    if not report.rows:
        raise NumericalError(
            f"all {len(config.alphas) * len(config.seeds)} sweep cells failed; "
            f"first failure in stage {report.failures[0].stage}: {report.failures[0].message}"
        )
    for agg in compute_aggregates(report.rows):
        print(
            f"{agg.task} {agg.scheme} alpha={agg.alpha:g}: "
            f"rel {agg.rel_mean:.4f} +- {agg.rel_std:.4f} (n={agg.n})"
        )
    print(f"wrote {report_path}, {agg_path}, {plot_path}")
    return 0


def cmd_verify_theorem1(args) -> int:
    block, global_seed = _load_block(args)
    seed = _resolve_seed(args, block, global_seed)
    trials = int(_resolve(args, block, "trials", 100))
    states = int(_resolve(args, block, "states", 100))
    dim = _resolve(args, block, "dim", 2)
    dim = None if dim in (None, 0, "0") else int(dim)
    horizon = int(_resolve(args, block, "horizon", 20))
    tolerance = float(_resolve(args, block, "tolerance", 1e-6))
    report = verify_value_equivalence(
        instances=trials,
        states_per_instance=states,
        horizon=horizon,
        seed=seed,
        tolerance=tolerance,
        dim=dim,
    )
    dims = "mixed" if dim is None else str(dim)
    print(
        f"checked {trials} random LQ instances x {states} states "
        f"(state dim {dims}, horizon {horizon})"
    )
    print(f"max policy deviation:     {report.max_action_error:.3e}")
    print(f"max value error:          {report.max_value_error:.3e}")
    print(f"max action-value error:   {report.max_action_value_error:.3e}")
    print(f"tolerance:                {tolerance:g}")
    if report.passed:
        print("PASS: modified-cost MPC reproduces the optimal controller")
        return 0
    print(
        f"numerical failure in verify-theorem1: max deviation exceeds {tolerance:g}",
        file=sys.stderr,
    )
    return 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="offline-mpc",
        description="Learn and evaluate parameterized MPC schemes from offline data.",
    )
    parser.add_argument("--version", action="version", version=f"offline-mpc {__version__}")
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", help="JSON config file with per-command blocks")
        p.add_argument("--seed", type=int, help="random seed (config/OFFLINE_MPC_SEED/0)")

    p = sub.add_parser("gen-data", help="roll out a behavior policy and save transitions")
    common(p)
    p.add_argument("--env", help="task: linear, pendulum, or cartpole")
    p.add_argument("--alpha", type=float, help="model mismatch scale (default 0)")
    p.add_argument("--episodes", type=int, help="number of episodes (default 100)")
    p.add_argument("--steps", type=int, help="steps per episode (default 100)")
    p.add_argument("--gamma", type=float, help="discount factor (default 0.9)")
    p.add_argument(
        "--policy", choices=("mixture", "noisy_mpc", "uniform_random"),
        help="behavior policy kind (default mixture)",
    )
    p.add_argument("--noise-scale", dest="noise_scale", type=float)
    p.add_argument("--epsilon", type=float, help="initial random-action probability")
    p.add_argument(
        "--anneal", dest="anneal", action=argparse.BooleanOptionalAction, default=None,
        help="anneal epsilon across episodes (default on)",
    )
    p.add_argument("--mismatch-seed", dest="mismatch_seed", type=int)
    p.add_argument("--out", help="dataset CSV path (default dataset.csv)")
    p.set_defaults(func=cmd_gen_data, block_name="gen_data")

    p = sub.add_parser("fit-value", help="fit the value network by TD regression")
    common(p)
    p.add_argument("--data", help="dataset CSV from gen-data")
    p.add_argument("--out", help="value network JSON path (default value.json)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--target-refresh", dest="target_refresh", type=int)
    p.add_argument("--hidden", help="hidden layer widths, e.g. 64,64")
    p.add_argument("--trace", help="optional CSV path for the per-epoch loss trace")
    p.set_defaults(func=cmd_fit_value, block_name="fit_value")

    p = sub.add_parser("learn-mpc", help="fit MPC stage cost (and optionally model)")
    common(p)
    p.add_argument("--data", help="dataset CSV from gen-data")
    p.add_argument("--value", help="value network JSON from fit-value")
    p.add_argument("--out", help="scheme JSON path (default mpc.json)")
    p.add_argument(
        "--learn-model", dest="learn_model", action=argparse.BooleanOptionalAction,
        default=None, help="also fit model parameters (default off)",
    )
    p.add_argument("--alpha", type=float, help="mismatch scale for the initial scheme")
    p.add_argument("--mismatch-seed", dest="mismatch_seed", type=int)
    p.add_argument("--init", help="initial scheme JSON (overrides --alpha construction)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--l2-weight", dest="l2_weight", type=float)
    p.add_argument("--trace", help="optional CSV path for the learning trace")
    p.set_defaults(func=cmd_learn_mpc, block_name="learn_mpc")

    p = sub.add_parser("eval", help="closed-loop evaluation of a scheme")
    common(p)
    p.add_argument("--env", help="task: linear, pendulum, or cartpole")
    p.add_argument("--alpha", type=float, help="true-plant mismatch scale (default 0)")
    p.add_argument("--mpc", help="scheme JSON (default: nominal scheme at --alpha)")
    p.add_argument("--steps", type=int, help="rollout length (default 100)")
    p.add_argument("--gamma", type=float)
    p.add_argument("--mismatch-seed", dest="mismatch_seed", type=int)
    p.add_argument("--label", help="scheme name recorded in the report")
    p.add_argument("--out", help="report CSV path (default report.csv)")
    p.set_defaults(func=cmd_eval, block_name="eval")

    p = sub.add_parser("sweep", help="full pipeline over a mismatch-by-seed grid")
    common(p)
    p.add_argument("--env", help="task: linear, pendulum, or cartpole")
    p.add_argument("--alphas", help="comma-separated mismatch scales (default task grid)")
    p.add_argument("--seeds", help="comma-separated seeds (default 10 from --seed)")
    p.add_argument("--n-seeds", dest="n_seeds", type=int, help="seed count when --seeds absent")
    p.add_argument("--schemes", help="subset of mpc1,mpc2,mpc3")
    p.add_argument("--episodes", type=int)
    p.add_argument("--steps", type=int, help="steps per data episode")
    p.add_argument("--eval-steps", dest="eval_steps", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--hidden", help="value net hidden widths, e.g. 64,64")
    p.add_argument("--value-epochs", dest="value_epochs", type=int)
    p.add_argument("--value-learning-rate", dest="value_learning_rate", type=float)
    p.add_argument("--value-batch-size", dest="value_batch_size", type=int)
    p.add_argument("--learn-epochs", dest="learn_epochs", type=int)
    p.add_argument("--learn-learning-rate", dest="learn_learning_rate", type=float)
    p.add_argument("--learn-batch-size", dest="learn_batch_size", type=int)
    p.add_argument("--l2-weight", dest="l2_weight", type=float)
    p.add_argument("--jobs", type=int, help="parallel worker processes (default 1)")
    p.add_argument("--out-dir", dest="out_dir", help="output directory (default sweep_out)")
    p.set_defaults(func=cmd_sweep, block_name="sweep")

    p = sub.add_parser(
        "verify-theorem1",
        help="check that modified-cost MPC reproduces the optimal LQ controller",
    )
    common(p)
    p.add_argument("--trials", type=int, help="number of random LQ instances (default 100)")
    p.add_argument("--states", type=int, help="random states per instance (default 100)")
    p.add_argument("--dim", type=int, help="state dimension; 0 mixes 2-4 (default 2)")
    p.add_argument("--horizon", type=int, help="MPC horizon (default 20)")
    p.add_argument("--tolerance", type=float, help="pass threshold (default 1e-6)")
    p.set_defaults(func=cmd_verify_theorem1, block_name="verify_theorem1")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure in {args.command}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
