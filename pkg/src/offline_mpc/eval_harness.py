"""Closed-loop evaluation: rollouts, mismatch sweeps, reports, and plots.

A sweep runs the full offline pipeline per (alpha, seed) cell — sample a
model mismatch, build the nominal scheme, collect a dataset on the true
plant, fit the value network, learn the improved schemes — then rolls every
scheme out from a fixed set of initial states and scores it against a
task-specific reference controller (the true-plant LQR for the linear task,
the true-model nominal scheme for the angle tasks).

Returns are discounted closed-loop costs, so lower is better; reports store
the relative performance J_ref / J, which is 1 for reference-equivalent
controllers and falls toward 0 as a controller degrades.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import tasks
from .core import DiscountedReturn, NumericalError, discounted_return
from .datagen import BehaviorPolicy, generate
from .envs import LinearPlant, ModelMismatch, make_plant
from .ilqr import CLOSED_LOOP_MAX_ITER
from .lqr_oracle import DiscountedLqr
from .mpc import ParameterizedMpc
from .offline_learner import LearnConfig, learn
from .value_net import MlpValueFunction, TdFitConfig, fit_td, normalizer_from_data

SCHEMES = ("mpc1", "mpc2", "mpc3")
REPORT_HEADER = ("task", "scheme", "alpha", "seed", "J", "J_ref", "rel")
AGGREGATE_HEADER = ("task", "scheme", "alpha", "rel_mean", "rel_std", "n")
FAILURE_HEADER = ("task", "alpha", "seed", "stage", "message")


class MpcController:
    """Stateful closed-loop wrapper that warm-starts from the previous plan."""

    def __init__(self, mpc: ParameterizedMpc):
        self.mpc = mpc
        self._warm = None

    def reset(self) -> None:
        self._warm = None

    def act(self, state) -> np.ndarray:
        solution = self.mpc.solve(
            state, warm_start=self._warm, max_iter=CLOSED_LOOP_MAX_ITER
        )
        self._warm = np.vstack([solution.actions[1:], solution.actions[-1:]])
        return solution.actions[0]


class LqrController:
    """Memoryless infinite-horizon linear feedback a = -K s."""

    def __init__(self, lqr: DiscountedLqr):
        self.lqr = lqr

    def reset(self) -> None:
        pass

    def act(self, state) -> np.ndarray:
        return self.lqr.optimal_policy(state)


def rollout(plant, controller, initial_state, steps: int, gamma: float):
    """Simulate the closed loop for `steps` steps on the true plant.

    `controller` is either an object with act()/reset() or a plain callable
    state -> action. Returns (DiscountedReturn, states, actions) where states
    has steps + 1 rows. A controller exception aborts the rollout with a
    NumericalError naming the failing step.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    act = controller.act if hasattr(controller, "act") else controller
    if hasattr(controller, "reset"):
        controller.reset()
    s = np.asarray(initial_state, dtype=float).reshape(-1)
    states = [s.copy()]
    actions = []
    costs = []
    for k in range(steps):
        try:
            a = np.asarray(act(s), dtype=float).reshape(-1)
        except Exception as exc:
            raise NumericalError(f"controller failed at rollout step {k}: {exc}") from exc
        a = plant.clamp(a)
        costs.append(plant.stage_cost(s, a))
        s = plant.step(s, a)
        states.append(s.copy())
        actions.append(a)
    ret = DiscountedReturn(
        value=discounted_return(costs, gamma), gamma=float(gamma), horizon=steps
    )
    return ret, np.array(states), np.array(actions)


def mean_return(plant, controller, initial_states, steps: int, gamma: float) -> float:
    """Average discounted return over a fixed set of initial states."""
    values = [
        rollout(plant, controller, s0, steps, gamma)[0].value for s0 in initial_states
    ]
    return float(np.mean(values))


def relative_performance(J: float, J_ref: float) -> float:
    """J_ref / J for positive discounted costs (1 = reference parity)."""
    if not (np.isfinite(J) and np.isfinite(J_ref)) or J <= 0.0 or J_ref <= 0.0:
        raise ValueError(
            f"relative performance needs positive finite returns, got J={J}, J_ref={J_ref}"
        )
    return float(J_ref) / float(J)


@dataclass(frozen=True)
class EvalRow:
    task: str
    scheme: str
    alpha: float
    seed: int
    J: float
    J_ref: float
    rel: float


@dataclass(frozen=True)
class AggregateRow:
    task: str
    scheme: str
    alpha: float
    rel_mean: float
    rel_std: float
    n: int


@dataclass(frozen=True)
class CellFailure:
    task: str
    alpha: float
    seed: int
    stage: str
    message: str


@dataclass
class EvalReport:
    task: str
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def aggregates(self) -> list:
        return compute_aggregates(self.rows)


@dataclass(frozen=True)
class SweepConfig:
    """Everything a mismatch sweep needs; defaults give the desk-scale study."""

    env_id: str
    alphas: tuple = None
    seeds: tuple = tuple(range(10))
    schemes: tuple = SCHEMES
    episodes: int = 100
    episode_length: int = 100
    eval_steps: int = 100
    gamma: float = tasks.TASK_GAMMA
    value_widths: tuple = tasks.VALUE_HIDDEN_WIDTHS
    value_epochs: int = 400
    value_learning_rate: float = 1e-3
    value_batch_size: int = 256
    learn_epochs: int = 100
    learn_learning_rate: float = 1e-3
    learn_batch_size: int = 256
    l2_weight: float = None
    jobs: int = 1

    def __post_init__(self):
        if self.env_id not in tasks.TASK_IDS:
            raise ValueError(f"unknown environment id {self.env_id!r}")
        alphas = self.alphas if self.alphas is not None else tasks.ALPHA_GRID[self.env_id]
        object.__setattr__(self, "alphas", tuple(float(a) for a in alphas))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "value_widths", tuple(int(w) for w in self.value_widths))
        if not self.alphas or not self.seeds:
            raise ValueError("alphas and seeds must be non-empty")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ValueError(f"unknown schemes {unknown}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")


def _fit_value(dataset, config: SweepConfig, input_map, seed: int) -> MlpValueFunction:
    s, _, _, _ = dataset.arrays()
    X = np.stack([input_map(x) for x in s]) if input_map is not None else s
    mean, std = normalizer_from_data(X)
    widths = [X.shape[1], *config.value_widths, 1]
    v0 = MlpValueFunction.initialize(widths, seed=seed, input_mean=mean, input_std=std)
    cfg = TdFitConfig(
        learning_rate=config.value_learning_rate,
        batch_size=config.value_batch_size,
        epochs=config.value_epochs,
        seed=seed,
    )
    fitted, _ = fit_td(v0, dataset, cfg, input_map=input_map)
    return fitted


def _learn_config(
    config: SweepConfig, mpc1: ParameterizedMpc, learn_model: bool, seed: int
) -> LearnConfig:
    return LearnConfig(
        theta_init=mpc1,
        learn_model=learn_model,
        l2_weight=config.l2_weight,
        learning_rate=config.learn_learning_rate,
        batch_size=config.learn_batch_size,
        epochs=config.learn_epochs,
        seed=seed,
    )


def reference_return(config: SweepConfig, alpha: float) -> float:
    """Mean return of the task's reference controller on the true plant.

    Linear: the infinite-horizon discounted LQR for the alpha-perturbed true
    dynamics. Angle tasks: the nominal scheme planning with the true model
    (the true plant does not depend on alpha there, so neither does this).
    """
    init_states = tasks.eval_initial_states(config.env_id)
    if config.env_id == "linear":
        plant = LinearPlant(alpha=float(alpha))
        controller = LqrController(tasks.linear_reference_lqr(alpha))
    else:
        plant = make_plant(config.env_id)
        controller = MpcController(tasks.build_mpc(config.env_id, plant))
    try:
        return mean_return(plant, controller, init_states, config.eval_steps, config.gamma)
    except Exception as exc:
        raise NumericalError(
            f"reference rollout failed for {config.env_id} at alpha={alpha}: {exc}"
        ) from exc


def run_cell(config: SweepConfig, alpha: float, seed: int, j_ref: float):
    """One (alpha, seed) cell of the sweep: full pipeline plus evaluation.

    Returns (rows, failures). A failure in any stage is captured with the
    stage name; rows produced before the failure are kept.
    """
    rows, failures = [], []
    stage = "setup"
    try:
        mismatch = ModelMismatch.sample(config.env_id, alpha, seed)
        plant = make_plant(config.env_id, alpha)
        mpc1 = tasks.build_nominal_mpc(config.env_id, mismatch)
        input_map = tasks.value_input_map(config.env_id)
        controllers = {"mpc1": mpc1}
        if "mpc2" in config.schemes or "mpc3" in config.schemes:
            stage = "gen-data"
            policy = BehaviorPolicy(kind="mixture", mpc=mpc1)
            dataset = generate(
                plant,
                policy,
                episodes=config.episodes,
                episode_length=config.episode_length,
                seed=seed,
                gamma=config.gamma,
            )
            stage = "fit-value"
            vphi = _fit_value(dataset, config, input_map, seed)
            if "mpc2" in config.schemes:
                stage = "learn-mpc2"
                cfg2 = _learn_config(config, mpc1, learn_model=False, seed=seed)
                controllers["mpc2"] = learn(vphi, dataset, cfg2, input_map=input_map)[0]
            if "mpc3" in config.schemes:
                stage = "learn-mpc3"
                cfg3 = _learn_config(config, mpc1, learn_model=True, seed=seed)
                controllers["mpc3"] = learn(vphi, dataset, cfg3, input_map=input_map)[0]
        init_states = tasks.eval_initial_states(config.env_id)
        for scheme in config.schemes:
            stage = f"eval-{scheme}"
            J = mean_return(
                plant,
                MpcController(controllers[scheme]),
                init_states,
                config.eval_steps,
                config.gamma,
            )
            rows.append(
                EvalRow(
                    task=config.env_id,
                    scheme=scheme,
                    alpha=float(alpha),
                    seed=int(seed),
                    J=J,
                    J_ref=j_ref,
                    rel=relative_performance(J, j_ref),
                )
            )
    except Exception as exc:
        failures.append(
            CellFailure(
                task=config.env_id,
                alpha=float(alpha),
                seed=int(seed),
                stage=stage,
                message=str(exc),
            )
        )
    return rows, failures


def _run_cell_packed(args):
    return run_cell(*args)


def sweep(config: SweepConfig) -> EvalReport:
    """Run every (alpha, seed) cell and collect rows and per-cell failures.

    Cells are independent given their seeds, so `config.jobs > 1` fans them
    out over processes without changing the result or its ordering.
    """
    refs = {}
    for alpha in config.alphas:
        key = alpha if config.env_id == "linear" else "shared"
        if key not in refs:
            refs[key] = reference_return(config, alpha)
    cells = [
        (config, alpha, seed, refs[alpha if config.env_id == "linear" else "shared"])
        for alpha in config.alphas
        for seed in config.seeds
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_run_cell_packed, cells))
    else:
        results = [run_cell(*cell) for cell in cells]
    report = EvalReport(task=config.env_id)
    for rows, failures in results:
        report.rows.extend(rows)
        report.failures.extend(failures)
    return report


def compute_aggregates(rows) -> list:
    """Per (scheme, alpha) mean/std of relative performance over seeds."""
    groups = {}
    for row in rows:
        groups.setdefault((row.task, row.scheme, row.alpha), []).append(row.rel)
    out = []
    for (task, scheme, alpha), rels in sorted(groups.items()):
        r = np.asarray(rels, dtype=float)
        out.append(
            AggregateRow(
                task=task,
                scheme=scheme,
                alpha=alpha,
                rel_mean=float(r.mean()),
                rel_std=float(r.std()),
                n=int(r.size),
            )
        )
    return out


def write_report_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for row in report.rows:
            writer.writerow(
                [
                    row.task,
                    row.scheme,
                    repr(float(row.alpha)),
                    row.seed,
                    repr(float(row.J)),
                    repr(float(row.J_ref)),
                    repr(float(row.rel)),
                ]
            )


def read_report_csv(path) -> EvalReport:
    rows = []
    with open(path, "r", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_HEADER:
            raise ValueError(f"unexpected report header in {path}: {reader.fieldnames}")
        for rec in reader:
            rows.append(
                EvalRow(
                    task=rec["task"],
                    scheme=rec["scheme"],
                    alpha=float(rec["alpha"]),
                    seed=int(rec["seed"]),
                    J=float(rec["J"]),
                    J_ref=float(rec["J_ref"]),
                    rel=float(rec["rel"]),
                )
            )
    task = rows[0].task if rows else ""
    return EvalReport(task=task, rows=rows)


def write_aggregates_csv(aggregates, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_HEADER)
        for agg in aggregates:
            writer.writerow(
                [
                    agg.task,
                    agg.scheme,
                    repr(float(agg.alpha)),
                    repr(float(agg.rel_mean)),
                    repr(float(agg.rel_std)),
                    agg.n,
                ]
            )


def read_aggregates_csv(path) -> list:
    out = []
    with open(path, "r", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != AGGREGATE_HEADER:
            raise ValueError(f"unexpected aggregate header in {path}: {reader.fieldnames}")
        for rec in reader:
            out.append(
                AggregateRow(
                    task=rec["task"],
                    scheme=rec["scheme"],
                    alpha=float(rec["alpha"]),
                    rel_mean=float(rec["rel_mean"]),
                    rel_std=float(rec["rel_std"]),
                    n=int(rec["n"]),
                )
            )
    return out


def write_failures_csv(failures, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FAILURE_HEADER)
        for f in failures:
            writer.writerow([f.task, repr(float(f.alpha)), f.seed, f.stage, f.message])


def plot_report(report: EvalReport, path) -> None:
    """Mean relative performance vs alpha with a +-1 std band per scheme."""
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    aggregates = compute_aggregates(report.rows)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for scheme in sorted({a.scheme for a in aggregates}):
        pts = sorted((a for a in aggregates if a.scheme == scheme), key=lambda a: a.alpha)
        x = np.array([a.alpha for a in pts])
        m = np.array([a.rel_mean for a in pts])
        s = np.array([a.rel_std for a in pts])
        ax.plot(x, m, marker="o", label=scheme)
        ax.fill_between(x, m - s, m + s, alpha=0.2)
    ax.set_xlabel("model mismatch scale alpha")
    ax.set_ylabel("relative performance J_ref / J")
    ax.set_title(report.task)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
