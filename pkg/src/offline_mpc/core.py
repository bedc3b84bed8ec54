"""Shared domain types: transitions, datasets, angle arithmetic, discounted returns.

Everything downstream (plants, solvers, learners, evaluation) builds on the
types in this module. All numeric fields are double precision and all types
are immutable after construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class NumericalError(RuntimeError):
    """Raised when an iterative numerical procedure fails to produce a result."""


def normalize_angle(phi: float) -> float:
    """Reduce an angle to the half-open interval (-pi, pi].

    The upper boundary is included: pi maps to pi and -pi maps to +pi.
    """
    phi = float(phi)
    if not math.isfinite(phi):
        raise ValueError(f"normalize_angle requires a finite angle, got {phi}")
    r = math.remainder(phi, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


def normalize_angle_array(phi: np.ndarray) -> np.ndarray:
    """Vectorized :func:`normalize_angle` for batched rollouts."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("normalize_angle requires finite angles")
    r = np.remainder(phi + math.pi, TWO_PI) - math.pi  # [-pi, pi)
    return np.where(r == -math.pi, math.pi, r)


def discounted_return(costs: Sequence[float], gamma: float) -> float:
    """Return sum_k gamma^k costs[k] for a finite cost sequence."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    c = np.asarray(costs, dtype=float)
    if c.size == 0:
        return 0.0
    if not np.all(np.isfinite(c)):
        raise ValueError("costs must be finite")
    return float(np.dot(gamma ** np.arange(c.size), c))


@dataclass(frozen=True)
class DiscountedReturn:
    """A discounted closed-loop return together with its accounting context."""

    value: float
    gamma: float
    horizon: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be positive, got {self.horizon}")


def _as_readonly_vector(x, name: str) -> np.ndarray:
    v = np.array(x, dtype=float, copy=True).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class Transition:
    """One observed sample (s, a, s_next, stage cost)."""

    state: np.ndarray
    action: np.ndarray
    next_state: np.ndarray
    cost: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "state", _as_readonly_vector(self.state, "state"))
        object.__setattr__(self, "action", _as_readonly_vector(self.action, "action"))
        object.__setattr__(
            self, "next_state", _as_readonly_vector(self.next_state, "next_state")
        )
        object.__setattr__(self, "cost", float(self.cost))
        if self.state.shape != self.next_state.shape:
            raise ValueError(
                "state and next_state dimensions differ: "
                f"{self.state.shape} vs {self.next_state.shape}"
            )
        if not math.isfinite(self.cost) or self.cost < 0.0:
            raise ValueError(f"cost must be finite and >= 0, got {self.cost}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Transition):
            return NotImplemented
        return (
            np.array_equal(self.state, other.state)
            and np.array_equal(self.action, other.action)
            and np.array_equal(self.next_state, other.next_state)
            and self.cost == other.cost
        )


@dataclass(frozen=True)
class DatasetMeta:
    """Provenance record stored alongside every dataset."""

    env_id: str
    gamma: float
    dt: float
    seed: int
    behavior_policy: str
    episode_length: int
    episode_count: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"meta.gamma must lie in [0, 1), got {self.gamma}")
        if self.episode_length < 1 or self.episode_count < 0:
            raise ValueError("episode_length must be >= 1 and episode_count >= 0")

    def to_dict(self) -> dict:
        return {
            "env_id": self.env_id,
            "gamma": self.gamma,
            "dt": self.dt,
            "seed": int(self.seed),
            "behavior_policy": self.behavior_policy,
            "episode_length": int(self.episode_length),
            "episode_count": int(self.episode_count),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetMeta":
        return cls(
            env_id=str(d["env_id"]),
            gamma=float(d["gamma"]),
            dt=float(d["dt"]),
            seed=int(d["seed"]),
            behavior_policy=str(d["behavior_policy"]),
            episode_length=int(d["episode_length"]),
            episode_count=int(d["episode_count"]),
        )


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of transitions with shared dimensions and metadata."""

    transitions: tuple
    meta: DatasetMeta
    state_dim: int = field(init=False)
    action_dim: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "transitions", tuple(self.transitions))
        if self.transitions:
            n = self.transitions[0].state.size
            m = self.transitions[0].action.size
            for i, t in enumerate(self.transitions):
                if t.state.size != n or t.action.size != m:
                    raise ValueError(
                        f"transition {i} has dimensions ({t.state.size}, {t.action.size}), "
                        f"expected ({n}, {m})"
                    )
        else:
            n, m = 0, 0
        object.__setattr__(self, "state_dim", n)
        object.__setattr__(self, "action_dim", m)

    def __len__(self) -> int:
        return len(self.transitions)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Stack the dataset into (states, actions, next_states, costs) arrays."""
        if not self.transitions:
            return (
                np.zeros((0, self.state_dim)),
                np.zeros((0, self.action_dim)),
                np.zeros((0, self.state_dim)),
                np.zeros(0),
            )
        s = np.stack([t.state for t in self.transitions])
        a = np.stack([t.action for t in self.transitions])
        sn = np.stack([t.next_state for t in self.transitions])
        c = np.array([t.cost for t in self.transitions])
        return s, a, sn, c


def _meta_path(path: Path) -> Path:
    if path.suffix == ".csv":
        return path.with_suffix(".meta.json")
    return Path(str(path) + ".meta.json")


def _format_float(x: float) -> str:
    """Shortest decimal representation that round-trips to the same double."""
    return repr(float(x))


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset as a CSV transition table plus a JSON metadata sidecar.

    The CSV schema is `s0..s{n-1},a0..a{m-1},sn0..sn{n-1},cost`; floats are
    written in shortest round-trip form so that load(save(d)) is bit-exact.
    """
    path = Path(path)
    n, m = dataset.state_dim, dataset.action_dim
    header = (
        [f"s{i}" for i in range(n)]
        + [f"a{j}" for j in range(m)]
        + [f"sn{i}" for i in range(n)]
        + ["cost"]
    )
    lines = [",".join(header)]
    for t in dataset.transitions:
        row = (
            [_format_float(v) for v in t.state]
            + [_format_float(v) for v in t.action]
            + [_format_float(v) for v in t.next_state]
            + [_format_float(t.cost)]
        )
        lines.append(",".join(row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    meta = dict(dataset.meta.to_dict())
    meta["state_dim"] = n
    meta["action_dim"] = m
    _meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


class DatasetFormatError(ValueError):
    """Raised when a dataset file is malformed or inconsistent."""


def load_dataset(path) -> Dataset:
    """Read a dataset written by :func:`save_dataset`."""
    path = Path(path)
    meta_file = _meta_path(path)
    if not meta_file.exists():
        raise DatasetFormatError(f"missing metadata sidecar {meta_file}")
    raw_meta = json.loads(meta_file.read_text())
    try:
        n = int(raw_meta.pop("state_dim"))
        m = int(raw_meta.pop("action_dim"))
        meta = DatasetMeta.from_dict(raw_meta)
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"invalid metadata in {meta_file}: {exc}") from exc

    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DatasetFormatError(f"{path}: empty file, expected a header row")
    expected_header = (
        [f"s{i}" for i in range(n)]
        + [f"a{j}" for j in range(m)]
        + [f"sn{i}" for i in range(n)]
        + ["cost"]
    )
    header = [h.strip() for h in lines[0].split(",")]
    if header != expected_header:
        raise DatasetFormatError(
            f"{path}: line 1: header {header!r} does not match dimensions "
            f"(state_dim={n}, action_dim={m})"
        )
    width = 2 * n + m + 1
    transitions = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != width:
            raise DatasetFormatError(
                f"{path}: line {lineno}: expected {width} columns, got {len(cells)}"
            )
        try:
            vals = [float(c) for c in cells]
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: line {lineno}: {exc}") from exc
        transitions.append(
            Transition(
                state=np.array(vals[:n]),
                action=np.array(vals[n : n + m]),
                next_state=np.array(vals[n + m : n + m + n]),
                cost=vals[-1],
            )
        )
    return Dataset(transitions=tuple(transitions), meta=meta)
