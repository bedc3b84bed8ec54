"""Core data types: angle helpers, discounted returns, datasets and their files."""

import math

import numpy as np
import pytest

from offline_mpc.core import (
    Dataset,
    DatasetFormatError,
    DatasetMeta,
    DiscountedReturn,
    Transition,
    discounted_return,
    load_dataset,
    normalize_angle,
    normalize_angle_array,
    save_dataset,
)


def test_normalize_angle_range_and_fixed_points():
    assert normalize_angle(0.0) == 0.0
    assert normalize_angle(math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(2.0 * math.pi) == pytest.approx(0.0, abs=1e-12)
    assert normalize_angle(3.5 * math.pi) == pytest.approx(-0.5 * math.pi)
    rng = np.random.default_rng(0)
    for phi in rng.uniform(-50.0, 50.0, size=200):
        out = normalize_angle(phi)
        assert -math.pi < out <= math.pi
        # Same point on the circle.
        assert math.isclose(math.cos(out), math.cos(phi), abs_tol=1e-12)
        assert math.isclose(math.sin(out), math.sin(phi), abs_tol=1e-12)


def test_normalize_angle_array_matches_scalar():
    rng = np.random.default_rng(1)
    phis = rng.uniform(-30.0, 30.0, size=64)
    out = normalize_angle_array(phis)
    expected = np.array([normalize_angle(p) for p in phis])
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_discounted_return_hand_arithmetic():
    # 1 + 0.5*2 + 0.25*3 = 2.75
    assert discounted_return([1.0, 2.0, 3.0], 0.5) == pytest.approx(2.75)
    assert discounted_return([4.0], 0.9) == pytest.approx(4.0)
    assert discounted_return([], 0.9) == 0.0
    # gamma = 0 keeps only the first cost.
    assert discounted_return([7.0, 100.0], 0.0) == pytest.approx(7.0)


def test_discounted_return_record_validation():
    r = DiscountedReturn(value=1.5, gamma=0.9, horizon=10)
    assert r.value == 1.5
    with pytest.raises(ValueError):
        DiscountedReturn(value=1.0, gamma=1.0, horizon=10)


def test_transition_validation_and_equality():
    t = Transition(state=[1.0, 2.0], action=[0.5], next_state=[1.1, 2.1], cost=3.0)
    assert not t.state.flags.writeable
    assert not t.action.flags.writeable
    assert t == Transition(state=[1.0, 2.0], action=[0.5], next_state=[1.1, 2.1], cost=3.0)
    assert t != Transition(state=[1.0, 2.0], action=[0.5], next_state=[1.1, 2.1], cost=3.5)
    with pytest.raises(ValueError):
        Transition(state=[1.0], action=[0.0], next_state=[1.0, 2.0], cost=0.0)
    with pytest.raises(ValueError):
        Transition(state=[1.0], action=[0.0], next_state=[1.0], cost=-1.0)
    with pytest.raises(ValueError):
        Transition(state=[1.0], action=[0.0], next_state=[1.0], cost=float("nan"))


def test_dataset_meta_validation_and_dict_round_trip():
    meta = DatasetMeta(
        env_id="linear",
        gamma=0.9,
        dt=0.1,
        seed=7,
        behavior_policy="mixture(noise_scale=0.5, epsilon=1.0, anneal=True)",
        episode_length=100,
        episode_count=3,
    )
    assert DatasetMeta.from_dict(meta.to_dict()) == meta
    with pytest.raises(ValueError):
        DatasetMeta(
            env_id="linear",
            gamma=1.0,
            dt=0.1,
            seed=0,
            behavior_policy="x",
            episode_length=1,
            episode_count=1,
        )


def _tiny_dataset(n=5, seed=2):
    rng = np.random.default_rng(seed)
    transitions = [
        Transition(
            state=rng.normal(size=3),
            action=rng.normal(size=2),
            next_state=rng.normal(size=3),
            cost=float(rng.uniform(0.0, 4.0)),
        )
        for _ in range(n)
    ]
    meta = DatasetMeta(
        env_id="linear",
        gamma=0.9,
        dt=0.1,
        seed=seed,
        behavior_policy="uniform_random",
        episode_length=n,
        episode_count=1,
    )
    return Dataset(transitions=tuple(transitions), meta=meta)


def test_dataset_dimension_checks_and_arrays():
    ds = _tiny_dataset()
    assert len(ds) == 5
    assert (ds.state_dim, ds.action_dim) == (3, 2)
    s, a, sn, c = ds.arrays()
    assert s.shape == (5, 3) and a.shape == (5, 2) and sn.shape == (5, 3)
    np.testing.assert_array_equal(s[0], ds.transitions[0].state)
    np.testing.assert_array_equal(c, [t.cost for t in ds.transitions])
    bad = list(ds.transitions) + [
        Transition(state=[0.0], action=[0.0], next_state=[0.0], cost=0.0)
    ]
    with pytest.raises(ValueError):
        Dataset(transitions=tuple(bad), meta=ds.meta)


def test_dataset_save_load_round_trip(tmp_path):
    ds = _tiny_dataset()
    path = tmp_path / "data.csv"
    save_dataset(ds, path)
    loaded = load_dataset(path)
    assert loaded.meta == ds.meta
    assert loaded.transitions == ds.transitions
    # Saving the loaded dataset reproduces the files byte for byte.
    path2 = tmp_path / "again.csv"
    save_dataset(loaded, path2)
    assert path2.read_bytes() == path.read_bytes()
    assert (tmp_path / "again.meta.json").read_bytes() == (
        tmp_path / "data.meta.json"
    ).read_bytes()


def test_load_dataset_rejects_malformed_files(tmp_path):
    ds = _tiny_dataset()
    path = tmp_path / "data.csv"
    save_dataset(ds, path)
    with pytest.raises(DatasetFormatError):
        load_dataset(tmp_path / "missing.csv")
    # Wrong column count on a data row.
    lines = path.read_text().splitlines()
    lines[1] = lines[1] + ",0.0"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError):
        load_dataset(path)
    # Unparseable float.
    save_dataset(ds, path)
    text = path.read_text().replace(text_first_value(path), "not_a_number", 1)
    path.write_text(text)
    with pytest.raises(DatasetFormatError):
        load_dataset(path)


def text_first_value(path):
    return path.read_text().splitlines()[1].split(",")[0]
