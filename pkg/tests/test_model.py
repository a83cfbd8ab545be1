import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cgda.errors import EmptyIntervalError, InvalidArgument, ParseError, SchemaError
from cgda.model import (
    Demonstration,
    FeatureTrajectory,
    compute_goal_count,
    generalize,
    load_demonstrations,
    read_demonstration,
    resample_observation,
    write_demonstration,
)


def brute_interval_means(demos, n):
    """Reference binning: scan interval edges in exact rational arithmetic."""
    m = demos[0].values.shape[1]
    sums = np.zeros((m, n))
    counts = np.zeros(n)
    for d in demos:
        D = Fraction(float(d.t[-1]))
        for t, row in zip(d.t, d.values):
            j = 0
            while j + 1 < n and Fraction(float(t)) >= (j + 1) * D / n:
                j += 1
            sums[:, j] += row
            counts[j] += 1
    return sums / counts


@pytest.mark.parametrize("d, tmin, n", [(130.2, 10, 13), (28.1, 3, 9), (10, 10, 1), (29.99, 3, 9)])
def test_goal_count(d, tmin, n):
    assert compute_goal_count(d, tmin) == n


@pytest.mark.parametrize("d, tmin", [(5, 10), (0, 1), (10, 0), (-1, -2)])
def test_goal_count_rejects(d, tmin):
    with pytest.raises(InvalidArgument):
        compute_goal_count(d, tmin)


def test_single_interval_mean():
    demo = Demonstration("a", ("f",), np.array([0.0, 1.0]), np.array([[2.0], [4.0]]))
    x = generalize([demo], 1.0)
    assert x.values.tolist() == [[3.0]]


def test_constant_demos_give_constant_goals():
    demos = [
        Demonstration(str(k), ("a", "b"), np.linspace(0, 20 + k, 50), np.full((50, 2), 7.5))
        for k in range(3)
    ]
    x = generalize(demos, 4.0)
    assert np.all(x.values == 7.5)


def test_empty_interval_is_an_error():
    demo = Demonstration("sparse", ("f",), np.array([0.0, 0.5, 10.0]), np.array([[0.0], [1.0], [2.0]]))
    with pytest.raises(EmptyIntervalError, match="interval 1"):
        generalize([demo], 2.0)


def test_empty_demo_list():
    with pytest.raises(InvalidArgument):
        generalize([], 1.0)


def test_tmin_longer_than_demos():
    demo = Demonstration("a", ("f",), np.array([0.0, 1.0]), np.array([[2.0], [4.0]]))
    with pytest.raises(InvalidArgument):
        generalize([demo], 5.0)


def test_mismatched_features_rejected():
    a = Demonstration("a", ("f",), np.array([0.0, 1.0]), np.array([[2.0], [4.0]]))
    b = Demonstration("b", ("g",), np.array([0.0, 1.0]), np.array([[2.0], [4.0]]))
    with pytest.raises(InvalidArgument):
        generalize([a, b], 1.0)


@pytest.mark.parametrize(
    "t, v",
    [([0.0], [[1.0]]), ([0.0, 0.0], [[1.0], [2.0]]), ([1.0, 2.0], [[1.0], [2.0]]), ([0.0, 1.0], [[1.0, 2.0], [3.0, 4.0]])],
)
def test_demonstration_invariants(t, v):
    with pytest.raises(InvalidArgument):
        Demonstration("x", ("f",), np.array(t), np.array(v))


@st.composite
def demo_sets(draw):
    m = draw(st.integers(1, 3))
    k = draw(st.integers(1, 4))
    demos = []
    for i in range(k):
        samples = draw(st.integers(30, 80))
        dur = draw(st.floats(20.0, 40.0))
        t = np.linspace(0.0, dur, samples)
        vals = np.array(draw(st.lists(st.floats(-100, 100), min_size=samples * m, max_size=samples * m))).reshape(samples, m)
        demos.append(Demonstration(f"d{i}", tuple(f"f{j}" for j in range(m)), t, vals))
    tmin = draw(st.floats(4.0, 10.0))
    return demos, tmin


@given(demo_sets())
def test_generalize_matches_brute_force(case):
    demos, tmin = case
    x = generalize(demos, tmin)
    n = math.floor(np.mean([d.duration for d in demos]) / tmin)
    assert x.values.shape == (demos[0].m, n)
    np.testing.assert_allclose(x.values, brute_interval_means(demos, n), rtol=1e-12, atol=1e-12)


@given(demo_sets(), st.randoms(use_true_random=False))
def test_generalize_permutation_invariant(case, rnd):
    demos, tmin = case
    shuffled = list(demos)
    rnd.shuffle(shuffled)
    np.testing.assert_allclose(generalize(shuffled, tmin).values, generalize(demos, tmin).values, rtol=1e-12, atol=1e-12)


def test_resample_span_130_gives_13_columns():
    t = np.arange(0, 130.05, 0.1)
    o = resample_observation(t, np.sin(t), 10.0)
    assert o.n == 13 and o.m == 1


def test_resample_singleton_intervals():
    t = np.array([0.0, 10.0, 20.0, 30.0])
    o = resample_observation(t, np.array([1.0, 2.0, 3.0, 4.0]), 10.0)
    # the last sample sits on the closing edge and joins the final interval
    assert o.values.tolist() == [[1.0, 2.0, 3.5]]


@given(st.lists(st.floats(-5, 5), min_size=20, max_size=60), st.floats(1.0, 3.0))
def test_resample_matches_brute_force(vals, interval):
    t = np.linspace(3.0, 3.0 + 0.5 * (len(vals) - 1), len(vals))
    o = resample_observation(t, np.array(vals), interval)
    ref = Demonstration("o", ("f",), t - t[0], np.array(vals)[:, None])
    np.testing.assert_allclose(o.values, brute_interval_means([ref], o.n), rtol=1e-12, atol=1e-12)


def test_action_round_trip(tmp_path, paint_action):
    p = tmp_path / "a.json"
    paint_action.save(p)
    assert FeatureTrajectory.load(p) == paint_action


def test_action_schema_mismatch():
    data = {"schema": "cgda.action/99", "feature_names": ["f"], "feature_units": ["u"], "t_min": 1, "d_time": 1, "values": [[0]]}
    with pytest.raises(SchemaError):
        FeatureTrajectory.from_dict(data)


def test_trajectory_shape_must_match_goal_count():
    with pytest.raises(InvalidArgument):
        FeatureTrajectory(["f"], ["u"], 10.0, 130.2, np.zeros((1, 12)))


def test_paint_goals_non_decreasing(paint_scenario, paint_action, tmp_path):
    # recompute the means from the CSV files written by the generator
    from cgda.scenario import generate_demonstrations

    generate_demonstrations(paint_scenario, tmp_path)
    demos = load_demonstrations(tmp_path)
    n = math.floor(np.mean([d.duration for d in demos]) / 10.0)
    ref = brute_interval_means(demos, n)
    np.testing.assert_allclose(paint_action.values, ref, rtol=1e-12)
    assert np.all(np.diff(ref[0]) >= 0)


def test_csv_round_trip(tmp_path):
    d = Demonstration("x", ("a", "b"), np.array([0.0, 0.1, 0.25]), np.array([[1.0, 2.0], [3.0, 1 / 3], [5.0, 6.0]]))
    write_demonstration(d, tmp_path / "x.csv")
    raw = (tmp_path / "x.csv").read_bytes()
    assert b"\r" not in raw
    back = read_demonstration(tmp_path / "x.csv")
    assert back.feature_names == d.feature_names
    assert np.array_equal(back.values, d.values) and np.array_equal(back.t, d.t)


@pytest.mark.parametrize(
    "body, line",
    [
        ("t,a\n0,1\n0.5,2\n0.4,3\n", 4),
        ("t,a\n0,1\n0.5\n", 3),
        ("t,a\n0,1\n0.5,abc\n", 3),
        ("x,a\n0,1\n", 1),
    ],
)
def test_csv_errors_name_file_and_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(ParseError, match=rf"bad\.csv:{line}:"):
        read_demonstration(p)


def test_empty_csv(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(ParseError, match="empty.csv"):
        read_demonstration(p)


def test_inconsistent_feature_counts(tmp_path):
    (tmp_path / "a.csv").write_text("t,a\n0,1\n1,2\n")
    (tmp_path / "b.csv").write_text("t,a,b\n0,1,2\n1,2,3\n")
    with pytest.raises(ParseError, match="b.csv"):
        load_demonstrations(tmp_path)


def test_no_csv_files(tmp_path):
    with pytest.raises(ParseError):
        load_demonstrations(tmp_path)
