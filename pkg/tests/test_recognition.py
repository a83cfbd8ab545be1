import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cgda.errors import InvalidArgument
from cgda.model import FeatureTrajectory, ObservedTrajectory
from cgda.recognition import cost_matrix, discrepancy, dtw_cost, feature_weights, goal_discrepancy


def all_paths_min_cost(c):
    """Enumerate every monotone right/down/diagonal path and return the cheapest."""
    rows, cols = c.shape
    best = np.inf

    def walk(a, b, acc):
        nonlocal best
        acc += c[a, b]
        if (a, b) == (rows - 1, cols - 1):
            best = min(best, acc)
            return
        if a + 1 < rows:
            walk(a + 1, b, acc)
        if b + 1 < cols:
            walk(a, b + 1, acc)
        if a + 1 < rows and b + 1 < cols:
            walk(a + 1, b + 1, acc)

    walk(0, 0, 0.0)
    return best


def test_cost_matrix_example():
    assert cost_matrix([0, 1], [0, 2]).tolist() == [[0, 2], [1, 1]]


def test_cost_matrix_equal_has_zero_diagonal():
    v = np.array([0.3, -2.0, 5.5])
    assert np.all(np.diag(cost_matrix(v, v)) == 0)


def test_cost_matrix_random_matches_elementwise():
    rng = np.random.default_rng(4)
    o, x = rng.normal(size=5), rng.normal(size=5)
    c = cost_matrix(o, x)
    for a in range(5):
        for b in range(5):
            assert c[a, b] == abs(o[a] - x[b])


def test_cost_matrix_empty():
    with pytest.raises(InvalidArgument):
        cost_matrix([], [1.0])


def test_dtw_single_cell():
    assert dtw_cost([[2.5]]) == 2.5


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
def test_dtw_identical_is_zero(v):
    assert dtw_cost(cost_matrix(v, v)) == 0.0


def test_dtw_exhaustive_small_integer_sequences():
    # lengths 1..4 with values {0..3} exhaustively; longer lengths sampled in the acceptance suite
    rng = np.random.default_rng(0)
    count = 0
    for la in range(1, 4):
        for lb in range(1, 4):
            for a in itertools.product(range(4), repeat=la):
                for b in itertools.product(range(4), repeat=lb):
                    c = cost_matrix(a, b)
                    assert dtw_cost(c) == all_paths_min_cost(c)
                    count += 1
    for _ in range(300):
        a = rng.integers(0, 4, size=rng.integers(1, 7))
        b = rng.integers(0, 4, size=rng.integers(1, 7))
        c = cost_matrix(a, b)
        assert dtw_cost(c) == all_paths_min_cost(c)
    assert count > 0


@given(
    st.lists(st.floats(-10, 10), min_size=1, max_size=12),
    st.lists(st.floats(-10, 10), min_size=1, max_size=12),
)
def test_dtw_transpose_symmetry_and_nonnegative(a, b):
    d = dtw_cost(cost_matrix(a, b))
    assert d >= 0
    assert d == pytest.approx(dtw_cost(cost_matrix(b, a)), rel=1e-12, abs=1e-12)


def _action(values, t_min=1.0):
    values = np.atleast_2d(values)
    m, n = values.shape
    return FeatureTrajectory([f"f{i}" for i in range(m)], ["u"] * m, t_min, n * t_min, values)


def test_discrepancy_single_feature_is_dtw():
    x = _action([[0.0, 1.0, 2.0]])
    o = ObservedTrajectory(1.0, [[0.0, 2.0]])
    assert discrepancy(o, x) == dtw_cost(cost_matrix([0.0, 2.0], [0.0, 1.0, 2.0]))


def test_discrepancy_identical_is_zero(paint_action):
    assert discrepancy(ObservedTrajectory(10.0, paint_action.values), paint_action) == 0.0


def test_discrepancy_two_features_sums_per_feature():
    rng = np.random.default_rng(7)
    xv = rng.normal(size=(2, 6))
    ov = rng.normal(size=(2, 4))
    w = np.array([0.5, 3.0])
    expected = sum(w[i] * all_paths_min_cost(cost_matrix(ov[i], xv[i])) for i in range(2))
    assert discrepancy(ObservedTrajectory(1.0, ov), _action(xv), w) == pytest.approx(expected, rel=1e-12)


def test_discrepancy_dimension_mismatch():
    with pytest.raises(InvalidArgument):
        discrepancy(ObservedTrajectory(1.0, [[0.0, 1.0]]), _action(np.zeros((2, 3))))


def test_goal_discrepancy_examples():
    assert goal_discrepancy([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert goal_discrepancy([3.0, 4.0], [0.0, 0.0]) == 5.0


def test_goal_discrepancy_random_matches_norm():
    rng = np.random.default_rng(11)
    p, g, w = rng.normal(size=4), rng.normal(size=4), rng.uniform(0.1, 2, size=4)
    assert goal_discrepancy(p, g, w) == pytest.approx(np.linalg.norm(w * (p - g)), rel=1e-14)


def test_goal_discrepancy_mismatch():
    with pytest.raises(InvalidArgument):
        goal_discrepancy([1.0], [1.0, 2.0])


def test_weights_inverse_range_with_floor():
    x = _action([[0.0, 2.0, 4.0], [1.0, 1.0, 1.0]])
    w = feature_weights(x)
    assert w[0] == 0.25
    assert w[1] == pytest.approx(1e9)
    assert feature_weights(x, normalize=False).tolist() == [1.0, 1.0]


def test_iron_weights_balance_units(iron_action):
    w = feature_weights(iron_action)
    spans = iron_action.values.max(axis=1) - iron_action.values.min(axis=1)
    np.testing.assert_allclose(w * spans, 1.0)


vec3 = st.lists(st.floats(-100, 100), min_size=3, max_size=3)


@given(vec3, vec3, vec3, st.lists(st.floats(0.01, 10), min_size=3, max_size=3), st.floats(0.01, 100))
def test_goal_discrepancy_triangle_and_scaling(a, b, c, w, k):
    ab = goal_discrepancy(a, b, w)
    assert ab <= goal_discrepancy(a, c, w) + goal_discrepancy(c, b, w) + 1e-9
    assert goal_discrepancy(a, b, np.asarray(w) * k) == pytest.approx(k * ab, rel=1e-9, abs=1e-9)
