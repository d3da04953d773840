from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coarse_ricci.errors import (
    DisconnectedGraph,
    InvalidMeasure,
    NegativeDistance,
    NonSymmetric,
    TriangleViolation,
    ZeroOffDiagonal,
)
from coarse_ricci.metric_core import (
    DiscreteMeasure,
    RandomWalkKernel,
    convolve,
    graph_metric,
    iterate_kernel,
    pushforward,
    random_kernel,
    random_space,
    validate_space,
)
from oracles import lazy_swap


def assert_metric(d, tol=1e-9):
    n = d.shape[0]
    assert np.allclose(np.diag(d), 0)
    assert np.array_equal(d, d.T)
    off = ~np.eye(n, dtype=bool)
    assert (d[off] > 0).all()
    for i in range(n):
        for j in range(n):
            assert (d[i] <= d[i, j] + d[j] + tol).all()


def test_two_point_space_is_valid():
    X = validate_space([[0, 1], [1, 0]])
    assert X.n == 2 and X.d(0, 1) == 1


def test_triangle_violation_names_indices():
    with pytest.raises(TriangleViolation) as info:
        validate_space([[0, 1, 3], [1, 0, 1], [3, 1, 0]])
    assert info.value.violations[0]["indices"] == (0, 2, 1)


def test_hand_checked_three_point_space():
    X = validate_space([[0, 2, 1], [2, 0, 1], [1, 1, 0]])
    assert_metric(X.distances)


@pytest.mark.parametrize(
    "raw, exc",
    [
        ([[0, -1], [-1, 0]], NegativeDistance),
        ([[0, 0], [0, 0]], ZeroOffDiagonal),
        ([[0, 1], [2, 0]], NonSymmetric),
    ],
)
def test_axiom_errors(raw, exc):
    with pytest.raises(exc) as info:
        validate_space(raw)
    assert info.value.violations[0]["indices"] == (0, 1)


def test_ingest_tolerance_symmetrizes():
    X = validate_space([[0, 1 + 5e-10], [1, 0]])
    assert X.d(0, 1) == X.d(1, 0)


def test_graph_metric_examples():
    X = graph_metric([("a", "b", 1), ("b", "c", 1)])
    assert X.d(X.index("a"), X.index("c")) == 2
    T = graph_metric([("a", "b", 1), ("b", "c", 1), ("a", "c", 3)])
    assert T.d(T.index("a"), T.index("c")) == 2
    E = graph_metric([("u", "v", 5)])
    assert E.d(0, 1) == 5


def test_disconnected_graph_names_components():
    with pytest.raises(DisconnectedGraph) as info:
        graph_metric([("a", "b", 1), ("c", "d", 1)])
    assert sorted(map(sorted, info.value.components)) == [["a", "b"], ["c", "d"]]


@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_graph_metric_passes_validation(n, seed):
    rng = np.random.default_rng(seed)
    edges = [(i, i + 1, float(rng.uniform(0.1, 3))) for i in range(n - 1)]
    edges += [(int(i), int(j), float(rng.uniform(0.1, 3))) for i, j in rng.integers(n, size=(n, 2)) if i != j]
    X = graph_metric(edges)
    assert_metric(X.distances)
    validate_space(X.distances)


def test_dirac_convolution_is_row():
    X = validate_space([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    K = random_kernel(X, np.random.default_rng(0))
    for x in range(3):
        assert np.allclose(convolve(X.dirac(x), K).weights, K.matrix[x])


def test_swap_convolution():
    X = validate_space([[0, 1], [1, 0]])
    swap = RandomWalkKernel(X, [[0, 1], [1, 0]])
    assert np.allclose(convolve(DiscreteMeasure(X, [0.3, 0.7]), swap).weights, [0.7, 0.3])
    assert np.array_equal(iterate_kernel(swap, 2).matrix, np.eye(2))


def test_doubly_stochastic_fixes_uniform():
    X = validate_space([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    K = RandomWalkKernel(X, np.full((3, 3), 1 / 3) * 0.5 + np.eye(3) * 0.5)
    assert np.allclose(convolve(X.uniform(), K).weights, 1 / 3)


def test_lazy_two_step_staying_mass():
    alpha = 0.3
    X = validate_space([[0, 1], [1, 0]])
    K2 = iterate_kernel(RandomWalkKernel(X, lazy_swap(alpha)), 2)
    assert K2.matrix[0, 0] == pytest.approx((1 - alpha) ** 2 + alpha**2, abs=1e-15)
    assert iterate_kernel(RandomWalkKernel(X, lazy_swap(alpha)), 1).matrix[0, 0] == pytest.approx(0.7)


def test_iterate_rejects_bad_t():
    X = validate_space([[0, 1], [1, 0]])
    K = RandomWalkKernel.identity(X)
    for t in (0, -1, 10**6 + 1):
        with pytest.raises(ValueError):
            iterate_kernel(K, t)


def test_invalid_measures():
    X = validate_space([[0, 1], [1, 0]])
    with pytest.raises(InvalidMeasure):
        DiscreteMeasure(X, [0.5, 0.6])
    with pytest.raises(InvalidMeasure):
        DiscreteMeasure(X, [1.5, -0.5])
    with pytest.raises(InvalidMeasure):
        RandomWalkKernel(X, [[1, 0], [0.5, 0.4]])


@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(0, 0.9))
def test_convolution_preserves_mass(n, seed, sparsity):
    rng = np.random.default_rng(seed)
    X = random_space(n, rng)
    K = random_kernel(X, rng, sparsity)
    mu = DiscreteMeasure(X, rng.dirichlet(np.ones(n)))
    out = convolve(mu, K)
    assert out.weights.min() >= 0
    assert abs(out.weights.sum() - 1) <= 1e-12


@given(st.integers(2, 6), st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_semigroup_law(n, a, b, seed):
    rng = np.random.default_rng(seed)
    X = random_space(n, rng)
    K = random_kernel(X, rng, 0.5)
    composed = iterate_kernel(K, a).matrix @ iterate_kernel(K, b).matrix
    assert np.abs(composed - iterate_kernel(K, a + b).matrix).max() <= 1e-10
    nested = iterate_kernel(iterate_kernel(K, a), b).matrix
    assert np.abs(nested - iterate_kernel(K, a * b).matrix).max() <= 1e-10


def test_pushforward_merges_atoms():
    X = validate_space([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    Y = validate_space([[0, 1], [1, 0]])
    out = pushforward(DiscreteMeasure(X, [0.2, 0.3, 0.5]), [0, 0, 1], Y)
    assert np.allclose(out.weights, [0.5, 0.5])


def test_scaled_space():
    X = validate_space([[0, 1], [1, 0]])
    assert X.scaled(0.4).d(0, 1) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        X.scaled(0)
