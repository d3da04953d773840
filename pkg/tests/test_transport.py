from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coarse_ricci._simplex import solve_transport
from coarse_ricci.errors import SpaceMismatch, SupportTooLarge, UnsupportedExponent
from coarse_ricci.metric_core import (
    DiscreteMeasure,
    RandomWalkKernel,
    convolve,
    random_measure,
    random_space,
    validate_space,
)
from coarse_ricci.transport import (
    brute_force_wasserstein,
    dual_potentials,
    kantorovich_rubinstein_potential,
    optimal_coupling,
    transport_cost,
    wasserstein,
)
from oracles import lp_transport_cost, lp_wasserstein, two_point_w1

TWO = validate_space([[0, 1], [1, 0]])


def test_dirac_coupling():
    X = validate_space([[0, 2, 1], [2, 0, 1], [1, 1, 0]])
    for p in (1, 2, 3.5):
        plan, cost = optimal_coupling(X.dirac(0), X.dirac(1), p)
        assert plan.plan[0, 1] == 1 and plan.plan.sum() == 1
        assert cost == pytest.approx(2**p)
        assert wasserstein(X.dirac(0), X.dirac(1), p) == pytest.approx(2)


def test_two_point_instance():
    mu, nu = DiscreteMeasure(TWO, [0.7, 0.3]), DiscreteMeasure(TWO, [0.3, 0.7])
    _, cost = optimal_coupling(mu, nu, 1)
    assert cost == pytest.approx(0.4, abs=1e-15)
    assert transport_cost(mu, nu, 1) == pytest.approx(0.4, abs=1e-15)
    assert wasserstein(mu, nu, 2) == pytest.approx(0.4**0.5, abs=1e-15)
    assert wasserstein(mu, nu, 2) == pytest.approx(0.63246, abs=1e-5)
    assert brute_force_wasserstein(mu, nu, 1) == pytest.approx(two_point_w1(0.7, 0.3))


def test_equal_measures_cost_nothing():
    X = validate_space([[0, 2, 1], [2, 0, 1], [1, 1, 0]])
    mu = DiscreteMeasure(X, [0.2, 0.5, 0.3])
    plan, cost = optimal_coupling(mu, mu, 2)
    assert cost == 0 and np.allclose(plan.plan, np.diag(mu.weights))
    assert wasserstein(mu, mu, 1) == 0
    assert wasserstein(mu, convolve(mu, RandomWalkKernel.identity(X)), 3) == 0


def test_exponent_and_space_checks():
    other = validate_space([[0, 2], [2, 0]])
    with pytest.raises(UnsupportedExponent):
        wasserstein(TWO.dirac(0), TWO.dirac(1), float("inf"))
    with pytest.raises(UnsupportedExponent):
        wasserstein(TWO.dirac(0), TWO.dirac(1), 0.5)
    with pytest.raises(SpaceMismatch):
        wasserstein(TWO.dirac(0), other.dirac(1))


def test_brute_force_refuses_large_supports():
    X = random_space(5, np.random.default_rng(1))
    with pytest.raises(SupportTooLarge):
        brute_force_wasserstein(X.uniform(), X.dirac(0))


def test_dirac_potentials():
    X = validate_space([[0, 2, 1], [2, 0, 1], [1, 1, 0]])
    pot = dual_potentials(X.dirac(0), X.dirac(1), 2)
    assert pot.value(X.dirac(0), X.dirac(1)) == pytest.approx(4)
    assert pot.max_violation(X) <= 1e-12


def _instance(seed, max_support=4, n=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 7))
    X = random_space(n, rng, dim=int(rng.integers(1, 4)))
    mu = random_measure(X, rng, support=int(rng.integers(1, min(n, max_support) + 1)))
    nu = random_measure(X, rng, support=int(rng.integers(1, min(n, max_support) + 1)))
    return X, mu, nu


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_matches_vertex_enumeration(seed, p):
    X, mu, nu = _instance(seed)
    coupling, cost = optimal_coupling(mu, nu, p)
    assert coupling.marginal_error() <= 1e-10
    assert abs(cost ** (1 / p) - brute_force_wasserstein(mu, nu, p)) <= 1e-9
    assert abs(cost - coupling.cost(p)) <= 1e-12


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0]))
def test_matches_linear_programming(seed, p):
    X, mu, nu = _instance(seed, max_support=8, n=8)
    assert wasserstein(mu, nu, p) == pytest.approx(lp_wasserstein(mu.weights, nu.weights, X.distances, p), abs=1e-8)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0, 2.5]))
def test_duality(seed, p):
    X, mu, nu = _instance(seed, max_support=6)
    pot = dual_potentials(mu, nu, p)
    assert abs(transport_cost(mu, nu, p) - pot.value(mu, nu)) <= 1e-8
    assert pot.max_violation(X) <= 1e-9


@given(st.integers(0, 2**32 - 1))
def test_kantorovich_rubinstein_potential(seed):
    X, mu, nu = _instance(seed, max_support=6)
    f = kantorovich_rubinstein_potential(mu, nu)
    d = X.distances
    iu = np.triu_indices(X.n, 1)
    assert (np.abs(f[:, None] - f[None, :])[iu] / d[iu]).max() <= 1 + 1e-9
    assert f @ mu.weights - f @ nu.weights == pytest.approx(wasserstein(mu, nu, 1), abs=1e-9)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0]))
def test_metric_axioms(seed, p):
    rng = np.random.default_rng(seed)
    X = random_space(5, rng)
    a, b, c = (random_measure(X, rng) for _ in range(3))
    assert wasserstein(a, b, p) == wasserstein(b, a, p)
    assert wasserstein(a, c, p) <= wasserstein(a, b, p) + wasserstein(b, c, p) + 2e-8


@given(st.integers(0, 2**32 - 1))
def test_monotone_in_p(seed):
    X, mu, nu = _instance(seed, max_support=6)
    values = [wasserstein(mu, nu, p) for p in (1.0, 1.5, 2.0, 4.0)]
    assert all(lo <= hi + 1e-9 for lo, hi in zip(values, values[1:]))


@given(st.integers(2, 12), st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_simplex_on_raw_costs(m, n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(n))
    cost = rng.integers(0, 4, size=(m, n)).astype(float)  # many ties, degenerate bases
    plan, u, v = solve_transport(a, b, cost)
    assert np.allclose(plan.sum(1), a, atol=1e-12) and np.allclose(plan.sum(0), b, atol=1e-12)
    assert (plan * cost).sum() == pytest.approx(lp_transport_cost(a, b, cost), abs=1e-9)
    assert (u[:, None] + v[None, :] - cost).max() <= 1e-9


def test_dirac_distance_is_exact_for_every_p(rng):
    X = random_space(4, rng)
    for p in (1.0, 2.0, 3.0, 2.7):
        assert wasserstein(X.dirac(0), X.dirac(3), p) == X.d(0, 3)


def test_simplex_keeps_extended_precision():
    a = np.array([0.5, 0.5], dtype=np.longdouble)
    b = np.array([0.5, 0.5 - 1e-19, 1e-19], dtype=np.longdouble)
    b /= b.sum()
    cost = np.array([[0, 1, 1], [1, 0, 1]], dtype=np.longdouble)
    plan, u, v = solve_transport(a, b, cost)
    assert plan.dtype == np.longdouble and u.dtype == np.longdouble
    assert (plan * cost).sum() == pytest.approx(float(b[2]), rel=1e-3)
