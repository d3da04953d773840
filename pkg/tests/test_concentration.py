from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarse_ricci.concentration import (
    STRATEGIES,
    LineMeasure,
    complete_graph_family,
    constant_family,
    hypercube_family,
    kappa_grid,
    levy_experiment,
    lipschitz_constant,
    mcshane_extension,
    obs_diam,
    obs_diam_profile,
    obs_diam_scalar,
    partial_diameter,
)
from coarse_ricci.errors import CurvatureNotUniform, ExhaustiveTooLarge
from coarse_ricci.metric_core import (
    RandomWalkKernel,
    complete_space,
    random_kernel,
    random_measure,
    random_space,
    validate_space,
)
from oracles import exhaustive_partial_diameter

TWO = validate_space([[0, 1], [1, 0]])


def test_partial_diameter_examples():
    m = LineMeasure([0, 1, 2], [0.25, 0.5, 0.25])
    assert partial_diameter(m, 0.25) == 1
    assert partial_diameter(m, 0.5) == 0
    assert partial_diameter(m, 0.0) == 2
    assert partial_diameter(LineMeasure([3.0], [1.0]), 0.1) == 0
    assert partial_diameter(m, 1.0) == 0


def test_line_measure_merges_and_validates():
    m = LineMeasure.pushforward([2, 0, 2, 1], [0.25, 0.25, 0.5, 0.0])
    assert m.support.tolist() == [0, 2] and m.weights.tolist() == [0.25, 0.75]
    with pytest.raises(ValueError):
        LineMeasure([1, 0], [0.5, 0.5])
    with pytest.raises(ValueError):
        LineMeasure([0, 1], [0.5, 0.6])


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.floats(0, 1))
def test_partial_diameter_matches_subsets(seed, n, kappa):
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(50, size=n, replace=False)).astype(float) / 7
    weights = rng.dirichlet(np.ones(n))
    value = partial_diameter(LineMeasure(support, weights), kappa)
    assert value == exhaustive_partial_diameter(support, weights, kappa)


@given(st.integers(0, 2**32 - 1), st.integers(1, 9))
def test_partial_diameter_monotone(seed, n):
    rng = np.random.default_rng(seed)
    m = LineMeasure(np.cumsum(rng.random(n)), rng.dirichlet(np.ones(n)))
    values = [partial_diameter(m, k) for k in np.linspace(0, 1, 21)]
    assert all(a >= b for a, b in zip(values, values[1:]))


@given(st.integers(0, 2**32 - 1))
def test_mcshane_extensions_are_one_lipschitz(seed):
    rng = np.random.default_rng(seed)
    X = random_space(6, rng)
    anchors = rng.choice(6, size=3, replace=False)
    values = rng.normal(size=3) * 5
    for g in mcshane_extension(X, anchors, values):
        assert lipschitz_constant(X, g) <= 1 + 1e-12


def test_two_point_observable_diameter():
    mu = TWO.uniform()
    for kappa in (0.1, 0.3, 0.49):
        assert obs_diam(TWO, mu, kappa).value == 1
    for kappa in (0.5, 0.7):
        assert obs_diam(TWO, mu, kappa).value == 0
    assert obs_diam_scalar(TWO, mu) == 0.5


def test_one_point_space():
    P = validate_space([[0.0]])
    assert obs_diam(P, P.uniform(), 0.2).value == 0
    assert obs_diam_scalar(P, P.uniform()) == 0


def test_complete_graph_does_not_concentrate():
    # with unit edges, a 1-Lipschitz f separating half the mass at distance 1 always exists
    for n in (3, 4, 5):
        X = complete_space(n)
        assert obs_diam_scalar(X, X.uniform()) == pytest.approx(0.5, abs=1 / 48)


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_every_strategy_is_certified(strategy, rng):
    X = random_space(5, rng)
    mu = random_measure(X, rng)
    for kappa in (0.05, 0.3, 0.6):
        est = obs_diam(X, mu, kappa, strategy=strategy, budget=8)
        est.certify(X, mu)
        assert est.strategy == strategy


def test_strategies_bound_distance_family(rng):
    X = random_space(5, rng)
    mu = random_measure(X, rng)
    base = obs_diam(X, mu, 0.2, strategy="distance_family").value
    for strategy in ("mcshane_random", "local_search", "exhaustive_tiny"):
        assert obs_diam(X, mu, 0.2, strategy=strategy, budget=8).value >= base


def test_exhaustive_refuses_large_spaces(rng):
    X = random_space(6, rng)
    with pytest.raises(ExhaustiveTooLarge):
        obs_diam(X, X.uniform(), 0.2, strategy="exhaustive_tiny")


def test_profile_and_grid(rng):
    grid = kappa_grid()
    assert grid.min() > 0 and grid.max() < 1 and 0.5 in grid
    X = random_space(4, rng)
    prof = obs_diam_profile(X, X.uniform(), kappas=[0.1, 0.4, 0.8])
    assert [e.kappa for e in prof] == [0.1, 0.4, 0.8]
    assert prof[0].value >= prof[1].value >= prof[2].value


def test_scaling_is_exact(rng):
    X = random_space(5, rng)
    mu = random_measure(X, rng)
    est = obs_diam(X, mu, 0.25, strategy="mcshane_random", budget=16)
    CX = X.scaled(0.4)
    value = partial_diameter(LineMeasure.pushforward(0.4 * est.witness, mu.weights), 0.25)
    assert abs(value - 0.4 * est.value) <= 1e-12
    assert lipschitz_constant(CX, 0.4 * est.witness) <= 1 + 1e-10


def test_levy_complete_graphs():
    rep = levy_experiment(complete_graph_family([3, 4, 5]), budget=8)
    assert rep.pullback_ok and rep.scaling_max_error <= 1e-12
    assert rep.C == pytest.approx(1 - min(m.kappa_inf for m in rep.members))
    for m in rep.members:
        assert m.kappa_inf == pytest.approx(1 - abs(0.5 - 0.5 / (m.n_points - 1)))
        assert all(m.lifted_le_scaled)
        assert max(m.pullback_lipschitz) <= rep.C + 1e-8


def test_levy_hypercubes_report():
    rep = levy_experiment(hypercube_family([1, 2, 3]), budget=8)
    assert rep.pullback_ok
    assert len(rep.base_scalar_trend) == 3 and all(0 <= v <= 1 for v in rep.base_scalar_trend)


def test_levy_constant_family_collapses_lift():
    rep = levy_experiment(constant_family([2, 3]), budget=8)
    assert rep.C == 0
    for m in rep.members:
        assert m.lifted_scalar == 0 and all(e["value"] == 0 for e in m.lifted)


def test_levy_rejects_low_curvature(rng):
    X = random_space(3, rng)
    family = [(X, X.uniform(), RandomWalkKernel.identity(X))]
    with pytest.raises(CurvatureNotUniform):
        levy_experiment(family, kappa0=0.5)
    with pytest.raises(ValueError):
        levy_experiment([(X, X.uniform(), random_kernel(X, rng))], p=2.0)


def test_partial_diameter_near_full_kappa():
    m = LineMeasure([0.0, 10 / 7], [0.5, 0.5])
    assert partial_diameter(m, 1 - 2**-53) == 0
