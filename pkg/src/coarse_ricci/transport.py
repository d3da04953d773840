"""Exact L^p optimal transport between discrete measures on a finite metric space.

Every solve runs on the supports only: the cost block ``d(x, y)**p`` for
``x`` in supp(mu) and ``y`` in supp(nu) is handed to the transportation
simplex in :mod:`._simplex`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._simplex import solve_transport
from .errors import SpaceMismatch, SupportTooLarge, UnsupportedExponent
from .metric_core import DiscreteMeasure, FiniteMetricSpace

MARGINAL_TOL = 1e-10
DUAL_FEAS_TOL = 1e-9
BRUTE_FORCE_MAX_SUPPORT = 4


@dataclass(frozen=True, eq=False)
class Coupling:
    plan: np.ndarray
    source: DiscreteMeasure
    target: DiscreteMeasure

    def marginal_error(self) -> float:
        return max(
            float(np.abs(self.plan.sum(axis=1) - self.source.weights).max()),
            float(np.abs(self.plan.sum(axis=0) - self.target.weights).max()),
        )

    def cost(self, p: float) -> float:
        return float((self.plan * self.source.space.distances**p).sum())


@dataclass(frozen=True, eq=False)
class DualPotentials:
    """A pair (phi, psi) with phi[x] + psi[y] <= d(x, y)**p on supp(mu) x supp(nu).

    Off the supports the entries are c-transforms: psi against phi on
    supp(mu), then phi against the completed psi, so the constraint holds on
    all of X x X.
    """

    phi: np.ndarray
    psi: np.ndarray
    p: float

    def value(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        return float(self.phi @ mu.weights + self.psi @ nu.weights)

    def max_violation(self, space: FiniteMetricSpace, rows=None, cols=None) -> float:
        c = space.distances**self.p
        slack = self.phi[:, None] + self.psi[None, :] - c
        if rows is not None:
            slack = slack[rows]
        if cols is not None:
            slack = slack[:, cols]
        return float(slack.max())


def check_exponent(p: float) -> float:
    p = float(p)
    if not math.isfinite(p):
        raise UnsupportedExponent("p = inf is not supported")
    if p < 1:
        raise UnsupportedExponent(f"p must be >= 1, got {p}")
    return p


def _prepare(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float):
    p = check_exponent(p)
    if not mu.space.same_as(nu.space):
        raise SpaceMismatch("measures live on different spaces")
    sa, sb = mu.support, nu.support
    cost = mu.space.distances[np.ix_(sa, sb)] ** p
    return p, sa, sb, cost


def _solve(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float):
    p, sa, sb, cost = _prepare(mu, nu, p)
    plan, u, v = solve_transport(mu.weights[sa], nu.weights[sb], cost)
    total = float((plan * cost).sum())
    return p, sa, sb, plan, u, v, max(total, 0.0)


def optimal_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> tuple[Coupling, float]:
    """Optimal plan for the cost d**p and its total cost W_p(mu, nu)**p."""
    _, sa, sb, plan, _, _, total = _solve(mu, nu, p)
    full = np.zeros((mu.space.n, mu.space.n))
    full[np.ix_(sa, sb)] = plan
    return Coupling(full, mu, nu), total


def transport_cost(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> float:
    """W_p(mu, nu)**p.

    The arguments are put in a canonical order first so the value is
    exactly symmetric. For p = 1 the shared mass min(mu, nu) is cancelled;
    it can stay put at zero cost because d satisfies the triangle inequality.
    """
    p = check_exponent(p)
    if tuple(nu.weights) < tuple(mu.weights):
        mu, nu = nu, mu
    if p != 1.0:
        return _solve(mu, nu, p)[-1]
    if not mu.space.same_as(nu.space):
        raise SpaceMismatch("measures live on different spaces")
    common = np.minimum(mu.weights, nu.weights)
    a = mu.weights - common
    b = nu.weights - common
    sa, sb = np.flatnonzero(a > 0), np.flatnonzero(b > 0)
    if sa.size == 0 or sb.size == 0:
        return 0.0
    cost = mu.space.distances[np.ix_(sa, sb)]
    plan, _, _ = solve_transport(a[sa], b[sb], cost)
    return max(float((plan * cost).sum()), 0.0)


def wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> float:
    p = check_exponent(p)
    if mu.is_dirac() and nu.is_dirac() and mu.space.same_as(nu.space):
        # exact: (d ** p) ** (1 / p) need not round back to d
        return float(mu.space.distances[mu.support[0], nu.support[0]])
    return transport_cost(mu, nu, p) ** (1.0 / p)


def dual_potentials(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> DualPotentials:
    """Kantorovich potentials from the optimal simplex basis (zero duality gap)."""
    p, sa, sb, _, u, v, _ = _solve(mu, nu, p)
    c = mu.space.distances**p
    phi = np.empty(mu.space.n)
    psi = np.empty(mu.space.n)
    phi[sa] = u
    psi[sb] = v
    # c-transforms off the supports, psi first so that phi sees all of it
    psi_off = np.setdiff1d(np.arange(mu.space.n), sb)
    phi_off = np.setdiff1d(np.arange(mu.space.n), sa)
    if psi_off.size:
        psi[psi_off] = (c[np.ix_(sa, psi_off)] - u[:, None]).min(axis=0)
    if phi_off.size:
        phi[phi_off] = (c[phi_off, :] - psi[None, :]).min(axis=1)
    return DualPotentials(phi, psi, p)


def kantorovich_rubinstein_potential(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """A 1-Lipschitz f on the whole space with W_1(mu, nu) = <f, mu> - <f, nu>.

    Obtained from the p = 1 simplex potentials by a c-transform, which turns
    any feasible pair into one of the form (phi, -phi).
    """
    _, sa, _, _, u, _, _ = _solve(mu, nu, 1.0)
    g = (mu.space.distances[sa, :] - u[:, None]).min(axis=0)
    return -g


@lru_cache(maxsize=None)
def _spanning_trees(m: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """All spanning trees of K_{m,n}: edge lists and inverse incidence maps.

    ``inv[t] @ concat(a, b)[:-1]`` gives the flows on tree ``t``.
    """
    cells = [(i, j) for i in range(m) for j in range(n)]
    k = m + n - 1
    trees, inverses = [], []
    for subset in itertools.combinations(range(len(cells)), k):
        parent = list(range(m + n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        acyclic = True
        for e in subset:
            i, j = cells[e]
            ri, rj = find(i), find(m + j)
            if ri == rj:
                acyclic = False
                break
            parent[ri] = rj
        if not acyclic:
            continue
        inc = np.zeros((m + n, k))
        for col, e in enumerate(subset):
            i, j = cells[e]
            inc[i, col] = 1.0
            inc[m + j, col] = 1.0
        trees.append(subset)
        inverses.append(np.linalg.inv(inc[:-1]))
    return np.array(trees, dtype=int), np.array(inverses)


def brute_force_wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> float:
    """W_p by enumerating every basic feasible solution of the transportation polytope.

    Each vertex is the unique flow on a spanning tree of the bipartite
    support graph; the minimum cost over feasible trees is the optimum.
    Independent of the simplex path, for use as a test oracle.
    """
    p, sa, sb, cost = _prepare(mu, nu, p)
    m, n = len(sa), len(sb)
    if m > BRUTE_FORCE_MAX_SUPPORT or n > BRUTE_FORCE_MAX_SUPPORT:
        raise SupportTooLarge(f"supports of size {m} and {n}; oracle handles at most {BRUTE_FORCE_MAX_SUPPORT}")
    trees, inverses = _spanning_trees(m, n)
    rhs = np.concatenate([mu.weights[sa], nu.weights[sb]])[:-1]
    flows = inverses @ rhs
    feasible = (flows >= -1e-12).all(axis=1)
    costs = (flows * cost.ravel()[trees]).sum(axis=1)
    best = float(costs[feasible].min())
    return max(best, 0.0) ** (1.0 / p)
