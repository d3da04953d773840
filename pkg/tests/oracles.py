"""Reference computations that share no code with the package."""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog


def lp_transport_cost(a, b, cost) -> float:
    """min <P, cost> over couplings of a and b, solved as a dense LP by HiGHS."""
    a, b, cost = np.asarray(a, float), np.asarray(b, float), np.asarray(cost, float)
    m, n = cost.shape
    rows = np.zeros((m + n, m * n))
    for i in range(m):
        rows[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        rows[m + j, j::n] = 1.0
    res = linprog(cost.ravel(), A_eq=rows, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def lp_wasserstein(mu_w, nu_w, d, p: float) -> float:
    return max(lp_transport_cost(mu_w, nu_w, np.asarray(d, float) ** p), 0.0) ** (1.0 / p)


def exhaustive_partial_diameter(support, weights, kappa: float) -> float:
    """min over all atom subsets with mass >= 1 - kappa of max - min."""
    support = np.asarray(support, float)
    weights = np.asarray(weights, float)
    n = len(support)
    if 1 - kappa <= 0:
        return 0.0
    best = np.inf
    for r in range(1, n + 1):
        for subset in itertools.combinations(range(n), r):
            idx = list(subset)
            if weights[idx].sum() >= 1 - kappa - 1e-12:
                best = min(best, support[idx].max() - support[idx].min())
    return float(best)


def two_point_w1(mu_a: float, nu_a: float, d: float = 1.0) -> float:
    """On two points every coupling moves |mu_a - nu_a| across the single gap."""
    return abs(mu_a - nu_a) * d


def lazy_swap(alpha: float) -> np.ndarray:
    return np.array([[1 - alpha, alpha], [alpha, 1 - alpha]])


def contractive_instance(rng: np.random.Generator, n: int, mix: float = 0.8):
    """A space with all distances in [1, 2] and a kernel with kappa_p >= 1 - 2 (1 - mix)^(1/p).

    Any symmetric matrix with off-diagonal entries in [1, 2] is a metric,
    and mixing every row with a shared measure contracts W_p^p by (1 - mix).
    """
    from coarse_ricci.metric_core import RandomWalkKernel, validate_space

    d = rng.uniform(1, 2, size=(n, n))
    d = np.triu(d, 1)
    d = d + d.T
    X = validate_space(d)
    rows = rng.dirichlet(np.ones(n), size=n)
    shared = rng.dirichlet(np.ones(n))
    return X, RandomWalkKernel(X, mix * shared + (1 - mix) * rows)
