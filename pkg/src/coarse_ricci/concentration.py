"""Partial and observable diameters, and the Levy-family experiment on lifted spaces.

Observable diameters are suprema over all 1-Lipschitz observables; the
estimators here only ever return values attained by an explicit witness,
so every estimate is a certified lower bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curvature import curvature_report
from .errors import CurvatureNotUniform, ExhaustiveTooLarge, InternalInvariantViolation
from .lifting import build_lifted_space, lifted_measure, pullback_lipschitz
from .metric_core import (
    DiscreteMeasure,
    FiniteMetricSpace,
    RandomWalkKernel,
    complete_space,
    hypercube_space,
    lazy_walk,
    path_space,
)

MASS_SLACK = 1e-12
LIPSCHITZ_TOL = 1e-10
STRATEGIES = ("distance_family", "mcshane_random", "local_search", "exhaustive_tiny")
EXHAUSTIVE_MAX_POINTS = 5


@dataclass(frozen=True, eq=False)
class LineMeasure:
    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if s.shape != w.shape or s.ndim != 1:
            raise ValueError("support and weights must be matching vectors")
        if s.size > 1 and not np.all(np.diff(s) > 0):
            raise ValueError("support must be strictly increasing")
        if w.size and (w.min() < 0 or abs(w.sum() - 1.0) > 1e-9):
            raise ValueError("weights must be a probability vector")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)

    @classmethod
    def pushforward(cls, values: Sequence[float], weights: Sequence[float]) -> "LineMeasure":
        """Law of f under the measure with the given weights, f given by its values."""
        values = np.asarray(values, dtype=float)
        weights = np.asarray(weights, dtype=float)
        keep = weights > 0
        support, inverse = np.unique(values[keep], return_inverse=True)
        merged = np.zeros(support.size)
        np.add.at(merged, inverse, weights[keep])
        return cls(support, merged)


def partial_diameter(m: LineMeasure, kappa: float) -> float:
    """Smallest length of an interval carrying mass >= 1 - kappa.

    Only windows of consecutive atoms need checking: any set has at least
    the diameter of the window its extreme atoms span.
    """
    target = 1.0 - kappa
    if target <= 0 or m.support.size <= 1:
        return 0.0
    cum = np.concatenate([[0.0], np.cumsum(m.weights)])
    # for each left end i, the first right end j with mass(i..j) >= target
    right = np.searchsorted(cum, cum[:-1] + target - MASS_SLACK, side="left") - 1
    # a tiny target is met by the left atom alone; never let the window end before it starts
    right = np.maximum(right, np.arange(m.support.size))
    ok = right < m.support.size
    if not ok.any():
        return float(m.support[-1] - m.support[0])
    left = np.flatnonzero(ok)
    return float((m.support[right[ok]] - m.support[left]).min())


def _batch_partial_diameter(values: np.ndarray, weights: np.ndarray, kappa: float) -> np.ndarray:
    """partial_diameter of many observables at once (rows of ``values``)."""
    target = 1.0 - kappa
    if target <= 0:
        return np.zeros(values.shape[0])
    order = np.argsort(values, axis=1, kind="stable")
    xs = np.take_along_axis(values, order, axis=1)
    ws = weights[order]
    cum = np.concatenate([np.zeros((values.shape[0], 1)), np.cumsum(ws, axis=1)], axis=1)
    n = values.shape[1]
    best = np.full(values.shape[0], np.inf)
    for i in range(n):
        for j in range(i, n):
            mass = cum[:, j + 1] - cum[:, i]
            width = xs[:, j] - xs[:, i]
            best = np.where(mass >= target - MASS_SLACK, np.minimum(best, width), best)
    return best


def lipschitz_constant(space: FiniteMetricSpace, f: np.ndarray) -> float:
    f = np.asarray(f, dtype=float)
    if space.n < 2:
        return 0.0
    iu = np.triu_indices(space.n, 1)
    return float((np.abs(f[:, None] - f[None, :])[iu] / space.distances[iu]).max())


def mcshane_extension(space: FiniteMetricSpace, anchors: Sequence[int], values: Sequence[float]):
    """Largest and smallest 1-Lipschitz extensions of values given on ``anchors``.

    ``upper(x) = min_s values[s] + d(s, x)`` and ``lower(x) = max_s values[s] - d(s, x)``;
    both are 1-Lipschitz whatever the anchor values are.
    """
    anchors = np.asarray(anchors, dtype=int)
    values = np.asarray(values, dtype=float)
    d = space.distances[anchors]
    return (values[:, None] + d).min(axis=0), (values[:, None] - d).max(axis=0)


@dataclass
class ObsDiamEstimate:
    kappa: float
    value: float
    witness: np.ndarray
    strategy: str
    grid_optimal: bool | None = None

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "value": self.value,
            "strategy": self.strategy,
            "grid_optimal": self.grid_optimal,
            "witness": [float(v) for v in self.witness],
        }

    def certify(self, space: FiniteMetricSpace, mu: DiscreteMeasure) -> None:
        lip = lipschitz_constant(space, self.witness)
        if lip > 1 + LIPSCHITZ_TOL:
            raise InternalInvariantViolation(f"witness has Lipschitz constant {lip}")
        again = partial_diameter(LineMeasure.pushforward(self.witness, mu.weights), self.kappa)
        if again != self.value:
            raise InternalInvariantViolation(f"witness gives {again}, estimate says {self.value}")


def _distance_witnesses(space: FiniteMetricSpace) -> np.ndarray:
    return np.array(space.distances, dtype=float)


def _local_search(space, weights, kappa, start, rounds, rng):
    f = start.copy()
    n = space.n
    d = space.distances
    best = _batch_partial_diameter(f[None, :], weights, kappa)[0]
    for r in range(rounds):
        i = int(rng.integers(n)) if r >= n else r % n
        others = np.arange(n) != i
        lo = (f[others] - d[i, others]).max() if n > 1 else f[i]
        hi = (f[others] + d[i, others]).min() if n > 1 else f[i]
        if lo > hi:  # round-off only
            continue
        candidates = np.unique(np.clip(np.concatenate([[lo, hi], f[others]]), lo, hi))
        trial = np.tile(f, (candidates.size, 1))
        trial[:, i] = candidates
        scores = _batch_partial_diameter(trial, weights, kappa)
        k = int(np.argmax(scores))
        if scores[k] > best:
            best = scores[k]
            f = trial[k]
    return f


def _candidate_pool(space, strategy, budget, rng, extra_witnesses=()):
    """Witness candidates for a strategy, independent of kappa."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    n = space.n
    cands = [_distance_witnesses(space)]
    if len(extra_witnesses):
        cands.append(np.atleast_2d(np.array(extra_witnesses, dtype=float)))
    diam = space.diameter
    if strategy in ("mcshane_random", "local_search"):
        trials = budget if strategy == "mcshane_random" else max(1, budget // 4)
        for _ in range(trials):
            size = int(rng.integers(1, n + 1))
            anchors = rng.choice(n, size=size, replace=False)
            upper, lower = mcshane_extension(space, anchors, rng.random(size) * diam)
            cands.append(np.vstack([upper, lower]))
    elif strategy == "exhaustive_tiny":
        if n > EXHAUSTIVE_MAX_POINTS:
            raise ExhaustiveTooLarge(f"exhaustive search handles at most {EXHAUSTIVE_MAX_POINTS} points, got {n}")
        levels = max(1, int(budget))
        h = diam / levels if diam > 0 else 1.0
        steps = np.arange(-levels, levels + 1) * h
        if n > 1:
            # translation invariance: pin the first value to 0
            grid = np.array(list(itertools.product(steps, repeat=n - 1)))
            grid = np.hstack([np.zeros((grid.shape[0], 1)), grid])
            iu = np.triu_indices(n, 1)
            gaps = np.abs(grid[:, iu[0]] - grid[:, iu[1]])
            grid = grid[(gaps <= space.distances[iu] + 1e-12 * max(1.0, diam)).all(axis=1)]
            cands.append(grid)
    return np.vstack(cands)


def _best_from_pool(space, mu, kappa, strategy, pool, budget, rng):
    w = mu.weights
    scores = _batch_partial_diameter(pool, w, kappa)
    witness = pool[int(np.argmax(scores))].copy()
    if strategy == "local_search":
        witness = _local_search(space, w, kappa, witness, budget, rng)
    value = partial_diameter(LineMeasure.pushforward(witness, w), kappa)
    grid_optimal = True if strategy == "exhaustive_tiny" else None
    est = ObsDiamEstimate(float(kappa), value, witness, strategy, grid_optimal)
    est.certify(space, mu)
    return est


def obs_diam(
    space: FiniteMetricSpace,
    mu: DiscreteMeasure,
    kappa: float,
    strategy: str = "distance_family",
    budget: int = 64,
    seed: int = 0,
    extra_witnesses: Sequence[np.ndarray] = (),
) -> ObsDiamEstimate:
    """Lower bound on ObsDiam(X; -kappa) with a 1-Lipschitz witness.

    ``budget`` is the number of random trials (mcshane_random), coordinate
    moves (local_search) or grid levels per unit diameter (exhaustive_tiny).
    Candidate witnesses in ``extra_witnesses`` are always considered.
    """
    rng = np.random.default_rng(seed)
    pool = _candidate_pool(space, strategy, budget, rng, extra_witnesses)
    return _best_from_pool(space, mu, kappa, strategy, pool, budget, rng)


def kappa_grid(points: int = 64) -> np.ndarray:
    """Uniform steps in (0, 1) joined with a geometric tail towards 0."""
    uniform = np.arange(1, 48) / 48.0
    geometric = 2.0 ** -np.arange(6, 6 + max(1, points - 47))
    return np.unique(np.concatenate([uniform, geometric]))


def obs_diam_profile(
    space: FiniteMetricSpace,
    mu: DiscreteMeasure,
    strategy: str = "distance_family",
    budget: int = 64,
    seed: int = 0,
    kappas: Sequence[float] | None = None,
    extra_witnesses: Sequence[np.ndarray] = (),
) -> list[ObsDiamEstimate]:
    """Estimates over a kappa grid; one candidate pool is shared by all kappas."""
    kappas = kappa_grid() if kappas is None else kappas
    rng = np.random.default_rng(seed)
    pool = _candidate_pool(space, strategy, budget, rng, extra_witnesses)
    return [_best_from_pool(space, mu, float(k), strategy, pool, budget, rng) for k in kappas]


def scalar_from_profile(profile: Sequence[ObsDiamEstimate], support_diameter: float) -> float:
    """min over the grid of max(ObsDiam(X; -kappa), kappa), with the kappa -> 0 limit.

    Near kappa = 0 every set of mass 1 - kappa holds the whole support, so
    the first arm tends to the diameter of the support.
    """
    best = support_diameter
    for est in profile:
        best = min(best, max(est.value, est.kappa))
    return float(best)


def support_diameter(space: FiniteMetricSpace, mu: DiscreteMeasure) -> float:
    supp = mu.support
    return float(space.distances[np.ix_(supp, supp)].max())


def obs_diam_scalar(
    space: FiniteMetricSpace,
    mu: DiscreteMeasure,
    budget: int = 64,
    strategy: str = "mcshane_random",
    seed: int = 0,
) -> float:
    """Observable diameter inf_kappa max(ObsDiam(X; -kappa), kappa), scanned on a kappa grid."""
    profile = obs_diam_profile(space, mu, strategy, budget, seed)
    return scalar_from_profile(profile, support_diameter(space, mu))


@dataclass
class LevyMember:
    n_points: int
    kappa_inf: float
    base: list[dict] = field(default_factory=list)
    scaled: list[dict] = field(default_factory=list)
    lifted: list[dict] = field(default_factory=list)
    scaled_native: list[float] = field(default_factory=list)
    pullback_lipschitz: list[float] = field(default_factory=list)
    lifted_le_scaled: list[bool] = field(default_factory=list)
    base_scalar: float = 0.0
    lifted_scalar: float = 0.0
    lifted_points: int = 0


@dataclass
class LevyReport:
    kappa0: float
    C: float
    kappas: list[float]
    members: list[LevyMember]
    base_scalar_trend: list[float]
    lifted_scalar_trend: list[float]
    scaling_max_error: float
    pullback_ok: bool

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["members"] = [dict(m.__dict__) for m in self.members]
        return d


def levy_experiment(
    family: Sequence[tuple[FiniteMetricSpace, DiscreteMeasure, RandomWalkKernel]],
    p: float = 1.0,
    budget: int = 32,
    N: int = 1,
    kappas: Sequence[float] = (0.1, 0.25, 0.4),
    strategy: str = "mcshane_random",
    seed: int = 0,
    kappa0: float | None = None,
    scalar_strategy: str = "mcshane_random",
) -> LevyReport:
    """Observable diameters of X_n, C X_n and the lifted spaces with the pushed measures.

    C = 1 - kappa0 is the uniform Lipschitz constant of the walks. Checked
    per member: witnesses rescale exactly between X and C X, and every
    lifted witness g pulls back to a C-Lipschitz x -> g(m_x). Pulled-back
    witnesses also seed the base estimator, so lifted <= C * base holds
    for the estimates themselves.
    """
    if p != 1.0:
        raise ValueError("the Levy experiment uses W_1 lifts")
    infs = [curvature_report(K, p).kappa_inf if X.n > 1 else 1.0 for X, _, K in family]
    if kappa0 is None:
        kappa0 = min(infs)
    low = [i for i, k in enumerate(infs) if k < kappa0 - 1e-12]
    if low:
        raise CurvatureNotUniform(f"members {low} have curvature below {kappa0}")
    C = max(0.0, 1.0 - kappa0)
    members = []
    scale_err = 0.0
    pull_ok = True
    for idx, ((X, mu, K), kinf) in enumerate(zip(family, infs)):
        lifted = build_lifted_space(X, K, p, N)
        mu_lift = lifted_measure(lifted, mu)
        member = LevyMember(n_points=X.n, kappa_inf=kinf, lifted_points=lifted.size)
        for kappa in kappas:
            est_l = obs_diam(lifted.space, mu_lift, kappa, strategy, budget, seed + idx)
            lip = pullback_lipschitz(lifted, est_l.witness)
            member.pullback_lipschitz.append(lip)
            if lip > C + 1e-8:
                pull_ok = False
            pulled = est_l.witness[lifted.walkpoint_index]
            extras = [pulled / C] if C > 0 else []
            est_b = obs_diam(X, mu, kappa, strategy, budget, seed + idx, extra_witnesses=extras)
            member.base.append(est_b.to_dict())
            member.lifted.append(est_l.to_dict())
            if C > 0:
                CX = X.scaled(C)
                rescaled = C * est_b.witness
                value = partial_diameter(LineMeasure.pushforward(rescaled, mu.weights), kappa)
                if lipschitz_constant(CX, rescaled) > 1 + LIPSCHITZ_TOL:
                    raise InternalInvariantViolation("rescaled witness is not 1-Lipschitz on CX")
                scale_err = max(scale_err, abs(value - C * est_b.value))
                member.scaled.append({"kappa": kappa, "value": value})
                member.scaled_native.append(obs_diam(CX, mu, kappa, strategy, budget, seed + idx).value)
                member.lifted_le_scaled.append(bool(est_l.value <= value + 1e-12))
            else:
                member.scaled.append({"kappa": kappa, "value": 0.0})
                member.lifted_le_scaled.append(bool(est_l.value <= 1e-12))
        member.base_scalar = obs_diam_scalar(X, mu, budget, scalar_strategy, seed + idx)
        member.lifted_scalar = obs_diam_scalar(lifted.space, mu_lift, budget, scalar_strategy, seed + idx)
        members.append(member)
    if scale_err > 1e-12:
        raise InternalInvariantViolation(f"rescaled witnesses are off by {scale_err:.3e}")
    if not pull_ok:
        raise InternalInvariantViolation("a lifted witness does not pull back to a C-Lipschitz function")
    return LevyReport(
        kappa0=kappa0,
        C=C,
        kappas=list(kappas),
        members=members,
        base_scalar_trend=[m.base_scalar for m in members],
        lifted_scalar_trend=[m.lifted_scalar for m in members],
        scaling_max_error=scale_err,
        pullback_ok=pull_ok,
    )


def _lazy_uniform(space: FiniteMetricSpace, laziness: float = 0.5) -> RandomWalkKernel:
    n = space.n
    matrix = np.full((n, n), (1.0 - laziness) / (n - 1)) if n > 1 else np.ones((1, 1))
    np.fill_diagonal(matrix, laziness if n > 1 else 1.0)
    return RandomWalkKernel(space, matrix)


def complete_graph_family(sizes: Sequence[int], laziness: float = 0.5):
    """K_n with unit edges, uniform measure and the lazy uniform walk.

    m_x - m_y is a multiple of delta_x - delta_y, so the curvature is
    1 - abs(laziness - (1 - laziness) / (n - 1)).
    """
    out = []
    for n in sizes:
        X = complete_space(n, 1.0)
        out.append((X, X.uniform(), _lazy_uniform(X, laziness)))
    return out


def hypercube_family(dims: Sequence[int], laziness: float = 0.5):
    """Normalized Hamming cubes {0,1}^k with the lazy nearest-neighbour walk."""
    out = []
    for k in dims:
        X = hypercube_space(k, normalized=True)
        out.append((X, X.uniform(), lazy_walk(X, laziness)))
    return out


def constant_family(sizes: Sequence[int]):
    """Paths with a walk that jumps to the same uniform measure from everywhere."""
    out = []
    for n in sizes:
        X = path_space(n, 1.0)
        out.append((X, X.uniform(), RandomWalkKernel.constant(X.uniform())))
    return out
