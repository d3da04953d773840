"""epsilon-approximation maps between finite spaces and convergence of random walks along them."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curvature import curvature_report
from .errors import BadConfig, InternalInvariantViolation, NoLiftPoint
from .metric_core import (
    DiscreteMeasure,
    FiniteMetricSpace,
    RandomWalkKernel,
    cycle_space,
    lazy_walk,
    path_space,
    pushforward,
    validate_space,
)
from .transport import check_exponent, wasserstein

ROUNDOFF = 1e-12
SOLVER_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ApproximationMap:
    source: FiniteMetricSpace
    target: FiniteMetricSpace
    assignment: np.ndarray
    epsilon: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=int)
        if a.shape != (self.source.n,) or (a.size and (a.min() < 0 or a.max() >= self.target.n)):
            raise ValueError("assignment must map every source index to a target index")
        object.__setattr__(self, "assignment", a)
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", check_approximation(a, self.source, self.target))

    def push(self, mu: DiscreteMeasure) -> DiscreteMeasure:
        return pushforward(mu, self.assignment, self.target)


def distortion(assignment, source: FiniteMetricSpace, target: FiniteMetricSpace) -> float:
    a = np.asarray(assignment, dtype=int)
    return float(np.abs(target.distances[np.ix_(a, a)] - source.distances).max())


def covering_radius(assignment, source: FiniteMetricSpace, target: FiniteMetricSpace) -> float:
    """max over target points of the distance to the image."""
    image = np.unique(np.asarray(assignment, dtype=int))
    return float(target.distances[image].min(axis=0).max())


def check_approximation(assignment, source: FiniteMetricSpace, target: FiniteMetricSpace) -> float:
    """Smallest epsilon for which ``assignment`` is an epsilon-approximation map."""
    return max(distortion(assignment, source, target), covering_radius(assignment, source, target))


def quasi_inverse(f: ApproximationMap) -> ApproximationMap:
    """A map g: Y -> X with g(y) the smallest-index x such that d(f(x), y) <= eps.

    Verifies the 3 eps approximation bound and the round trips
    d(y, f(g(y))) <= eps and d(x, g(f(x))) <= 2 eps.
    """
    eps = float(f.epsilon)
    X, Y = f.source, f.target
    near = Y.distances[f.assignment, :] <= eps + ROUNDOFF  # near[x, y]
    if not near.any(axis=0).all():
        raise InternalInvariantViolation("map does not cover its target within its epsilon")
    g = np.argmax(near, axis=0)
    eps_inv = check_approximation(g, Y, X)
    trip_y = float(Y.distances[np.arange(Y.n), f.assignment[g]].max())
    trip_x = float(X.distances[np.arange(X.n), g[f.assignment]].max())
    slack = ROUNDOFF * max(1.0, eps)
    diagnostics = {"epsilon": eps, "epsilon_inverse": eps_inv, "roundtrip_target": trip_y, "roundtrip_source": trip_x}
    if eps_inv > 3 * eps + slack or trip_y > eps + slack or trip_x > 2 * eps + slack:
        raise InternalInvariantViolation(f"quasi-inverse bounds failed: {diagnostics}")
    return ApproximationMap(Y, X, g, eps_inv, diagnostics)


def random_approximation_map(
    source: FiniteMetricSpace, target: FiniteMetricSpace, rng: np.random.Generator, noise: float = 0.0
) -> ApproximationMap:
    """Nearest-distance-profile map, randomly perturbed; epsilon is whatever it measures."""
    assignment = rng.integers(target.n, size=source.n)
    if noise == 0.0:
        return ApproximationMap(source, target, assignment)
    base = np.argmin(np.abs(target.distances[:, :1].T - source.distances[:, :1]), axis=1)
    flip = rng.random(source.n) < noise
    return ApproximationMap(source, target, np.where(flip, assignment, base))


@dataclass(frozen=True, eq=False)
class FamilyMember:
    space: FiniteMetricSpace
    kernel: RandomWalkKernel
    to_target: ApproximationMap


def _lift_points(member: FamilyMember, tol: float) -> np.ndarray:
    """For each target point x, a source point whose image is nearest to x."""
    f = member.to_target
    dist = f.target.distances[f.assignment, :]  # [source, target]
    choice = np.argmin(dist, axis=0)
    gap = dist[choice, np.arange(f.target.n)]
    bad = np.flatnonzero(gap > f.epsilon + tol)
    if bad.size:
        raise NoLiftPoint(f"target points {bad.tolist()} have no preimage within epsilon={f.epsilon}")
    return choice


def pushed_kernel(member: FamilyMember, tol: float = ROUNDOFF) -> list[DiscreteMeasure]:
    """(f_n)_* m^n_{x_n} for every target point x, with f_n(x_n) nearest to x."""
    lifts = _lift_points(member, tol)
    return [member.to_target.push(member.kernel.row(int(x))) for x in lifts]


@dataclass
class MapConvergenceReport:
    p: float
    epsilons: list[float]
    lipschitz: float
    converged: bool
    moduli: list[list[float]] | None = None  # sup_x W_p between members n, k
    consecutive: list[float] = field(default_factory=list)
    limit_distances: list[float] | None = None  # sup_x W_p to a candidate limit
    tolerances: list[float] = field(default_factory=list)
    best_subsequence: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def map_convergence_check(
    members: Sequence[FamilyMember],
    limit: RandomWalkKernel | None = None,
    p: float = 1.0,
    lipschitz: float | None = None,
    tail: int = 2,
    abs_tol: float = SOLVER_TOL,
) -> MapConvergenceReport:
    """Do the walks m^n, viewed through f_n, converge as maps into P_p(X)?

    The tolerance for comparing members n and k is
    ``(1 + L) (eps_n + eps_k) + abs_tol`` where L bounds the Lipschitz
    constants 1 - kappa_inf of the walks. Convergence is declared when every
    pair among the last ``tail`` members (or each of them against ``limit``)
    is within tolerance.
    """
    p = check_exponent(p)
    if not members:
        raise ValueError("empty family")
    if lipschitz is None:
        lipschitz = max(max(0.0, 1.0 - curvature_report(m.kernel, p).kappa_inf) for m in members)
    eps = [float(m.to_target.epsilon) for m in members]
    pushed = [pushed_kernel(m) for m in members]
    report = MapConvergenceReport(p=p, epsilons=eps, lipschitz=lipschitz, converged=False)

    def sup_w(a, b):
        return max(wasserstein(u, v, p) for u, v in zip(a, b))

    if limit is not None:
        rows = limit.rows()
        report.limit_distances = [sup_w(pm, rows) for pm in pushed]
        report.tolerances = [(1 + lipschitz) * e + abs_tol for e in eps]
        report.converged = all(
            d <= t for d, t in zip(report.limit_distances[-tail:], report.tolerances[-tail:])
        )
        return report

    K = len(members)
    mod = np.zeros((K, K))
    for i, j in itertools.combinations(range(K), 2):
        mod[i, j] = mod[j, i] = sup_w(pushed[i], pushed[j])
    tols = np.array([[(1 + lipschitz) * (eps[i] + eps[j]) + abs_tol for j in range(K)] for i in range(K)])
    report.moduli = mod.tolist()
    report.consecutive = [float(mod[i, i + 1]) for i in range(K - 1)]
    report.tolerances = [float(tols[i, i + 1]) for i in range(K - 1)]
    last = range(max(0, K - tail), K)
    report.converged = K == 1 or all(mod[i, j] <= tols[i, j] for i in last for j in last)
    # greedy: keep members whose modulus to the final kept member stays within tolerance
    chain = [K - 1]
    for i in range(K - 2, -1, -1):
        if mod[i, chain[-1]] <= tols[i, chain[-1]]:
            chain.append(i)
    report.best_subsequence = chain[::-1]
    return report


# family generators -------------------------------------------------------


def _round_index(i: int, n: int, T: int) -> int:
    """round(i * T / n) with ties to the lower index, modulo T."""
    return (-((n - 2 * i * T) // (2 * n))) % T


def _mixed_walk(space: FiniteMetricSpace, laziness: float, teleport: float) -> RandomWalkKernel:
    base = lazy_walk(space, laziness).matrix
    k = (1 - teleport) * base + teleport / space.n
    return RandomWalkKernel(space, k)


def cycle_family(sizes: Sequence[int], laziness: float = 0.5, teleport: float = 0.0, target_size: int | None = None):
    """Cycles C_n of circumference 1 mapped onto C_T by rounding angles."""
    T = max(sizes) if target_size is None else target_size
    target = cycle_space(T)
    members = []
    for n in sizes:
        X = cycle_space(n)
        f = ApproximationMap(X, target, [_round_index(i, n, T) for i in range(n)])
        members.append(FamilyMember(X, _mixed_walk(X, laziness, teleport), f))
    return target, members


def escaping_path_family(shifts: Sequence[int], window: int = 2, base_points: int = 4):
    """The drifting-window walks: m^n_x uniform on {x+n, ..., x+n+window-1}.

    All members live on one path long enough that the windows of the first
    ``base_points`` points are never clipped; f_n is the identity.
    """
    L = max(shifts) + base_points + window
    X = path_space(L)
    members = []
    for s in shifts:
        k = np.zeros((L, L))
        for x in range(L):
            for w in range(window):
                k[x, min(x + s + w, L - 1)] += 1.0 / window
        members.append(FamilyMember(X, RandomWalkKernel(X, k), ApproximationMap(X, X, np.arange(L), 0.0)))
    return X, members


def family_from_config(config: dict):
    kind = config.get("family")
    walk = config.get("walk", {})
    sizes = config.get("sizes")
    if kind == "cycle":
        if not sizes:
            raise BadConfig("cycle family needs 'sizes'")
        return cycle_family(
            sizes,
            laziness=float(walk.get("laziness", 0.5)),
            teleport=float(walk.get("teleport", 0.0)),
            target_size=config.get("target_size"),
        )
    if kind == "path":
        if not sizes:
            raise BadConfig("path family needs 'sizes' (window shifts)")
        return escaping_path_family(sizes, window=int(walk.get("window", 2)), base_points=int(walk.get("base_points", 4)))
    if kind == "custom":
        try:
            target = validate_space(config["target"]["distances"])
            members = []
            for m in config["members"]:
                X = validate_space(m["distances"])
                K = RandomWalkKernel(X, m["kernel"], tol=1e-9)
                members.append(FamilyMember(X, K, ApproximationMap(X, target, m["assignment"])))
        except KeyError as exc:
            raise BadConfig(f"custom family is missing key {exc}") from None
        return target, members
    raise BadConfig(f"unknown family {kind!r}; expected cycle, path or custom")


@dataclass
class StabilityReport:
    p: float
    kappa0: float
    member_kappa_inf: list[float]
    convergence: MapConvergenceReport
    limit_kappa_inf: float | None
    tolerance: float | None
    holds: bool | None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["convergence"] = self.convergence.to_dict()
        return d


def stability_experiment(
    config: dict, p: float = 1.0, kappa0: float | None = None, max_diameter_ratio: float = 10.0
) -> StabilityReport:
    """Limit of a walk family along its approximation maps and the curvature it inherits.

    The limit kernel on the target is the last member's pushforward. When
    the family fails the Cauchy check no limit is formed and ``holds`` is None.
    """
    p = check_exponent(p)
    target, members = family_from_config(config)
    diam = max(m.space.diameter for m in members)
    if diam > max_diameter_ratio * max(target.diameter, ROUNDOFF):
        raise BadConfig("family diameters are not uniformly bounded relative to the target")
    infs = [curvature_report(m.kernel, p).kappa_inf for m in members]
    if kappa0 is None:
        kappa0 = min(infs)
    if min(infs) < kappa0 - ROUNDOFF:
        raise BadConfig(f"member curvature {min(infs):.6g} is below the claimed bound {kappa0:.6g}")
    conv = map_convergence_check(members, p=p, lipschitz=max(0.0, 1.0 - kappa0))
    if not conv.converged:
        return StabilityReport(p, kappa0, infs, conv, None, None, None)
    limit = RandomWalkKernel(target, np.array([m.weights for m in pushed_kernel(members[-1])]))
    limit_inf = curvature_report(limit, p).kappa_inf
    eps = float(members[-1].to_target.epsilon)
    d_min = float(target.distances[~np.eye(target.n, dtype=bool)].min())
    distortion_bound = ((1 - kappa0) * 3 * eps + eps) / d_min
    tol = 2 * (distortion_bound + SOLVER_TOL)
    return StabilityReport(p, kappa0, infs, conv, limit_inf, tol, bool(limit_inf >= kappa0 - tol))
