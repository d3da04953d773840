"""Finite metric spaces, probability measures on them, and random-walk kernels.

All three types are immutable once built: the underlying arrays are marked
read-only so instances can be shared freely between threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, floyd_warshall

from .errors import (
    DisconnectedGraph,
    InvalidMeasure,
    MetricError,
    NegativeDistance,
    NonSymmetric,
    SpaceMismatch,
    TriangleViolation,
    ZeroOffDiagonal,
)

# Metric axioms on user data vs. quantities computed internally.
INGEST_TOL = 1e-9
INTERNAL_TOL = 1e-12
MASS_TOL = 1e-12
MAX_ITERATE = 10**6

_KIND_ORDER = [
    ("Malformed", MetricError),
    ("NegativeDistance", NegativeDistance),
    ("ZeroOffDiagonal", ZeroOffDiagonal),
    ("NonSymmetric", NonSymmetric),
    ("TriangleViolation", TriangleViolation),
]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Labelled points with a symmetric distance matrix.

    Build through :func:`validate_space` or :func:`graph_metric`; the
    constructor itself trusts its input.
    """

    labels: tuple
    distances: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "distances", _frozen(self.distances))
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("point labels must be unique")
        if self.distances.shape != (len(self.labels), len(self.labels)):
            raise ValueError("label count does not match distance matrix")

    @property
    def n(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return self.n

    @property
    def diameter(self) -> float:
        return float(self.distances.max()) if self.n else 0.0

    def index(self, label: Hashable) -> int:
        return self.labels.index(label)

    def d(self, i: int, j: int) -> float:
        return float(self.distances[i, j])

    def dirac(self, i: int) -> "DiscreteMeasure":
        w = np.zeros(self.n)
        w[i] = 1.0
        return DiscreteMeasure(self, w)

    def uniform(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self, np.full(self.n, 1.0 / self.n))

    def scaled(self, factor: float) -> "FiniteMetricSpace":
        """The space with every distance multiplied by ``factor`` > 0."""
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return FiniteMetricSpace(self.labels, self.distances * factor)

    def same_as(self, other: "FiniteMetricSpace") -> bool:
        return self is other or (
            self.labels == other.labels and np.array_equal(self.distances, other.distances)
        )


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability weights over the points of ``space``."""

    space: FiniteMetricSpace
    weights: np.ndarray
    tol: float = field(default=MASS_TOL, repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.space.n,):
            raise InvalidMeasure(f"expected {self.space.n} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidMeasure("weights must be finite")
        if w.min(initial=0.0) < 0:
            if w.min() < -self.tol:
                raise InvalidMeasure(f"negative weight {w.min():.3e}")
            w = np.clip(w, 0.0, None)
        if abs(w.sum() - 1.0) > self.tol:
            raise InvalidMeasure(f"weights sum to {w.sum():.15g}, not 1")
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def normalized(cls, space: FiniteMetricSpace, raw: Sequence[float]) -> "DiscreteMeasure":
        w = np.asarray(raw, dtype=float)
        if np.any(w < 0) or w.sum() <= 0:
            raise InvalidMeasure("cannot normalize weights with negative entries or zero mass")
        return cls(space, w / w.sum())

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def is_dirac(self) -> bool:
        return len(self.support) == 1

    def allclose(self, other: "DiscreteMeasure", atol: float = INTERNAL_TOL) -> bool:
        return self.space.same_as(other.space) and bool(
            np.max(np.abs(self.weights - other.weights)) <= atol
        )


@dataclass(frozen=True, eq=False)
class RandomWalkKernel:
    """A row-stochastic matrix; row ``x`` is the measure m_x."""

    space: FiniteMetricSpace
    matrix: np.ndarray
    tol: float = field(default=MASS_TOL, repr=False)

    def __post_init__(self):
        k = np.array(self.matrix, dtype=float)
        n = self.space.n
        if k.shape != (n, n):
            raise InvalidMeasure(f"kernel must be {n}x{n}, got {k.shape}")
        if k.min(initial=0.0) < -self.tol:
            raise InvalidMeasure("kernel has negative entries")
        k = np.clip(k, 0.0, None)
        bad = np.flatnonzero(np.abs(k.sum(axis=1) - 1.0) > self.tol)
        if bad.size:
            raise InvalidMeasure(f"kernel rows {bad.tolist()} do not sum to 1")
        object.__setattr__(self, "matrix", _frozen(k))

    def row(self, x: int) -> DiscreteMeasure:
        return DiscreteMeasure(self.space, self.matrix[x], tol=self.tol)

    def rows(self) -> list[DiscreteMeasure]:
        return [self.row(x) for x in range(self.space.n)]

    @classmethod
    def identity(cls, space: FiniteMetricSpace) -> "RandomWalkKernel":
        return cls(space, np.eye(space.n))

    @classmethod
    def constant(cls, target: DiscreteMeasure) -> "RandomWalkKernel":
        return cls(target.space, np.tile(target.weights, (target.space.n, 1)))


def validate_space(
    raw: Sequence[Sequence[float]],
    labels: Iterable[Hashable] | None = None,
    tol: float = INGEST_TOL,
) -> FiniteMetricSpace:
    """Check the metric axioms on ``raw`` and return the validated space.

    Raises the subclass of :class:`MetricError` matching the most basic
    violated axiom; ``err.violations`` lists every finding. Triangle
    violations are reported as ``(i, k, j)`` meaning d[i,k] > d[i,j] + d[j,k].
    """
    d = np.asarray(raw, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise MetricError([{"kind": "Malformed", "indices": (), "detail": "matrix is not square"}])
    if not np.all(np.isfinite(d)):
        i, j = np.argwhere(~np.isfinite(d))[0]
        raise MetricError([{"kind": "Malformed", "indices": (int(i), int(j)), "detail": "non-finite entry"}])
    n = d.shape[0]
    labels = tuple(range(n)) if labels is None else tuple(labels)

    found: list[dict] = []
    for i, j in np.argwhere(d < 0):
        found.append({"kind": "NegativeDistance", "indices": (int(i), int(j))})
    for i in range(n):
        if abs(d[i, i]) > tol:
            found.append({"kind": "Malformed", "indices": (i, i), "detail": "nonzero diagonal"})
    off = ~np.eye(n, dtype=bool)
    for i, j in np.argwhere((d <= 0) & off):
        if i < j:
            found.append({"kind": "ZeroOffDiagonal", "indices": (int(i), int(j))})
    for i, j in np.argwhere(np.abs(d - d.T) > tol):
        if i < j:
            found.append({"kind": "NonSymmetric", "indices": (int(i), int(j))})
    if n:
        # excess[i, j, k] = d[i,k] - d[i,j] - d[j,k]
        excess = d[:, None, :] - d[:, :, None] - d[None, :, :]
        for i, j, k in np.argwhere(excess > tol):
            found.append({"kind": "TriangleViolation", "indices": (int(i), int(k), int(j))})

    if found:
        for kind, exc in _KIND_ORDER:
            matching = [v for v in found if v["kind"] == kind]
            if matching:
                matching.sort(key=lambda v: v["indices"])
                rest = [v for v in found if v["kind"] != kind]
                raise exc(matching + rest)

    sym = (d + d.T) / 2.0
    np.fill_diagonal(sym, 0.0)
    return FiniteMetricSpace(labels, sym)


def graph_metric(edges: Iterable[tuple[Hashable, Hashable, float]]) -> FiniteMetricSpace:
    """Shortest-path metric of an undirected graph with positive edge weights.

    Points are labelled in order of first appearance in ``edges``.
    """
    edges = list(edges)
    labels: list = []
    seen: dict = {}
    for u, v, _ in edges:
        for node in (u, v):
            if node not in seen:
                seen[node] = len(labels)
                labels.append(node)
    n = len(labels)
    if n == 0:
        raise ValueError("empty edge list")
    rows, cols, vals = [], [], []
    best: dict[tuple[int, int], float] = {}
    for u, v, w in edges:
        w = float(w)
        if not w > 0:
            raise ValueError(f"edge ({u!r}, {v!r}) has non-positive weight {w}")
        a, b = sorted((seen[u], seen[v]))
        if a == b:
            continue
        best[a, b] = min(w, best.get((a, b), np.inf))
    for (a, b), w in best.items():
        rows.append(a)
        cols.append(b)
        vals.append(w)
    graph = csr_matrix((vals, (rows, cols)), shape=(n, n))
    ncomp, comp = connected_components(graph, directed=False)
    if ncomp > 1:
        raise DisconnectedGraph([[labels[i] for i in np.flatnonzero(comp == c)] for c in range(ncomp)])
    dist = floyd_warshall(graph, directed=False)
    return validate_space(dist, labels, tol=INGEST_TOL)


def _check_same(a: FiniteMetricSpace, b: FiniteMetricSpace) -> None:
    if not a.same_as(b):
        raise SpaceMismatch("measure and kernel live on different spaces")


def convolve(mu: DiscreteMeasure, kernel: RandomWalkKernel) -> DiscreteMeasure:
    """(mu * m)(z) = sum_x mu(x) m_x(z)."""
    _check_same(mu.space, kernel.space)
    w = mu.weights @ kernel.matrix
    return DiscreteMeasure(kernel.space, w / w.sum())


def iterate_kernel(kernel: RandomWalkKernel, t: int) -> RandomWalkKernel:
    """The t-step kernel m^t, by repeated squaring of the transition matrix."""
    if not isinstance(t, (int, np.integer)) or t < 1:
        raise ValueError("t must be a positive integer")
    if t > MAX_ITERATE:
        raise ValueError(f"t={t} exceeds the supported maximum {MAX_ITERATE}")
    k = np.linalg.matrix_power(kernel.matrix, int(t))
    return RandomWalkKernel(kernel.space, k / k.sum(axis=1, keepdims=True))


def pushforward(
    mu: DiscreteMeasure, assignment: Sequence[int], target: FiniteMetricSpace
) -> DiscreteMeasure:
    """Image of ``mu`` under the index map ``assignment`` into ``target``."""
    w = np.zeros(target.n)
    np.add.at(w, np.asarray(assignment, dtype=int), mu.weights)
    return DiscreteMeasure(target, w)


def random_measure(space: FiniteMetricSpace, rng: np.random.Generator, support: int | None = None) -> DiscreteMeasure:
    """Symmetric Dirichlet(1) weights, optionally on a random support of given size."""
    w = np.zeros(space.n)
    idx = np.arange(space.n) if support is None else rng.choice(space.n, size=support, replace=False)
    w[idx] = rng.dirichlet(np.ones(len(idx)))
    return DiscreteMeasure(space, w / w.sum())


def random_kernel(space: FiniteMetricSpace, rng: np.random.Generator, sparsity: float = 0.0) -> RandomWalkKernel:
    """Random row-stochastic kernel; ``sparsity`` is the chance of zeroing an entry."""
    k = rng.dirichlet(np.ones(space.n), size=space.n)
    if sparsity:
        mask = rng.random(k.shape) < sparsity
        mask[np.arange(space.n), rng.integers(space.n, size=space.n)] = False
        k = np.where(mask, 0.0, k)
    return RandomWalkKernel(space, k / k.sum(axis=1, keepdims=True))


def random_space(n: int, rng: np.random.Generator, dim: int = 2) -> FiniteMetricSpace:
    """Random Euclidean point cloud in the unit cube, as a metric space."""
    pts = rng.random((n, dim))
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    return validate_space(d)


def lazy_walk(space: FiniteMetricSpace, laziness: float = 0.5, radius: float | None = None) -> RandomWalkKernel:
    """Stay with probability ``laziness``, else jump uniformly to a nearest neighbour.

    Neighbours are the points at distance <= ``radius``; by default the
    smallest positive distance from each point.
    """
    n = space.n
    k = np.zeros((n, n))
    for x in range(n):
        if n == 1:
            k[x, x] = 1.0
            continue
        dx = space.distances[x].copy()
        dx[x] = np.inf
        r = dx.min() if radius is None else radius
        nbrs = np.flatnonzero(dx <= r * (1 + 1e-12))
        k[x, x] = laziness
        k[x, nbrs] += (1.0 - laziness) / len(nbrs)
    return RandomWalkKernel(space, k)


def cycle_space(n: int, circumference: float = 1.0) -> FiniteMetricSpace:
    """n equally spaced points on a circle with the arc-length metric."""
    i = np.arange(n)
    steps = np.abs(i[:, None] - i[None, :])
    steps = np.minimum(steps, n - steps)
    return FiniteMetricSpace(tuple(range(n)), steps * (circumference / n))


def path_space(n: int, step: float = 1.0) -> FiniteMetricSpace:
    i = np.arange(n)
    return FiniteMetricSpace(tuple(range(n)), np.abs(i[:, None] - i[None, :]) * step)


def hypercube_space(k: int, normalized: bool = True) -> FiniteMetricSpace:
    """{0,1}^k with the Hamming metric, divided by k when ``normalized``."""
    pts = np.array(list(itertools.product((0, 1), repeat=k)), dtype=float)
    d = np.abs(pts[:, None, :] - pts[None, :, :]).sum(-1)
    if normalized and k:
        d = d / k
    labels = tuple("".join(str(int(b)) for b in p) for p in pts)
    return FiniteMetricSpace(labels, d)


def complete_space(n: int, edge: float = 1.0) -> FiniteMetricSpace:
    return FiniteMetricSpace(tuple(range(n)), edge * (1.0 - np.eye(n)))
