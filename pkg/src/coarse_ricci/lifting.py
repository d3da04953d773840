"""Random walks lifted to a finite piece of the Wasserstein space P_p(X).

The lifted space is a :class:`FiniteMetricSpace` whose points are measures
on the base space, at pairwise W_p distance. The lifted walk sends a
measure mu to the law of m_x with x ~ mu, an atomic measure sitting on the
points that are kernel rows ("walkpoints").
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .curvature import CurvatureReport, curvature_report
from .errors import GridTooLarge, NotInvariantInput
from .metric_core import (
    DiscreteMeasure,
    FiniteMetricSpace,
    RandomWalkKernel,
    convolve,
    validate_space,
)
from .transport import check_exponent, wasserstein

log = logging.getLogger(__name__)

GRID_WARN = 5000
GRID_CAP = 20000
DEDUP_TOL = 1e-12
LIFTED_TRIANGLE_TOL = 2e-8


def simplex_grid(n: int, N: int) -> np.ndarray:
    """All weight vectors on n points with entries in {0, 1/N, ..., 1}."""
    rows = []
    for bars in itertools.combinations(range(N + n - 1), n - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(N + n - 1 - prev - 1)
        rows.append(parts)
    return np.array(rows, dtype=float) / N


def grid_size(n: int, N: int) -> int:
    return math.comb(N + n - 1, n - 1)


@dataclass(frozen=True, eq=False)
class LiftedSpace:
    base_space: FiniteMetricSpace
    base_kernel: RandomWalkKernel
    p: float
    grid_denominator: int
    measures: tuple[DiscreteMeasure, ...]
    space: FiniteMetricSpace  # the measures with the W_p metric
    dirac_index: np.ndarray
    walkpoint_index: np.ndarray

    @property
    def size(self) -> int:
        return self.space.n

    def weight_matrix(self) -> np.ndarray:
        return np.array([m.weights for m in self.measures])

    def to_space_json(self) -> dict:
        """Export in the space-file format; points are labelled by weight vectors."""
        return {
            "points": [[float(w) for w in m.weights] for m in self.measures],
            "metric": {"type": "matrix", "data": self.space.distances.tolist()},
        }


@dataclass(frozen=True, eq=False)
class LiftedKernel:
    lifted_space: LiftedSpace
    kernel: RandomWalkKernel  # on lifted_space.space, rows supported on walkpoints


def _dedup(candidates: np.ndarray, tol: float) -> np.ndarray:
    kept: list[np.ndarray] = []
    for w in candidates:
        if kept and np.abs(np.asarray(kept) - w).max(axis=1).min() <= tol:
            continue
        kept.append(w)
    return np.asarray(kept)


def _index_of(points: np.ndarray, w: np.ndarray, tol: float) -> int:
    dist = np.abs(points - w).max(axis=1)
    k = int(np.argmin(dist))
    if dist[k] > tol:
        raise KeyError("measure is not a point of the lifted space")
    return k


def build_lifted_space(
    base: FiniteMetricSpace,
    kernel: RandomWalkKernel,
    p: float = 1.0,
    N: int = 2,
    extras: Sequence[DiscreteMeasure] = (),
    threads: int = 1,
    dedup_tol: float = DEDUP_TOL,
) -> LiftedSpace:
    """Diracs, kernel rows, the denominator-N simplex grid and ``extras``, at W_p distances."""
    p = check_exponent(p)
    if N < 1:
        raise ValueError("grid denominator must be >= 1")
    if not kernel.space.same_as(base):
        raise ValueError("kernel is not defined on the base space")
    n = base.n
    expected = grid_size(n, N) + 2 * n + len(extras)
    if expected > GRID_CAP:
        raise GridTooLarge(f"lifted space would have up to {expected} points (cap {GRID_CAP})")
    if expected > GRID_WARN:
        log.warning("lifted space has up to %d points; metric fill is quadratic", expected)

    blocks = [np.eye(n), kernel.matrix, simplex_grid(n, N)]
    if extras:
        blocks.append(np.array([e.weights for e in extras]))
    points = _dedup(np.vstack(blocks), dedup_tol)
    measures = tuple(DiscreteMeasure(base, w) for w in points)
    M = len(measures)

    pairs = list(itertools.combinations(range(M), 2))

    def one(pair):
        i, j = pair
        return wasserstein(measures[i], measures[j], p)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one, pairs))
    else:
        values = [one(pr) for pr in pairs]
    metric = np.zeros((M, M))
    for (i, j), v in zip(pairs, values):
        metric[i, j] = metric[j, i] = v

    labels = tuple(tuple(float(x) for x in w) for w in points)
    space = validate_space(metric, labels, tol=LIFTED_TRIANGLE_TOL)
    dirac_index = np.array([_index_of(points, row, dedup_tol) for row in np.eye(n)])
    walkpoint_index = np.array([_index_of(points, row, dedup_tol) for row in kernel.matrix])
    return LiftedSpace(
        base_space=base,
        base_kernel=kernel,
        p=p,
        grid_denominator=N,
        measures=measures,
        space=space,
        dirac_index=dirac_index,
        walkpoint_index=walkpoint_index,
    )


def lifted_measure(lifted: LiftedSpace, mu: DiscreteMeasure) -> DiscreteMeasure:
    """The pushforward of ``mu`` under x -> m_x, as a measure on the lifted points."""
    w = np.zeros(lifted.size)
    np.add.at(w, lifted.walkpoint_index, mu.weights)
    return DiscreteMeasure(lifted.space, w)


def lift_kernel(lifted: LiftedSpace) -> LiftedKernel:
    """Row mu of the lifted walk is sum_x mu(x) delta_{m_x}."""
    k = np.zeros((lifted.size, lifted.size))
    for i, mu in enumerate(lifted.measures):
        np.add.at(k[i], lifted.walkpoint_index, mu.weights)
    return LiftedKernel(lifted, RandomWalkKernel(lifted.space, k))


def lifted_curvature_report(
    lifted: LiftedSpace, lifted_kernel: LiftedKernel, p: float | None = None, threads: int = 1
) -> CurvatureReport:
    """Curvature of the lifted walk over all pairs of lifted points.

    The outer transport uses the lifted metric (already W_p) raised to p,
    so no inner problem is re-solved.
    """
    p = lifted.p if p is None else check_exponent(p)
    if p != lifted.p:
        raise ValueError(f"lifted space was built for p={lifted.p}, not p={p}")
    return curvature_report(lifted_kernel.kernel, p, threads=threads)


@dataclass
class LiftVerification:
    holds: bool
    base_inf: float
    lifted_inf: float
    lower_ok: bool
    upper_ok: bool
    tol: float
    witness: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "base_inf": self.base_inf,
            "lifted_inf": self.lifted_inf,
            "lower_ok": self.lower_ok,
            "upper_ok": self.upper_ok,
            "tol": self.tol,
            "witness": self.witness,
        }


def verify_lift_theorem(
    base_report: CurvatureReport,
    lifted_report: CurvatureReport,
    tol: float = 1e-6,
    lifted: LiftedSpace | None = None,
) -> LiftVerification:
    """Compare inf of the base curvature with inf of the lifted curvature.

    ``lower_ok``: lifted_inf >= base_inf - tol (the lifted walk is no less
    contracting). ``upper_ok``: lifted_inf <= base_inf + tol (Dirac pairs are
    lifted points and reproduce the base values).
    """
    if base_report.p != lifted_report.p:
        raise ValueError("reports were computed at different exponents")
    lower = lifted_report.kappa_inf >= base_report.kappa_inf - tol
    upper = lifted_report.kappa_inf <= base_report.kappa_inf + tol
    witness: dict = {
        "base_pair": list(base_report.argmin_pair),
        "lifted_pair": list(lifted_report.argmin_pair),
    }
    if lifted is not None:
        diracs = set(int(i) for i in lifted.dirac_index)
        a, b = lifted_report.argmin_pair
        witness["lifted_pair_is_dirac"] = a in diracs and b in diracs
        witness["lifted_pair_measures"] = [lifted.measures[a].weights.tolist(), lifted.measures[b].weights.tolist()]
        gap = lifted_report.kappa_inf - base_report.kappa_inf
        if gap < 0:
            log.info("grid pair below the Dirac minimum by %.3e (p=%g)", -gap, base_report.p)
    return LiftVerification(
        holds=bool(lower and upper),
        base_inf=base_report.kappa_inf,
        lifted_inf=lifted_report.kappa_inf,
        lower_ok=bool(lower),
        upper_ok=bool(upper),
        tol=tol,
        witness=witness,
    )


@dataclass
class InvarianceResult:
    holds: bool
    residual: float

    def to_dict(self) -> dict:
        return {"holds": self.holds, "residual": self.residual}


def lifted_invariant_check(
    lifted_kernel: LiftedKernel, nu: DiscreteMeasure, tol: float = 1e-8
) -> InvarianceResult:
    """Check that the lifted measure of an invariant ``nu`` is invariant for the lifted walk."""
    lifted = lifted_kernel.lifted_space
    base_residual = float(np.abs(convolve(nu, lifted.base_kernel).weights - nu.weights).max())
    if base_residual > tol:
        raise NotInvariantInput(f"nu is not invariant for the base walk (residual {base_residual:.3e})")
    nu_tilde = lifted_measure(lifted, nu)
    stepped = nu_tilde.weights @ lifted_kernel.kernel.matrix
    residual = float(np.abs(stepped - nu_tilde.weights).max())
    return InvarianceResult(holds=residual <= tol, residual=residual)


@dataclass
class ReversibilityResult:
    holds: bool
    max_defect: float
    witness: tuple[int, int] | None

    def to_dict(self) -> dict:
        return {"holds": self.holds, "max_defect": self.max_defect, "witness": self.witness}


def reversibility_check(kernel: RandomWalkKernel, nu: DiscreteMeasure, tol: float = 1e-10) -> ReversibilityResult:
    """Detailed balance nu(x) m_x(y) = nu(y) m_y(x) over all pairs."""
    flux = nu.weights[:, None] * kernel.matrix
    defect = np.abs(flux - flux.T)
    i, j = np.unravel_index(int(np.argmax(defect)), defect.shape)
    worst = float(defect[i, j])
    holds = worst <= tol
    return ReversibilityResult(holds, worst, None if holds else (int(min(i, j)), int(max(i, j))))


def lifted_reversibility_check(
    lifted_kernel: LiftedKernel, nu_tilde: DiscreteMeasure, tol: float = 1e-10
) -> ReversibilityResult:
    """Detailed balance for the lifted walk; only walkpoint atoms can carry mass."""
    return reversibility_check(lifted_kernel.kernel, nu_tilde, tol)


def pullback_lipschitz(lifted: LiftedSpace, g: np.ndarray) -> float:
    """Lipschitz constant on the base space of x -> g(m_x)."""
    vals = np.asarray(g, dtype=float)[lifted.walkpoint_index]
    d = lifted.base_space.distances
    n = d.shape[0]
    if n < 2:
        return 0.0
    iu = np.triu_indices(n, 1)
    return float((np.abs(vals[:, None] - vals[None, :])[iu] / d[iu]).max())
