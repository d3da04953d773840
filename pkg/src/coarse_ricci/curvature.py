"""p-coarse Ricci curvature of a random walk and the contraction property it certifies."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, SamePoint
from .metric_core import RandomWalkKernel, convolve, random_measure
from .transport import check_exponent, wasserstein

CONTRACTION_SLACK = 1e-8


@dataclass(frozen=True, eq=False)
class CurvatureReport:
    p: float
    kappa_matrix: np.ndarray  # NaN on the diagonal
    distances: np.ndarray
    transport: np.ndarray  # W_p(m_x, m_y)
    kappa_inf: float
    argmin_pair: tuple[int, int]
    kappa_sup: float
    labels: tuple = field(default=())

    def pairs(self):
        n = self.kappa_matrix.shape[0]
        for i, j in itertools.combinations(range(n), 2):
            yield i, j, self.distances[i, j], self.transport[i, j], self.kappa_matrix[i, j]

    def to_dict(self) -> dict:
        km = [[None if np.isnan(v) else float(v) for v in row] for row in self.kappa_matrix]
        return {
            "p": self.p,
            "labels": list(self.labels),
            "kappa_inf": self.kappa_inf,
            "kappa_sup": self.kappa_sup,
            "argmin_pair": list(self.argmin_pair),
            "kappa_matrix": km,
        }

    def csv_rows(self) -> list[list]:
        rows: list[list] = [["x", "y", "d", "W_p", "kappa"]]
        lab = self.labels or tuple(range(self.kappa_matrix.shape[0]))
        for i, j, d, w, k in self.pairs():
            rows.append([lab[i], lab[j], float(d), float(w), float(k)])
        return rows


def kappa(kernel: RandomWalkKernel, x: int, y: int, p: float = 1.0) -> float:
    """1 - W_p(m_x, m_y) / d(x, y) for distinct points x, y."""
    if x == y:
        raise SamePoint(f"curvature is undefined for x = y = {x}")
    return 1.0 - wasserstein(kernel.row(x), kernel.row(y), p) / kernel.space.distances[x, y]


def _pair_transport(kernel: RandomWalkKernel, p: float, pairs, threads: int) -> list[float]:
    rows = kernel.rows()

    def one(pair):
        i, j = pair
        return wasserstein(rows[i], rows[j], p)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, pairs))
    return [one(pr) for pr in pairs]


def curvature_report(kernel: RandomWalkKernel, p: float = 1.0, threads: int = 1) -> CurvatureReport:
    """Curvature of every pair of distinct points, with its infimum and supremum."""
    p = check_exponent(p)
    space = kernel.space
    n = space.n
    if n < 2:
        raise ValueError("curvature needs at least two points")
    pairs = list(itertools.combinations(range(n), 2))
    w = np.zeros((n, n))
    for (i, j), value in zip(pairs, _pair_transport(kernel, p, pairs, threads)):
        w[i, j] = w[j, i] = value
    d = space.distances
    km = np.full((n, n), np.nan)
    off = ~np.eye(n, dtype=bool)
    km[off] = 1.0 - w[off] / d[off]
    inf_pair = min(pairs, key=lambda ij: (km[ij], ij))
    return CurvatureReport(
        p=p,
        kappa_matrix=km,
        distances=d,
        transport=w,
        kappa_inf=float(km[inf_pair]),
        argmin_pair=inf_pair,
        kappa_sup=float(np.nanmax(km)),
        labels=space.labels,
    )


@dataclass
class ContractionResult:
    p: float
    kappa_inf: float
    samples: int
    max_ratio: float
    violations: list = field(default_factory=list)

    @property
    def bound(self) -> float:
        return 1.0 - self.kappa_inf

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "kappa_inf": self.kappa_inf,
            "bound": self.bound,
            "samples": self.samples,
            "max_ratio": self.max_ratio,
            "violations": self.violations,
        }


def contraction_check(
    kernel: RandomWalkKernel,
    p: float = 1.0,
    samples: int = 200,
    seed: int = 0,
    kappa_inf: float | None = None,
    raise_on_violation: bool = True,
) -> ContractionResult:
    """Sample random pairs (mu, nu) and test W_p(mu*m, nu*m) <= (1 - kappa_inf) W_p(mu, nu).

    Sample measures are Dirichlet(1) on the whole space. A violation beyond
    ``1e-8`` raises :class:`ContractViolation` with the offending pair.
    """
    p = check_exponent(p)
    if kappa_inf is None:
        kappa_inf = curvature_report(kernel, p).kappa_inf
    rng = np.random.default_rng(seed)
    bound = 1.0 - kappa_inf
    result = ContractionResult(p=p, kappa_inf=kappa_inf, samples=samples, max_ratio=0.0)
    for _ in range(samples):
        mu = random_measure(kernel.space, rng)
        nu = random_measure(kernel.space, rng)
        before = wasserstein(mu, nu, p)
        if before == 0:
            continue
        after = wasserstein(convolve(mu, kernel), convolve(nu, kernel), p)
        result.max_ratio = max(result.max_ratio, after / before)
        if after > bound * before + CONTRACTION_SLACK:
            witness = {"mu": mu.weights.tolist(), "nu": nu.weights.tolist(), "before": before, "after": after}
            result.violations.append(witness)
            if raise_on_violation:
                raise ContractViolation(
                    f"W_p(mu*m, nu*m) = {after:.12g} exceeds {bound:.12g} * {before:.12g}", witness
                )
    return result
