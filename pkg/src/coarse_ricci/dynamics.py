"""Invariant measures by contraction iteration and geometric rate traces."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .curvature import curvature_report
from .errors import ContractViolation, NoConvergence
from .metric_core import DiscreteMeasure, RandomWalkKernel, convolve
from ._simplex import solve_transport
from .transport import check_exponent, wasserstein

log = logging.getLogger(__name__)

ENVELOPE_SLACK = 1e-8
# W_p^p is computed to about this relative accuracy, so W_p carries an error of roughly diam * COST_EPS^(1/p)
COST_EPS = 1e-14
STALL_L1 = 1e-15


# D_t is computed with long double weights where the platform has them
EXTENDED = np.longdouble
EXTENDED_COST_EPS = max(COST_EPS * float(np.finfo(EXTENDED).eps / np.finfo(np.float64).eps), 1e-19)
REFINE_MAX_ITER = 100_000


def envelope_slack(diameter: float, p: float, cost_eps: float = COST_EPS) -> float:
    """Absolute allowance for envelope checks: ENVELOPE_SLACK or the W_p round-off floor, whichever is larger."""
    return max(ENVELOPE_SLACK, diameter * cost_eps ** (1.0 / p))


@dataclass
class RateTrace:
    p: float
    steps: list[tuple[int, float]]
    rate_bound: float  # 1 - kappa_inf
    diameter: float
    bounds: list[float] = field(default_factory=list)
    ratios: list[float | None] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.steps])

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "rate_bound": self.rate_bound,
            "diameter": self.diameter,
            "steps": [
                {"t": t, "value": v, "bound": b, **({"same_rate_ratio": r} if self.ratios else {})}
                for (t, v), b, r in zip(self.steps, self.bounds, self.ratios or [None] * len(self.steps))
            ],
        }

    def csv_rows(self) -> list[list]:
        rows: list[list] = [["t", "value", "bound"]]
        rows += [[t, v, b] for (t, v), b in zip(self.steps, self.bounds)]
        return rows


def _kappa_inf(kernel: RandomWalkKernel, p: float, kappa_inf: float | None) -> float:
    if kappa_inf is None:
        kappa_inf = curvature_report(kernel, p).kappa_inf
    return kappa_inf


def invariant_measure(
    kernel: RandomWalkKernel,
    p: float = 1.0,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    start: DiscreteMeasure | None = None,
    kappa_inf: float | None = None,
) -> DiscreteMeasure:
    """Iterate mu <- mu * m from ``start`` (uniform by default) until W_p(mu, mu*m) is small.

    When kappa_inf > 0 the stopping threshold is tightened to
    ``tol * min(1, kappa_inf)``, which puts the result within ``tol`` of the
    true invariant measure in W_p. Iteration also stops once the weights stop
    changing in floating point; two measures differing by mass delta are about
    delta^(1/p) apart, so for p > 1 a tol near 1e-10 is below double precision.
    """
    p = check_exponent(p)
    kappa_inf = _kappa_inf(kernel, p, kappa_inf)
    if kappa_inf <= 0:
        log.warning("kappa_inf = %.3g <= 0: convergence to a unique invariant measure is not guaranteed", kappa_inf)
    threshold = tol * min(1.0, kappa_inf) if kappa_inf > 0 else tol
    mu = kernel.space.uniform() if start is None else start
    residual = np.inf
    for _ in range(max_iter):
        nxt = convolve(mu, kernel)
        residual = wasserstein(mu, nxt, p)
        if residual <= threshold:
            return mu
        if np.abs(nxt.weights - mu.weights).sum() <= STALL_L1:
            # floating-point fixed point: for p > 1 the residual can sit above a tight tol forever
            log.info("iteration stalled with W_p residual %.3g above threshold %.3g", residual, threshold)
            return nxt
        mu = nxt
    raise NoConvergence(max_iter, residual)


def _invariance_slack(kernel: RandomWalkKernel, nu: DiscreteMeasure, p: float, rate: float, T: int) -> np.ndarray:
    """Accumulated error from using an approximate invariant measure, per step."""
    residual = wasserstein(nu, convolve(nu, kernel), p)
    return residual * np.array([sum(rate**k for k in range(t)) for t in range(T + 1)])


def convergence_trace(
    kernel: RandomWalkKernel,
    mu0: DiscreteMeasure,
    p: float = 1.0,
    T: int = 50,
    nu: DiscreteMeasure | None = None,
    kappa_inf: float | None = None,
    check: bool = True,
) -> RateTrace:
    """W_p(mu0 * m^t, nu) for t = 0..T against the envelope (1 - kappa_inf)^t W_p(mu0, nu)."""
    p = check_exponent(p)
    kappa_inf = _kappa_inf(kernel, p, kappa_inf)
    if nu is None:
        nu = invariant_measure(kernel, p, kappa_inf=kappa_inf)
    rate = 1.0 - kappa_inf
    slack = _invariance_slack(kernel, nu, p, rate, T)
    start = wasserstein(mu0, nu, p)
    trace = RateTrace(p=p, steps=[], rate_bound=rate, diameter=kernel.space.diameter)
    mu = mu0
    for t in range(T + 1):
        if t:
            mu = convolve(mu, kernel)
        value = wasserstein(mu, nu, p)
        bound = rate**t * start + slack[t]
        trace.steps.append((t, value))
        trace.bounds.append(bound)
        if check and value > bound + envelope_slack(kernel.space.diameter, p):
            raise ContractViolation(f"W_p(mu0*m^{t}, nu) = {value:.12g} exceeds envelope {bound:.12g}", {"t": t})
    return trace


def _extended_transport_cost(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> np.floating:
    sa, sb = np.flatnonzero(a > 0), np.flatnonzero(b > 0)
    c = cost[np.ix_(sa, sb)]
    plan, _, _ = solve_transport(a[sa], b[sb], c)
    return max((plan * c).sum(), EXTENDED(0))


def _refine_invariant(matrix: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Iterate nu <- nu K in extended precision until the weights stop moving."""
    for _ in range(REFINE_MAX_ITER):
        nxt = nu @ matrix
        nxt /= nxt.sum()
        if np.abs(nxt - nu).sum() <= 4 * np.finfo(EXTENDED).eps:
            return nxt
        nu = nxt
    return nu


def lifted_rate_check(
    kernel: RandomWalkKernel,
    p: float = 1.0,
    T: int = 50,
    nu: DiscreteMeasure | None = None,
    kappa_inf: float | None = None,
    check: bool = True,
) -> RateTrace:
    """D_t = (sum_x nu(x) W_p(m^t_x, nu)^p)^(1/p), the W_p distance from nu~^t to delta_nu.

    Checked against Diam(X) (1 - kappa_inf)^t. ``ratios`` holds
    D_t / max_x W_p(m^t_x, nu), which lies in [(min nu)^(1/p), 1].

    The iterates m^t_x and nu are carried in extended precision, with nu
    refined from the given approximation. Two float64 weight vectors one
    ulp apart are already about 1e-8 apart in W_2, which would swamp the
    envelope once it drops below that.
    """
    p = check_exponent(p)
    kappa_inf = _kappa_inf(kernel, p, kappa_inf)
    if nu is None:
        nu = invariant_measure(kernel, p, kappa_inf=kappa_inf)
    rate = 1.0 - kappa_inf
    space = kernel.space
    matrix = kernel.matrix.astype(EXTENDED)
    cost = space.distances.astype(EXTENDED) ** EXTENDED(p)
    nu_x = _refine_invariant(matrix, nu.weights.astype(EXTENDED))
    residual = float(_extended_transport_cost(nu_x, nu_x @ matrix, cost) ** (1.0 / p))
    slack_steps = residual * np.array([sum(rate**k for k in range(t)) for t in range(T + 1)])
    allowance = envelope_slack(space.diameter, p, EXTENDED_COST_EPS)
    trace = RateTrace(p=p, steps=[], rate_bound=rate, diameter=space.diameter)
    step = np.eye(space.n, dtype=EXTENDED)
    for t in range(T + 1):
        if t:
            step = step @ matrix
        costs = np.array([_extended_transport_cost(row / row.sum(), nu_x, cost) for row in step])
        value = float((nu_x @ costs) ** (1.0 / p))
        bound = space.diameter * rate**t + slack_steps[t]
        worst = float(costs.max() ** (1.0 / p))
        trace.steps.append((t, value))
        trace.bounds.append(bound)
        trace.ratios.append(value / worst if worst > 0 else None)
        if check and value > bound + allowance:
            raise ContractViolation(f"D_{t} = {value:.12g} exceeds Diam * rate^t = {bound:.12g}", {"t": t})
    return trace
