"""Primal network simplex for the dense transportation problem.

The basis is a spanning tree of the complete bipartite graph on
``m`` supply nodes (0..m-1) and ``n`` demand nodes (m..m+n-1), with
``m + n - 1`` basic cells. Node potentials of the final tree are the
Kantorovich dual pair.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import SolverFailure


def _initial_basis(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> dict[tuple[int, int], float]:
    """Least-cost greedy allocation, completed to a spanning tree with zero cells.

    Every allocation exhausts a row or a column, so the allocated cells form
    a forest; zero-flow cells then join the components.
    """
    m, n = len(a), len(b)
    ra, rb = a.copy(), b.copy()
    row_open = np.ones(m, dtype=bool)
    col_open = np.ones(n, dtype=bool)
    flows: dict[tuple[int, int], float] = {}
    order = np.argsort(cost, axis=None, kind="stable")
    for flat in order:
        i, j = divmod(int(flat), n)
        if not (row_open[i] and col_open[j]):
            continue
        q = min(ra[i], rb[j])
        flows[i, j] = q
        ra[i] -= q
        rb[j] -= q
        if ra[i] <= 0:
            row_open[i] = False
        if rb[j] <= 0:
            col_open[j] = False
        if not row_open.any() or not col_open.any():
            break

    parent = list(range(m + n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in flows:
        parent[find(i)] = find(m + j)
    if len(flows) < m + n - 1:
        for flat in order:
            i, j = divmod(int(flat), n)
            ri, rj = find(i), find(m + j)
            if ri != rj:
                parent[ri] = rj
                flows[i, j] = a.dtype.type(0)
                if len(flows) == m + n - 1:
                    break
    if len(flows) != m + n - 1:
        raise SolverFailure("initial allocation is not a spanning tree")
    return flows


def _recompute_flows(adj: list[set[int]], a: np.ndarray, b: np.ndarray, m: int) -> dict[tuple[int, int], float]:
    """Solve the tree system for the flows by peeling leaves."""
    adj = [set(s) for s in adj]
    residual = np.concatenate([a, b])
    flows: dict[tuple[int, int], float] = {}
    leaves = deque(k for k in range(len(adj)) if len(adj[k]) == 1)
    remaining = len(adj) - 1
    while remaining:
        leaf = leaves.popleft()
        if len(adj[leaf]) != 1:
            continue
        other = adj[leaf].pop()
        adj[other].discard(leaf)
        q = residual[leaf]
        flows[(leaf, other - m) if leaf < m else (other, leaf - m)] = q
        residual[other] -= q
        remaining -= 1
        if len(adj[other]) == 1:
            leaves.append(other)
    return flows


def solve_transport(a, b, cost, max_iter: int | None = None):
    """Minimise <x, cost> over couplings x of the positive vectors ``a``, ``b``.

    Returns ``(plan, u, v)`` with ``u[i] + v[j] <= cost[i, j]`` up to
    round-off and equality on the basic cells. Arithmetic runs in the
    widest input float type, so ``np.longdouble`` inputs give extended
    precision results.
    """
    dtype = np.result_type(a, b, cost, np.float64)
    a = np.asarray(a, dtype=dtype)
    b = np.asarray(b, dtype=dtype)
    cost = np.asarray(cost, dtype=dtype)
    m, n = len(a), len(b)
    if m == 0 or n == 0:
        raise SolverFailure("empty marginal")
    if m == 1:
        return b[None, :].copy(), np.zeros(1, dtype), cost[0].copy()
    if n == 1:
        return a[:, None].copy(), cost[:, 0].copy(), np.zeros(1, dtype)

    flows = _initial_basis(a, b, cost)
    N = m + n
    adj: list[set[int]] = [set() for _ in range(N)]
    for i, j in flows:
        adj[i].add(m + j)
        adj[m + j].add(i)
    tol = 1e-12 * max(1.0, float(np.abs(cost).max()))
    if max_iter is None:
        max_iter = 50 * m * n + 1000
    bland_after = 4 * m * n + 50
    basic_mask = np.zeros((m, n), dtype=bool)
    for cell in flows:
        basic_mask[cell] = True

    pot = np.empty(N, dtype)
    parent = np.empty(N, dtype=int)
    depth = np.empty(N, dtype=int)
    for it in range(max_iter):
        # potentials, parents and depths of the tree rooted at node 0
        pot[0] = 0.0
        parent[0] = -1
        depth[0] = 0
        queue = [0]
        for node in queue:
            for other in adj[node]:
                if other != parent[node]:
                    parent[other] = node
                    depth[other] = depth[node] + 1
                    if node < m:
                        pot[other] = cost[node, other - m] - pot[node]
                    else:
                        pot[other] = cost[other, node - m] - pot[node]
                    queue.append(other)
        if len(queue) != N:
            raise SolverFailure("basis is not a spanning tree")
        u, v = pot[:m], pot[m:]
        reduced = cost - u[:, None] - v[None, :]
        reduced[basic_mask] = 0.0
        if it < bland_after:
            flat = int(np.argmin(reduced))
            if reduced.flat[flat] >= -tol:
                break
        else:
            negative = np.flatnonzero(reduced.ravel() < -tol)
            if negative.size == 0:
                break
            flat = int(negative[0])
        ei, ej = divmod(flat, n)

        # tree path from demand node m+ej to supply node ei, via their common ancestor
        x, y = m + ej, ei
        up_x, up_y = [x], [y]
        while depth[x] > depth[y]:
            x = parent[x]
            up_x.append(x)
        while depth[y] > depth[x]:
            y = parent[y]
            up_y.append(y)
        while x != y:
            x = parent[x]
            y = parent[y]
            up_x.append(x)
            up_y.append(y)
        path = up_x + up_y[-2::-1]

        cells = [
            (q, p - m) if p >= m else (p, q - m) for p, q in zip(path[:-1], path[1:])
        ]
        minus = cells[0::2]
        plus = cells[1::2]
        theta = min(flows[c] for c in minus)
        leaving = next(c for c in minus if flows[c] == theta)
        for c in minus:
            flows[c] -= theta
        for c in plus:
            flows[c] += theta
        del flows[leaving]
        basic_mask[leaving] = False
        li, lj = leaving
        adj[li].discard(m + lj)
        adj[m + lj].discard(li)
        flows[ei, ej] = theta
        basic_mask[ei, ej] = True
        adj[ei].add(m + ej)
        adj[m + ej].add(ei)
    else:
        raise SolverFailure(f"transport simplex did not terminate in {max_iter} pivots")

    flows = _recompute_flows(adj, a, b, m)
    plan = np.zeros((m, n), dtype)
    for (i, j), q in flows.items():
        plan[i, j] = q
    if plan.min() < -1e-9:
        raise SolverFailure(f"optimal basis has negative flow {plan.min():.3e}")
    np.clip(plan, 0.0, None, out=plan)
    return plan, u.copy(), v.copy()
