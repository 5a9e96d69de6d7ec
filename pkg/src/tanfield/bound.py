"""Topological lower bound on the tangent-field Dirichlet energy.

The bound maximizes 8*pi * sum_a omega_a * xi_a over vertex potentials
satisfying |xi_a - xi_a'| <= |v_a - v_a'| for every vertex pair, with the
gauge xi_1 = 0. Two independent in-house solvers cross-certify the value:

  * solve_primal: a dense primal simplex over the potential variables;
  * solve_dual: a transportation simplex moving the positive trapped areas
    onto the negative ones at Euclidean vertex-distance cost.

By linear-programming duality the two optima coincide; lower_bound checks
the gap at runtime and recovers the reported potentials from the dual
solution by an inf-convolution extension, which keeps them feasible for
every pairwise constraint (the distance matrix is a metric).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, RuleViolationError
from .invariants import HomotopyInvariants, trapped_areas_all, validate
from .polytope import Polytope, vertex_distance_matrix

EIGHT_PI = 8.0 * np.pi
FEAS_TOL = 1e-9
GAP_RTOL = 1e-7
ZERO_SUM_TOL = 1e-9
METRIC_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BoundInstance:
    """Zero-sum vertex weights plus a metric distance matrix."""

    omega: np.ndarray
    d: np.ndarray

    def check(self) -> None:
        n = len(self.omega)
        if self.d.shape != (n, n):
            raise InputError("distance matrix shape does not match omega")
        if abs(float(self.omega.sum())) > ZERO_SUM_TOL:
            raise InputError(f"omega sums to {float(self.omega.sum()):.3e}, expected 0")
        if float(np.abs(self.d - self.d.T).max()) > METRIC_TOL:
            raise InputError("distance matrix is not symmetric")
        if float(np.abs(np.diag(self.d)).max()) > METRIC_TOL:
            raise InputError("distance matrix has a nonzero diagonal")
        # triangle inequality: d[i,j] <= d[i,k] + d[k,j] for all k
        worst = float((self.d[:, :, None] - (self.d[:, None, :] + self.d[None, :, :])).max())
        if worst > METRIC_TOL:
            raise InputError(f"triangle inequality violated by {worst:.3e}")


@dataclass(frozen=True, eq=False)
class PrimalSolution:
    value: float
    xi: np.ndarray


@dataclass(frozen=True, eq=False)
class DualSolution:
    value: float
    plan: tuple[tuple[int, int, float], ...]   # (source vertex, sink vertex, mass)
    xi: np.ndarray                              # potentials recovered from duals


@dataclass(frozen=True, eq=False)
class BoundResult:
    value: float
    xi: np.ndarray
    plan: tuple[tuple[int, int, float], ...]
    gap: float
    omega: np.ndarray


class _Unbounded(Exception):
    pass


def _simplex_max(c: np.ndarray, A: np.ndarray, b: np.ndarray, tol: float = 1e-11):
    """Maximize c @ x subject to A @ x <= b, x >= 0, b >= 0.

    Dense tableau primal simplex starting from the slack basis. Dantzig
    pricing with a switch to Bland's rule after a pivot budget, which
    guarantees termination on degenerate instances.
    """
    m, n = A.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))

    bland_after = 50 * (m + n)
    for it in range(200 * (m + n) + 1000):
        row = T[m, :n + m]
        if it < bland_after:
            j = int(np.argmin(row))
            if row[j] >= -tol:
                break
        else:
            candidates = np.nonzero(row < -tol)[0]
            if candidates.size == 0:
                break
            j = int(candidates[0])
        col = T[:m, j]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(col > tol, T[:m, -1] / col, np.inf)
        i = int(np.argmin(ratios))
        if not np.isfinite(ratios[i]):
            raise _Unbounded
        if it >= bland_after:
            ties = np.nonzero(ratios <= ratios[i] + tol)[0]
            i = int(min(ties, key=lambda r: basis[r]))
        piv = T[i, j]
        T[i] /= piv
        rows = np.arange(m + 1) != i
        T[rows] -= np.outer(T[rows, j], T[i])
        basis[i] = j
    else:
        raise RuleViolationError("simplex failed to terminate within its pivot budget")

    x = np.zeros(n + m)
    for i, bi in enumerate(basis):
        x[bi] = T[i, -1]
    return float(T[m, -1]), x[:n]


def solve_primal(inst: BoundInstance) -> PrimalSolution:
    """Maximize the weighted potential sum directly over potential space.

    Potentials other than the gauge-fixed first one are split into positive
    and negative parts; all ordered pairwise difference constraints are
    imposed. Never infeasible (xi = 0) and never unbounded for zero-sum
    weights, so any such failure signals corrupted input.
    """
    inst.check()
    n = len(inst.omega)
    if n == 1 or not np.any(inst.omega):
        return PrimalSolution(value=0.0, xi=np.zeros(n))

    nv = n - 1                       # free potentials 1..n-1, split into +/-
    rows = []
    rhs = []
    for a in range(n):
        for ap in range(n):
            if a == ap:
                continue
            row = np.zeros(2 * nv)
            if a > 0:
                row[a - 1] = 1.0
                row[nv + a - 1] = -1.0
            if ap > 0:
                row[ap - 1] = -1.0
                row[nv + ap - 1] = 1.0
            rows.append(row)
            rhs.append(inst.d[a, ap])
    A = np.array(rows)
    b = np.array(rhs)
    c = np.concatenate([inst.omega[1:], -inst.omega[1:]])

    try:
        raw, x = _simplex_max(c, A, b)
    except _Unbounded as exc:
        raise RuleViolationError(
            "potential problem unbounded; omega is not zero-sum or d is corrupt"
        ) from exc
    xi = np.zeros(n)
    xi[1:] = x[:nv] - x[nv:]
    return PrimalSolution(value=EIGHT_PI * raw, xi=xi)


def _transport_tree_potentials(basis, cost, p, q):
    """Solve u_i + v_j = cost[i, j] on the spanning basis with u_0 = 0."""
    u = np.full(p, np.nan)
    v = np.full(q, np.nan)
    u[0] = 0.0
    by_src: dict[int, list[int]] = {}
    by_snk: dict[int, list[int]] = {}
    for i, j in basis:
        by_src.setdefault(i, []).append(j)
        by_snk.setdefault(j, []).append(i)
    stack = [("u", 0)]
    while stack:
        kind, k = stack.pop()
        if kind == "u":
            for j in by_src.get(k, ()):
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    stack.append(("v", j))
        else:
            for i in by_snk.get(k, ()):
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    stack.append(("u", i))
    if np.isnan(u).any() or np.isnan(v).any():
        raise RuleViolationError("transportation basis is not a spanning tree")
    return u, v


def _transport_cycle(basis, enter):
    """Alternating cycle created by adding arc enter to the basis tree.

    Returns the cycle as a list of arcs starting with enter; even positions
    gain mass, odd positions lose it.
    """
    i0, j0 = enter
    adj: dict[tuple[str, int], list[tuple[tuple[str, int], tuple[int, int]]]] = {}
    for i, j in basis:
        adj.setdefault(("s", i), []).append((("t", j), (i, j)))
        adj.setdefault(("t", j), []).append((("s", i), (i, j)))
    # path from sink j0 back to source i0 through the tree
    start, goal = ("t", j0), ("s", i0)
    prev: dict[tuple[str, int], tuple[tuple[str, int], tuple[int, int]]] = {start: (start, (-1, -1))}
    frontier = [start]
    while frontier and goal not in prev:
        nxt = []
        for node in frontier:
            for other, arc in adj.get(node, ()):
                if other not in prev:
                    prev[other] = (node, arc)
                    nxt.append(other)
        frontier = nxt
    if goal not in prev:
        raise RuleViolationError("transportation basis lost connectivity")
    path_arcs = []
    node = goal
    while node != start:
        node, arc = prev[node]
        path_arcs.append(arc)
    return [enter] + path_arcs


def solve_dual(inst: BoundInstance) -> DualSolution:
    """Minimum-cost transport of positive weights onto negative weights.

    Transportation simplex with a northwest-corner start and Bland's
    entering rule. Potentials for every vertex are recovered from the dual
    variables by xi_a = min over sinks of (xi_sink + d[a, sink]), which is
    exact at optimality and extends feasibly to inactive vertices.
    """
    inst.check()
    n = len(inst.omega)
    src = [a for a in range(n) if inst.omega[a] > 0.0]
    snk = [a for a in range(n) if inst.omega[a] < 0.0]
    if not src or not snk:
        return DualSolution(value=0.0, plan=(), xi=np.zeros(n))

    p, q = len(src), len(snk)
    supply = inst.omega[src].astype(float)
    demand = -inst.omega[snk].astype(float)
    cost = inst.d[np.ix_(src, snk)]
    scale = float(cost.max()) if cost.size else 1.0
    rtol = 1e-13 * (1.0 + scale)

    # northwest-corner start: exactly p + q - 1 basis arcs, zeros included
    mass: dict[tuple[int, int], float] = {}
    basis: list[tuple[int, int]] = []
    rs, rd = supply.copy(), demand.copy()
    i = j = 0
    while True:
        f = min(rs[i], rd[j])
        mass[(i, j)] = f
        basis.append((i, j))
        rs[i] -= f
        rd[j] -= f
        if i == p - 1 and j == q - 1:
            break
        if i == p - 1:
            j += 1
        elif j == q - 1:
            i += 1
        elif rs[i] <= 0.0:
            i += 1
        else:
            j += 1

    for _ in range(10000):
        u, v = _transport_tree_potentials(basis, cost, p, q)
        reduced = cost - u[:, None] - v[None, :]
        entering = None
        for i in range(p):
            row = reduced[i]
            js = np.nonzero(row < -rtol)[0]
            if js.size:
                entering = (i, int(js[0]))
                break
        if entering is None:
            break
        cycle = _transport_cycle(basis, entering)
        losing = cycle[1::2]
        theta = min(mass[arc] for arc in losing)
        leave = min(arc for arc in losing if mass[arc] <= theta)
        for k, arc in enumerate(cycle):
            if k == 0:
                mass[arc] = mass.get(arc, 0.0) + theta
            elif k % 2:
                mass[arc] -= theta
            else:
                mass[arc] += theta
        basis.remove(leave)
        basis.append(entering)
        del mass[leave]
    else:
        raise RuleViolationError("transportation simplex exceeded its pivot budget")

    u, v = _transport_tree_potentials(basis, cost, p, q)
    value = EIGHT_PI * float(sum(m * cost[i, j] for (i, j), m in sorted(mass.items())))

    sink_xi = -v
    xi = np.array([
        float((sink_xi + inst.d[a, snk]).min()) for a in range(n)
    ])
    xi -= xi[0]

    plan = tuple(
        (src[i], snk[j], m) for (i, j), m in sorted(mass.items()) if m > 0.0
    )
    return DualSolution(value=value, plan=plan, xi=xi)


@dataclass(frozen=True, eq=False)
class LipschitzExtension:
    """Callable 1-Lipschitz interpolant of vertex potentials.

    Evaluates max over vertices of (xi_a - |r - v_a|); agrees with xi at the
    vertices and has global Lipschitz constant at most 1.
    """

    xi: np.ndarray
    points: np.ndarray

    def __call__(self, r) -> np.ndarray | float:
        r = np.asarray(r, dtype=float)
        single = r.ndim == 1
        pts = np.atleast_2d(r)
        d = np.linalg.norm(pts[:, None, :] - self.points[None, :, :], axis=-1)
        vals = (self.xi[None, :] - d).max(axis=1)
        return float(vals[0]) if single else vals


def lipschitz_extension(xi, vertices) -> LipschitzExtension:
    """Extend vertex potentials to all of space with Lipschitz constant 1."""
    xi = np.asarray(xi, dtype=float)
    pts = np.asarray(vertices, dtype=float)
    n = len(xi)
    for a in range(n):
        for ap in range(a + 1, n):
            gap = abs(xi[a] - xi[ap]) - float(np.linalg.norm(pts[a] - pts[ap]))
            if gap > FEAS_TOL:
                raise InputError(
                    f"potentials at vertices {a} and {ap} differ by {gap:.3e} "
                    "more than their distance; no 1-Lipschitz extension exists"
                )
    return LipschitzExtension(xi=xi, points=pts)


def instance_from_invariants(P: Polytope, inv: HomotopyInvariants) -> BoundInstance:
    omega = trapped_areas_all(P, inv).omega
    return BoundInstance(omega=omega, d=vertex_distance_matrix(P))


def lower_bound(P: Polytope, inv: HomotopyInvariants, gap_rtol: float = GAP_RTOL) -> BoundResult:
    """Evaluate the energy lower bound for the class described by inv.

    Composes trapped areas, vertex distances and both solvers; raises if
    the invariants fail validation or the two optima disagree beyond
    gap_rtol. The bound is strictly positive whenever any trapped area is
    nonzero.
    """
    report = validate(P, inv)
    if not report.passed:
        raise RuleViolationError(
            "invariants failed validation: "
            + "; ".join(f.message for f in report.findings)
        )
    inst = instance_from_invariants(P, inv)
    primal = solve_primal(inst)
    dual = solve_dual(inst)
    gap = abs(primal.value - dual.value)
    if gap > gap_rtol * (1.0 + abs(dual.value)):
        raise RuleViolationError(
            f"duality gap {gap:.3e} exceeds tolerance; solver disagreement"
        )
    feas = np.abs(dual.xi[:, None] - dual.xi[None, :]) - inst.d
    if float(feas.max()) > FEAS_TOL:
        raise RuleViolationError("recovered potentials violate a distance constraint")
    value = EIGHT_PI * float(inst.omega @ dual.xi)
    if np.any(inst.omega != 0.0) and value <= 0.0:
        raise RuleViolationError(
            "bound is not positive although some trapped area is nonzero"
        )
    return BoundResult(value=value, xi=dual.xi, plan=dual.plan, gap=gap, omega=inst.omega)
