"""Energy relaxation of tangent fields on axis-aligned boxes.

Projected gradient descent for the discrete Dirichlet energy: each sweep
takes an explicit step against the masked 7-point Laplacian projected onto
the tangent plane of the sphere at each node, renormalizes, and re-imposes
the boundary projection. Steps that would raise the energy are rejected
and the step size halved; twenty consecutive rejections stall the run.

Node updates within one sweep depend only on the previous iterate, and the
energy reduction is a fixed-order sum, so runs are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, InputError, StallError
from .field import DiscreteField, Grid, box_grid, energy, field_from_function, tag_nodes
from .polytope import Polytope
from .sphergeo import normalize

HALVING_LIMIT = 20


@dataclass(frozen=True)
class SeedSpec:
    """Named starting configuration for a relaxation run.

    kinds: "constant" (direction required), "corner-radial" (vertex), and
    "edge-rotation" (face, k, optional vertex on that face) which twists a
    corner-radial base about the face normal so the corner carries k extra
    turns.
    """

    kind: str
    direction: tuple[float, float, float] | None = None
    vertex: int = 0
    face: int = 0
    k: int = 0
    core_frac: float = 0.35
    falloff_frac: float = 0.75


@dataclass(frozen=True)
class RelaxConfig:
    tau: float = 0.2
    max_iters: int = 5000
    tol: float = 1e-8
    window: int = 100
    exclusion_cells: int = 1
    seed: SeedSpec | None = None
    constrained_faces: str | tuple[int, ...] = "all"

    def __post_init__(self):
        if self.tau <= 0:
            raise InputError("step size tau must be positive")
        if self.tol <= 0:
            raise InputError("convergence threshold must be positive")


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    energy: float
    residual: float


@dataclass(eq=False)
class RelaxResult:
    field: DiscreteField
    trace: list[TracePoint]
    converged: bool
    iterations: int
    final_tau: float
    halvings: int


def _require_box(P: Polytope) -> None:
    lo = P.vertices.min(axis=0)
    hi = P.vertices.max(axis=0)
    corners = {tuple(v) for v in P.vertices}
    expect = {
        (x, y, z)
        for x in (lo[0], hi[0])
        for y in (lo[1], hi[1])
        for z in (lo[2], hi[2])
    }
    if len(P.vertices) != 8 or corners != expect:
        raise InputError("relaxation supports axis-aligned boxes only")


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _edge_rotation_values(P: Polytope, spec: SeedSpec, pos: np.ndarray) -> np.ndarray:
    c = spec.face
    loop = P.faces[c]
    a = spec.vertex if spec.vertex in loop else loop[0]
    va = P.vertices[a]
    axis = P.face_normals[c]
    i = loop.index(a)
    e_in = normalize(P.vertices[loop[i - 1]] - va)
    e_out = normalize(P.vertices[loop[(i + 1) % len(loop)]] - va)

    rel = pos - va
    r = np.linalg.norm(rel, axis=-1, keepdims=True)
    interior = normalize(P.centroid - va)
    base = np.where(r > 1e-300, rel / np.maximum(r, 1e-300), interior)

    planar = rel - (rel @ axis)[..., None] * axis[None, None, None, :]
    rho = np.linalg.norm(planar, axis=-1)
    x = planar @ e_in
    y = planar @ e_out
    phi = np.arctan2(np.maximum(y, 0.0), np.maximum(x, 0.0))

    span = min(
        float(np.abs((P.vertices - va) @ e_in).max()),
        float(np.abs((P.vertices - va) @ e_out).max()),
    )
    chi = 1.0 - _smoothstep(
        (rho - spec.core_frac * span) / max((spec.falloff_frac - spec.core_frac) * span, 1e-12)
    )
    # kink winding is measured about the inward face normal, so +k turns at
    # the corner need a twist against the outward normal
    psi = -2.0 * np.pi * spec.k * _smoothstep(phi / (np.pi / 2.0)) * chi

    cosp = np.cos(psi)[..., None]
    sinp = np.sin(psi)[..., None]
    ax = axis[None, None, None, :]
    axb = np.cross(np.broadcast_to(ax, base.shape), base)
    dot = (base @ axis)[..., None]
    rotated = base * cosp + axb * sinp + ax * dot * (1.0 - cosp)
    return rotated


def seed_field(P: Polytope, spec: SeedSpec, grid: Grid | None = None,
               resolution: int = 24,
               constrained_faces: str | tuple[int, ...] = "all") -> DiscreteField:
    """Build the named starting field on a box grid and project it tangent.

    A constant ansatz survives only when no constrained face is normal to
    it, so on a fully constrained box it is rejected by the projection.
    """
    _require_box(P)
    if grid is None:
        grid = box_grid(P, resolution)
    if spec.kind == "constant":
        if spec.direction is None:
            raise InputError("constant seed needs a direction")
        d = normalize(np.asarray(spec.direction, dtype=float))
        fn = lambda pos: np.broadcast_to(d, pos.shape).copy()
    elif spec.kind == "corner-radial":
        va = P.vertices[spec.vertex]
        interior = normalize(P.centroid - va)

        def fn(pos, va=va, interior=interior):
            rel = pos - va
            r = np.linalg.norm(rel, axis=-1, keepdims=True)
            out = np.where(r > 1e-300, rel / np.maximum(r, 1e-300), interior)
            return out
    elif spec.kind == "edge-rotation":
        fn = lambda pos: _edge_rotation_values(P, spec, pos)
    else:
        raise InputError(f"unknown seed ansatz {spec.kind!r}")
    f = field_from_function(P, grid, fn)
    return project_tangent(f, P, constrained_faces)


def project_tangent(f: DiscreteField, P: Polytope | None = None,
                    constrained: str | tuple[int, ...] = "all") -> DiscreteField:
    """Re-impose tangency: face nodes lose their normal component, edge
    nodes snap to the nearer edge direction, vertex nodes stay untouched.

    Raises when a face node is normal to its face or an edge node is
    orthogonal to its edge; those nodes have no nearby tangent value.
    """
    P = P or f.polytope
    if P is None:
        raise InputError("projection needs a polytope")
    if constrained == "none":
        return f
    if constrained == "all":
        active_faces = set(range(P.num_faces))
    else:
        active_faces = set(int(c) for c in constrained)

    values = f.values.copy()
    count = np.zeros(f.grid.dims, dtype=np.int8)
    for c in active_faces:
        count += f.face_tags[c]

    for c in active_faces:
        tag = f.face_tags[c] & (count == 1) & f.mask
        if not tag.any():
            continue
        n = P.face_normals[c]
        vals = values[tag]
        vals = vals - np.outer(vals @ n, n)
        norms = np.linalg.norm(vals, axis=-1)
        if float(norms.min()) < 1e-12:
            idx = np.argwhere(tag)[int(norms.argmin())]
            raise DegeneracyError(
                f"node {tuple(int(i) for i in idx)} on face {c} is normal to the "
                "face; tangent projection annihilates it"
            )
        values[tag] = vals / norms[:, None]

    for b in range(P.num_edges):
        e = P.edges[b]
        if not (e.faces[0] in active_faces and e.faces[1] in active_faces):
            continue
        tag = f.face_tags[e.faces[0]] & f.face_tags[e.faces[1]] & (count == 2) & f.mask
        if not tag.any():
            continue
        d = P.edge_direction(b)
        dots = values[tag] @ d
        if float(np.abs(dots).min()) < 1e-12:
            idx = np.argwhere(tag)[int(np.abs(dots).argmin())]
            raise DegeneracyError(
                f"node {tuple(int(i) for i in idx)} on edge {b} is orthogonal to "
                "the edge; snap direction ambiguous"
            )
        values[tag] = np.sign(dots)[:, None] * d[None, :]

    return DiscreteField(grid=f.grid, values=values, mask=f.mask,
                         polytope=P, face_tags=f.face_tags)


def _masked_link_laplacian(values: np.ndarray, mask: np.ndarray, spacing) -> np.ndarray:
    """Gradient of the link Dirichlet sum: sum over present neighbors of
    (n_i - n_j) / h^2 along each axis."""
    g = np.zeros_like(values)
    for axis in range(3):
        h2 = float(spacing[axis]) ** 2
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        pair = mask[lo] & mask[hi]
        diff = (values[lo] - values[hi]) / h2
        contrib = np.where(pair[..., None], diff, 0.0)
        g[lo] += contrib
        g[hi] -= contrib
    return g


def el_residual(f: DiscreteField) -> float:
    """Max norm of the harmonic-map defect |lap n - (n . lap n) n| over
    full-interior nodes; zero exactly for constant fields.

    Nodes within two cell diameters of a polytope vertex are skipped: the
    continuum defect diverges at vertices, and the band next to the frozen
    vertex neighborhoods carries an O(1/h^2) freezing artifact.
    """
    dims = f.grid.dims
    interior = f.mask.copy()
    if f.polytope is not None:
        pos = f.grid.positions()
        r = 2.0 * f.grid.cell_diameter
        for v in f.polytope.vertices:
            d2 = ((pos - v) ** 2).sum(axis=-1)
            interior &= d2 > r * r
    lap = np.zeros_like(f.values)
    for axis in range(3):
        h2 = float(f.grid.spacing[axis]) ** 2
        lo = [slice(None)] * 3
        mid = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -2)
        mid[axis] = slice(1, -1)
        hi[axis] = slice(2, None)
        lo, mid, hi = tuple(lo), tuple(mid), tuple(hi)
        ok = np.zeros(dims, dtype=bool)
        ok[mid] = f.mask[lo] & f.mask[hi]
        interior &= ok
        lap[mid] += (f.values[lo] - 2.0 * f.values[mid] + f.values[hi]) / h2
    if not interior.any():
        return 0.0
    n = f.values
    proj = lap - np.einsum("...i,...i->...", n, lap)[..., None] * n
    mags = np.linalg.norm(proj, axis=-1)
    return float(mags[interior].max())


def _frozen_mask(f: DiscreteField, P: Polytope, cells: int) -> np.ndarray:
    """Nodes within the given Chebyshev index distance of a polytope vertex."""
    frozen = np.zeros(f.grid.dims, dtype=bool)
    for v in P.vertices:
        idx = np.rint((v - f.grid.origin) / f.grid.spacing).astype(int)
        lo = np.maximum(idx - cells, 0)
        hi = np.minimum(idx + cells + 1, np.array(f.grid.dims))
        if np.all(lo < hi):
            frozen[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
    return frozen


def relax(f0: DiscreteField, P: Polytope, cfg: RelaxConfig) -> RelaxResult:
    """Descend the Dirichlet energy from a tangent-projected seed.

    Accepted sweeps never increase the energy; an energy increase halves
    the step and retries, and HALVING_LIMIT consecutive halvings raise
    StallError with the trace so far.
    """
    _require_box(P)
    tau = cfg.tau
    dt = tau * float(min(f0.grid.spacing)) ** 2
    frozen = _frozen_mask(f0, P, cfg.exclusion_cells)
    active = f0.mask & ~frozen

    f = f0
    e = energy(f)
    trace = [TracePoint(0, e, el_residual(f))]
    halvings = 0
    run = 0
    it = 0
    converged = e == 0.0
    while not converged and it < cfg.max_iters:
        g = _masked_link_laplacian(f.values, f.mask, f.grid.spacing)
        g -= np.einsum("...i,...i->...", g, f.values)[..., None] * f.values
        stepped = f.values - dt * g
        norms = np.linalg.norm(stepped, axis=-1, keepdims=True)
        stepped = stepped / np.maximum(norms, 1e-300)
        new_values = np.where(active[..., None], stepped, f.values)
        candidate = DiscreteField(grid=f.grid, values=new_values, mask=f.mask,
                                  polytope=P, face_tags=f.face_tags)
        candidate = project_tangent(candidate, P, cfg.constrained_faces)
        e_new = energy(candidate)
        if e_new > e:
            tau *= 0.5
            dt *= 0.5
            halvings += 1
            run += 1
            if run >= HALVING_LIMIT:
                raise StallError(
                    f"energy would not decrease after {HALVING_LIMIT} halvings "
                    f"at iteration {it} (energy {e:.6e}, candidate {e_new:.6e})"
                )
            continue
        run = 0
        it += 1
        f = candidate
        e = e_new
        trace.append(TracePoint(it, e, el_residual(f)))
        if e == 0.0:
            converged = True
            break
        if len(trace) > cfg.window:
            past = trace[-1 - cfg.window].energy
            if (past - e) < cfg.tol * max(past, 1e-300):
                converged = True
                break

    return RelaxResult(field=f, trace=trace, converged=converged,
                       iterations=it, final_tau=tau, halvings=halvings)
