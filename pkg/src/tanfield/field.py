"""Discrete tangent unit-vector fields on structured grids.

A DiscreteField stores one unit vector per lattice node together with a
domain mask and, when the domain is a polytope, per-face boundary tags.
Operations: Dirichlet energy by masked midpoint quadrature, the pointwise
energy-density versus pulled-back-area inequality, trapped-area surface
integrals, extraction of edge orientations and kink numbers, tangency
reporting, and a combined analysis bundle.

All reductions run in a fixed index order, so results are reproducible
bit for bit; analysis never mutates the field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import invariants as inv_mod
from .errors import DegeneracyError, ExtractionError, InputError, RuleViolationError
from .invariants import HomotopyInvariants, ValidationReport, validate, wrapping_from_trapped
from .polytope import Polytope, vertex_star
from .sphergeo import (
    normalize,
    oriented_area_batch,
    perp_basis,
    winding_angle,
    wrap_angle,
)

FACE_TAG_REL_TOL = 1e-9
IMPORT_TANGENCY_TOL = 1e-6
EDGE_ANGLE_TOL = 1e-3
KINK_OFFSET_FRAC = 0.25
ANTIPODAL_DOT = -1.0 + 1e-9
SPLIT_DOT = 0.0          # image edges spanning more than pi/2 get subdivided


@dataclass(frozen=True, eq=False)
class Grid:
    """Axis-aligned structured lattice: origin, spacings, node counts."""

    origin: np.ndarray
    spacing: np.ndarray
    dims: tuple[int, int, int]

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(
            self.origin[k] + self.spacing[k] * np.arange(self.dims[k])
            for k in range(3)
        )

    def positions(self) -> np.ndarray:
        ax = self.axes()
        X, Y, Z = np.meshgrid(*ax, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def cell_diameter(self) -> float:
        return float(np.linalg.norm(self.spacing))


def make_grid(origin, upper, dims) -> Grid:
    """Grid whose first and last nodes lie on the corners of [origin, upper]."""
    origin = np.asarray(origin, dtype=float)
    upper = np.asarray(upper, dtype=float)
    dims = tuple(int(d) for d in dims)
    if any(d < 2 for d in dims):
        raise InputError("grid needs at least 2 nodes per axis")
    spacing = (upper - origin) / (np.array(dims) - 1)
    if np.any(spacing <= 0):
        raise InputError("grid upper corner must exceed the origin on every axis")
    return Grid(origin=origin, spacing=spacing, dims=dims)


def box_grid(P: Polytope, resolution: int) -> Grid:
    """Grid over an axis-aligned box polytope, nodes on all boundary planes."""
    lo = P.vertices.min(axis=0)
    hi = P.vertices.max(axis=0)
    sides = hi - lo
    h = float(sides.max()) / resolution
    dims = tuple(max(2, int(round(s / h)) + 1) for s in sides)
    return make_grid(lo, hi, dims)


@dataclass(eq=False)
class DiscreteField:
    grid: Grid
    values: np.ndarray                      # (nx, ny, nz, 3), unit rows
    mask: np.ndarray                        # (nx, ny, nz) bool, True inside
    polytope: Polytope | None = None
    face_tags: dict[int, np.ndarray] = field(default_factory=dict)
    _connected: bool | None = field(default=None, repr=False)

    @property
    def node_count(self) -> int:
        return int(self.mask.sum())

    def edge_tag(self, b: int) -> np.ndarray:
        """Nodes lying on edge b: tagged on exactly its two faces.

        Endpoint nodes sit on three or more faces and are excluded; the
        field is discontinuous at vertices.
        """
        if self.polytope is None:
            raise InputError("field has no polytope; edges are undefined")
        c1, c2 = self.polytope.edges[b].faces
        return (self.face_tags[c1] & self.face_tags[c2] & self.mask
                & (self._tag_count() == 2))

    def face_interior_tag(self, c: int) -> np.ndarray:
        """Nodes on face c and on no other face."""
        count = self._tag_count()
        return self.face_tags[c] & (count == 1) & self.mask

    def vertex_tag(self) -> np.ndarray:
        """Nodes lying on three or more faces."""
        return (self._tag_count() >= 3) & self.mask

    def _tag_count(self) -> np.ndarray:
        count = np.zeros(self.grid.dims, dtype=np.int8)
        for t in self.face_tags.values():
            count += t
        return count


def tag_nodes(P: Polytope, grid: Grid, tol: float | None = None):
    """Inside mask and per-face membership tags for the grid nodes."""
    pos = grid.positions()
    if tol is None:
        tol = FACE_TAG_REL_TOL * P.bbox_diameter + 1e-12 * grid.cell_diameter
    mask = np.ones(grid.dims, dtype=bool)
    tags: dict[int, np.ndarray] = {}
    for c, loop in enumerate(P.faces):
        n = P.face_normals[c]
        offset = float(P.vertices[loop[0]] @ n)
        signed = pos @ n - offset
        mask &= signed <= tol
        tags[c] = np.abs(signed) <= tol
    for c in tags:
        tags[c] &= mask
    return mask, tags


def field_from_function(P: Polytope, grid: Grid, fn) -> DiscreteField:
    """Sample fn over the grid nodes and attach polytope mask and tags."""
    pos = grid.positions()
    vals = np.asarray(fn(pos), dtype=float)
    if vals.shape != pos.shape:
        raise InputError("field function must map (..., 3) points to (..., 3) vectors")
    norms = np.linalg.norm(vals, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise InputError("field function produced a zero vector")
    mask, tags = tag_nodes(P, grid)
    return DiscreteField(grid=grid, values=vals / norms, mask=mask,
                         polytope=P, face_tags=tags)


def _shifted(arr: np.ndarray, axis: int, k: int, pad: int, dims) -> np.ndarray:
    sl = [slice(pad, pad + dims[0]), slice(pad, pad + dims[1]), slice(pad, pad + dims[2])]
    sl[axis] = slice(pad + k, pad + k + dims[axis])
    return arr[tuple(sl)]


def masked_gradients(values: np.ndarray, mask: np.ndarray, spacing) -> np.ndarray:
    """Per-axis derivatives of the field, respecting the domain mask.

    Central differences wherever both neighbors are inside; second-order
    one-sided stencils at mask boundaries, falling back to first order when
    only one neighbor exists. Returns G with G[..., i, :] the derivative of
    the field along axis i; zero outside the mask.
    """
    dims = values.shape[:3]
    pad = 2
    V = np.zeros((dims[0] + 4, dims[1] + 4, dims[2] + 4, 3))
    M = np.zeros((dims[0] + 4, dims[1] + 4, dims[2] + 4), dtype=bool)
    V[2:-2, 2:-2, 2:-2] = values
    M[2:-2, 2:-2, 2:-2] = mask
    G = np.zeros(dims + (3, 3))
    for axis in range(3):
        h = float(spacing[axis])
        vp1 = _shifted(V, axis, 1, pad, dims)
        vp2 = _shifted(V, axis, 2, pad, dims)
        vm1 = _shifted(V, axis, -1, pad, dims)
        vm2 = _shifted(V, axis, -2, pad, dims)
        mp1 = _shifted(M, axis, 1, pad, dims)
        mp2 = _shifted(M, axis, 2, pad, dims)
        mm1 = _shifted(M, axis, -1, pad, dims)
        mm2 = _shifted(M, axis, -2, pad, dims)
        central = mask & mp1 & mm1
        fwd = mask & mp1 & ~mm1
        bwd = mask & mm1 & ~mp1
        f2 = fwd & mp2
        f1 = fwd & ~mp2
        b2 = bwd & mm2
        b1 = bwd & ~mm2
        d = np.zeros(dims + (3,))
        d[central] = (vp1[central] - vm1[central]) / (2.0 * h)
        d[f2] = (-3.0 * values[f2] + 4.0 * vp1[f2] - vp2[f2]) / (2.0 * h)
        d[f1] = (vp1[f1] - values[f1]) / h
        d[b2] = (3.0 * values[b2] - 4.0 * vm1[b2] + vm2[b2]) / (2.0 * h)
        d[b1] = (values[b1] - vm1[b1]) / h
        G[..., axis, :] = d
    return G


def _mask_connected(mask: np.ndarray) -> bool:
    if not mask.any():
        return True
    reached = np.zeros_like(mask)
    seed = np.unravel_index(int(np.argmax(mask)), mask.shape)
    reached[seed] = True
    while True:
        grown = reached.copy()
        for axis in range(3):
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[axis] = slice(None, -1)
            hi[axis] = slice(1, None)
            grown[tuple(lo)] |= reached[tuple(hi)]
            grown[tuple(hi)] |= reached[tuple(lo)]
        grown &= mask
        if grown.sum() == reached.sum():
            break
        reached = grown
    return bool(reached.sum() == mask.sum())


def _require_connected(f: DiscreteField) -> None:
    if f._connected is None:
        f._connected = _mask_connected(f.mask)
    if not f._connected:
        raise InputError("domain mask is disconnected")


def _vertex_excluded_cells(f: DiscreteField, centers: np.ndarray) -> np.ndarray:
    """Cells whose centers fall within one cell diameter of a polytope vertex."""
    excl = np.zeros(centers.shape[:3], dtype=bool)
    if f.polytope is None:
        return excl
    r = f.grid.cell_diameter
    for v in f.polytope.vertices:
        d2 = ((centers - v) ** 2).sum(axis=-1)
        excl |= d2 <= r * r
    return excl


def energy_breakdown(f: DiscreteField) -> tuple[float, float]:
    """(energy, excluded volume near vertices) by masked midpoint quadrature.

    Node densities sum the squared masked finite differences; each grid cell
    contributes the mean density of its inside corners weighted by the
    inside-corner fraction of its volume. Cells near polytope vertices are
    excluded from the sum because the continuum density diverges there; the
    measure of what was dropped is returned alongside.
    """
    if min(f.grid.dims) < 2:
        raise InputError("energy needs at least 2 nodes per axis")
    _require_connected(f)
    G = masked_gradients(f.values, f.mask, f.grid.spacing)
    rho = np.einsum("...ij,...ij->...", G, G)
    rho = np.where(f.mask, rho, 0.0)

    corners = np.zeros(tuple(d - 1 for d in f.grid.dims))
    rho_sum = np.zeros_like(corners)
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                sl = (
                    slice(dx, f.grid.dims[0] - 1 + dx),
                    slice(dy, f.grid.dims[1] - 1 + dy),
                    slice(dz, f.grid.dims[2] - 1 + dz),
                )
                corners += f.mask[sl]
                rho_sum += rho[sl]
    ax = f.grid.axes()
    cx = 0.5 * (ax[0][:-1] + ax[0][1:])
    cy = 0.5 * (ax[1][:-1] + ax[1][1:])
    cz = 0.5 * (ax[2][:-1] + ax[2][1:])
    CX, CY, CZ = np.meshgrid(cx, cy, cz, indexing="ij")
    centers = np.stack([CX, CY, CZ], axis=-1)
    excluded = _vertex_excluded_cells(f, centers)

    weight = (corners / 8.0) * f.grid.cell_volume
    occupied = corners > 0
    live = occupied & ~excluded
    with np.errstate(invalid="ignore"):
        cell_rho = np.where(occupied, rho_sum / np.maximum(corners, 1), 0.0)
    value = float((cell_rho * weight)[live].sum())
    excluded_volume = float(weight[excluded & occupied].sum())
    return value, excluded_volume


def energy(f: DiscreteField) -> float:
    """Dirichlet energy of the sampled field over its masked domain."""
    value, _ = energy_breakdown(f)
    return value


@dataclass(frozen=True)
class InequalityReport:
    """Worst excess of twice the pulled-back area density over the energy density."""

    max_violation: float
    location: tuple[int, int, int] | None
    position: np.ndarray | None
    nodes_checked: int


def pointwise_inequality_check(f: DiscreteField) -> InequalityReport:
    """Evaluate 2 |pullback area form| - |grad n|^2 at every interior node.

    Interior means all six neighbors inside the mask, so every derivative is
    a central difference. For an exact field the result is nonpositive; for
    sampled fields it exceeds zero only by discretization error.
    """
    G = masked_gradients(f.values, f.mask, f.grid.spacing)
    interior = f.mask.copy()
    pad_m = np.zeros(tuple(d + 4 for d in f.grid.dims), dtype=bool)
    pad_m[2:-2, 2:-2, 2:-2] = f.mask
    for axis in range(3):
        interior &= _shifted(pad_m, axis, 1, 2, f.grid.dims)
        interior &= _shifted(pad_m, axis, -1, 2, f.grid.dims)
    if not interior.any():
        return InequalityReport(0.0, None, None, 0)
    gx, gy, gz = G[..., 0, :], G[..., 1, :], G[..., 2, :]
    n = f.values
    pxy = np.einsum("...i,...i->...", np.cross(gx, gy), n)
    pyz = np.einsum("...i,...i->...", np.cross(gy, gz), n)
    pzx = np.einsum("...i,...i->...", np.cross(gz, gx), n)
    pull = np.sqrt(pxy ** 2 + pyz ** 2 + pzx ** 2)
    rho = np.einsum("...ij,...ij->...", G, G)
    viol = np.where(interior, 2.0 * pull - rho, -np.inf)
    idx = np.unravel_index(int(viol.argmax()), viol.shape)
    pos = f.grid.origin + f.grid.spacing * np.array(idx)
    return InequalityReport(
        max_violation=float(viol[idx]),
        location=tuple(int(i) for i in idx),
        position=pos,
        nodes_checked=int(interior.sum()),
    )


def interpolate_unit(f: DiscreteField, points) -> np.ndarray:
    """Trilinear interpolation of the field, renormalized to unit length."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    loc = (pts - f.grid.origin) / f.grid.spacing
    base = np.floor(loc).astype(int)
    base = np.clip(base, 0, np.array(f.grid.dims) - 2)
    frac = loc - base
    out = np.zeros((len(pts), 3))
    for dx in (0, 1):
        wx = frac[:, 0] if dx else 1.0 - frac[:, 0]
        for dy in (0, 1):
            wy = frac[:, 1] if dy else 1.0 - frac[:, 1]
            for dz in (0, 1):
                wz = frac[:, 2] if dz else 1.0 - frac[:, 2]
                w = (wx * wy * wz)[:, None]
                out += w * f.values[base[:, 0] + dx, base[:, 1] + dy, base[:, 2] + dz]
    norms = np.linalg.norm(out, axis=-1, keepdims=True)
    if float(norms.min()) < 1e-12:
        raise DegeneracyError(
            "interpolated field vanished; nearly antipodal values in one cell"
        )
    return out / norms


@dataclass(frozen=True, eq=False)
class SeparatingSurface:
    """Oriented triangulated surface used for trapped-area integrals.

    triangles has shape (T, 3, 3); triangle normals must point away from the
    separated vertex (outward) for the sign convention to match.
    """

    triangles: np.ndarray
    vertex: int | None = None


def triangle_surface(p0, p1, p2, resolution: int) -> np.ndarray:
    """Split triangle (p0, p1, p2) into resolution^2 coherently oriented pieces."""
    p0, p1, p2 = (np.asarray(p, dtype=float) for p in (p0, p1, p2))
    res = int(resolution)
    tris = []
    for i in range(res):
        for j in range(res - i):
            a = p0 + (p1 - p0) * (i / res) + (p2 - p0) * (j / res)
            b = p0 + (p1 - p0) * ((i + 1) / res) + (p2 - p0) * (j / res)
            c = p0 + (p1 - p0) * (i / res) + (p2 - p0) * ((j + 1) / res)
            tris.append((a, b, c))
            if i + j < res - 1:
                d = p0 + (p1 - p0) * ((i + 1) / res) + (p2 - p0) * ((j + 1) / res)
                tris.append((b, d, c))
    return np.array(tris)


def corner_cut(P: Polytope, a: int, offset_frac: float = 0.25, resolution: int = 16) -> SeparatingSurface:
    """Surface separating vertex a: the cut polygon at offset_frac along its edges.

    Cut points sit on the incident edges in star order, so the polygon is
    positively oriented about the interior ray, which is exactly the outward
    orientation (away from the vertex). Triangles fan from the polygon mean
    when the vertex has more than three edges.
    """
    star = vertex_star(P, a)
    va = P.vertices[a]
    pts = []
    tmin = np.inf
    for b in star.edges:
        e = P.edges[b]
        other = e.v1 if e.v0 == a else e.v0
        vec = P.vertices[other] - va
        tmin = min(tmin, float(np.linalg.norm(vec)))
    for b in star.edges:
        e = P.edges[b]
        other = e.v1 if e.v0 == a else e.v0
        d = normalize(P.vertices[other] - va)
        pts.append(va + offset_frac * tmin * d)
    pts = np.array(pts)
    if len(pts) == 3:
        tris = triangle_surface(pts[0], pts[1], pts[2], resolution)
    else:
        center = pts.mean(axis=0)
        parts = [
            triangle_surface(center, pts[i], pts[(i + 1) % len(pts)], resolution)
            for i in range(len(pts))
        ]
        tris = np.concatenate(parts, axis=0)
    return SeparatingSurface(triangles=tris, vertex=a)


def _split_triangle(tri: np.ndarray) -> list[np.ndarray]:
    a, b, c = tri
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return [
        np.array([a, ab, ca]),
        np.array([ab, b, bc]),
        np.array([ca, bc, c]),
        np.array([ab, bc, ca]),
    ]


def trapped_area_integrate(f: DiscreteField, surf: SeparatingSurface, max_depth: int = 10) -> float:
    """Signed image area of the surface under the field, over 4 pi.

    Each surface triangle maps to a spherical triangle through interpolated
    corner values. Triangles whose image spans more than a quarter turn are
    subdivided in physical space; images with an antipodal corner pair that
    survive max_depth subdivisions are an error (refine the surface).
    """
    total = 0.0
    queue = [(tri, 0) for tri in surf.triangles]
    while queue:
        batch_tris = np.array([t for t, _ in queue])
        depths = [d for _, d in queue]
        corners = interpolate_unit(f, batch_tris.reshape(-1, 3)).reshape(-1, 3, 3)
        A, B, C = corners[:, 0], corners[:, 1], corners[:, 2]
        dots = np.stack([
            np.einsum("ij,ij->i", A, B),
            np.einsum("ij,ij->i", B, C),
            np.einsum("ij,ij->i", C, A),
        ], axis=1)
        min_dot = dots.min(axis=1)
        good = min_dot > SPLIT_DOT
        areas = oriented_area_batch(A[good], B[good], C[good])
        total += float(areas.sum())
        queue = []
        for k in np.nonzero(~good)[0]:
            if depths[k] >= max_depth:
                if float(min_dot[k]) <= ANTIPODAL_DOT:
                    raise DegeneracyError(
                        "image triangle has an antipodal corner pair after maximal "
                        "subdivision; refine the separating surface"
                    )
                # wide but not antipodal at the depth limit: accept as is
                a, b, c = batch_tris[k]
                v = interpolate_unit(f, np.array([a, b, c]))
                total += float(oriented_area_batch(v[0:1], v[1:2], v[2:3])[0])
                continue
            queue.extend((child, depths[k] + 1) for child in _split_triangle(batch_tris[k]))
    return total / (4.0 * np.pi)


def extract_edge_orientation(f: DiscreteField, P: Polytope, b: int,
                             angle_tol: float = EDGE_ANGLE_TOL) -> np.ndarray:
    """Common unit value of the field along edge b.

    Averages the edge-tagged samples and rejects the edge if any sample
    deviates from the average direction by more than angle_tol radians.
    """
    tag = f.edge_tag(b)
    if not tag.any():
        raise ExtractionError(f"no sampled nodes on edge {b}")
    vals = f.values[tag]
    mean = vals.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < 1e-12:
        raise ExtractionError(f"edge {b}: samples cancel; field inconsistent on the edge")
    mean = mean / norm
    cosines = np.clip(vals @ mean, -1.0, 1.0)
    angles = np.arccos(cosines)
    if float(angles.max()) > angle_tol:
        idx = np.argwhere(tag)[int(angles.argmax())]
        raise ExtractionError(
            f"edge {b}: sample at node {tuple(int(i) for i in idx)} deviates "
            f"{float(angles.max()):.2e} rad from the common direction"
        )
    return mean


def extract_kink_number(
    f: DiscreteField,
    P: Polytope,
    a: int,
    c: int,
    offset_frac: float = KINK_OFFSET_FRAC,
    samples: int = 96,
    plane_tol: float = IMPORT_TANGENCY_TOL,
) -> int:
    """Kink number of the field at vertex a on face c.

    The probe path is the straight chord across the face corner, from a
    point on the incoming boundary edge to a point on the outgoing one,
    following the positively oriented face loop. The winding of the field
    along the chord, minus its shortest-arc closure, is an exact multiple
    of a full turn.
    """
    loop = P.faces[c]
    if a not in loop:
        raise InputError(f"vertex {a} is not on face {c}")
    pos = loop.index(a)
    prev_v = loop[pos - 1]
    next_v = loop[(pos + 1) % len(loop)]
    va = P.vertices[a]
    lin = float(np.linalg.norm(P.vertices[prev_v] - va))
    lout = float(np.linalg.norm(P.vertices[next_v] - va))
    t = offset_frac * min(lin, lout)
    p_start = va + t * normalize(P.vertices[prev_v] - va)
    p_end = va + t * normalize(P.vertices[next_v] - va)
    ts = np.linspace(0.0, 1.0, int(samples))[:, None]
    pts = p_start[None, :] * (1.0 - ts) + p_end[None, :] * ts
    vals = interpolate_unit(f, pts)

    # winding measured about the inward face normal: this is the sign under
    # which the per-face kink totals of a continuous field equal 1 - q/2
    u, w = perp_basis(-P.face_normals[c])
    delta = winding_angle(vals, (u, w), plane_tol=plane_tol)
    closure = wrap_angle(delta)
    if abs(abs(closure) - np.pi) < 1e-9:
        raise DegeneracyError(
            f"kink path endpoints at vertex {a} on face {c} are antipodal; "
            "shortest-arc closure undefined"
        )
    k_real = (delta - closure) / (2.0 * np.pi)
    k = int(np.rint(k_real))
    if abs(k_real - k) > 1e-6:
        raise ExtractionError(
            f"kink extraction at vertex {a} on face {c} is not an integer "
            f"(residue {k_real - k:+.2e})"
        )
    return k


@dataclass(frozen=True)
class TangencyReport:
    per_face: dict[int, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.per_face.values())

    @property
    def worst(self) -> float:
        return max(self.per_face.values()) if self.per_face else 0.0


def tangency_report(f: DiscreteField, P: Polytope | None = None,
                    tol: float = IMPORT_TANGENCY_TOL) -> TangencyReport:
    """Per-face maximum of |n . F| over the face-tagged nodes."""
    P = P or f.polytope
    if P is None:
        raise InputError("tangency report needs a polytope")
    per_face: dict[int, float] = {}
    not_vertex = f._tag_count() < 3   # the field is discontinuous at vertices
    for c in range(P.num_faces):
        tag = f.face_tags.get(c)
        if tag is None:
            per_face[c] = 0.0
            continue
        sel = tag & f.mask & not_vertex
        if not sel.any():
            per_face[c] = 0.0
            continue
        vals = f.values[sel]
        per_face[c] = float(np.abs(vals @ P.face_normals[c]).max())
    return TangencyReport(per_face=per_face, tolerance=tol)


@dataclass(frozen=True, eq=False)
class AnalysisReport:
    """Everything measurable about one sampled field in one bundle."""

    edge_orient: np.ndarray
    kinks: dict[tuple[int, int], int]
    omega_measured: np.ndarray
    wraps: np.ndarray
    invariants: HomotopyInvariants
    validation: ValidationReport
    omega_formula: np.ndarray | None
    energy: float
    excluded_volume: float
    inequality: InequalityReport
    tangency: TangencyReport


def analyze(
    f: DiscreteField,
    P: Polytope,
    surfaces: dict[int, SeparatingSurface] | None = None,
    s=None,
    seed: int = 0,
    kink_offset: float = KINK_OFFSET_FRAC,
    kink_samples: int = 96,
    tangency_tol: float = IMPORT_TANGENCY_TOL,
) -> AnalysisReport:
    """Extract invariants, trapped areas, energy and diagnostics from a field.

    surfaces maps vertex indices to separating surfaces; by default every
    vertex gets a corner-cut surface. The first extractor that finds the
    field inconsistent raises with the offending location.
    """
    if surfaces is None:
        surfaces = {a: corner_cut(P, a) for a in range(P.num_vertices)}
    if set(surfaces) != set(range(P.num_vertices)):
        raise InputError("analysis needs one separating surface per vertex")

    edge_orient = np.array([
        extract_edge_orientation(f, P, b) for b in range(P.num_edges)
    ])
    kinks = {
        (a, c): extract_kink_number(f, P, a, c, offset_frac=kink_offset,
                                    samples=kink_samples, plane_tol=tangency_tol)
        for c, loop in enumerate(P.faces)
        for a in loop
    }
    omega_measured = np.array([
        trapped_area_integrate(f, surfaces[a]) for a in range(P.num_vertices)
    ])
    if s is None:
        rng = np.random.default_rng(seed)
        s = inv_mod.choose_s(P, edge_orient, rng)
    else:
        s = normalize(s)
    partial = HomotopyInvariants(edge_orient=edge_orient, kinks=kinks, wraps=None, s=s)
    wraps = wrapping_from_trapped(P, partial, omega_measured)
    invariants = HomotopyInvariants(edge_orient=edge_orient, kinks=kinks, wraps=wraps, s=s)
    validation = validate(P, invariants)
    omega_formula = None
    if validation.passed:
        try:
            omega_formula = inv_mod.trapped_areas_all(P, invariants).omega
        except RuleViolationError:
            omega_formula = None
    e, excl = energy_breakdown(f)
    return AnalysisReport(
        edge_orient=edge_orient,
        kinks=kinks,
        omega_measured=omega_measured,
        wraps=wraps,
        invariants=invariants,
        validation=validation,
        omega_formula=omega_formula,
        energy=e,
        excluded_volume=excl,
        inequality=pointwise_inequality_check(f),
        tangency=tangency_report(f, P, tol=tangency_tol),
    )


def save_field(f: DiscreteField, header_path) -> None:
    """Write the field as a JSON header plus a raw float64 blob.

    The blob holds 3 * nx * ny * nz little-endian doubles in x-fastest
    order; the header records dims, spacing, origin and the blob filename.
    """
    header_path = Path(header_path)
    blob_path = header_path.with_suffix(".f64")
    header = {
        "dims": list(f.grid.dims),
        "spacing": [float(x) for x in f.grid.spacing],
        "origin": [float(x) for x in f.grid.origin],
        "data": blob_path.name,
    }
    # x-fastest order: component index slowest, then z, y, x
    arr = np.ascontiguousarray(f.values.transpose(3, 2, 1, 0)).astype("<f8")
    blob_path.write_bytes(arr.tobytes())
    header_path.write_text(json.dumps(header, sort_keys=True, indent=1) + "\n",
                           encoding="utf-8")


def load_field(header_path, polytope: Polytope | None = None) -> DiscreteField:
    """Read a field file pair; values are renormalized on load."""
    header_path = Path(header_path)
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
        dims = tuple(int(d) for d in header["dims"])
        spacing = np.asarray(header["spacing"], dtype=float)
        origin = np.asarray(header["origin"], dtype=float)
        blob_path = header_path.parent / header["data"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed field header: {exc}") from exc
    raw = blob_path.read_bytes()
    expected = 3 * dims[0] * dims[1] * dims[2] * 8
    if len(raw) != expected:
        raise InputError(
            f"field blob holds {len(raw)} bytes, expected {expected}"
        )
    arr = np.frombuffer(raw, dtype="<f8").reshape(3, dims[2], dims[1], dims[0])
    values = np.ascontiguousarray(arr.transpose(3, 2, 1, 0))
    norms = np.linalg.norm(values, axis=-1, keepdims=True)
    if float(norms.min()) < 1e-12:
        raise InputError("field blob contains a zero vector")
    values = values / norms
    grid = Grid(origin=origin, spacing=spacing, dims=dims)
    if polytope is None:
        return DiscreteField(grid=grid, values=values,
                             mask=np.ones(dims, dtype=bool))
    mask, tags = tag_nodes(polytope, grid)
    return DiscreteField(grid=grid, values=values, mask=mask,
                         polytope=polytope, face_tags=tags)
