"""Convex polyhedra with full vertex/edge/face incidence.

A Polytope is immutable and carries vertices, counterclockwise face loops
(as seen from outside), derived edges with their two incident faces, and
outward unit face normals. Construction validates closedness, orientation
consistency, planarity and convexity against a scale-relative tolerance.

Accepted descriptions: the OFF subset, a JSON object with "vertices" and
"faces" arrays, or a builtin name ("cube", "box LxWxH", "tetrahedron").
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, InputError
from .sphergeo import normalize, perp_basis

REL_TOL = 1e-9  # geometric tolerance as a fraction of the bounding-box diameter


@dataclass(frozen=True)
class Edge:
    """Undirected edge between vertex indices v0 < v1, with its two faces."""

    v0: int
    v1: int
    faces: tuple[int, int]


@dataclass(frozen=True, eq=False)
class Polytope:
    vertices: np.ndarray                      # (v, 3) float
    faces: tuple[tuple[int, ...], ...]        # CCW loops seen from outside
    edges: tuple[Edge, ...]
    face_normals: np.ndarray                  # (f, 3) outward unit normals
    tol: float
    edge_index: dict[tuple[int, int], int] = field(repr=False)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @property
    def bbox_diameter(self) -> float:
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(span))

    def edge_between(self, i: int, j: int) -> int:
        return self.edge_index[(min(i, j), max(i, j))]

    def edge_vector(self, b: int) -> np.ndarray:
        e = self.edges[b]
        return self.vertices[e.v1] - self.vertices[e.v0]

    def edge_direction(self, b: int) -> np.ndarray:
        """Unit vector along edge b, from the lower to the higher vertex index."""
        return normalize(self.edge_vector(b))

    def faces_at_vertex(self, a: int) -> tuple[int, ...]:
        return tuple(c for c, loop in enumerate(self.faces) if a in loop)

    def edges_at_vertex(self, a: int) -> tuple[int, ...]:
        return tuple(b for b, e in enumerate(self.edges) if a in (e.v0, e.v1))


@dataclass(frozen=True, eq=False)
class VertexStar:
    """Incident edges of one vertex in cyclic order.

    The cycle is positively oriented (right-hand rule) about interior_ray,
    the unit ray from the vertex into the interior, so it matches the
    orientation of an outward-oriented surface separating the vertex from
    the rest of the polyhedron. The cycle starts at the smallest incident
    edge index, making it invariant under face relabeling up to nothing.
    """

    vertex: int
    edges: tuple[int, ...]
    faces: tuple[int, ...]   # faces[i] is shared by edges[i] and edges[i+1]
    interior_ray: np.ndarray

    @property
    def degree(self) -> int:
        return len(self.edges)


def build_polytope(vertices, faces) -> Polytope:
    """Validate raw vertex/face data and derive edges and outward normals."""
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 3 or len(verts) < 4:
        raise InputError("vertices must be an (n >= 4, 3) array")
    if not np.all(np.isfinite(verts)):
        raise InputError("vertex coordinates must be finite")

    span = verts.max(axis=0) - verts.min(axis=0)
    diameter = float(np.linalg.norm(span))
    if diameter == 0.0:
        raise InputError("all vertices coincide")
    tol = REL_TOL * diameter

    diffs = verts[:, None, :] - verts[None, :, :]
    dist = np.linalg.norm(diffs, axis=-1)
    np.fill_diagonal(dist, np.inf)
    if float(dist.min()) <= tol:
        i, j = np.unravel_index(int(dist.argmin()), dist.shape)
        raise InputError(f"duplicate vertices {i} and {j}")

    loops: list[tuple[int, ...]] = []
    for c, loop in enumerate(faces):
        loop = tuple(int(i) for i in loop)
        if len(loop) < 3:
            raise InputError(f"face {c} has fewer than 3 vertices")
        if len(set(loop)) != len(loop):
            raise InputError(f"face {c} repeats a vertex")
        if any(i < 0 or i >= len(verts) for i in loop):
            raise InputError(f"face {c} references a vertex out of range")
        loops.append(loop)
    if len(loops) < 4:
        raise InputError("a closed polyhedron needs at least 4 faces")

    directed: dict[tuple[int, int], int] = {}
    for c, loop in enumerate(loops):
        for k in range(len(loop)):
            key = (loop[k], loop[(k + 1) % len(loop)])
            if key in directed:
                raise InputError(
                    f"directed edge {key} appears in faces {directed[key]} and {c}; "
                    "face loops are not consistently oriented"
                )
            directed[key] = c

    edge_index: dict[tuple[int, int], int] = {}
    edges: list[Edge] = []
    for (i, j), c in directed.items():
        if (j, i) not in directed:
            raise InputError(f"edge ({i}, {j}) is used by only one face; surface not closed")
        if i < j:
            edge_index[(i, j)] = len(edges)
            edges.append(Edge(i, j, (c, directed[(j, i)])))

    v, e, f = len(verts), len(edges), len(loops)
    if v - e + f != 2:
        raise InputError(f"Euler characteristic v - e + f = {v - e + f}, expected 2")

    centroid = verts.mean(axis=0)
    normals = np.zeros((f, 3))
    for c, loop in enumerate(loops):
        pts = verts[list(loop)]
        # Newell's formula: robust normal for a nearly planar loop
        n = np.cross(pts, np.roll(pts, -1, axis=0)).sum(axis=0)
        norm = float(np.linalg.norm(n))
        if norm <= tol:
            raise InputError(f"face {c} is degenerate (zero area)")
        n = n / norm
        fc = pts.mean(axis=0)
        planarity = float(np.abs((pts - fc) @ n).max())
        if planarity > tol:
            raise InputError(f"face {c} is non-planar by {planarity:.3e}")
        if float((fc - centroid) @ n) <= tol:
            raise InputError(f"face {c} normal does not point outward")
        offsets = (verts - fc) @ n
        worst = float(offsets.max())
        if worst > tol:
            a = int(offsets.argmax())
            raise InputError(
                f"convexity violation: vertex {a} lies {worst:.3e} outside face {c}"
            )
        normals[c] = n

    return Polytope(
        vertices=verts,
        faces=tuple(loops),
        edges=tuple(edges),
        face_normals=normals,
        tol=tol,
        edge_index=edge_index,
    )


_BOX_RE = re.compile(r"^box\s+([0-9.eE+-]+)x([0-9.eE+-]+)x([0-9.eE+-]+)$")

_CUBE_FACES = (
    (0, 3, 2, 1),  # z = 0
    (4, 5, 6, 7),  # z = top
    (0, 1, 5, 4),  # y = 0
    (2, 3, 7, 6),  # y = top
    (0, 4, 7, 3),  # x = 0
    (1, 2, 6, 5),  # x = top
)


def _box_data(lx: float, ly: float, lz: float):
    verts = [
        (0, 0, 0), (lx, 0, 0), (lx, ly, 0), (0, ly, 0),
        (0, 0, lz), (lx, 0, lz), (lx, ly, lz), (0, ly, lz),
    ]
    return verts, _CUBE_FACES


def _tetrahedron_data():
    verts = [
        (0.0, 0.0, 0.0),
        (1.0, 0.0, 0.0),
        (0.5, np.sqrt(3.0) / 2.0, 0.0),
        (0.5, np.sqrt(3.0) / 6.0, np.sqrt(6.0) / 3.0),
    ]
    faces = ((0, 2, 1), (0, 1, 3), (1, 2, 3), (2, 0, 3))
    return verts, faces


def builtin_shape(name: str) -> Polytope:
    """Builtin shapes: 'cube' (unit, corner at origin), 'box LxWxH', 'tetrahedron'."""
    name = name.strip().lower()
    if name == "cube":
        return build_polytope(*_box_data(1.0, 1.0, 1.0))
    if name == "tetrahedron":
        return build_polytope(*_tetrahedron_data())
    m = _BOX_RE.match(name)
    if m:
        lx, ly, lz = (float(m.group(k)) for k in (1, 2, 3))
        if min(lx, ly, lz) <= 0:
            raise InputError("box dimensions must be positive")
        return build_polytope(*_box_data(lx, ly, lz))
    raise InputError(f"unknown builtin shape {name!r}")


def _parse_off(text: str) -> Polytope:
    tokens: list[str] = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise InputError("OFF input must start with an OFF header")
    tokens = tokens[1:]
    try:
        nv, nf, _ne = int(tokens[0]), int(tokens[1]), int(tokens[2])
        pos = 3
        verts = []
        for _ in range(nv):
            verts.append([float(t) for t in tokens[pos:pos + 3]])
            if len(verts[-1]) != 3:
                raise InputError("truncated OFF vertex block")
            pos += 3
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            pos += 1
            loop = [int(t) for t in tokens[pos:pos + k]]
            if len(loop) != k:
                raise InputError("truncated OFF face block")
            pos += k
            faces.append(loop)
    except (ValueError, IndexError) as exc:
        raise InputError(f"malformed OFF input: {exc}") from exc
    if pos != len(tokens):
        raise InputError("trailing tokens after OFF face block")
    return build_polytope(verts, faces)


def _parse_json(text: str) -> Polytope:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON shape: {exc}") from exc
    if not isinstance(data, dict) or "vertices" not in data or "faces" not in data:
        raise InputError("JSON shape must contain 'vertices' and 'faces'")
    return build_polytope(data["vertices"], data["faces"])


def load_polytope(text: str) -> Polytope:
    """Parse a shape description (OFF, JSON, or builtin name) into a Polytope."""
    stripped = text.lstrip()
    if stripped.startswith("OFF"):
        return _parse_off(text)
    if stripped.startswith("{"):
        return _parse_json(text)
    return builtin_shape(text)


def vertex_star(P: Polytope, a: int) -> VertexStar:
    """Incident edges of vertex a, cyclically ordered about the interior ray."""
    if a < 0 or a >= P.num_vertices:
        raise IndexError(f"vertex index {a} out of range")
    incident = P.edges_at_vertex(a)
    if len(incident) < 3:
        raise InputError(f"vertex {a} has fewer than 3 incident edges")
    face_ids = P.faces_at_vertex(a)
    outward = normalize(P.face_normals[list(face_ids)].sum(axis=0))
    interior = -outward

    dirs = []
    for b in incident:
        e = P.edges[b]
        other = e.v1 if e.v0 == a else e.v0
        dirs.append(normalize(P.vertices[other] - P.vertices[a]))
    u, w = perp_basis(interior)
    angles = [float(np.arctan2(d @ w, d @ u)) for d in dirs]
    order = sorted(range(len(incident)), key=lambda i: angles[i])
    cyc = [incident[i] for i in order]
    cyc_dirs = [dirs[i] for i in order]

    m = len(cyc)
    for i in range(m):
        trip = float(np.dot(np.cross(cyc_dirs[i], cyc_dirs[(i + 1) % m]), interior))
        if trip <= 0.0:
            raise DegeneracyError(
                f"edge cycle at vertex {a} is not positively oriented about the "
                "interior ray; vertex cone too oblique for the face-normal axis"
            )

    start = cyc.index(min(cyc))
    cyc = cyc[start:] + cyc[:start]

    ring_faces = []
    for i in range(m):
        b0, b1 = cyc[i], cyc[(i + 1) % m]
        shared = set(P.edges[b0].faces) & set(P.edges[b1].faces)
        if len(shared) != 1:
            raise InputError(
                f"edges {b0} and {b1} at vertex {a} share {len(shared)} faces; "
                "expected exactly one"
            )
        ring_faces.append(shared.pop())

    return VertexStar(
        vertex=a,
        edges=tuple(cyc),
        faces=tuple(ring_faces),
        interior_ray=interior,
    )


def vertex_distance_matrix(P: Polytope) -> np.ndarray:
    """Symmetric matrix of Euclidean distances between all vertex pairs."""
    diffs = P.vertices[:, None, :] - P.vertices[None, :, :]
    return np.linalg.norm(diffs, axis=-1)
