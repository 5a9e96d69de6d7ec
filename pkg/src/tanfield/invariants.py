"""Homotopy-invariant data for tangent unit-vector fields.

Holds per-edge orientations, per-corner kink numbers, per-vertex wrapping
numbers and the generic reference direction s; validates the defining sum
rules; and evaluates the per-vertex trapped areas from the invariants.

Sum rules enforced by validate():
  * per face c: sum of kink numbers = 1 - q_c / 2, where q_c counts the
    corners of c whose two boundary edges are oriented oppositely along
    the positively oriented traversal of the face boundary;
  * wrapping numbers sum to zero;
  * trapped areas (derived) sum to zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryAmbiguousError, DegeneracyError, InputError, RuleViolationError, ExtractionError
from .polytope import Polytope, VertexStar, vertex_star
from .sphergeo import normalize, oriented_area, sigma

S_FACE_MARGIN = 1e-3       # rejection-sampling margin for |s . F|
EDGE_PARALLEL_TOL = 1e-9
WRAP_ROUND_TOL = 0.1
SUM_TOL = 1e-9
COINCIDENT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class HomotopyInvariants:
    """Invariant data of one homotopy class on a given polytope."""

    edge_orient: np.ndarray                 # (e, 3) unit vectors parallel to edges
    kinks: dict[tuple[int, int], int]       # (vertex, face) -> kink number
    wraps: np.ndarray | None                # (v,) integers, or None if unknown
    s: np.ndarray                           # generic reference direction

    def kink(self, a: int, c: int) -> int:
        return self.kinks[(a, c)]


@dataclass(frozen=True, eq=False)
class TrappedAreas:
    """Per-vertex trapped areas as fractions of the full sphere."""

    omega: np.ndarray

    @property
    def total(self) -> float:
        return float(self.omega.sum())


@dataclass(frozen=True)
class Finding:
    rule: str
    subject: tuple[str, int | None]
    lhs: float
    rhs: float
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def passed(self) -> bool:
        return not self.findings


def _incident_pairs(P: Polytope) -> set[tuple[int, int]]:
    return {(a, c) for c, loop in enumerate(P.faces) for a in loop}


def count_q(P: Polytope, inv: HomotopyInvariants, c: int) -> int:
    """Corners of face c where the two boundary edges disagree in orientation.

    Disagreement is judged against the positively oriented traversal of the
    face loop: each boundary edge's orientation is either along or against
    the traversal, and a corner counts when its incoming and outgoing edges
    carry different signs. The count is even by construction.
    """
    loop = P.faces[c]
    k = len(loop)
    signs = []
    for j in range(k):
        u, w = loop[j], loop[(j + 1) % k]
        b = P.edge_between(u, w)
        tdir = normalize(P.vertices[w] - P.vertices[u])
        signs.append(1 if float(inv.edge_orient[b] @ tdir) > 0.0 else -1)
    return sum(1 for j in range(k) if signs[j - 1] != signs[j])


def validate(P: Polytope, inv: HomotopyInvariants, s_tol: float = 1e-9) -> ValidationReport:
    """Check all structural and sum-rule invariants; report every violation."""
    findings: list[Finding] = []

    if inv.edge_orient.shape != (P.num_edges, 3):
        findings.append(Finding(
            "edge-orientation-shape", ("edge", None),
            float(len(inv.edge_orient)), float(P.num_edges),
            "edge orientation array does not cover every edge",
        ))
        return ValidationReport(tuple(findings))

    for b in range(P.num_edges):
        e = inv.edge_orient[b]
        norm = float(np.linalg.norm(e))
        d = P.edge_direction(b)
        align = abs(float(e @ d))
        if abs(norm - 1.0) > EDGE_PARALLEL_TOL or abs(align - 1.0) > EDGE_PARALLEL_TOL:
            findings.append(Finding(
                "edge-orientation-parallel", ("edge", b), align, 1.0,
                f"edge {b} orientation is not a unit vector parallel to the edge",
            ))

    expected = _incident_pairs(P)
    missing = expected - set(inv.kinks)
    extra = set(inv.kinks) - expected
    for a, c in sorted(missing):
        findings.append(Finding(
            "kink-missing", ("vertex", a), 0.0, 0.0,
            f"no kink number for vertex {a} on face {c}",
        ))
    for a, c in sorted(extra):
        findings.append(Finding(
            "kink-extra", ("vertex", a), 0.0, 0.0,
            f"kink number given for non-incident pair (vertex {a}, face {c})",
        ))

    snorm = float(np.linalg.norm(inv.s))
    if abs(snorm - 1.0) > 1e-9:
        findings.append(Finding(
            "s-unit", ("s", None), snorm, 1.0, "reference direction s is not unit length",
        ))
    dots = np.abs(P.face_normals @ inv.s)
    worst = int(dots.argmin())
    if float(dots[worst]) <= s_tol:
        findings.append(Finding(
            "s-generic", ("face", worst), float(dots[worst]), s_tol,
            f"s is tangent to face {worst} within tolerance",
        ))

    if not missing and not extra:
        for c, loop in enumerate(P.faces):
            q = count_q(P, inv, c)
            total = sum(inv.kinks[(a, c)] for a in loop)
            target = 1.0 - q / 2.0
            if float(total) != target:
                findings.append(Finding(
                    "kink-sum", ("face", c), float(total), target,
                    f"face {c}: kink sum {total} != 1 - q/2 = {target} (q = {q})",
                ))

    if inv.wraps is None:
        findings.append(Finding(
            "wrap-missing", ("vertex", None), 0.0, 0.0, "wrapping numbers absent",
        ))
    elif len(inv.wraps) != P.num_vertices:
        findings.append(Finding(
            "wrap-shape", ("vertex", None), float(len(inv.wraps)),
            float(P.num_vertices), "wrapping numbers do not cover every vertex",
        ))
    else:
        total = int(np.sum(inv.wraps))
        if total != 0:
            findings.append(Finding(
                "wrap-sum", ("vertex", None), float(total), 0.0,
                f"wrapping numbers sum to {total}, expected 0",
            ))

    return ValidationReport(tuple(findings))


def _fan_terms(P: Polytope, edge_orient: np.ndarray, s: np.ndarray, star: VertexStar) -> float:
    """Fan sum of oriented-area/4pi minus signed-membership terms for one star."""
    e = [edge_orient[b] for b in star.edges]
    m = len(e)
    total = 0.0
    for j in range(1, m - 1):
        tri = (e[0], e[j], e[j + 1])
        for x in range(3):
            for y in range(x + 1, 3):
                if float(tri[x] @ tri[y]) >= 1.0 - COINCIDENT_TOL:
                    raise DegeneracyError(
                        f"coincident edge orientations in the star of vertex "
                        f"{star.vertex}; trapped-area fan undefined"
                    )
        area = oriented_area(*tri)
        total += area / (4.0 * np.pi) - sigma(*tri, s)
    return total


def _kink_term(P: Polytope, inv: HomotopyInvariants, a: int, s_tol: float = 1e-12) -> float:
    total = 0.0
    for c in P.faces_at_vertex(a):
        d = float(P.face_normals[c] @ inv.s)
        if abs(d) <= s_tol:
            raise BoundaryAmbiguousError(
                f"s is tangent to face {c}; sign of the kink term undefined"
            )
        total += (1.0 if d > 0.0 else -1.0) * inv.kinks[(a, c)]
    return total


def trapped_area(P: Polytope, inv: HomotopyInvariants, a: int) -> float:
    """Trapped area at vertex a from the invariant data (fraction of 4 pi).

    The kink term carries the sign that makes the global sum rule hold:
    summed over all vertices, the fan terms cancel half the signed per-face
    kink totals 1 - q/2 exactly, so the trapped areas of any invariant set
    passing validate() sum to zero.
    """
    if inv.wraps is None:
        raise InputError("trapped_area requires wrapping numbers")
    star = vertex_star(P, a)
    fan = _fan_terms(P, inv.edge_orient, inv.s, star)
    return float(inv.wraps[a]) + 0.5 * _kink_term(P, inv, a) + fan


def trapped_areas_all(P: Polytope, inv: HomotopyInvariants, sum_tol: float = SUM_TOL) -> TrappedAreas:
    """All per-vertex trapped areas; enforces the zero-sum rule."""
    omega = np.array([trapped_area(P, inv, a) for a in range(P.num_vertices)])
    residual = float(omega.sum())
    if abs(residual) > sum_tol:
        raise RuleViolationError(
            f"trapped areas sum to {residual:.3e}, expected 0; invariant data inconsistent"
        )
    return TrappedAreas(omega=omega)


def wrapping_from_trapped(
    P: Polytope,
    inv: HomotopyInvariants,
    omega_measured,
    round_tol: float = WRAP_ROUND_TOL,
) -> np.ndarray:
    """Recover integer wrapping numbers from measured trapped areas.

    Uses the invariant formula with the wrapping term moved to the left:
    the residue omega_measured + kink and fan corrections must be within
    round_tol of an integer at every vertex.
    """
    omega_measured = np.asarray(omega_measured, dtype=float)
    if omega_measured.shape != (P.num_vertices,):
        raise InputError("omega_measured must have one entry per vertex")
    wraps = np.zeros(P.num_vertices, dtype=int)
    for a in range(P.num_vertices):
        star = vertex_star(P, a)
        base = 0.5 * _kink_term(P, inv, a) + _fan_terms(P, inv.edge_orient, inv.s, star)
        w_real = float(omega_measured[a]) - base
        w = int(np.rint(w_real))
        if abs(w_real - w) > round_tol:
            raise ExtractionError(
                f"vertex {a}: wrapping residue {w_real - w:+.4f} exceeds "
                f"{round_tol}; measured trapped area inconsistent with kinks"
            )
        wraps[a] = w
    return wraps


def choose_s(
    P: Polytope,
    edge_orient: np.ndarray,
    rng: np.random.Generator,
    face_margin: float = S_FACE_MARGIN,
    max_attempts: int = 1000,
) -> np.ndarray:
    """Sample a generic reference direction.

    Rejection-samples uniform directions until s clears every face plane by
    face_margin and every membership test in every vertex-star fan is
    decisively inside or outside.
    """
    stars = [vertex_star(P, a) for a in range(P.num_vertices)]
    for _ in range(max_attempts):
        s = normalize(rng.normal(size=3))
        if float(np.abs(P.face_normals @ s).min()) <= face_margin:
            continue
        try:
            for star in stars:
                _fan_terms(P, edge_orient, s, star)
        except (BoundaryAmbiguousError, DegeneracyError):
            continue
        return s
    raise DegeneracyError("could not find a generic reference direction")


def invariants_from_json(text: str, P: Polytope) -> HomotopyInvariants:
    """Parse the invariant file format.

    Schema: {"s": [x, y, z], "edge_orient": [{"edge": b, "sign": +-1}, ...],
    "kinks": [{"vertex": a, "face": c, "k": int}, ...],
    "wraps": [{"vertex": a, "w": int}, ...]}. The orientation vector of edge
    b is sign times the unit vector from its lower- to higher-index vertex.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed invariant file: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError("invariant file must be a JSON object")
    try:
        s = normalize(np.asarray(data["s"], dtype=float))
        edge_orient = np.zeros((P.num_edges, 3))
        seen = np.zeros(P.num_edges, dtype=bool)
        for item in data["edge_orient"]:
            b = int(item["edge"])
            sign = int(item["sign"])
            if sign not in (-1, 1):
                raise InputError(f"edge {b}: sign must be +1 or -1")
            if b < 0 or b >= P.num_edges:
                raise InputError(f"edge index {b} out of range")
            edge_orient[b] = sign * P.edge_direction(b)
            seen[b] = True
        if not seen.all():
            raise InputError("edge_orient does not cover every edge")
        kinks = {}
        for item in data["kinks"]:
            kinks[(int(item["vertex"]), int(item["face"]))] = int(item["k"])
        wraps = None
        if data.get("wraps") is not None:
            wraps = np.zeros(P.num_vertices, dtype=int)
            got = np.zeros(P.num_vertices, dtype=bool)
            for item in data["wraps"]:
                a = int(item["vertex"])
                wraps[a] = int(item["w"])
                got[a] = True
            if not got.all():
                raise InputError("wraps does not cover every vertex")
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed invariant file: {exc}") from exc
    return HomotopyInvariants(edge_orient=edge_orient, kinks=kinks, wraps=wraps, s=s)


def invariants_to_json(inv: HomotopyInvariants, P: Polytope) -> dict:
    """Serialize invariants to the plain-dict form of the invariant file."""
    orient = []
    for b in range(P.num_edges):
        d = P.edge_direction(b)
        orient.append({"edge": b, "sign": 1 if float(inv.edge_orient[b] @ d) > 0 else -1})
    out = {
        "s": [float(x) for x in inv.s],
        "edge_orient": orient,
        "kinks": [
            {"vertex": a, "face": c, "k": int(k)}
            for (a, c), k in sorted(inv.kinks.items())
        ],
        "wraps": None if inv.wraps is None else [
            {"vertex": a, "w": int(w)} for a, w in enumerate(inv.wraps)
        ],
    }
    return out


def random_invariants(
    P: Polytope,
    rng: np.random.Generator,
    kink_spread: int = 1,
    wrap_spread: int = 1,
) -> HomotopyInvariants:
    """Generate a random invariant set satisfying every sum rule.

    Edge orientations are random signs along each edge; kink numbers are
    drawn per face and then adjusted at one corner to hit 1 - q/2; wrapping
    numbers are drawn and adjusted to sum to zero.
    """
    signs = rng.choice((-1.0, 1.0), size=P.num_edges)
    edge_orient = np.array([signs[b] * P.edge_direction(b) for b in range(P.num_edges)])
    s = choose_s(P, edge_orient, rng)

    probe = HomotopyInvariants(edge_orient=edge_orient, kinks={}, wraps=None, s=s)
    kinks: dict[tuple[int, int], int] = {}
    for c, loop in enumerate(P.faces):
        q = count_q(P, probe, c)
        target = 1 - q // 2
        draws = rng.integers(-kink_spread, kink_spread + 1, size=len(loop))
        draws[-1] = target - int(draws[:-1].sum())
        for a, k in zip(loop, draws):
            kinks[(a, c)] = int(k)

    wraps = rng.integers(-wrap_spread, wrap_spread + 1, size=P.num_vertices)
    wraps[-1] -= int(wraps.sum())

    return HomotopyInvariants(edge_orient=edge_orient, kinks=kinks, wraps=wraps, s=s)
