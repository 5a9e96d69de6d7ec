"""Spherical geometry kernel.

Signed areas of geodesic triangles, point-in-triangle tests, the signed
membership indicator used by the trapped-area formula, and winding angles
of paths lying on a single great circle.

All functions take unit vectors as numpy arrays of shape (3,). Triangles
follow the minor convention: every vertex pair spans an angle below pi,
and antipodal pairs are rejected. Everything here is a pure function.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    AliasingError,
    BoundaryAmbiguousError,
    DegeneracyError,
    OffPlaneError,
)

TRIPLE_TOL = 1e-10
ANTIPODAL_TOL = 1e-9
PLANE_TOL = 1e-9
ALIAS_LIMIT = np.pi / 2


def normalize(v) -> np.ndarray:
    """Return v scaled to unit length."""
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise DegeneracyError("cannot normalize a zero vector")
    return v / n


def perp_basis(m) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal pair (u, w) with u x w = m for unit m."""
    m = np.asarray(m, dtype=float)
    pick = int(np.argmin(np.abs(m)))
    axis = np.zeros(3)
    axis[pick] = 1.0
    u = normalize(np.cross(axis, m))
    w = np.cross(m, u)
    return u, w


def _check_pairs(a, b, c):
    for x, y, name in ((a, b, "first"), (b, c, "second"), (c, a, "third")):
        if float(np.dot(x, y)) <= -1.0 + ANTIPODAL_TOL:
            raise DegeneracyError(
                f"{name} vertex pair is antipodal within tolerance; "
                "spherical triangle undefined"
            )


def oriented_area(a, b, c) -> float:
    """Signed area of the spherical triangle (a, b, c), in (-2*pi, 2*pi].

    Positive when (a, b, c) runs counterclockwise seen from outside the
    sphere. Antisymmetric under swapping two vertices, invariant under
    cyclic rotation, zero for triples collinear on a short great-circle arc.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    _check_pairs(a, b, c)
    num = float(np.dot(a, np.cross(b, c)))
    den = 1.0 + float(np.dot(a, b)) + float(np.dot(b, c)) + float(np.dot(c, a))
    return 2.0 * float(np.arctan2(num, den))


def oriented_area_batch(a, b, c) -> np.ndarray:
    """Vectorized oriented_area over stacked (N, 3) unit-vector triples.

    Skips the antipodal guard; callers must reject near-antipodal pairs
    themselves (see trapped-area integration).
    """
    num = np.einsum("ij,ij->i", a, np.cross(b, c))
    den = (
        1.0
        + np.einsum("ij,ij->i", a, b)
        + np.einsum("ij,ij->i", b, c)
        + np.einsum("ij,ij->i", c, a)
    )
    return 2.0 * np.arctan2(num, den)


def contains(a, b, c, s) -> bool:
    """True iff s lies strictly inside the minor spherical triangle (a, b, c)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    s = np.asarray(s, dtype=float)
    _check_pairs(a, b, c)
    orient = float(np.dot(a, np.cross(b, c)))
    if abs(orient) < TRIPLE_TOL:
        raise DegeneracyError("degenerate (coplanar) spherical triangle")
    sign = 1.0 if orient > 0.0 else -1.0
    for x, y in ((a, b), (b, c), (c, a)):
        t = float(np.dot(np.cross(x, y), s))
        if abs(t) < TRIPLE_TOL:
            raise BoundaryAmbiguousError(
                "query direction lies on a boundary great circle within tolerance"
            )
        if (t > 0.0) != (sign > 0.0):
            return False
    return True


def sigma(a, b, c, s) -> int:
    """sgn((a x b) . s) if s is inside triangle (a, b, c), else 0."""
    if not contains(a, b, c, s):
        return 0
    t = float(np.dot(np.cross(np.asarray(a, float), np.asarray(b, float)), s))
    if abs(t) < TRIPLE_TOL:
        raise BoundaryAmbiguousError(
            "membership is certain but sgn((a x b) . s) is within tolerance of zero"
        )
    return 1 if t > 0.0 else -1


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = -((-theta + np.pi) % (2.0 * np.pi) - np.pi)
    return float(w)


def winding_angle(path, basis, plane_tol: float = PLANE_TOL) -> float:
    """Total continuously accumulated angle of a great-circle path.

    path is a sequence of unit vectors lying in the plane spanned by the
    orthonormal basis pair (u, w); the angle of each sample is measured as
    atan2(p . w, p . u) and per-step increments are wrapped to (-pi, pi).
    Steps of pi/2 or more raise AliasingError; samples leaving the plane by
    more than plane_tol raise OffPlaneError.
    """
    pts = np.asarray(path, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise ValueError("path must be a nonempty (N, 3) array")
    u, w = (np.asarray(e, dtype=float) for e in basis)
    normal = np.cross(u, w)
    off = np.abs(pts @ normal)
    if float(off.max()) > plane_tol:
        idx = int(off.argmax())
        raise OffPlaneError(
            f"sample {idx} leaves the great-circle plane by {off[idx]:.3e} "
            f"(tolerance {plane_tol:.3e})"
        )
    theta = np.arctan2(pts @ w, pts @ u)
    steps = np.diff(theta)
    steps = (steps + np.pi) % (2.0 * np.pi) - np.pi
    if steps.size and float(np.abs(steps).max()) >= ALIAS_LIMIT:
        idx = int(np.abs(steps).argmax())
        raise AliasingError(
            f"step {idx} spans {abs(steps[idx]):.4f} rad >= pi/2; sample more densely"
        )
    return float(steps.sum())
