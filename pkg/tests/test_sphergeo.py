import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from tanfield.errors import (
    AliasingError,
    BoundaryAmbiguousError,
    DegeneracyError,
    OffPlaneError,
)
from tanfield.sphergeo import (
    contains,
    normalize,
    oriented_area,
    perp_basis,
    sigma,
    winding_angle,
    wrap_angle,
)

X, Y, Z = np.eye(3)


def unit(v):
    return np.asarray(v, dtype=float) / np.linalg.norm(v)


unit_vectors = st.builds(
    lambda a, b: np.array([
        np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a)
    ]),
    st.floats(0.01, np.pi - 0.01),
    st.floats(-np.pi, np.pi),
)


@st.composite
def triangles(draw):
    a = draw(unit_vectors)
    b = draw(unit_vectors)
    c = draw(unit_vectors)
    assume(min(a @ b, b @ c, c @ a) > -0.95)
    assume(abs(np.dot(a, np.cross(b, c))) >= 1e-4)
    return a, b, c


def test_octant_area():
    assert oriented_area(X, Y, Z) == pytest.approx(np.pi / 2, abs=1e-14)


def test_collapsed_triangle_zero():
    a = unit((0.3, -0.5, 0.81))
    b = unit((0.1, 0.9, 0.2))
    assert oriented_area(a, b, b) == 0.0


def test_antipodal_rejected():
    with pytest.raises(DegeneracyError):
        oriented_area(X, -X, Y)


def test_area_montecarlo():
    # rejection-sample the sphere and count membership in the octant triangle
    rng = np.random.default_rng(20240611)
    n = 1_000_000
    pts = rng.normal(size=(n, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    a, b, c = unit((1, 0.2, 0.1)), unit((-0.1, 1, 0.3)), unit((0.2, -0.2, 1))
    orient = np.sign(np.dot(a, np.cross(b, c)))
    inside = (
        (np.sign(pts @ np.cross(a, b)) == orient)
        & (np.sign(pts @ np.cross(b, c)) == orient)
        & (np.sign(pts @ np.cross(c, a)) == orient)
    )
    p = inside.mean()
    estimate = orient * 4.0 * np.pi * p
    sigma_mc = 4.0 * np.pi * np.sqrt(p * (1 - p) / n)
    assert abs(oriented_area(a, b, c) - estimate) < 3.0 * sigma_mc


@settings(max_examples=200)
@given(triangles())
def test_area_antisymmetry_and_cyclic(tri):
    a, b, c = tri
    area = oriented_area(a, b, c)
    assert area == pytest.approx(-oriented_area(a, c, b), abs=1e-12)
    assert area == pytest.approx(oriented_area(b, c, a), abs=1e-12)


@settings(max_examples=100)
@given(triangles(), st.floats(0.05, 0.45), st.floats(0.05, 0.45))
def test_area_additivity(tri, u, v):
    a, b, c = tri
    d = normalize(a + u * (b - a) + v * (c - a))
    lhs = oriented_area(a, b, c)
    rhs = oriented_area(a, b, d) + oriented_area(b, c, d) + oriented_area(c, a, d)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_contains_octant_center():
    s = unit((1, 1, 1))
    assert contains(X, Y, Z, s) is True
    assert contains(X, Y, Z, -s) is False


def test_contains_cyclic_invariance():
    s = unit((0.4, 0.3, 0.86))
    assert contains(X, Y, Z, s) == contains(Y, Z, X, s) == contains(Z, X, Y, s)


def test_contains_boundary_ambiguous():
    s = unit((1.0, 1.0, 0.0))  # on the great circle through x and y
    with pytest.raises(BoundaryAmbiguousError):
        contains(X, Y, Z, s)


def _winding_contains(a, b, c, s):
    """Independent membership test: accumulated azimuthal winding of the
    triangle boundary around s is +-1 inside, 0 outside."""
    u, w = perp_basis(s)
    total = 0.0
    for p, q in ((a, b), (b, c), (c, a)):
        ts = np.linspace(0.0, 1.0, 400)
        arc = p[None, :] * (1 - ts[:, None]) + q[None, :] * ts[:, None]
        arc /= np.linalg.norm(arc, axis=1, keepdims=True)
        theta = np.arctan2(arc @ w, arc @ u)
        steps = np.diff(theta)
        steps = (steps + np.pi) % (2 * np.pi) - np.pi
        total += steps.sum()
    return int(np.rint(total / (2 * np.pi))) != 0


@settings(max_examples=150, deadline=None)
@given(triangles(), unit_vectors)
def test_contains_matches_winding_oracle(tri, s):
    a, b, c = tri
    # stay away from near-boundary queries; the oracle dilates there too
    margin = min(abs(np.dot(np.cross(p, q), s)) for p, q in ((a, b), (b, c), (c, a)))
    assume(margin >= 1e-3)
    got = contains(a, b, c, s)
    assert got == _winding_contains(a, b, c, s)


def test_sigma_examples():
    s_in = unit((1, 1, 1))
    assert sigma(X, Y, Z, s_in) == 1
    assert sigma(Y, X, Z, s_in) == -1
    s_out = unit((1, 1, -5))
    assert contains(X, Y, Z, s_out) is False
    assert sigma(X, Y, Z, s_out) == 0


def test_winding_constant_path():
    path = np.tile(unit((0.6, 0.8, 0.0)), (12, 1))
    assert winding_angle(path, (X, Y)) == 0.0


def test_winding_quarter_turn():
    angles = np.radians(np.arange(0.0, 91.0, 10.0))
    path = np.stack([np.cos(angles), np.sin(angles), np.zeros_like(angles)], axis=1)
    assert winding_angle(path, (X, Y)) == pytest.approx(np.pi / 2, abs=1e-12)


def test_winding_one_and_three_quarter_turns():
    # explicit parameterization theta(t) = 3.5 pi t
    t = np.linspace(0.0, 1.0, 600)
    theta = 3.5 * np.pi * t
    path = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=1)
    assert winding_angle(path, (X, Y)) == pytest.approx(3.5 * np.pi, abs=1e-10)


def test_winding_aliasing_error():
    theta = np.array([0.0, np.pi / 2 + 0.01])
    path = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=1)
    with pytest.raises(AliasingError):
        winding_angle(path, (X, Y))


def test_winding_off_plane_error():
    path = np.array([[1.0, 0.0, 0.0], [0.9, 0.1, 0.42]])
    path /= np.linalg.norm(path, axis=1, keepdims=True)
    with pytest.raises(OffPlaneError):
        winding_angle(path, (X, Y), plane_tol=1e-3)


@settings(max_examples=50)
@given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
def test_winding_concatenation(span1, span2):
    t1 = np.linspace(0.0, span1, 200)
    t2 = np.linspace(span1, span1 + span2, 200)
    def arc(ts):
        return np.stack([np.cos(ts), np.sin(ts), np.zeros_like(ts)], axis=1)
    whole = winding_angle(arc(np.concatenate([t1, t2[1:]])), (X, Y))
    parts = winding_angle(arc(t1), (X, Y)) + winding_angle(arc(t2), (X, Y))
    assert whole == pytest.approx(parts, abs=1e-9)


def test_wrap_angle_range():
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(3.5 * np.pi) == pytest.approx(-0.5 * np.pi)
    assert wrap_angle(0.3) == pytest.approx(0.3)
