import numpy as np
import pytest

from tanfield.field import DiscreteField, make_grid
from tanfield.polytope import builtin_shape

R_OCT = 1.0
EPS_OCT = 0.05


@pytest.fixture(scope="session")
def cube():
    return builtin_shape("cube")


@pytest.fixture(scope="session")
def tetra():
    return builtin_shape("tetrahedron")


def radial_cone_field(n: int) -> DiscreteField:
    """Radial unit field on the octant cone slab {x,y,z >= 0, eps*R <= r <= R}."""
    g = make_grid((0.0, 0.0, 0.0), (R_OCT, R_OCT, R_OCT), (n + 1, n + 1, n + 1))
    pos = g.positions()
    r = np.linalg.norm(pos, axis=-1)
    fallback = np.full(3, 1.0 / np.sqrt(3.0))
    vals = np.where(r[..., None] > 1e-300, pos / np.maximum(r[..., None], 1e-300), fallback)
    mask = (r >= EPS_OCT * R_OCT) & (r <= R_OCT)
    return DiscreteField(grid=g, values=vals, mask=mask)


def rotation_field(n: int, alpha: float = 2.0) -> DiscreteField:
    """Unit field rotating at constant rate alpha along x on the unit box."""
    g = make_grid((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (n + 1, n + 1, n + 1))
    pos = g.positions()
    vals = np.stack(
        [np.zeros(g.dims), np.cos(alpha * pos[..., 0]), np.sin(alpha * pos[..., 0])],
        axis=-1,
    )
    return DiscreteField(grid=g, values=vals, mask=np.ones(g.dims, dtype=bool))


def trig_field(n: int) -> DiscreteField:
    """Smooth synthetic field built from low-order trigonometric components."""
    g = make_grid((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (n + 1, n + 1, n + 1))
    p = g.positions()
    raw = np.stack(
        [
            np.cos(2.0 * p[..., 0] + p[..., 1]),
            np.sin(p[..., 1] + 0.5 * p[..., 2]) + 0.3,
            np.cos(p[..., 2] - p[..., 0]) + 0.1,
        ],
        axis=-1,
    )
    vals = raw / np.linalg.norm(raw, axis=-1, keepdims=True)
    return DiscreteField(grid=g, values=vals, mask=np.ones(g.dims, dtype=bool))


def constant_field(n: int, direction=(0.0, 1.0, 0.0)) -> DiscreteField:
    g = make_grid((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (n + 1, n + 1, n + 1))
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    vals = np.broadcast_to(d, g.dims + (3,)).copy()
    return DiscreteField(grid=g, values=vals, mask=np.ones(g.dims, dtype=bool))


@pytest.fixture(scope="session")
def radial96():
    return radial_cone_field(96)
