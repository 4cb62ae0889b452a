import math

import numpy as np
import pytest

from filletrrt.fillets import Reverse, reverse_geometry
from filletrrt.workspace import OccupancyGrid, World, WorldSpec


def circle_intersection(c1, r1, c2, r2, left=True):
    """One intersection of two circles (the one left of c1->c2 when left=True)."""
    c1 = np.asarray(c1, float)
    c2 = np.asarray(c2, float)
    d = np.linalg.norm(c2 - c1)
    a = (r1 * r1 - r2 * r2 + d * d) / (2 * d)
    h = math.sqrt(r1 * r1 - a * a)
    u = (c2 - c1) / d
    n = np.array([-u[1], u[0]]) * (1 if left else -1)
    return tuple(c1 + a * u + h * n)


def empty_world(half=20.0, start=(0.0, 0.0), goal=(10.0, 10.0), psi_r=0.0, resolution=0.05):
    spec = WorldSpec(kind="empty", extent=(2 * half, 2 * half), start=start, goal=goal, psi_r=psi_r,
                     resolution=resolution)
    grid = OccupancyGrid.empty(-half, half, -half, half, resolution)
    return World(spec, grid)


def random_triples(rng, n, lo=0.0, hi=10.0):
    return rng.uniform(lo, hi, size=(n, 3, 2))


def to_local(p, x1, x2):
    """Frame with x2 at the origin and x1 on the negative x axis (computed independently)."""
    th = math.atan2(x2[1] - x1[1], x2[0] - x1[0])
    c, s = math.cos(th), math.sin(th)
    dx, dy = p[0] - x2[0], p[1] - x2[1]
    return np.array([c * dx + s * dy, -s * dx + c * dy])


def random_switch_case(rng, inner, with_prev):
    """A feasible direction-switching quadruple: forward into x2, reverse out of it."""
    while True:
        x1, x2, x3 = rng.uniform(0, 10, size=(3, 2))
        x0 = rng.uniform(0, 10, size=2) if with_prev else None
        if min(np.linalg.norm(x2 - x1), np.linalg.norm(x3 - x2)) < 0.5:
            continue
        d3 = -1
        states = [None if x0 is None else (*x0, 1), (*x1, 1), (*x2, 1), (*x3, d3)]
        g = reverse_geometry(Reverse(inner), *states)
        if g is not None and g.switch and g.inner.curve_len > 1e-3:
            return states, g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
