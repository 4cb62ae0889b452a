"""Planar geometry shared by the planners: vectors, angles, rotations, steering
and uniform sampling inside ellipses."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

EPS = 1e-9
COINCIDENT_TOL = 1e-12
TWO_PI = 2.0 * math.pi


class CoincidentPointsError(ValueError):
    """Raised when a direction is requested between two (numerically) equal points."""


class Vec2(NamedTuple):
    """A point or displacement in the plane, in meters."""

    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Vec2(self.x - other[0], self.y - other[1])

    def __mul__(self, k):  # type: ignore[override]
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def __neg__(self):
        return Vec2(-self.x, -self.y)

    def dot(self, other) -> float:
        return self.x * other[0] + self.y * other[1]

    def cross(self, other) -> float:
        return self.x * other[1] - self.y * other[0]

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


def as_vec(p) -> Vec2:
    v = Vec2(float(p[0]), float(p[1]))
    if not (math.isfinite(v.x) and math.isfinite(v.y)):
        raise ValueError(f"non-finite point {p!r}")
    return v


def distance(a, b) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def wrap_angle(theta: float) -> float:
    """Map an angle to [-pi, pi)."""
    w = (theta + math.pi) % TWO_PI - math.pi
    # the modulo can return exactly pi for inputs a hair below -pi
    return -math.pi if w >= math.pi else w


def heading(a, b) -> float:
    """Angle of the direction from a toward b."""
    return math.atan2(b[1] - a[1], b[0] - a[0])


def unit_vector(a, b) -> Vec2:
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    n = math.hypot(dx, dy)
    if n < COINCIDENT_TOL:
        raise CoincidentPointsError(f"points {tuple(a)} and {tuple(b)} coincide")
    return Vec2(dx / n, dy / n)


def turn_angle(a, b, c) -> tuple[float, int]:
    """Unsigned turn between the directions a->b and b->c, and its sense.

    Returns ``(gamma, zeta)`` with gamma in [0, pi] and zeta = +1 for a
    counter-clockwise (left) turn, -1 for a clockwise one. A straight line
    reports zeta = +1. An exact reversal gives gamma = pi.
    """
    u = unit_vector(a, b)
    v = unit_vector(b, c)
    cr = u.x * v.y - u.y * v.x
    dt = u.x * v.x + u.y * v.y
    gamma = math.atan2(abs(cr), dt)
    return gamma, (1 if cr >= 0.0 else -1)


@dataclass(frozen=True)
class Rotation2:
    """Right-handed planar rotation by ``angle`` radians."""

    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", wrap_angle(float(self.angle)))

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    def apply(self, v) -> Vec2:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return Vec2(c * v[0] - s * v[1], s * v[0] + c * v[1])

    def apply_many(self, xy: np.ndarray) -> np.ndarray:
        """Rotate an (n, 2) array of points."""
        return np.asarray(xy) @ self.matrix.T

    def inverse(self) -> "Rotation2":
        return Rotation2(-self.angle)


def steer(x, y, eta: float) -> Vec2:
    """Closest point to y that lies within eta of x."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    dx = y[0] - x[0]
    dy = y[1] - x[1]
    n = math.hypot(dx, dy)
    if n <= eta:
        return Vec2(float(y[0]), float(y[1]))
    k = eta / n
    return Vec2(x[0] + k * dx, x[1] + k * dy)


@dataclass(frozen=True)
class SampleEllipse:
    """Ellipse with foci ``focal_a``/``focal_b`` and focal-distance sum ``c_best``.

    ``c_min`` is the focal separation. Both lengths are clamped at construction so
    that ``c_best >= c_min >= |focal_a - focal_b|``.
    """

    focal_a: Vec2
    focal_b: Vec2
    c_best: float
    c_min: float | None = None

    def __post_init__(self):
        fa, fb = as_vec(self.focal_a), as_vec(self.focal_b)
        sep = distance(fa, fb)
        c_min = sep if self.c_min is None else max(float(self.c_min), sep)
        c_best = max(float(self.c_best), c_min)
        object.__setattr__(self, "focal_a", fa)
        object.__setattr__(self, "focal_b", fb)
        object.__setattr__(self, "c_min", c_min)
        object.__setattr__(self, "c_best", c_best)

    @property
    def minor_len(self) -> float:
        return math.sqrt(max(self.c_best ** 2 - self.c_min ** 2, 0.0))

    @property
    def degenerate(self) -> bool:
        # judged on the focal-sum slack: the minor axis is a square root and magnifies rounding noise
        return self.c_best - self.c_min <= COINCIDENT_TOL * max(1.0, self.c_best)

    @property
    def area(self) -> float:
        return math.pi * 0.25 * self.c_best * self.minor_len

    def contains(self, p, tol: float = EPS) -> bool:
        return distance(p, self.focal_a) + distance(p, self.focal_b) <= self.c_best + tol


def sample_in_ellipse(e: SampleEllipse, rng: np.random.Generator) -> Vec2:
    """Uniform draw from the ellipse interior (or its focal segment if degenerate).

    Always consumes exactly two uniform variates from ``rng``.
    """
    u, v = rng.random(2)
    fa, fb = e.focal_a, e.focal_b
    if e.degenerate:
        return Vec2(fa.x + u * (fb.x - fa.x), fa.y + u * (fb.y - fa.y))
    a = 0.5 * e.c_best
    b = 0.5 * e.minor_len
    r = math.sqrt(u)
    t = TWO_PI * v
    px, py = a * r * math.cos(t), b * r * math.sin(t)
    sep = distance(fa, fb)
    if sep > COINCIDENT_TOL:
        c, s = (fb.x - fa.x) / sep, (fb.y - fa.y) / sep
    else:
        c, s = 1.0, 0.0
    cx, cy = 0.5 * (fa.x + fb.x), 0.5 * (fa.y + fb.y)
    return Vec2(cx + c * px - s * py, cy + s * px + c * py)


def sample_in_disk(center, radius: float, rng: np.random.Generator) -> Vec2:
    """Uniform draw from a disk; consumes two uniform variates."""
    u, v = rng.random(2)
    r = radius * math.sqrt(u)
    t = TWO_PI * v
    return Vec2(center[0] + r * math.cos(t), center[1] + r * math.sin(t))
