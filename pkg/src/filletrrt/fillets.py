"""Fillet motion primitives.

A fillet replaces the corner at ``x2`` of the polyline ``x1 -> x2 -> x3`` with a
curve that is tangent to both segments. The curve starts a setback distance
``d(gamma)`` before the corner and ends the same distance after it, where
``gamma`` is the turn angle at ``x2``. The sampled result runs from ``x1`` to
``x3`` in three pieces: a straight lead-in, the curve and a straight lead-out.

Two curve families are provided (circular arcs and a pair of cubic Bezier
curves with continuous curvature) plus a wrapper that builds direction-switching
(forward/reverse) fillets out of either of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .geometry import COINCIDENT_TOL, EPS, Rotation2, Vec2, heading, turn_angle, unit_vector

REVERSAL_MARGIN = 1e-6
DEFAULT_RESOLUTION = 0.01


class ReversalError(ValueError):
    """The turn angle is (numerically) a full reversal, so no fillet exists."""


class NegativeLengthError(ValueError):
    """A fillet length component is negative: the continuity checks were skipped upstream."""


# ---------------------------------------------------------------------------
# setback distances
# ---------------------------------------------------------------------------

def _check_gamma(gamma: float) -> None:
    if gamma < 0.0:
        raise ValueError(f"turn angle must be non-negative, got {gamma}")
    if gamma >= math.pi - REVERSAL_MARGIN:
        raise ReversalError(f"turn angle {gamma} is a reversal")


def arc_fillet_distance(gamma: float, r: float) -> float:
    """Setback of a circular-arc fillet of radius r for a turn of gamma."""
    if r <= 0:
        raise ValueError("radius must be positive")
    _check_gamma(gamma)
    # r (1 - cos g) / sin g written in the half-angle form, which is exact at g = 0
    return r * math.tan(0.5 * gamma)


# Constants of the continuous-curvature Bezier construction.
NU1 = 7.2364
NU2 = 0.4 * (math.sqrt(6.0) - 1.0)
NU3 = (NU2 + 4.0) / (NU1 + 6.0)
NU4 = (NU2 + 4.0) ** 2 / (54.0 * NU3)


def bezier_fillet_distance(gamma: float, kappa_max: float) -> float:
    """Setback of the two-cubic Bezier fillet whose peak curvature is kappa_max."""
    if kappa_max <= 0:
        raise ValueError("kappa_max must be positive")
    _check_gamma(gamma)
    c = math.cos(0.5 * gamma)
    return NU4 * math.sin(0.5 * gamma) / (kappa_max * c * c)


def fillet_length(b: float, psi_len: float, e: float) -> float:
    """Length of one fillet: lead-in b, curve psi_len and lead-out e."""
    for name, v in (("b", b), ("psi_len", psi_len), ("e", e)):
        if v < -EPS:
            raise NegativeLengthError(f"{name} = {v} < 0")
    return max(b, 0.0) + max(psi_len, 0.0) + max(e, 0.0)


# ---------------------------------------------------------------------------
# curve families
# ---------------------------------------------------------------------------

class _ArcCurve:
    """Circular arc leaving ``start`` with initial heading ``h0`` and turning by gamma."""

    __slots__ = ("start", "h0", "zeta", "r", "length")

    def __init__(self, start, h0, zeta, gamma, r):
        self.start = start
        self.h0 = h0
        self.zeta = zeta
        self.r = r
        self.length = r * gamma

    def evaluate(self, t: np.ndarray, resolution: float | None = None):
        r, z = self.r, self.zeta
        th = t / r
        lx = r * np.sin(th)
        ly = z * r * (1.0 - np.cos(th))
        c, s = math.cos(self.h0), math.sin(self.h0)
        x = self.start[0] + c * lx - s * ly
        y = self.start[1] + s * lx + c * ly
        psi = self.h0 + z * th
        kappa = np.full_like(t, z / r, dtype=float)
        return x, y, psi, kappa


@dataclass(frozen=True)
class Arc:
    """Circular-arc fillets of fixed radius (curvature 1/radius)."""

    radius: float
    name = "arc"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @classmethod
    def from_kappa(cls, kappa_max: float) -> "Arc":
        return cls(1.0 / kappa_max)

    @property
    def kappa_max(self) -> float:
        return 1.0 / self.radius

    def distance(self, gamma: float) -> float:
        return arc_fillet_distance(gamma, self.radius)

    def curve_length(self, gamma: float, d: float | None = None) -> float:
        return self.radius * gamma

    def distance_array(self, gamma: np.ndarray) -> np.ndarray:
        return self.radius * np.tan(0.5 * gamma)

    def curve_length_array(self, gamma: np.ndarray, d: np.ndarray) -> np.ndarray:
        return self.radius * gamma

    def curve(self, x2: Vec2, u_in: Vec2, u_out: Vec2, gamma: float, zeta: int, d: float):
        start = Vec2(x2.x - d * u_in.x, x2.y - d * u_in.y)
        return _ArcCurve(start, math.atan2(u_in.y, u_in.x), zeta, gamma, self.radius)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_GL_TAU = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


def _bernstein3(t):
    mt = 1.0 - t
    return mt ** 3, 3.0 * mt * mt * t, 3.0 * mt * t * t, t ** 3


def _cubic(p: np.ndarray, t: np.ndarray):
    """Position, first and second derivative of a cubic with control points p (4, 2)."""
    t = t[:, None]
    b0, b1, b2, b3 = _bernstein3(t)
    pos = b0 * p[0] + b1 * p[1] + b2 * p[2] + b3 * p[3]
    d0, d1, d2 = p[1] - p[0], p[2] - p[1], p[3] - p[2]
    mt = 1.0 - t
    der = 3.0 * (mt * mt * d0 + 2.0 * mt * t * d1 + t * t * d2)
    sec = 6.0 * (mt * (d1 - d0) + t * (d2 - d1))
    return pos, der, sec


def bezier_control_points(x2, u_in, u_out, gamma: float, d: float):
    """Control points of the two cubic halves of a Bezier fillet.

    ``u_in`` is the travel direction into the corner ``x2`` and ``u_out`` the
    direction out of it. The first half starts at the setback point on the
    incoming segment, the second half starts at the setback point on the
    outgoing segment; both end at the shared join point. Returns two (4, 2)
    arrays.
    """
    x2 = np.asarray(x2, dtype=float)
    ui = np.asarray(u_in, dtype=float)
    uo = np.asarray(u_out, dtype=float)
    h = NU3 * d
    g = NU2 * NU3 * d
    a0 = x2 - d * ui
    a1 = a0 + g * ui
    a2 = a1 + h * ui
    b0 = x2 + d * uo
    b1 = b0 - g * uo
    b2 = b1 - h * uo
    # The listed weight k = 6 nu3 cos(gamma/2) d / (nu2 + 4) places the two end
    # points a relative 1e-4 apart because nu1 is rounded; joining at the
    # midpoint closes the path exactly and keeps the endpoint tangents on the
    # line a2 -> b2.
    join = 0.5 * (a2 + b2)
    return np.array([a0, a1, a2, join]), np.array([b0, b1, b2, join])


def bezier_join_weight(gamma: float, d: float) -> float:
    """The weight k from the published construction (distance from the second control point to the join)."""
    return 6.0 * NU3 * math.cos(0.5 * gamma) * d / (NU2 + 4.0)


def bezier_unit_half_length(gamma: np.ndarray) -> np.ndarray:
    """Length of one cubic half of a Bezier fillet with unit setback, for each turn angle."""
    gamma = np.asarray(gamma, dtype=float)
    h, g = NU3, NU2 * NU3
    # canonical frame: corner at the origin, arriving along +x
    a0 = np.array([-1.0, 0.0])
    a1 = a0 + np.array([g, 0.0])
    a2 = a1 + np.array([h, 0.0])
    uo = np.stack((np.cos(gamma), np.sin(gamma)), axis=-1)
    b2 = (1.0 - g - h) * uo
    join = 0.5 * (a2 + b2)  # shape (n, 2)
    t = _GL_TAU[None, :, None]
    mt = 1.0 - t
    d0 = (a1 - a0)[None, None, :]
    d1 = (a2 - a1)[None, None, :]
    d2 = (join - a2)[:, None, :]
    der = 3.0 * (mt * mt * d0 + 2.0 * mt * t * d1 + t * t * d2)
    return np.sum(_GL_W[None, :] * np.hypot(der[..., 0], der[..., 1]), axis=1)


def _cubic_length(p: np.ndarray) -> float:
    _, der, _ = _cubic(p, _GL_TAU)
    return float(np.sum(_GL_W * np.hypot(der[:, 0], der[:, 1])))


class _BezierCurve:
    """Two cubic halves joined at a shared point, evaluated by arc length."""

    __slots__ = ("pa", "pb", "half", "length", "_table")

    def __init__(self, x2, u_in, u_out, gamma, d):
        self.pa, self.pb = bezier_control_points(x2, u_in, u_out, gamma, d)
        self.half = _cubic_length(self.pa)
        self.length = 2.0 * self.half
        self._table = None

    def _tau_table(self, resolution: float):
        if self._table is None or self._table[0] > resolution:
            n = max(16, int(math.ceil(10.0 * self.half / resolution)) + 1)
            tau = np.linspace(0.0, 1.0, n)
            pos, _, _ = _cubic(self.pa, tau)
            seg = np.hypot(*np.diff(pos, axis=0).T)
            s = np.concatenate(([0.0], np.cumsum(seg)))
            # chord length slightly underestimates; rescale onto the quadrature length
            s *= self.half / s[-1] if s[-1] > 0 else 1.0
            self._table = (resolution, tau, s)
        return self._table

    def evaluate(self, t: np.ndarray, resolution: float = DEFAULT_RESOLUTION):
        t = np.asarray(t, dtype=float)
        if self.half <= 0.0:
            p = self.pa[0]
            z = np.zeros_like(t)
            return p[0] + z, p[1] + z, z, z
        # both halves are mirror images of each other, so one table serves both
        _, tau_g, s_g = self._tau_table(resolution)
        first = t <= self.half
        s_local = np.where(first, t, self.length - t)
        tau = np.interp(np.clip(s_local, 0.0, self.half), s_g, tau_g)
        x = np.empty_like(t)
        y = np.empty_like(t)
        psi = np.empty_like(t)
        kap = np.empty_like(t)
        for mask, pts, sgn in ((first, self.pa, 1.0), (~first, self.pb, -1.0)):
            if not mask.any():
                continue
            pos, der, sec = _cubic(pts, tau[mask])
            x[mask] = pos[:, 0]
            y[mask] = pos[:, 1]
            # the second half is traversed from the join back to its start
            dx, dy = sgn * der[:, 0], sgn * der[:, 1]
            psi[mask] = np.arctan2(dy, dx)
            sp = np.hypot(der[:, 0], der[:, 1])
            kap[mask] = (dx * sec[:, 1] - dy * sec[:, 0]) / sp ** 3
        return x, y, psi, kap


@dataclass(frozen=True)
class Bezier:
    """Continuous-curvature fillets made of two cubic Bezier curves."""

    kappa_max: float
    name = "bezier"

    def __post_init__(self):
        if not self.kappa_max > 0:
            raise ValueError("kappa_max must be positive")

    def distance(self, gamma: float) -> float:
        return bezier_fillet_distance(gamma, self.kappa_max)

    def curve(self, x2: Vec2, u_in: Vec2, u_out: Vec2, gamma: float, zeta: int, d: float):
        return _BezierCurve(x2, u_in, u_out, gamma, d)

    def curve_length(self, gamma: float, d: float | None = None) -> float:
        if d is None:
            d = self.distance(gamma)
        if d == 0.0:
            return 0.0
        return float(2.0 * d * bezier_unit_half_length(np.array([gamma]))[0])

    def distance_array(self, gamma: np.ndarray) -> np.ndarray:
        c = np.cos(0.5 * gamma)
        return NU4 * np.sin(0.5 * gamma) / (self.kappa_max * c * c)

    def curve_length_array(self, gamma: np.ndarray, d: np.ndarray) -> np.ndarray:
        return 2.0 * d * bezier_unit_half_length(gamma)


@dataclass(frozen=True)
class Reverse:
    """Direction-switching fillets built on top of a unidirectional kind."""

    inner: Arc | Bezier

    @property
    def name(self) -> str:
        return "rev-" + self.inner.name

    @property
    def kappa_max(self) -> float:
        return self.inner.kappa_max

    def distance(self, gamma: float) -> float:
        return self.inner.distance(gamma)


def make_kind(primitive: str, kappa_max: float):
    """Fillet kind for a primitive name: arc, bezier, rev-arc or rev-bezier."""
    if primitive == "arc":
        return Arc.from_kappa(kappa_max)
    if primitive == "bezier":
        return Bezier(kappa_max)
    if primitive == "rev-arc":
        return Reverse(Arc.from_kappa(kappa_max))
    if primitive == "rev-bezier":
        return Reverse(Bezier(kappa_max))
    raise ValueError(f"unknown fillet primitive {primitive!r}")


# ---------------------------------------------------------------------------
# continuity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContinuityParams:
    """Which feasibility test a fillet must pass.

    ``mode="paper"`` uses the two setback conditions (the curve fits on the
    outgoing segment, and it does not overlap the previous curve on the
    incoming segment). ``mode="legacy"`` is the older conservative rule: the
    turn is at most ``gamma_max`` and every segment is at least ``2 d_min`` long,
    with ``d_min = d(gamma_max)``.
    """

    mode: str = "paper"
    gamma_max: float = math.pi / 2
    d_min: float = 0.0

    def __post_init__(self):
        if self.mode not in ("paper", "legacy"):
            raise ValueError(f"unknown continuity mode {self.mode!r}")
        if self.mode == "legacy" and not 0.0 < self.gamma_max < math.pi:
            raise ValueError("gamma_max must lie in (0, pi)")

    @classmethod
    def legacy(cls, kind, gamma_max: float = math.pi / 2) -> "ContinuityParams":
        return cls("legacy", gamma_max, kind.distance(gamma_max))


PAPER = ContinuityParams()


def check_continuity(d_prev: float, d_curr: float, seg_prev: float, seg_next: float,
                     params: ContinuityParams = PAPER, gamma: float | None = None,
                     gamma_prev: float | None = None, has_prev: bool = True) -> bool:
    """Feasibility of a fillet whose curve has setback d_curr after one with setback d_prev.

    ``seg_prev`` is the length of the segment shared with the previous curve and
    ``seg_next`` the length of the outgoing segment. Legacy mode ignores the
    setbacks and instead uses ``gamma``/``gamma_prev`` and the segment lengths;
    ``has_prev`` tells it whether a previous curve exists on ``seg_prev``.
    """
    if params.mode == "paper":
        return d_curr <= seg_next + EPS and d_prev + d_curr <= seg_prev + EPS
    if gamma is None:
        raise ValueError("legacy continuity needs the turn angle")
    if gamma > params.gamma_max:
        return False
    if gamma_prev is not None and gamma_prev > params.gamma_max:
        return False
    need_prev = 2.0 * params.d_min if has_prev else params.d_min
    return seg_next >= 2.0 * params.d_min and seg_prev >= need_prev


# ---------------------------------------------------------------------------
# fillet paths
# ---------------------------------------------------------------------------

@dataclass
class FilletPath:
    """A sampled path. Arrays are indexed by sample; ``s`` is arc length from x1."""

    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    kappa: np.ndarray
    direction: np.ndarray
    s1: float = 0.0
    s2: float = 0.0
    s3: float = 0.0
    d_gamma: float = 0.0
    total_length: float = 0.0

    @property
    def switch_indices(self) -> tuple[float, float, float, float]:
        return 0.0, self.s1, self.s2, self.s3

    @property
    def points(self) -> np.ndarray:
        return np.column_stack((self.x, self.y))

    def __len__(self) -> int:
        return len(self.s)

    def slice_from(self, s_start: float) -> "FilletPath":
        keep = self.s >= s_start - 1e-12
        return FilletPath(self.s[keep], self.x[keep], self.y[keep], self.psi[keep],
                          self.kappa[keep], self.direction[keep], self.s1, self.s2,
                          self.s3, self.d_gamma, self.total_length)


def _grid(a: float, b: float, resolution: float) -> np.ndarray:
    """Points covering [a, b] with spacing at most resolution, both ends included."""
    n = max(1, int(math.ceil((b - a) / resolution - 1e-12)))
    return np.linspace(a, b, n + 1)


def _s_grid(breaks, resolution: float, s_start: float = 0.0) -> np.ndarray:
    parts = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= s_start or b - a <= 0.0:
            continue
        a = max(a, s_start)
        g = _grid(a, b, resolution)
        parts.append(g if not parts else g[1:])
    if not parts:
        end = max(min(breaks[-1], s_start), 0.0)
        return np.array([end])
    return np.concatenate(parts)


@dataclass
class FilletGeometry:
    """Analytic description of a unidirectional fillet through x1, x2, x3."""

    kind: object
    x1: Vec2
    x2: Vec2
    x3: Vec2
    gamma: float
    zeta: int
    d: float
    d_prev: float
    l12: float
    l23: float
    u12: Vec2
    u23: Vec2
    curve_len: float
    _curve: object = field(default=None, repr=False)

    @property
    def b(self) -> float:
        return self.l12 - self.d

    @property
    def e(self) -> float:
        return self.l23 - self.d

    @property
    def total_length(self) -> float:
        return fillet_length(self.b, self.curve_len, self.e)

    @property
    def s1(self) -> float:
        return max(self.b, 0.0)

    @property
    def s2(self) -> float:
        return self.s1 + self.curve_len

    @property
    def s3(self) -> float:
        return self.s2 + max(self.e, 0.0)

    @property
    def x_s(self) -> Vec2:
        return Vec2(self.x2.x - self.d * self.u12.x, self.x2.y - self.d * self.u12.y)

    @property
    def x_e(self) -> Vec2:
        return Vec2(self.x2.x + self.d * self.u23.x, self.x2.y + self.d * self.u23.y)

    @property
    def curve(self):
        if self._curve is None:
            self._curve = self.kind.curve(self.x2, self.u12, self.u23, self.gamma, self.zeta, self.d)
        return self._curve

    def evaluate(self, s, resolution: float = DEFAULT_RESOLUTION):
        """Position, heading and signed curvature at arc lengths s (array)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        x = np.empty_like(s)
        y = np.empty_like(s)
        psi = np.empty_like(s)
        kap = np.zeros_like(s)
        s1, s2 = self.s1, self.s2
        lead = s <= s1
        tail = s > s2
        mid = ~(lead | tail)
        h_in = math.atan2(self.u12.y, self.u12.x)
        h_out = math.atan2(self.u23.y, self.u23.x)
        if lead.any():
            t = s[lead]
            x[lead] = self.x1.x + t * self.u12.x
            y[lead] = self.x1.y + t * self.u12.y
            psi[lead] = h_in
        if tail.any():
            t = s[tail] - s2
            xe = self.x_e
            x[tail] = xe.x + t * self.u23.x
            y[tail] = xe.y + t * self.u23.y
            psi[tail] = h_out
        if mid.any():
            t = s[mid] - s1
            # a curve shorter than a picometre is a point; its derivative can vanish exactly
            if self.curve_len > COINCIDENT_TOL:
                cx, cy, cp, ck = self.curve.evaluate(t, resolution)
            else:
                xs = self.x_s
                cx, cy, cp, ck = xs.x + 0 * t, xs.y + 0 * t, h_in + 0 * t, 0 * t
            x[mid], y[mid], psi[mid], kap[mid] = cx, cy, cp, ck
        return x, y, psi, kap

    def sample(self, resolution: float = DEFAULT_RESOLUTION, s_start: float = 0.0,
               direction: int = 1) -> FilletPath:
        s = _s_grid((0.0, self.s1, self.s2, self.s3), resolution, s_start)
        x, y, psi, kap = self.evaluate(s, resolution)
        return FilletPath(s, x, y, psi, kap, np.full(len(s), direction, dtype=np.int8),
                          self.s1, self.s2, self.s3, self.d, self.total_length)


def _setback_prev(kind, x0, x1, x2, flipped: bool = False) -> float | None:
    """Setback of the curve at x1 (None when that curve cannot exist)."""
    if x0 is None:
        return 0.0
    g, _ = turn_angle(x0, x1, x2)
    if flipped:
        g = math.pi - g
    try:
        return kind.distance(g)
    except ReversalError:
        return None


def fillet_geometry(kind, x0, x1, x2, x3, params: ContinuityParams = PAPER,
                    d_prev: float | None = None, gamma_prev: float | None = None,
                    has_prev: bool | None = None) -> FilletGeometry | None:
    """Build the analytic fillet through x1, x2, x3 or return None when infeasible.

    ``x0`` is the point before x1 (None when x1 starts the chain, in which case
    there is no preceding curve). ``d_prev``/``gamma_prev`` override the setback
    and turn of the preceding curve; ``has_prev`` then says whether it exists.
    """
    if has_prev is None:
        has_prev = x0 is not None
    x1 = Vec2(float(x1[0]), float(x1[1]))
    x2 = Vec2(float(x2[0]), float(x2[1]))
    x3 = Vec2(float(x3[0]), float(x3[1]))
    u12 = unit_vector(x1, x2)
    u23 = unit_vector(x2, x3)
    cr = u12.x * u23.y - u12.y * u23.x
    gamma = math.atan2(abs(cr), u12.x * u23.x + u12.y * u23.y)
    zeta = 1 if cr >= 0.0 else -1
    if gamma >= math.pi - REVERSAL_MARGIN:
        return None
    d = kind.distance(gamma)
    if d_prev is None:
        d_prev = _setback_prev(kind, x0, x1, x2)
        if d_prev is None:
            return None
    l12 = math.hypot(x2.x - x1.x, x2.y - x1.y)
    l23 = math.hypot(x3.x - x2.x, x3.y - x2.y)
    if params.mode == "legacy":
        if gamma_prev is None and x0 is not None:
            gamma_prev = turn_angle(x0, x1, x2)[0]
        ok = check_continuity(d_prev, d, l12, l23, params, gamma, gamma_prev, has_prev=has_prev)
    else:
        ok = check_continuity(d_prev, d, l12, l23, params)
    if not ok:
        return None
    return FilletGeometry(kind, x1, x2, x3, gamma, zeta, d, d_prev, l12, l23, u12, u23,
                          kind.curve_length(gamma, d))


def _unit_rows(a, b):
    v = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    n = np.hypot(v[..., 0], v[..., 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        return v / n[..., None], n


def _angle_between(u, v):
    cr = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    dt = u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]
    return np.arctan2(np.abs(cr), dt)


def batch_fillet_lengths(kind, x0, x1, x2, x3, has_prev, params: ContinuityParams = PAPER):
    """Vectorized fillet lengths for many chains (x0, x1, x2, x3).

    Inputs are (n, 2) arrays or single points that broadcast; ``has_prev`` is a
    boolean array marking chains where x0 exists (elsewhere x0 is ignored).
    Returns the total length of each fillet, inf where it is infeasible.
    Only unidirectional kinds are supported.
    """
    u12, l12 = _unit_rows(x1, x2)
    u23, l23 = _unit_rows(x2, x3)
    gamma = _angle_between(u12, u23)
    u01, _ = _unit_rows(x0, x1)
    has_prev = np.asarray(has_prev, dtype=bool)
    gamma_prev = np.where(has_prev, _angle_between(u01, u12), 0.0)
    gamma, gamma_prev, l12, l23 = np.broadcast_arrays(gamma, gamma_prev, l12, l23)
    limit = math.pi - REVERSAL_MARGIN
    bad = ~((l12 >= 1e-12) & (l23 >= 1e-12)) | (gamma >= limit) | (gamma_prev >= limit)
    g = np.where(bad, 0.0, gamma)
    gp = np.where(bad, 0.0, gamma_prev)
    d = kind.distance_array(g)
    d_prev = kind.distance_array(gp)
    if params.mode == "paper":
        ok = (d <= l23 + EPS) & (d_prev + d <= l12 + EPS)
    else:
        need_prev = np.where(has_prev, 2.0 * params.d_min, params.d_min)
        ok = (g <= params.gamma_max) & (gp <= params.gamma_max) & (l23 >= 2.0 * params.d_min) & (l12 >= need_prev)
    ok &= ~bad
    total = l12 + l23 - 2.0 * d + kind.curve_length_array(g, d)
    return np.where(ok, total, np.inf)


def make_fillet(kind, x0, x1, x2, x3, params: ContinuityParams = PAPER,
                resolution: float = DEFAULT_RESOLUTION) -> FilletPath | None:
    """Sampled unidirectional fillet, or None when infeasible."""
    if isinstance(kind, Reverse):
        raise TypeError("use make_reverse_fillet for direction-switching kinds")
    g = fillet_geometry(kind, x0, x1, x2, x3, params)
    return None if g is None else g.sample(resolution)


def make_arc_fillet(x0, x1, x2, x3, r: float, params: ContinuityParams = PAPER,
                    resolution: float = DEFAULT_RESOLUTION) -> FilletPath | None:
    return make_fillet(Arc(r), x0, x1, x2, x3, params, resolution)


def make_bezier_fillet(x0, x1, x2, x3, kappa_max: float, params: ContinuityParams = PAPER,
                       resolution: float = DEFAULT_RESOLUTION) -> FilletPath | None:
    return make_fillet(Bezier(kappa_max), x0, x1, x2, x3, params, resolution)


# ---------------------------------------------------------------------------
# direction-switching fillets
# ---------------------------------------------------------------------------

class DirState(NamedTuple):
    """A position with its travel direction: +1 forward, -1 reverse."""

    point: Vec2
    d: int = 1


def _dir_state(p) -> DirState:
    if isinstance(p, DirState):
        return p
    if len(p) == 3:
        return DirState(Vec2(float(p[0]), float(p[1])), int(p[2]))
    return DirState(Vec2(float(p[0]), float(p[1])), 1)


@dataclass
class ReverseGeometry:
    """A fillet through three direction-tagged points, possibly with a cusp.

    When the direction flips at x2, ``inner`` is the unidirectional fillet
    built in the frame with x2 at the origin and x1 on the negative x axis,
    ending at the mirror image of x3. The part beyond the y axis is reflected
    back when sampling.
    """

    inner: FilletGeometry
    switch: bool
    d_in: int
    d_out: int
    frame: Rotation2 | None = None
    origin: Vec2 | None = None
    s_cusp: float | None = None

    @property
    def total_length(self) -> float:
        return self.inner.total_length

    @property
    def d(self) -> float:
        return self.inner.d

    @property
    def d_prev(self) -> float:
        return self.inner.d_prev

    @property
    def s1(self) -> float:
        return self.inner.s1

    @property
    def s2(self) -> float:
        return self.inner.s2

    @property
    def s3(self) -> float:
        return self.inner.s3

    def _find_cusp(self, resolution: float) -> float:
        if self.s_cusp is None:
            g = self.inner
            if g.curve_len == 0.0:
                self.s_cusp = g.s1
            else:
                self.s_cusp = brentq(lambda s: float(g.evaluate([s], resolution)[0][0]),
                                     g.s1, g.s2, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        return self.s_cusp

    def sample(self, resolution: float = DEFAULT_RESOLUTION, s_start: float = 0.0) -> FilletPath:
        g = self.inner
        if not self.switch:
            return g.sample(resolution, s_start, self.d_out)
        s = _s_grid((0.0, g.s1, g.s2, g.s3), resolution, s_start)
        sc = self._find_cusp(resolution)
        if sc >= s_start and np.min(np.abs(s - sc)) > 1e-12:
            s = np.insert(s, np.searchsorted(s, sc), sc)
        x, y, psi, kap = g.evaluate(s, resolution)
        # after the cusp everything lies at x > 0; classify by arc length so the
        # cusp sample itself stays with the incoming direction
        after = s > sc
        x = np.where(after, -x, x)
        psi = np.where(after, math.pi - psi, psi)
        kap = np.where(after, -kap, kap)
        direction = np.where(after, self.d_out, self.d_in).astype(np.int8)
        xy = self.frame.inverse().apply_many(np.column_stack((x, y))) + np.asarray(self.origin)
        psi = psi + self.frame.inverse().angle
        # store the body heading: the travel tangent, turned around when reversing
        psi = np.where(direction < 0, psi + math.pi, psi)
        psi = (psi + math.pi) % (2 * math.pi) - math.pi
        return FilletPath(s, xy[:, 0], xy[:, 1], psi, kap, direction,
                          g.s1, g.s2, g.s3, g.d, g.total_length)


def reverse_geometry(kind: Reverse | Arc | Bezier, x0, x1, x2, x3,
                     params: ContinuityParams = PAPER) -> ReverseGeometry | None:
    """Analytic direction-aware fillet through direction-tagged points, or None."""
    inner_kind = kind.inner if isinstance(kind, Reverse) else kind
    s1, s2, s3 = _dir_state(x1), _dir_state(x2), _dir_state(x3)
    s0 = None if x0 is None else _dir_state(x0)
    p1, p2, p3 = s1.point, s2.point, s3.point
    d_prev = None
    gamma_prev = None
    if s0 is not None:
        g_raw, _ = turn_angle(s0.point, p1, p2)
        flipped = s1.d != s2.d
        if flipped and g_raw <= math.pi / 2:
            # the preceding direction switch could not have been built
            return None
        gamma_prev = math.pi - g_raw if flipped else g_raw
        try:
            d_prev = inner_kind.distance(gamma_prev)
        except ReversalError:
            return None
    else:
        d_prev = 0.0
    if s2.d == s3.d:
        g = fillet_geometry(inner_kind, None if s0 is None else s0.point, p1, p2, p3, params,
                            d_prev=d_prev, gamma_prev=gamma_prev)
        return None if g is None else ReverseGeometry(g, False, s2.d, s3.d)
    frame = Rotation2(-heading(p1, p2))
    l1 = frame.apply(p1 - p2)
    l3 = frame.apply(p3 - p2)
    if l3.x >= -EPS:
        # x3 is not behind x2, so the mirrored path never crosses back to it
        return None
    l3f = Vec2(-l3.x, l3.y)
    g = fillet_geometry(inner_kind, None, l1, Vec2(0.0, 0.0), l3f, params,
                        d_prev=d_prev, gamma_prev=gamma_prev, has_prev=s0 is not None)
    if g is None:
        return None
    return ReverseGeometry(g, True, s2.d, s3.d, frame, p2)


def make_reverse_fillet(x0, x1, x2, x3, inner, params: ContinuityParams = PAPER,
                        resolution: float = DEFAULT_RESOLUTION) -> FilletPath | None:
    """Sampled direction-aware fillet; points are (x, y, d) triples or DirState."""
    g = reverse_geometry(inner, x0, x1, x2, x3, params)
    return None if g is None else g.sample(resolution)


def any_geometry(kind, x0, x1, x2, x3, params: ContinuityParams = PAPER):
    """Dispatch to the unidirectional or direction-aware builder."""
    if isinstance(kind, Reverse):
        return reverse_geometry(kind, x0, x1, x2, x3, params)
    return fillet_geometry(kind, _xy(x0), _xy(x1), _xy(x2), _xy(x3), params)


def _xy(p):
    if p is None:
        return None
    if isinstance(p, DirState):
        return p.point
    return (p[0], p[1])


# ---------------------------------------------------------------------------
# whole chains
# ---------------------------------------------------------------------------

def polyline_path(points, resolution: float = DEFAULT_RESOLUTION) -> FilletPath:
    """Straight-line path through a sequence of points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    s_all, x_all, y_all, p_all = [], [], [], []
    offset = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        L = float(np.hypot(*(b - a)))
        if L == 0.0:
            continue
        t = _grid(0.0, L, resolution)
        if s_all:
            t = t[1:]
        u = (b - a) / L
        s_all.append(offset + t)
        x_all.append(a[0] + t * u[0])
        y_all.append(a[1] + t * u[1])
        p_all.append(np.full(len(t), math.atan2(u[1], u[0])))
        offset += L
    if not s_all:
        p = pts[0]
        return FilletPath(np.zeros(1), np.array([p[0]]), np.array([p[1]]), np.zeros(1),
                          np.zeros(1), np.ones(1, dtype=np.int8))
    s = np.concatenate(s_all)
    return FilletPath(s, np.concatenate(x_all), np.concatenate(y_all), np.concatenate(p_all),
                      np.zeros(len(s)), np.ones(len(s), dtype=np.int8), total_length=offset)


def chain_path(states, kind=None, resolution: float = DEFAULT_RESOLUTION,
               params: ContinuityParams = PAPER) -> FilletPath:
    """Sampled path along a chain of tree nodes.

    ``states`` are (x, y) points or (x, y, d) triples from the root onward.
    With ``kind=None`` the chain is treated as a polyline. Otherwise every
    interior node is replaced by its fillet, exactly as the planner costs it.
    """
    states = [tuple(p) for p in states]
    if kind is None or len(states) < 3:
        return polyline_path([p[:2] for p in states], resolution)
    pieces = []
    offset = 0.0
    geoms = []
    for i in range(1, len(states) - 1):
        x0 = states[i - 2] if i >= 2 else None
        g = any_geometry(kind, x0, states[i - 1], states[i], states[i + 1], params)
        if g is None:
            raise ValueError(f"chain is infeasible at node {i}")
        geoms.append(g)
    for j, g in enumerate(geoms):
        last = j == len(geoms) - 1
        p = g.sample(resolution, s_start=g.d_prev)
        keep = p.s <= (g.s3 if last else g.s2) + 1e-12
        s = p.s[keep] - g.d_prev + offset
        if pieces:
            keep_from = 1
        else:
            keep_from = 0
        pieces.append((s[keep_from:], p.x[keep][keep_from:], p.y[keep][keep_from:],
                       p.psi[keep][keep_from:], p.kappa[keep][keep_from:],
                       p.direction[keep][keep_from:]))
        offset += (g.s3 if last else g.s2) - g.d_prev
    cols = [np.concatenate([pc[k] for pc in pieces]) for k in range(6)]
    return FilletPath(*cols, total_length=offset)
