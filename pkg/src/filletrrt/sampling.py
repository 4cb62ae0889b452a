"""Sampling regimes for the planners.

Every regime draws from the same random stream in the same way until a
solution exists, so the informed and beacon-based samplers reproduce the
biased sampler exactly before the first solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import SampleEllipse, Vec2, distance, sample_in_disk, sample_in_ellipse

REGIMES = ("uniform", "biased", "informed", "smart", "si")


@dataclass(frozen=True)
class SamplerConfig:
    regime: str = "biased"
    b_t: int = 50
    b_b: int = 3
    beacon_radius: float = 3.0
    # weight of a zero-area ellipse in the union (a squared length, like an area)
    degenerate_weight: float = 1e-4

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown sampling regime {self.regime!r}")
        if self.b_t < 1 or self.b_b < 1:
            raise ValueError("b_t and b_b must be at least 1")
        if not self.beacon_radius > 0:
            raise ValueError("beacon radius must be positive")


@dataclass(frozen=True)
class Disk:
    center: Vec2
    radius: float

    def contains(self, p, tol: float = 1e-9) -> bool:
        return distance(p, self.center) <= self.radius + tol


@dataclass(frozen=True)
class Extent:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def contains(self, p) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax


@dataclass
class BeaconState:
    """The current best solution used as beacons: ids, positions, costs and per-pair ellipses."""

    ids: list[int]
    positions: list[Vec2]
    costs: list[float]
    ellipses: list[SampleEllipse] = field(default_factory=list)

    @property
    def cost(self) -> float:
        return self.costs[-1]


@dataclass
class InformedState:
    root: Vec2
    goal: Vec2
    c_best: float
    ellipse: SampleEllipse = field(init=False)

    def __post_init__(self):
        self.ellipse = SampleEllipse(self.root, self.goal, self.c_best)

    def update(self, goal, c_best: float) -> bool:
        """Shrink to a better solution; returns whether anything changed."""
        if c_best >= self.c_best:
            return False
        self.goal = goal
        self.c_best = c_best
        self.ellipse = SampleEllipse(self.root, goal, c_best)
        return True


def update_beacons(solution_nodes, tree) -> BeaconState:
    """Beacon state for a root-to-target list of node ids."""
    ids = list(solution_nodes)
    if not ids:
        raise ValueError("a beacon set needs at least one node")
    pos = [tree.position(i) for i in ids]
    costs = [tree.cost(i) for i in ids]
    ells = [SampleEllipse(pos[k], pos[k + 1], costs[k + 1] - costs[k]) for k in range(len(ids) - 1)]
    return BeaconState(ids, pos, costs, ells)


def uniform_sample(extent: Extent, rng) -> Vec2:
    u, v = rng.random(2)
    return Vec2(extent.xmin + u * (extent.xmax - extent.xmin), extent.ymin + v * (extent.ymax - extent.ymin))


def regime_choice(i: int, cfg: SamplerConfig, has_solution: bool) -> str:
    """Which region iteration i samples from: 'target', 'solution' or 'uniform'."""
    if cfg.regime == "uniform":
        return "uniform"
    if i % cfg.b_t == 0:
        return "target"
    if not has_solution or cfg.regime == "biased":
        return "uniform"
    if cfg.regime == "informed":
        return "solution"
    return "solution" if i % cfg.b_b == 0 else "uniform"


def biased_sample(i: int, cfg: SamplerConfig, target: Disk, extent: Extent, rng) -> Vec2:
    if i % cfg.b_t == 0:
        return sample_in_disk(target.center, target.radius, rng)
    return uniform_sample(extent, rng)


def informed_sample(i, cfg, informed: InformedState | None, target: Disk, extent: Extent, rng) -> Vec2:
    if informed is None or i % cfg.b_t == 0:
        return biased_sample(i, cfg, target, extent, rng)
    return sample_in_ellipse(informed.ellipse, rng)


def smart_sample(i, cfg, beacons: BeaconState | None, target: Disk, extent: Extent, rng) -> Vec2:
    if i % cfg.b_t == 0 or beacons is None or i % cfg.b_b != 0:
        return biased_sample(i, cfg, target, extent, rng)
    k = int(rng.integers(len(beacons.positions)))
    return sample_in_disk(beacons.positions[k], cfg.beacon_radius, rng)


def ellipse_union_sample(ellipses, rng, degenerate_weight: float = 1e-4) -> tuple[Vec2, int]:
    """Draw from a union of ellipses, choosing one with probability proportional to its area."""
    w = np.array([e.area if not e.degenerate else degenerate_weight for e in ellipses])
    w = np.maximum(w, degenerate_weight)
    cdf = np.cumsum(w)
    k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    k = min(k, len(ellipses) - 1)
    return sample_in_ellipse(ellipses[k], rng), k


def si_sample(i, cfg, beacons: BeaconState | None, target: Disk, extent: Extent, rng) -> Vec2:
    if i % cfg.b_t == 0 or beacons is None or not beacons.ellipses or i % cfg.b_b != 0:
        return biased_sample(i, cfg, target, extent, rng)
    return ellipse_union_sample(beacons.ellipses, rng, cfg.degenerate_weight)[0]


class Sampler:
    """Holds the regime-specific state and dispatches one draw per iteration."""

    def __init__(self, cfg: SamplerConfig, target: Disk, extent: Extent, rng: np.random.Generator):
        self.cfg = cfg
        self.target = target
        self.extent = extent
        self.rng = rng
        self.informed: InformedState | None = None
        self.beacons: BeaconState | None = None

    def sample(self, i: int) -> Vec2:
        r = self.cfg.regime
        if r == "uniform":
            return uniform_sample(self.extent, self.rng)
        if r == "biased":
            return biased_sample(i, self.cfg, self.target, self.extent, self.rng)
        if r == "informed":
            return informed_sample(i, self.cfg, self.informed, self.target, self.extent, self.rng)
        if r == "smart":
            return smart_sample(i, self.cfg, self.beacons, self.target, self.extent, self.rng)
        return si_sample(i, self.cfg, self.beacons, self.target, self.extent, self.rng)

    def set_solution(self, root, goal, cost: float) -> None:
        if self.informed is None:
            self.informed = InformedState(Vec2(*root), Vec2(*goal), cost)
        else:
            self.informed.update(Vec2(*goal), cost)
