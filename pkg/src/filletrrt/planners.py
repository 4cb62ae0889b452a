"""RRT, RRT* and their fillet-based variants with informed, smart and
smart-and-informed sampling.

One :class:`Planner` instance owns a tree, a sampler and a random stream and
runs one trial. Straight-line planners (``primitive="line"``) connect nodes
with segments. Fillet-based planners connect them with segments whose corners
are replaced by fillets, so the cost of a node depends on its parent and
grandparent and rewiring must protect the children and grandchildren of the
rewired node.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .fillets import (ContinuityParams, FilletPath, Reverse, any_geometry, batch_fillet_lengths,
                      chain_path, make_kind)
from .geometry import Vec2, steer
from .sampling import Disk, Extent, Sampler, SamplerConfig, update_beacons
from .tree import SearchTree
from .workspace import World

PLANNERS = ("rrt", "rrt-star", "fb-rrt-star")
PRIMITIVES = ("line", "arc", "bezier", "rev-arc", "rev-bezier")
INF = math.inf


@dataclass
class PlannerConfig:
    planner: str = "fb-rrt-star"
    primitive: str = "arc"
    sampler: str = "biased"
    eta: float = 3.0
    rho: float = 3.0
    alpha: int = 100
    kappa_max: float = 2.0
    d_init: float = 1.0
    b_t: int = 50
    b_b: int = 3
    beacon_radius: float = 3.0
    continuity: str = "paper"
    gamma_max: float = math.pi / 2
    max_iterations: int | None = None
    max_seconds: float | None = None
    seed: int = 0
    resolution: float = 0.01
    w_psi: float = 1.0
    stop_on_solution: bool = False
    record_trace: bool = False

    def __post_init__(self):
        if self.planner not in PLANNERS:
            raise ValueError(f"unknown planner {self.planner!r}")
        if self.primitive not in PRIMITIVES:
            raise ValueError(f"unknown primitive {self.primitive!r}")
        if self.planner == "rrt-star" and self.primitive != "line":
            raise ValueError("rrt-star connects nodes with straight lines; use fb-rrt-star for fillets")
        if self.planner == "fb-rrt-star" and self.primitive == "line":
            raise ValueError("fb-rrt-star needs a fillet primitive")
        for name in ("eta", "rho", "kappa_max", "d_init", "beacon_radius", "resolution"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.alpha < 1:
            raise ValueError("alpha must be at least 1")
        if self.max_iterations is None and self.max_seconds is None:
            raise ValueError("set max_iterations and/or max_seconds")
        SamplerConfig(self.sampler, self.b_t, self.b_b, self.beacon_radius)

    @property
    def fillet(self) -> bool:
        return self.primitive != "line"

    @property
    def star(self) -> bool:
        return self.planner != "rrt"


@dataclass
class PlanResult:
    best_cost: float
    best_ids: list[int]
    best_path: FilletPath | None
    convergence: list[tuple[float, int, float]]
    iterations: int
    elapsed: float
    node_count: int
    rewire_count: int
    beacons: list[int] = field(default_factory=list)
    trace: list[tuple] | None = None
    tree: SearchTree | None = field(default=None, repr=False)

    @property
    def solved(self) -> bool:
        return math.isfinite(self.best_cost)

    @property
    def first_solution(self) -> tuple[float, int, float] | None:
        return self.convergence[0] if self.convergence else None


class IterationClock:
    """Stand-in clock that reports ``iteration * tick`` seconds.

    Wall-clock timestamps differ between otherwise identical runs; with this
    clock the convergence record and any time budget depend only on the
    iteration count, so repeated runs are reproducible byte for byte.
    """

    def __init__(self, tick: float = 1e-3):
        if not tick > 0:
            raise ValueError("tick must be positive")
        self.tick = float(tick)


class Planner:
    def __init__(self, world: World, cfg: PlannerConfig, clock=time.perf_counter):
        self.world = world
        self.grid = world.grid
        self.cfg = cfg
        self.clock = clock
        spec = world.spec
        self.fb = cfg.fillet
        self.kind = make_kind(cfg.primitive, cfg.kappa_max) if self.fb else None
        self.reverse = isinstance(self.kind, Reverse)
        if cfg.continuity == "legacy" and self.fb:
            inner = self.kind.inner if self.reverse else self.kind
            self.params = ContinuityParams.legacy(inner, cfg.gamma_max)
        else:
            self.params = ContinuityParams(cfg.continuity, cfg.gamma_max)
        self.rng = np.random.default_rng(cfg.seed)
        if self.fb:
            self.tree = SearchTree.fb_initialize(spec.start, spec.psi_r, cfg.d_init, w_psi=cfg.w_psi)
        else:
            self.tree = SearchTree.initialize(spec.start, w_psi=cfg.w_psi)
        self.target = Disk(Vec2(*spec.goal), spec.target_radius)
        xmin, xmax, ymin, ymax = spec.bounds
        self.extent = Extent(xmin, xmax, ymin, ymax)
        scfg = SamplerConfig(cfg.sampler, cfg.b_t, cfg.b_b, cfg.beacon_radius,
                             degenerate_weight=self.grid.resolution ** 2)
        self.sampler = Sampler(scfg, self.target, self.extent, self.rng)
        self.x_best: int | None = None
        self.beacon_ids: list[int] = []
        self.c_b = INF

    # -- straight-line procedures -------------------------------------------

    def cost_to_come(self, x_n, x_p: int) -> float:
        """Cost through x_p along a straight segment, or inf when it collides."""
        p = self.tree.position(x_p)
        if not self.grid.segment_free(p, x_n, self.cfg.resolution):
            return INF
        return self.tree.cost(x_p) + math.dist(p, x_n)

    def extend(self, x_rand):
        t = self.tree
        x_p = t.nearest(x_rand)
        x_n = steer(t.position(x_p), x_rand, self.cfg.eta)
        if math.dist(x_n, t.position(x_p)) < 1e-9:
            return None
        c = self.cost_to_come(x_n, x_p)
        return None if c == INF else (x_n, x_p, c)

    def extend_star(self, x_rand):
        ext = self.extend(x_rand)
        if ext is None:
            return None
        x_n, x_p, c_min = ext
        t = self.tree
        near = t.near(x_n, self.cfg.rho, self.cfg.alpha)
        if near:
            idx = np.asarray(near)
            d = np.hypot(t.positions[idx, 0] - x_n[0], t.positions[idx, 1] - x_n[1])
            cand = t.costs[idx] + d
            # scanning in cost order and stopping at the first collision-free
            # candidate gives the same parent as a full scan in query order
            for k in np.argsort(cand, kind="stable"):
                if not cand[k] < c_min:
                    break
                if d[k] < 1e-9:
                    continue
                if self.grid.segment_free(t.position(int(idx[k])), x_n, self.cfg.resolution):
                    x_p, c_min = int(idx[k]), float(cand[k])
                    break
        return x_n, x_p, c_min

    def rewire(self, x_n: int, x_near_set) -> None:
        t = self.tree
        pn = t.position(x_n)
        cn = t.cost(x_n)
        idx = np.asarray([k for k in x_near_set if k != x_n], dtype=np.int64)
        if idx.size == 0:
            return
        # Costs only fall during this loop, so a neighbour that fails the
        # vectorized pre-check cannot pass later; survivors are re-checked.
        pre = cn + np.hypot(t.positions[idx, 0] - pn.x, t.positions[idx, 1] - pn.y)
        for x_near in idx[pre < t.costs[idx]].tolist():
            q = t.position(x_near)
            c = cn + math.dist(pn, q)
            if not c < t.cost(x_near):
                continue
            if t.is_ancestor(x_near, x_n):
                continue
            if self.grid.segment_free(pn, q, self.cfg.resolution):
                t.reparent(x_near, x_n, c)

    # -- fillet procedures -----------------------------------------------------

    def _state(self, i: int):
        t = self.tree
        return t.state(i) if self.reverse else t.position(i)

    def _geometry(self, x_gp: int | None, x_p: int, x_n, x_ggp: int | None = None):
        """Fillet at x_p for the chain (parent(x_gp), x_gp, x_p, x_n); None if infeasible."""
        t = self.tree
        if x_gp is None:
            return None
        if x_ggp is None:
            x_ggp = t.parent(x_gp)
        s0 = None if x_ggp is None else self._state(x_ggp)
        return any_geometry(self.kind, s0, self._state(x_gp), self._state(x_p), x_n, self.params)

    def _fillet_free(self, g) -> bool:
        # the lead-in segment up to the curve start was covered by the parent's edge
        path = g.sample(self.cfg.resolution, s_start=g.s1)
        return self.grid.probes_free(path.x, path.y, path.psi)

    def _fb_cost(self, x_n, x_p: int, x_gp: int | None):
        """(cost, geometry) through x_p without the collision check."""
        t = self.tree
        if x_gp is None or math.dist(x_n[:2], t.position(x_p)) < 1e-9:
            return INF, None
        g = self._geometry(x_gp, x_p, x_n)
        if g is None:
            return INF, None
        return t.cost(x_p) + g.total_length - math.dist(t.position(x_p), t.position(x_gp)), g

    def fb_cost_to_come(self, x_n, x_p: int, x_gp: int | None) -> float:
        """Cost through x_p when the fillet at x_p is feasible and collision-free, else inf."""
        c, g = self._fb_cost(x_n, x_p, x_gp)
        if g is None or not self._fillet_free(g):
            return INF
        return c

    def _new_state(self, x_rand, x_p: int, direction: int):
        x = steer(self.tree.position(x_p), x_rand, self.cfg.eta)
        return (x.x, x.y, direction) if self.reverse else x

    def fb_extend(self, x_rand, direction: int = 1):
        t = self.tree
        x_p = t.nearest(x_rand, fb_mode=True)
        x_n = self._new_state(x_rand, x_p, direction)
        c = self.fb_cost_to_come(x_n, x_p, t.parent(x_p))
        return None if c == INF else (x_n, x_p, c)

    def _batch_parent_costs(self, cands: list[int], x_n) -> np.ndarray:
        """Cost of reaching x_n through each candidate parent, ignoring collisions."""
        t = self.tree
        if self.reverse:
            return np.array([self._fb_cost(x_n, c, t.parent(c))[0] for c in cands])
        idx = np.asarray(cands, dtype=np.int64)
        par = t.parents
        gp = par[idx]
        ggp = np.where(gp >= 0, par[np.maximum(gp, 0)], -1)
        pos = t.positions
        x1 = pos[np.maximum(gp, 0)]
        x2 = pos[idx]
        x0 = pos[np.maximum(ggp, 0)]
        with np.errstate(invalid="ignore", divide="ignore"):
            F = batch_fillet_lengths(self.kind, x0, x1, x2, np.asarray(x_n[:2], dtype=float),
                                     ggp >= 0, self.params)
        seg = np.hypot(x2[:, 0] - x1[:, 0], x2[:, 1] - x1[:, 1])
        c = t.costs[idx] + F - seg
        c[gp < 0] = INF
        return c

    def fb_extend_star(self, x_rand, direction: int = 1):
        t = self.tree
        x_p = t.nearest(x_rand, fb_mode=True)
        x_n = self._new_state(x_rand, x_p, direction)
        c_min = self.fb_cost_to_come(x_n, x_p, t.parent(x_p))
        if c_min == INF:
            return None
        cands = [k for k in t.near(x_n, self.cfg.rho, self.cfg.alpha) if k != x_p]
        if cands:
            pre = self._batch_parent_costs(cands, x_n)
            # cost order with ties in query order; the first collision-free
            # candidate is the parent a full scan would keep
            for k in np.argsort(pre, kind="stable").tolist():
                if not pre[k] < c_min:
                    break
                x_c = cands[k]
                c, g = self._fb_cost(x_n, x_c, t.parent(x_c))
                if g is None or not c < c_min:
                    continue
                if self._fillet_free(g):
                    x_p, c_min = x_c, c
                    break
        return x_n, x_p, c_min

    def fb_rewire(self, x_n: int, x_near_set) -> None:
        """Rewire neighbours under x_n only when no child cost rises and every affected fillet stays feasible."""
        t = self.tree
        x_p = t.parent(x_n)
        if x_p is None:
            return
        x_pp = t.parent(x_p)
        cands = [k for k in x_near_set if k != x_n and k != x_p]
        if not cands:
            return
        seg_n = math.dist(t.position(x_n), t.position(x_p))
        if self.reverse:
            survivors = cands
        else:
            idx = np.asarray(cands, dtype=np.int64)
            pos = t.positions
            x0 = pos[x_pp] if x_pp is not None else pos[x_p]
            with np.errstate(invalid="ignore", divide="ignore"):
                F = batch_fillet_lengths(self.kind, x0, pos[x_p], pos[x_n], pos[idx],
                                         np.full(idx.size, x_pp is not None), self.params)
            pre = t.cost(x_n) + F - seg_n
            # costs only fall while rewiring, so failing this check is final
            survivors = idx[pre < t.costs[idx]].tolist()
        s_p, s_n = self._state(x_p), self._state(x_n)
        for x_near in survivors:
            s_near = self._state(x_near)
            seg_near = math.dist(s_near[:2], s_n[:2])
            if seg_near < 1e-9:
                continue
            g1 = self._geometry(x_p, x_n, s_near, x_pp)
            if g1 is None:
                continue
            c_near = t.cost(x_n) + g1.total_length - seg_n
            if not c_near < t.cost(x_near):
                continue
            if t.is_ancestor(x_near, x_n):
                continue
            ok = True
            child_costs = {}
            child_geoms = []
            for x_c in t.children(x_near):
                s_c = self._state(x_c)
                g2 = any_geometry(self.kind, s_p, s_n, s_near, s_c, self.params)
                if g2 is None:
                    ok = False
                    break
                c_c = c_near + g2.total_length - seg_near
                if c_c > t.cost(x_c):
                    ok = False
                    break
                for x_gc in t.children(x_c):
                    if any_geometry(self.kind, s_n, s_near, s_c, self._state(x_gc), self.params) is None:
                        ok = False
                        break
                if not ok:
                    break
                child_costs[x_c] = c_c
                child_geoms.append(g2)
            if not ok:
                continue
            if not self._fillet_free(g1) or not all(self._fillet_free(g) for g in child_geoms):
                continue
            t.reparent(x_near, x_n, c_near, child_costs)

    # -- beacons ---------------------------------------------------------------

    def _rewire_one(self, x_ittr: int, x_near: int) -> None:
        if self.fb:
            self.fb_rewire(x_ittr, (x_near,))
        else:
            self.rewire(x_ittr, (x_near,))

    def optimize_path(self, beacons: list[int]) -> list[int]:
        """Try to connect every beacon directly to each later beacon; drop the ones skipped over."""
        t = self.tree
        xb = list(beacons)
        used: list[int] = []
        k = 0
        while k < len(xb):
            x_ittr = xb[k]
            if not (self.fb and t.parent(x_ittr) is None):
                j = k + 1
                while j < len(xb):
                    x_near = xb[j]
                    self._rewire_one(x_ittr, x_near)
                    if t.parent(x_near) == x_ittr and j > k + 1:
                        del xb[k + 1:j]
                        j = k + 1
                    j += 1
            used.append(x_ittr)
            k += 1
        return used

    def _update_beacons(self, x_n: int | None) -> None:
        t = self.tree
        if x_n is not None and (not self.beacon_ids or t.cost(x_n) < t.cost(self.beacon_ids[-1])):
            self.beacon_ids = t.solution_ids(x_n)
        if self.beacon_ids and self.c_b != t.cost(self.beacon_ids[-1]):
            self.beacon_ids = self.optimize_path(self.beacon_ids)
            self.c_b = t.cost(self.beacon_ids[-1])
            self.sampler.beacons = update_beacons(self.beacon_ids, t)

    # -- main loop ---------------------------------------------------------------

    def in_target(self, x) -> bool:
        return math.dist(x[:2], self.target.center) <= self.target.radius

    def run(self) -> PlanResult:
        cfg = self.cfg
        t = self.tree
        beacon_mode = cfg.star and cfg.sampler in ("smart", "si")
        trace = [] if cfg.record_trace else None
        convergence: list[tuple[float, int, float]] = []
        best = INF
        i = 0
        if isinstance(self.clock, IterationClock):
            tick = self.clock.tick
            now = lambda: i * tick  # noqa: E731
        else:
            now = self.clock
        t0 = now()
        while True:
            if cfg.max_iterations is not None and i >= cfg.max_iterations:
                break
            if cfg.max_seconds is not None and now() - t0 >= cfg.max_seconds:
                break
            i += 1
            x_rand = self.sampler.sample(i)
            direction = 1
            if self.reverse:
                direction = 1 if self.rng.random() < 0.5 else -1
            if self.fb:
                ext = self.fb_extend_star(x_rand, direction) if cfg.star else self.fb_extend(x_rand, direction)
            else:
                ext = self.extend_star(x_rand) if cfg.star else self.extend(x_rand)
            x_new = None
            if ext is not None:
                x_n, x_p, c_n = ext
                x_new = t.insert_node(x_n[:2], x_p, c_n, direction)
                if cfg.star:
                    near = t.near(x_n, cfg.rho, cfg.alpha)
                    (self.fb_rewire if self.fb else self.rewire)(x_new, near)
                if self.in_target(x_n):
                    if self.x_best is None or t.cost(x_new) < t.cost(self.x_best):
                        self.x_best = x_new
            if beacon_mode:
                target_node = x_new if (x_new is not None and self.in_target(t.position(x_new))) else None
                self._update_beacons(target_node)
                if self.beacon_ids:
                    self.x_best = self.beacon_ids[-1]
            if trace is not None:
                trace.append((i, tuple(x_rand), None if ext is None else (tuple(ext[0]), ext[1], ext[2])))
            if self.x_best is not None:
                c_best = t.cost(self.x_best)
                if c_best < best:
                    best = c_best
                    convergence.append((now() - t0, i, best))
                    self.sampler.set_solution(t.position(t.root), t.position(self.x_best), best)
                    if not cfg.star or cfg.stop_on_solution:
                        break
        elapsed = now() - t0
        ids = t.solution_ids(self.x_best) if self.x_best is not None else []
        path = None
        if ids:
            states = [t.state(j) for j in ids] if self.reverse else [t.position(j) for j in ids]
            path = chain_path(states, self.kind, cfg.resolution, self.params)
        return PlanResult(best, ids, path, convergence, i, elapsed, len(t), t.rewire_count,
                          list(self.beacon_ids), trace, t)


def plan(world: World, cfg: PlannerConfig, clock=time.perf_counter) -> PlanResult:
    """Run one trial of the configured planner."""
    return Planner(world, cfg, clock).run()
