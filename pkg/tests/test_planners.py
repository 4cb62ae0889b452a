import math

import numpy as np
import pytest
from conftest import circle_intersection, empty_world

from filletrrt.fillets import Reverse, any_geometry, chain_path, make_kind
from filletrrt.planners import IterationClock, Planner, PlannerConfig, plan
from filletrrt.tree import SearchTree
from filletrrt.workspace import OccupancyGrid, World, WorldSpec


def move(p, q, d):
    """Point d along the ray from p toward q."""
    u = np.subtract(q, p)
    return tuple(np.add(p, d * u / np.linalg.norm(u)))


def line_planner(world=None, **kw):
    opts = dict(planner="rrt-star", primitive="line", max_iterations=1, eta=20, rho=20)
    opts.update(kw)
    return Planner(world or empty_world(), PlannerConfig(**opts))


def fb_planner(world=None, **kw):
    opts = dict(planner="fb-rrt-star", primitive="arc", max_iterations=1, eta=20, rho=20)
    opts.update(kw)
    return Planner(world or empty_world(), PlannerConfig(**opts))


def grow(pl, p, parent):
    """Insert p under parent at its fillet cost, which must be finite."""
    t = pl.tree
    c = pl.fb_cost_to_come(p, parent, t.parent(parent))
    assert math.isfinite(c)
    return t.insert_node(p, parent, c)


def integrated_cost(pl, i):
    """Oracle: walk the root path and sum the fillet recursion from fresh geometry."""
    t = pl.tree
    ids = t.solution_ids(i)
    if not pl.fb:
        return sum(math.dist(t.position(a), t.position(b)) for a, b in zip(ids, ids[1:]))
    st = [t.state(k) if pl.reverse else t.position(k) for k in ids]
    cost = math.dist(st[0][:2], st[1][:2]) if len(st) > 1 else 0.0
    for k in range(2, len(st)):
        prev = st[k - 3] if k >= 3 else None
        g = any_geometry(pl.kind, prev, st[k - 2], st[k - 1], st[k], pl.params)
        assert g is not None, f"infeasible triple ending at node {ids[k]}"
        cost += g.total_length - math.dist(st[k - 2][:2], st[k - 1][:2])
    return cost


# -- straight-line procedures ---------------------------------------------------

def test_cost_to_come_examples():
    pl = line_planner()
    t = pl.tree
    a = t.insert_node((3, 4), 0, 5.0)
    assert pl.cost_to_come((6, 8), a) == pytest.approx(10.0)
    g = OccupancyGrid.empty(-20, 20, -20, 20, 0.05)
    g.fill_rect(4.0, 4.5, -10, 10)
    pl = line_planner(World(empty_world().spec, g))
    assert pl.cost_to_come((8, 0), 0) == math.inf
    assert pl.cost_to_come((2, 0), 0) == pytest.approx(2.0)


def test_extend_star_takes_cheaper_parent_over_nearest():
    pl = line_planner()
    t = pl.tree
    c = t.insert_node((-3, 0), 0, 3.0)
    b = t.insert_node((0, -3), 0, 3.0)
    d = t.insert_node((-3, -3), b, 6.0)
    e = (-5.707, -1.707)
    assert math.dist(e, (-3, -3)) == pytest.approx(3.0, abs=1e-3)
    assert math.dist(e, (-3, 0)) == pytest.approx(3.2, abs=1e-3)
    assert t.nearest(e) == d
    pl.cfg.rho = 3.5
    x_n, x_p, cost = pl.extend_star(e)
    assert x_p == c and cost == pytest.approx(6.2, abs=1e-3)
    # through the nearest node the cost is 9
    assert pl.cost_to_come(e, d) == pytest.approx(9.0, abs=1e-3)


def test_rewire_moves_neighbours_that_get_cheaper():
    pl = line_planner()
    t = pl.tree
    g_pos = (0.0, 2.5)
    b_pos = circle_intersection((0, 0), 3.0, g_pos, 3.0, left=False)
    c_pos = (-2.9 * math.sin(math.radians(60)), 2.9 * math.cos(math.radians(60)))
    e_pos = circle_intersection(c_pos, 3.0, g_pos, 1.9, left=False)
    f_pos = circle_intersection(b_pos, 2.9, g_pos, 2.0, left=True)
    d_pos = move(b_pos, np.subtract(2 * np.array(b_pos), g_pos), 2.8)
    b = t.insert_node(b_pos, 0, 3.0)
    c = t.insert_node(c_pos, 0, 2.9)
    t.insert_node(d_pos, b, 5.8)
    e = t.insert_node(e_pos, c, 5.9)
    f = t.insert_node(f_pos, b, 5.9)
    g = t.insert_node(g_pos, 0, 2.5)
    pl.rewire(g, [b, e, f])
    assert t.parent(e) == g and t.cost(e) == pytest.approx(4.4)
    assert t.parent(f) == g and t.cost(f) == pytest.approx(4.5)
    # through G, B would cost 5.5, more than its current 3
    assert t.parent(b) == 0 and t.cost(b) == 3.0
    t.validate()


def test_rewire_never_creates_a_cycle():
    pl = line_planner()
    t = pl.tree
    a = t.insert_node((1, 0), 0, 1.0)
    b = t.insert_node((2, 0), a, 5.0)  # deliberately overpriced
    pl.rewire(b, [a, 0])
    assert t.parent(a) == 0
    t.validate()


def test_extend_star_matches_brute_force():
    g = OccupancyGrid.empty(-10, 10, -10, 10, 0.05, clearance=0.2)
    g.fill_circle((0, 0), 2.0)
    w = World(WorldSpec("empty", (20.0, 20.0), (-8.0, -8.0), (8.0, 8.0)), g)
    rng = np.random.default_rng(3)
    for _ in range(40):
        pl = line_planner(w, rho=4.0, eta=3.0)
        t = pl.tree
        while len(t) < 60:
            q = tuple(rng.uniform(-9, 9, 2))
            ext = pl.extend(q)
            if ext is not None:
                t.insert_node(ext[0], ext[1], ext[2])
        q = tuple(rng.uniform(-9, 9, 2))
        got = pl.extend_star(q)
        base = pl.extend(q)
        if base is None:
            assert got is None
            continue
        x_n = base[0]
        best = min(((pl.cost_to_come(x_n, k), k) for k in t.near(x_n, 4.0, 100) + [base[1]]),
                   key=lambda ck: ck[0])
        assert got[2] == pytest.approx(best[0], abs=1e-12)


# -- fillet procedures --------------------------------------------------------------

def test_collinear_fillet_extension():
    pl = fb_planner()
    a = grow(pl, (3.0, 0.0), 1)
    assert pl.tree.cost(a) == pytest.approx(3.0)


def test_greedy_parent_is_not_optimal_for_the_grandchild():
    # two trees share x3 and x4 but reach x3 from different directions
    w = empty_world(half=10, start=(0.0, 3.0), psi_r=0.0)
    a = fb_planner(w, kappa_max=2.0, d_init=1.0)
    x2 = grow(a, (2.0, 3.0), 1)
    x3 = grow(a, (2.9, 3.0), x2)
    x4 = grow(a, (3.9, 3.0), x3)
    base = a.tree.cost(1)
    assert base == 1.0
    assert a.tree.cost(x3) - base == pytest.approx(1.9, abs=1e-9)
    assert a.tree.cost(x4) - base == pytest.approx(2.9, abs=1e-9)

    w = empty_world(half=10, start=(2.9, 0.0), psi_r=math.pi / 2)
    b = fb_planner(w, kappa_max=2.0, d_init=1.0)
    x5 = grow(b, (2.9, 2.0), 1)
    y3 = grow(b, (2.9, 3.0), x5)
    y4 = grow(b, (3.9, 3.0), y3)
    assert b.tree.cost(y3) - base == pytest.approx(2.0, abs=1e-9)
    assert b.tree.cost(y4) - base == pytest.approx(1 + 0.5 + math.pi / 4 + 0.5, abs=1e-9)


def build_rewire_fixture():
    """A six-generation branch with two grandchild leaves, turning radius 1.75."""
    pl = fb_planner(kappa_max=1 / 1.75)
    A, B, C, D = (3, 0.5), (0, 0), (-2.5, -1), (-3, -4)
    E, F, G = (0, -5.75), (-1, -8), (2, -7.5)
    t = SearchTree.initialize(A)
    b = t.insert_node(B, 0, math.dist(A, B))
    pl.tree = t
    n = {"b": b}
    n["c"] = grow(pl, C, b)
    n["d"] = grow(pl, D, n["c"])
    n["e"] = grow(pl, E, n["d"])
    n["f"] = grow(pl, F, n["e"])
    n["g"] = grow(pl, G, n["e"])
    n["h"] = grow(pl, move(G, (5, -7), 2.0), n["g"])
    n["i"] = grow(pl, move(G, (2.5, -9.5), 1.25), n["g"])
    return pl, n, move(E, (1.5, -3), 3.0)


def test_fillet_rewire_example():
    pl, n, J = build_rewire_fixture()
    t = pl.tree
    assert [t.cost(n[k]) for k in "efg"] == pytest.approx([11.8, 13.7, 14.5], abs=0.1)
    via_e = pl.fb_cost_to_come(J, n["e"], n["d"])
    pl.cfg.rho = 3.5
    x_n, x_p, c = pl.fb_extend_star(J)
    assert x_p == n["b"] and c == pytest.approx(5.1, abs=0.1) and via_e == pytest.approx(14.0, abs=0.1)
    j = t.insert_node(x_n, x_p, c)
    before = {k: t.cost(v) for k, v in n.items()}
    pl.fb_rewire(j, [n["e"]])
    assert t.parent(n["e"]) == j
    assert [t.cost(n[k]) for k in "efg"] == pytest.approx([8.0, 10.5, 10.2], abs=0.1)
    for k, v in n.items():
        assert t.cost(v) <= before[k] + 1e-12
        assert t.cost(v) == pytest.approx(integrated_cost(pl, v), rel=1e-9)
    assert t.max_cost_increase <= 0.0


def test_fillet_rewire_never_raises_a_cost():
    pl, n, J = build_rewire_fixture()
    t = pl.tree
    # a parent whose fillet to E is feasible but would force E's child G into a costlier fillet
    j = t.insert_node(J, n["b"], pl.fb_cost_to_come(J, n["b"], 0))
    k = grow(pl, move(J, (4, -5), 1.0), j)
    costs = t.costs.copy()
    pl.fb_rewire(k, [n["g"], n["h"]])
    for node in range(len(costs)):
        assert t.cost(node) <= costs[node] + 1e-12
        assert t.cost(node) == pytest.approx(integrated_cost(pl, node), rel=1e-9)


def test_fb_extend_star_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(25):
        pl = fb_planner(rho=3.0, eta=3.0)
        t = pl.tree
        while len(t) < 80:
            ext = pl.fb_extend(tuple(rng.uniform(-8, 8, 2)))
            if ext is not None:
                t.insert_node(ext[0], ext[1], ext[2])
        q = tuple(rng.uniform(-8, 8, 2))
        got = pl.fb_extend_star(q)
        base = pl.fb_extend(q)
        if base is None:
            assert got is None
            continue
        x_n = base[0]
        cands = [base[1]] + [k for k in t.near(x_n, 3.0, 100) if k != base[1]]
        costs = [pl.fb_cost_to_come(x_n, k, t.parent(k)) for k in cands]
        assert got[2] == pytest.approx(min(costs), abs=1e-12)
        assert costs[cands.index(got[1])] == got[2]


# -- beacons and path optimization -------------------------------------------------------

def test_optimize_path_drops_a_skippable_beacon():
    pl = line_planner()
    t = pl.tree
    a = t.insert_node((0, 4), 0, 4.0)
    b = t.insert_node((4, 4), a, 8.0)
    used = pl.optimize_path([0, a, b])
    assert used == [0, b]
    assert t.parent(b) == 0 and t.cost(b) == pytest.approx(math.hypot(4, 4))


def test_optimize_path_keeps_beacon_around_an_obstacle():
    g = OccupancyGrid.empty(-20, 20, -20, 20, 0.05, clearance=0.2)
    g.fill_rect(1.5, 2.5, 0.5, 2.5)
    pl = line_planner(World(empty_world().spec, g))
    t = pl.tree
    a = t.insert_node((0, 4), 0, 4.0)
    b = t.insert_node((4, 4), a, 8.0)
    assert pl.optimize_path([0, a, b]) == [0, a, b]
    assert t.parent(b) == a


def test_fb_optimize_path_keeps_costs_consistent():
    pl = fb_planner()
    t = pl.tree
    a = grow(pl, (4, 0), 1)
    b = grow(pl, (4, 4), a)
    c = grow(pl, (8, 5), b)
    used = pl.optimize_path(t.solution_ids(c))
    assert used[0] == 0 and used[-1] == c
    for i in range(len(t)):
        assert t.cost(i) == pytest.approx(integrated_cost(pl, i), rel=1e-9)


# -- configuration and runs ---------------------------------------------------------------

def test_config_validation():
    for bad in (dict(planner="prm"), dict(primitive="spline"), dict(planner="rrt-star", primitive="arc"),
                dict(planner="fb-rrt-star", primitive="line"), dict(eta=0.0), dict(alpha=0),
                dict(sampler="magic"), dict(max_iterations=None)):
        kw = dict(max_iterations=10)
        kw.update(bad)
        with pytest.raises(ValueError):
            PlannerConfig(**kw)
    with pytest.raises(ValueError):
        IterationClock(0.0)


def test_zero_budget_gives_no_solution():
    r = plan(empty_world(), PlannerConfig(max_iterations=0))
    assert not r.solved and r.iterations == 0 and r.best_path is None and r.convergence == []


def test_target_next_to_start_is_found_quickly():
    w = empty_world(half=10, start=(0.0, 0.0), goal=(2.5, 0.3))
    for planner, prim in (("rrt", "line"), ("rrt-star", "line"), ("fb-rrt-star", "arc"), ("rrt", "arc")):
        r = plan(w, PlannerConfig(planner=planner, primitive=prim, max_iterations=300, seed=2,
                                  stop_on_solution=True))
        assert r.solved, (planner, prim)
        assert math.dist((r.best_path.x[-1], r.best_path.y[-1]), (2.5, 0.3)) <= 0.1 + 1e-9
        assert r.best_cost == pytest.approx(r.best_path.s[-1], rel=1e-9)


@pytest.mark.parametrize("planner,primitive,continuity", [
    ("rrt-star", "line", "paper"),
    ("fb-rrt-star", "arc", "paper"),
    ("fb-rrt-star", "bezier", "paper"),
    ("fb-rrt-star", "arc", "legacy"),
    ("fb-rrt-star", "rev-arc", "paper"),
    ("fb-rrt-star", "rev-bezier", "paper"),
    ("rrt", "bezier", "paper"),
])
def test_small_runs_keep_tree_consistent(planner, primitive, continuity):
    g = OccupancyGrid.empty(-10, 10, -10, 10, 0.05, clearance=0.3)
    g.fill_circle((0, 0), 2.0)
    spec = WorldSpec("empty", (20.0, 20.0), (-6.0, -6.0), (6.0, 6.0), psi_r=math.pi / 4,
                     target_radius=1.0)
    pl = Planner(World(spec, g), PlannerConfig(planner=planner, primitive=primitive, continuity=continuity,
                                               sampler="si", max_iterations=400, seed=4, eta=2.0))
    r = pl.run()
    t = r.tree
    t.validate()
    assert t.max_cost_increase <= 0.0
    for i in range(1, len(t)):
        assert t.cost(i) == pytest.approx(integrated_cost(pl, i), rel=1e-9)
    if isinstance(pl.kind, Reverse):
        assert {t.direction(i) for i in range(1, len(t))} <= {-1, 1}
    if r.solved:
        p = r.best_path
        assert p.s[-1] == pytest.approx(r.best_cost, rel=1e-9)
        assert g.probes_free(p.x, p.y, p.psi if pl.fb else None)
        steps = np.hypot(np.diff(p.x), np.diff(p.y))
        assert steps.max() <= pl.cfg.resolution + 1e-9
        costs = [c for _, _, c in r.convergence]
        assert costs == sorted(costs, reverse=True)


def test_run_is_deterministic_with_iteration_clock():
    w = empty_world(half=10, goal=(6.0, 6.0))
    cfg = PlannerConfig(sampler="informed", max_seconds=0.3, seed=5)
    a = plan(w, cfg, IterationClock(1e-3))
    b = plan(w, cfg, IterationClock(1e-3))
    assert a.iterations == b.iterations == 300
    assert a.convergence == b.convergence and a.best_cost == b.best_cost


def test_chain_path_of_solution_matches_cost():
    w = empty_world(half=10, goal=(5.0, 3.0))
    r = plan(w, PlannerConfig(primitive="bezier", max_iterations=800, seed=1))
    assert r.solved
    t = r.tree
    states = [t.position(j) for j in r.best_ids]
    p = chain_path(states, make_kind("bezier", 2.0), 0.01)
    assert p.s[-1] == pytest.approx(r.best_cost, rel=1e-9)
