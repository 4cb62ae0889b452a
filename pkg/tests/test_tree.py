import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filletrrt.tree import CycleError, EmptyTreeError, SearchTree, UnknownNodeError


def path_cost(tree, i):
    """Oracle: sum of edge lengths along the parent links."""
    ids = []
    while i is not None:
        ids.append(i)
        i = tree.parent(i)
    ids.reverse()
    return sum(math.dist(tree.position(a), tree.position(b)) for a, b in zip(ids, ids[1:]))


def test_initialize():
    t = SearchTree.initialize((0, 0))
    assert len(t) == 1 and t.cost(0) == 0.0 and t.parent(0) is None
    assert t.children(0) == [] and t.solution(0) == [(0.0, 0.0)]
    assert t.nearest((5, 5)) == 0


def test_fb_initialize():
    t = SearchTree.fb_initialize((0, 0), 0.0, 1.0)
    assert len(t) == 2
    assert t.position(1) == pytest.approx((1.0, 0.0))
    assert t.cost(1) == 1.0 and t.psi(1) == 0.0
    t = SearchTree.fb_initialize((0, 0), math.pi / 2, 2.0)
    assert t.position(1) == pytest.approx((0.0, 2.0), abs=1e-15)
    # the root is never returned by queries
    assert t.nearest((0, -1), fb_mode=True) == 1
    assert 0 not in t.near((0, 0), 5.0, 10)
    with pytest.raises(ValueError):
        SearchTree.fb_initialize((0, 0), 0.0, 0.0)


def test_insert_and_links():
    t = SearchTree.fb_initialize((0, 0), 0.0, 1.0)
    i = t.insert_node((2, 0), 1, 2.0)
    assert len(t) == 3 and t.children(1) == [i] and t.parent(i) == 1
    assert t.psi(i) == 0.0
    with pytest.raises(UnknownNodeError):
        t.insert_node((3, 0), 99, 3.0)
    with pytest.raises(ValueError):
        t.insert_node((3, 0), 1, math.inf)
    t.validate()


def test_nearest_and_tie_break():
    t = SearchTree.initialize((0, 0))
    a = t.insert_node((1, 0), 0, 1)
    t.insert_node((-1, 0), 0, 1)
    assert t.nearest((0, 0.5)) == 0
    t2 = SearchTree.initialize((5, 5))
    t2.insert_node((1, 0), 0, 1)
    t2.insert_node((-1, 0), 0, 1)
    assert t2.nearest((0, 0)) == a  # equidistant: lower id wins
    with pytest.raises(EmptyTreeError):
        SearchTree().nearest((0, 0))


def test_nearest_closest_node_example():
    # a small tree A-B-C-D with the query closest to D
    t = SearchTree.initialize((0, 0))
    t.insert_node((-2.9, 0.7), 0, 3)
    b = t.insert_node((-1.7, -2.1), 0, 3)
    d = t.insert_node((-4.6, -2.4), b, 6)
    assert t.nearest((-5.5, -1.0)) == d


def test_fb_metric_prefers_aligned_nodes():
    t = SearchTree.fb_initialize((0, 0), 0.0, 1.0)
    side = t.insert_node((3, 2), 1, 4.0)  # heading pi/4, closer to q but facing away from it
    q = (3.5, 1.0)
    assert t.nearest(q) == side
    # turn penalties: node 1 needs 0.38 rad, the side node 1.89 rad
    assert t.nearest(q, fb_mode=True) == side
    t.w_psi = 3.0
    assert t.nearest(q, fb_mode=True) == 1


def test_near_sorted_and_capped():
    t = SearchTree.initialize((0, 0))
    for x in (3, 1, 2, 10):
        t.insert_node((x, 0), 0, x)
    assert t.near((0, 0), 3.0, 100) == [0, 2, 3, 1]
    assert t.near((0, 0), 3.0, 1) == [0]
    assert t.near((50, 50), 3.0, 100) == []


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 300), st.floats(0.1, 6.0), st.booleans())
def test_queries_match_linear_scan(seed, n, rho, fb_mode):
    rng = np.random.default_rng(seed)
    t = SearchTree.fb_initialize((0, 0), rng.uniform(-3, 3), 1.0, w_psi=1.3)
    for _ in range(n):
        p = int(rng.integers(1, len(t)))
        t.insert_node(tuple(rng.uniform(-10, 10, 2)), p, t.cost(p) + 1)
    q = tuple(rng.uniform(-10, 10, 2))
    best, best_d = None, math.inf
    for i in range(1, len(t)):
        v = t.position(i)
        d2 = (q[0] - v[0]) ** 2 + (q[1] - v[1]) ** 2
        if fb_mode:
            dist = math.sqrt(d2)
            ux, uy = (q[0] - v[0]) / dist, (q[1] - v[1]) / dist
            psi = t.psi(i)
            d2 += 1.3 ** 2 * ((math.cos(psi) - ux) ** 2 + (math.sin(psi) - uy) ** 2)
        if d2 < best_d:
            best, best_d = i, d2
    assert t.nearest(q, fb_mode=fb_mode) == best
    scan = sorted((math.dist(q, t.position(i)), i) for i in range(1, len(t)) if math.dist(q, t.position(i)) <= rho)
    assert t.near(q, rho, 10**6) == [i for _, i in scan]


def test_reparent_leaf_changes_only_its_cost():
    t = SearchTree.initialize((0, 0))
    a = t.insert_node((2, 0), 0, 2)
    b = t.insert_node((2, 2), a, 4)
    before = t.costs.copy()
    t.reparent(b, 0, math.hypot(2, 2))
    assert t.parent(b) == 0 and t.children(a) == []
    assert t.psi(b) == pytest.approx(math.pi / 4)
    after = t.costs
    assert after[b] == pytest.approx(math.hypot(2, 2))
    assert np.array_equal(np.delete(before, b), np.delete(after, b))


def test_reparent_shifts_subtree_by_delta():
    t = SearchTree.initialize((0, 0))
    a = t.insert_node((1, 0), 0, 1)
    b = t.insert_node((1, 2), a, 3)
    c = t.insert_node((1, 3), b, 4)
    e = t.insert_node((2, 4), c, 4 + math.hypot(1, 1))
    new = math.hypot(1, 2)
    t.reparent(b, 0, new)
    for i in range(len(t)):
        assert t.cost(i) == pytest.approx(path_cost(t, i), abs=1e-12)
    assert t.solution(e) == [t.position(j) for j in (0, b, c, e)]
    t.validate()


def test_reparent_rejects_cycles():
    t = SearchTree.initialize((0, 0))
    a = t.insert_node((1, 0), 0, 1)
    b = t.insert_node((2, 0), a, 2)
    with pytest.raises(CycleError):
        t.reparent(a, b, 1.0)
    with pytest.raises(CycleError):
        t.reparent(0, b, 0.0)
    assert t.is_ancestor(0, b) and not t.is_ancestor(b, a)


def test_reparent_with_explicit_child_costs():
    t = SearchTree.initialize((0, 0))
    a = t.insert_node((1, 0), 0, 1.0)
    b = t.insert_node((0, 1), 0, 1.0)
    c = t.insert_node((1, 1), a, 5.0)
    g1 = t.insert_node((2, 1), c, 7.0)
    g2 = t.insert_node((2, 2), g1, 9.0)
    t.reparent(c, b, 2.0, {g1: 6.5})
    assert t.cost(c) == 2.0 and t.cost(g1) == 6.5 and t.cost(g2) == 8.5
    assert t.max_cost_increase <= 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_edit_sequences_keep_tree_valid(seed):
    rng = np.random.default_rng(seed)
    t = SearchTree.initialize((0, 0))
    for step in range(120):
        if len(t) > 3 and rng.random() < 0.3:
            child = int(rng.integers(1, len(t)))
            parent = int(rng.integers(0, len(t)))
            if t.is_ancestor(child, parent):
                with pytest.raises(CycleError):
                    t.reparent(child, parent, 0.0)
                continue
            t.reparent(child, parent, t.cost(parent) + math.dist(t.position(child), t.position(parent)))
        else:
            p = int(rng.integers(0, len(t)))
            existing = t.costs.copy()
            x = tuple(rng.uniform(-5, 5, 2))
            t.insert_node(x, p, t.cost(p) + math.dist(x, t.position(p)))
            # inserting never changes an existing node's cost
            assert np.array_equal(existing, t.costs[:-1])
        t.validate()
    for i in range(len(t)):
        assert t.cost(i) == pytest.approx(path_cost(t, i), rel=1e-9, abs=1e-12)
        for c in t.children(i):
            assert t.parent(c) == i


def test_node_snapshot():
    t = SearchTree.initialize((0, 0))
    a = t.insert_node((0, 2), 0, 2.0, direction=-1)
    n = t.node(a)
    assert n.parent == 0 and n.direction == -1 and n.cost == 2.0 and n.children == ()
    assert n.psi == pytest.approx(math.pi / 2)
    assert t.node(0).parent is None
