"""Rooted search tree with cached cost-to-come and edge orientation.

Nodes live in parallel arrays indexed by integer id. Nearest-neighbour queries
are exact vectorized scans over a contiguous key array, which for the tree
sizes used here (tens of thousands of nodes) is faster than maintaining a
dynamic spatial index in Python.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Vec2


class EmptyTreeError(LookupError):
    pass


class UnknownNodeError(KeyError):
    pass


class CycleError(ValueError):
    pass


@dataclass(frozen=True)
class TreeNode:
    """Read-only snapshot of one node."""

    id: int
    position: Vec2
    direction: int
    parent: int | None
    children: tuple[int, ...]
    cost: float
    psi: float


class SearchTree:
    def __init__(self, capacity: int = 1024, w_psi: float = 1.0):
        self.w_psi = float(w_psi)
        self._xy = np.empty((capacity, 2))
        self._ori = np.empty((capacity, 2))  # cos psi, sin psi
        self._cost = np.empty(capacity)
        self._searchable = np.zeros(capacity, dtype=bool)
        self._par = np.full(capacity, -1, dtype=np.int64)
        self._px: list[float] = []
        self._py: list[float] = []
        self._parent: list[int] = []
        self._children: list[list[int]] = []
        self._dir: list[int] = []
        self._psi: list[float] = []
        self.n = 0
        self.root: int | None = None
        self.exclude_root = False
        self.rewire_count = 0
        # largest increase ever applied to an existing node's cost (<= 0 when no edit raised one)
        self.max_cost_increase = -math.inf

    # -- construction -------------------------------------------------------

    @classmethod
    def initialize(cls, x_r, **kw) -> "SearchTree":
        t = cls(**kw)
        t._add(x_r, -1, 0.0, 0.0, 1)
        t.root = 0
        return t

    @classmethod
    def fb_initialize(cls, x_r, psi_r: float, d_init: float, **kw) -> "SearchTree":
        """Root plus one node d_init ahead along psi_r; the root is left out of queries."""
        if not d_init > 0:
            raise ValueError("d_init must be positive")
        t = cls.initialize(x_r, **kw)
        t._psi[0] = psi_r
        t._ori[0] = (math.cos(psi_r), math.sin(psi_r))
        t.exclude_root = True
        t._searchable[0] = False
        p = (x_r[0] + d_init * math.cos(psi_r), x_r[1] + d_init * math.sin(psi_r))
        t.insert_node(p, 0, float(d_init))
        return t

    def _grow(self):
        cap = 2 * len(self._cost)
        for name in ("_xy", "_ori"):
            a = getattr(self, name)
            b = np.empty((cap, 2))
            b[: self.n] = a[: self.n]
            setattr(self, name, b)
        c = np.empty(cap)
        c[: self.n] = self._cost[: self.n]
        self._cost = c
        s = np.zeros(cap, dtype=bool)
        s[: self.n] = self._searchable[: self.n]
        self._searchable = s
        q = np.full(cap, -1, dtype=np.int64)
        q[: self.n] = self._par[: self.n]
        self._par = q

    def _add(self, p, parent: int, cost: float, psi: float, direction: int) -> int:
        if self.n == len(self._cost):
            self._grow()
        i = self.n
        self._xy[i] = (p[0], p[1])
        self._ori[i] = (math.cos(psi), math.sin(psi))
        self._cost[i] = cost
        self._searchable[i] = True
        self._par[i] = parent
        self._px.append(float(p[0]))
        self._py.append(float(p[1]))
        self._parent.append(parent)
        self._children.append([])
        self._dir.append(int(direction))
        self._psi.append(psi)
        self.n += 1
        return i

    def _check(self, i: int):
        if not (isinstance(i, (int, np.integer)) and 0 <= i < self.n):
            raise UnknownNodeError(i)

    def insert_node(self, x_n, x_p: int, cost_n: float, direction: int = 1) -> int:
        self._check(x_p)
        if not math.isfinite(cost_n):
            raise ValueError("node cost must be finite")
        psi = math.atan2(x_n[1] - self._py[x_p], x_n[0] - self._px[x_p])
        i = self._add(x_n, int(x_p), float(cost_n), psi, direction)
        self._children[x_p].append(i)
        return i

    # -- accessors ------------------------------------------------------------

    def __len__(self) -> int:
        return self.n

    def position(self, i: int) -> Vec2:
        return Vec2(self._px[i], self._py[i])

    def state(self, i: int) -> tuple[float, float, int]:
        return self._px[i], self._py[i], self._dir[i]

    def cost(self, i: int) -> float:
        return float(self._cost[i])

    @property
    def parents(self) -> np.ndarray:
        """Parent id of every node (-1 for the root)."""
        return self._par[: self.n]

    def psi(self, i: int) -> float:
        return self._psi[i]

    def direction(self, i: int) -> int:
        return self._dir[i]

    def parent(self, i: int) -> int | None:
        self._check(i)
        p = self._parent[i]
        return None if p < 0 else p

    def children(self, i: int) -> list[int]:
        self._check(i)
        return list(self._children[i])

    def node(self, i: int) -> TreeNode:
        return TreeNode(i, self.position(i), self._dir[i], self.parent(i),
                        tuple(self._children[i]), self.cost(i), self._psi[i])

    @property
    def positions(self) -> np.ndarray:
        return self._xy[: self.n]

    @property
    def costs(self) -> np.ndarray:
        return self._cost[: self.n]

    def solution_ids(self, i: int) -> list[int]:
        self._check(i)
        out = []
        while i >= 0:
            out.append(i)
            i = self._parent[i]
        out.reverse()
        return out

    def solution(self, i: int) -> list[Vec2]:
        return [self.position(j) for j in self.solution_ids(i)]

    def is_ancestor(self, a: int, b: int) -> bool:
        """True when a lies on the path from the root to b (a node is its own ancestor)."""
        while b >= 0:
            if b == a:
                return True
            b = self._parent[b]
        return False

    def descendants(self, i: int) -> list[int]:
        out = []
        stack = list(self._children[i])
        while stack:
            j = stack.pop()
            out.append(j)
            stack.extend(self._children[j])
        return out

    # -- queries --------------------------------------------------------------

    def _candidates(self) -> np.ndarray:
        return np.flatnonzero(self._searchable[: self.n])

    def nearest(self, q, fb_mode: bool = False) -> int:
        """Closest searchable node to q.

        In fb_mode the distance also penalises the turn needed to head from a
        node toward q: each node's key is (x, y, w cos psi, w sin psi) and the
        query key takes its orientation from the heading node -> q.
        Ties go to the lowest id.
        """
        n = self.n
        if n == 0 or not self._searchable[:n].any():
            raise EmptyTreeError("no searchable nodes")
        dx = q[0] - self._xy[:n, 0]
        dy = q[1] - self._xy[:n, 1]
        d2 = dx * dx + dy * dy
        if fb_mode:
            dist = np.sqrt(d2)
            safe = np.where(dist > 0.0, dist, 1.0)
            cx = np.where(dist > 0.0, dx / safe, self._ori[:n, 0])
            cy = np.where(dist > 0.0, dy / safe, self._ori[:n, 1])
            w2 = self.w_psi * self.w_psi
            d2 = d2 + w2 * ((self._ori[:n, 0] - cx) ** 2 + (self._ori[:n, 1] - cy) ** 2)
        d2 = np.where(self._searchable[:n], d2, np.inf)
        return int(np.argmin(d2))

    def near(self, q, rho: float, alpha: int) -> list[int]:
        """Up to alpha searchable nodes within rho of q, closest first (ties by id)."""
        n = self.n
        dx = q[0] - self._xy[:n, 0]
        dy = q[1] - self._xy[:n, 1]
        d2 = dx * dx + dy * dy
        idx = np.flatnonzero((d2 <= rho * rho) & self._searchable[:n])
        if idx.size == 0:
            return []
        order = np.argsort(d2[idx], kind="stable")
        return idx[order[:alpha]].tolist()

    # -- edits ----------------------------------------------------------------

    def _set_cost(self, i: int, c: float):
        inc = c - self._cost[i]
        if inc > self.max_cost_increase:
            self.max_cost_increase = float(inc)
        self._cost[i] = c

    def _shift_subtree(self, i: int, delta: float):
        stack = list(self._children[i])
        while stack:
            j = stack.pop()
            self._set_cost(j, self._cost[j] + delta)
            stack.extend(self._children[j])

    def reparent(self, x_child: int, new_parent: int, new_cost: float,
                 child_costs: dict[int, float] | None = None) -> None:
        """Move x_child under new_parent with cost new_cost.

        Without ``child_costs`` the whole subtree shifts by the change in
        x_child's cost. With it (fillet mode) each direct child gets the given
        cost and its own subtree shifts by that child's change.
        """
        self._check(x_child)
        self._check(new_parent)
        if x_child == self.root:
            raise CycleError("the root cannot be reparented")
        if self.is_ancestor(x_child, new_parent):
            raise CycleError(f"{new_parent} is a descendant of {x_child}")
        old_parent = self._parent[x_child]
        self._children[old_parent].remove(x_child)
        self._children[new_parent].append(x_child)
        self._parent[x_child] = new_parent
        self._par[x_child] = new_parent
        psi = math.atan2(self._py[x_child] - self._py[new_parent], self._px[x_child] - self._px[new_parent])
        self._psi[x_child] = psi
        self._ori[x_child] = (math.cos(psi), math.sin(psi))
        delta = new_cost - self._cost[x_child]
        self._set_cost(x_child, new_cost)
        if child_costs is None:
            self._shift_subtree(x_child, delta)
        else:
            for c in self._children[x_child]:
                nc = child_costs[c]
                dc = nc - self._cost[c]
                self._set_cost(c, nc)
                self._shift_subtree(c, dc)
        self.rewire_count += 1

    def validate(self) -> None:
        """Raise AssertionError when parent/child links or the root invariant are broken."""
        roots = [i for i in range(self.n) if self._parent[i] < 0]
        assert roots == [self.root], roots
        assert self._cost[self.root] == 0.0
        for i in range(self.n):
            p = self._parent[i]
            assert self._par[i] == p
            if p >= 0:
                assert i in self._children[p], (i, p)
            for c in self._children[i]:
                assert self._parent[c] == i
            assert math.isfinite(self._cost[i])
        seen = set()
        stack = [self.root]
        while stack:
            j = stack.pop()
            assert j not in seen, "cycle"
            seen.add(j)
            stack.extend(self._children[j])
        assert len(seen) == self.n, "unreachable nodes"
