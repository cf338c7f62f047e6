"""Weighted communication graphs.

Row-reader convention: ``weights[i, j] > 0`` means agent ``i`` receives the
state of agent ``j`` (information flows j -> i), which is the indexing used
by the consensus sum over ``a_ij (p_j - p_i)``. Agent indices are 0-based in
code; configs and CSV headers use 1-based numbering.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphError


@dataclass(frozen=True, eq=False)
class CommGraph:
    weights: np.ndarray
    directed: bool = False
    leaders: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weights must be a square matrix")
        if np.any(np.diag(w) != 0):
            raise ValueError("weights must have a zero diagonal")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        if not self.directed and not np.array_equal(w, w.T):
            raise ValueError("undirected graph requires symmetric weights")
        leaders = frozenset(int(i) for i in self.leaders)
        if any(not 0 <= i < w.shape[0] for i in leaders):
            raise ValueError("leader index out of range")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "leaders", leaders)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def followers(self) -> frozenset:
        return frozenset(range(self.n)) - self.leaders

    @classmethod
    def from_laplacian(cls, lap, directed: bool | None = None, leaders=()) -> "CommGraph":
        lap = np.asarray(lap, dtype=float)
        w = -lap.copy()
        np.fill_diagonal(w, 0.0)
        w[w == 0] = 0.0  # drop negative zeros
        if directed is None:
            directed = not np.array_equal(w, w.T)
        return cls(w, directed=directed, leaders=leaders)

    @classmethod
    def from_edges(cls, n: int, edges, directed: bool = False, leaders=()) -> "CommGraph":
        """``edges`` holds ``(i, j)`` or ``(i, j, weight)``; undirected edges are mirrored."""
        w = np.zeros((n, n))
        for edge in edges:
            i, j = edge[0], edge[1]
            a = edge[2] if len(edge) > 2 else 1.0
            w[i, j] = a
            if not directed:
                w[j, i] = a
        return cls(w, directed=directed, leaders=leaders)

    @classmethod
    def complete(cls, n: int) -> "CommGraph":
        return cls(np.ones((n, n)) - np.eye(n))


@dataclass(frozen=True)
class SpanningTree:
    root: int
    parent: dict

    def __post_init__(self):
        if self.root in self.parent:
            raise ValueError("root cannot have a parent")
        for child in self.parent:
            seen = {child}
            node = child
            while node != self.root:
                if node not in self.parent:
                    raise ValueError(f"agent {node} is not connected to the root")
                node = self.parent[node]
                if node in seen:
                    raise ValueError("parent map contains a cycle")
                seen.add(node)

    @property
    def edges(self) -> list[tuple[int, int]]:
        """``(child, parent)`` pairs in ascending child order."""
        return sorted(self.parent.items())

    def depth(self, agent: int) -> int:
        d = 0
        while agent != self.root:
            agent = self.parent[agent]
            d += 1
        return d


def laplacian(g: CommGraph) -> np.ndarray:
    w = g.weights
    lap = -w.copy()
    lap[lap == 0] = 0.0
    # diagonal as the negated off-diagonal sum in row order
    for i in range(g.n):
        lap[i, i] = 0.0
        lap[i, i] = -sum(float(x) for x in lap[i])
    return lap


def neighbors(g: CommGraph, i: int) -> set[tuple[int, float]]:
    return {(int(j), float(g.weights[i, j])) for j in np.flatnonzero(g.weights[i] > 0)}


def _reachable(adj: np.ndarray, start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u] > 0):
            v = int(v)
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def is_connected(g: CommGraph) -> bool:
    if g.directed:
        raise GraphError("is_connected is defined for undirected graphs only")
    if g.n == 0:
        return True
    return len(_reachable(g.weights, 0)) == g.n


def extract_spanning_tree(g: CommGraph, root: int) -> SpanningTree:
    """Breadth-first tree along information flow outward from ``root``.

    A child ``i`` hangs off parent ``j`` when ``weights[i, j] > 0``; nodes are
    expanded and attached in ascending index order.
    """
    if not 0 <= root < g.n:
        raise GraphError(f"root {root} out of range")
    outflow = g.weights.T  # outflow[j, i] > 0: j's state reaches i
    parent: dict[int, int] = {}
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(outflow[u] > 0):
            v = int(v)
            if v not in seen:
                seen.add(v)
                parent[v] = u
                queue.append(v)
    if len(seen) != g.n:
        missing = sorted(set(range(g.n)) - seen)
        raise GraphError(f"no spanning tree from root {root + 1}: agents "
                         f"{[m + 1 for m in missing]} unreachable")
    return SpanningTree(root, parent)


def fiedler_value(g: CommGraph) -> float:
    """Second-smallest Laplacian eigenvalue of an undirected graph."""
    if g.n < 2:
        return 0.0
    return float(np.linalg.eigvalsh(laplacian(g))[1])
