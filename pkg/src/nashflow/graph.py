"""Undirected communication graphs, max-consensus, and a probe that the
information structure of a game matches the graph.

Agents may exchange values only along edges.  Max consensus over scalars
finishes in exactly diameter-many synchronous rounds on a connected graph,
which is how the agents agree on a common high-gain parameter without a
coordinator.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import convex


@dataclass(frozen=True)
class CommGraph:
    """Simple connected undirected graph on nodes 0..n_nodes-1."""

    n_nodes: int
    edges: tuple

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("graph needs at least one node")
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self loop at node {i}")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"edge ({i},{j}) out of range")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        if self._bfs_depths(0).min() < 0:
            raise ValueError("graph is not connected")

    def neighbors(self, i: int) -> list:
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def _bfs_depths(self, source: int) -> np.ndarray:
        depth = np.full(self.n_nodes, -1, dtype=int)
        depth[source] = 0
        queue = deque([source])
        adj = [[] for _ in range(self.n_nodes)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if depth[v] < 0:
                    depth[v] = depth[u] + 1
                    queue.append(v)
        return depth

    def diameter(self) -> int:
        """Longest shortest path, by BFS from every node."""
        return max(int(self._bfs_depths(s).max())
                   for s in range(self.n_nodes))


def path_graph(n: int) -> CommGraph:
    return CommGraph(n, tuple((i, i + 1) for i in range(n - 1)))


@dataclass
class ConsensusResult:
    values: np.ndarray
    rounds: int
    trace: list


def max_consensus(graph: CommGraph, init) -> ConsensusResult:
    """Synchronous max consensus, run for exactly diameter-many rounds.

    Each round every node replaces its value by the maximum over itself
    and its neighbors.  After dm(G) rounds every node holds the global
    maximum; the per-round trace is retained for inspection.
    """
    values = np.asarray(init, dtype=float).copy()
    if values.shape != (graph.n_nodes,):
        raise ValueError("one initial value per node required")
    rounds = graph.diameter()
    trace = [values.copy()]
    neigh = [graph.neighbors(i) for i in range(graph.n_nodes)]
    for _ in range(rounds):
        nxt = values.copy()
        for i in range(graph.n_nodes):
            for j in neigh[i]:
                if values[j] > nxt[i]:
                    nxt[i] = values[j]
        values = nxt
        trace.append(values.copy())
    return ConsensusResult(values, rounds, trace)


def _row_star_ok(graph: CommGraph, involved: set) -> bool:
    # A shared row is distributable when some involved agent (the hub that
    # owns the row) is adjacent to every other involved agent.
    if len(involved) < 2:
        return True
    for hub in involved:
        if all(graph.has_edge(hub, j) for j in involved if j != hub):
            return True
    return False


def dependency_check(graph: CommGraph,
                     problem,
                     probe_points: int = 5,
                     seed: int = 0,
                     deriv_tol: float = 1e-6) -> bool:
    """Probe whether the game's couplings fit the communication graph.

    Finite differences of each agent's own objective gradient detect
    pairwise objective couplings, which must be graph edges.  Every shared
    constraint row must touch a set of agents that one of them can reach
    in a single hop (the row's owner), since that agent evaluates the row
    and shares its multiplier.  Probabilistic: a coupling that vanishes at
    all probe points goes unseen.
    """
    if graph.n_nodes != problem.n_agents:
        raise ValueError("graph size does not match number of agents")
    rng = np.random.default_rng(seed)
    slices = problem.slices()
    owner = np.empty(problem.dim, dtype=int)
    for i, s in enumerate(slices):
        owner[s] = i
    region = convex.Product(tuple(problem.local_sets))
    delta = 1e-6

    for _ in range(probe_points):
        w = convex.sample(region, rng)
        g0 = problem.pseudo_gradient(w)
        for c in range(problem.dim):
            wp = w.copy()
            wp[c] += delta
            diff = (problem.pseudo_gradient(wp) - g0) / delta
            j = int(owner[c])
            for i in range(problem.n_agents):
                if i == j:
                    continue
                if np.abs(diff[slices[i]]).max() > deriv_tol:
                    if not graph.has_edge(i, j):
                        return False
        rows = []
        if problem.equality is not None:
            rows.append(problem.equality[0])
        if problem.ineq_jacobian is not None:
            rows.append(np.asarray(problem.ineq_jacobian(w), dtype=float))
        for mat in rows:
            for row in mat:
                involved = {int(owner[c]) for c in np.nonzero(
                    np.abs(row) > 1e-12)[0]}
                if not _row_star_ok(graph, involved):
                    return False
    return True
