"""Friendship graph grown by the unsupervised small-world (USW) process.

A newly introduced DO is pointed at one existing node and *wanders*: each
step it contacts the node it is visiting, gleans that node's friend list
into a candidate pool, and either links to the visited node (with a fixed
per-contact probability) or moves on to a random member of the pool.  Once
linked, it befriends a fraction of its remaining candidates.  Gleaned-
candidate links are what give the graph its high clustering.
"""

from __future__ import annotations

import math
from random import Random

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra


class FriendshipGraph:
    """Undirected simple graph over DO ids (no self-loops, no parallel edges)."""

    def __init__(self):
        self.adj: dict[int, set[int]] = {}
        self.edge_count = 0

    def add_node(self, u: int):
        if u not in self.adj:
            self.adj[u] = set()

    def add_edge(self, u: int, v: int) -> bool:
        if u == v:
            raise ValueError("self-loops are not allowed")
        self.add_node(u)
        self.add_node(v)
        if v in self.adj[u]:
            return False
        self.adj[u].add(v)
        self.adj[v].add(u)
        self.edge_count += 1
        return True

    def has_edge(self, u: int, v: int) -> bool:
        return u in self.adj and v in self.adj[u]

    def neighbors(self, u: int) -> set[int]:
        return self.adj[u]

    def degree(self, u: int) -> int:
        return len(self.adj[u])

    def nodes(self) -> list[int]:
        return sorted(self.adj)

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for u in sorted(self.adj):
            for v in self.adj[u]:
                if u < v:
                    out.append((u, v))
        out.sort()
        return out

    def __len__(self):
        return len(self.adj)

    def write_edge_list(self, path):
        """One ascending "u v" pair per line, suitable for external tools."""
        with open(path, "w", encoding="utf-8") as fh:
            for u, v in self.edges():
                fh.write(f"{u} {v}\n")


class WanderState:
    """Progress of one unconnected DO walking the graph.

    ``candidates`` keeps gleaning order and never contains the wanderer or
    duplicates; ``connected`` flips to True exactly once.
    """

    __slots__ = ("do_id", "current", "candidates", "_candidate_set", "connected", "steps")

    def __init__(self, do_id: int, entry: int | None):
        self.do_id = do_id
        self.current = entry
        self.candidates: list[int] = []
        self._candidate_set: set[int] = set()
        self.connected = entry is None
        self.steps = 0

    def glean(self, friends):
        for f in sorted(friends):
            if f != self.do_id and f not in self._candidate_set:
                self._candidate_set.add(f)
                self.candidates.append(f)


class Linked:
    __slots__ = ("to",)

    def __init__(self, to):
        self.to = to


class Moved:
    __slots__ = ("to",)

    def __init__(self, to):
        self.to = to


def start_wander(do_id: int, graph: FriendshipGraph, connected_nodes: list[int],
                 rng: Random) -> WanderState:
    """Begin a wander at a uniformly chosen existing node.

    With an empty graph the DO joins outright and the state is already
    connected.  ``connected_nodes`` must be sorted for determinism.
    """
    graph.add_node(do_id)
    if not connected_nodes:
        return WanderState(do_id, None)
    entry = connected_nodes[rng.randrange(len(connected_nodes))]
    return WanderState(do_id, entry)


def wander_step(state: WanderState, graph: FriendshipGraph, link_probability: float,
                rng: Random, max_steps: int) -> Linked | Moved:
    """One contact: glean the visited node's friends, then link or move on.

    Links unconditionally when there is nowhere left to go or the safety
    cap on walk length is reached.
    """
    if state.connected:
        raise ValueError("wanderer is already connected")
    cur = state.current
    friends = graph.neighbors(cur)
    state.glean(friends)
    state.steps += 1

    forced = (not state.candidates and not friends) or state.steps >= max_steps
    if forced or rng.random() < link_probability:
        state.connected = True
        return Linked(cur)

    # Move target pool: gleaned candidates plus the current node's friends,
    # deduplicated, in glean-then-sorted-friends order.
    pool = list(state.candidates)
    seen = state._candidate_set
    extra = [f for f in sorted(friends) if f not in seen]
    pool.extend(extra)
    state.current = pool[rng.randrange(len(pool))]
    return Moved(state.current)


def finalize_links(state: WanderState, graph: FriendshipGraph,
                   extra_link_fraction: float, rng: Random) -> list[tuple[int, int]]:
    """Create the first link plus extra friendships from gleaned candidates.

    Befriends ceil(fraction * remaining) distinct candidates, drawn without
    replacement.  Returns every new edge including the first link.
    """
    if not state.connected:
        raise ValueError("finalize_links requires a just-connected wanderer")
    do = state.do_id
    first = state.current
    new_edges: list[tuple[int, int]] = []
    if first is not None:
        graph.add_edge(do, first)
        new_edges.append((do, first))
    remaining = [c for c in state.candidates if c != first]
    if remaining and extra_link_fraction > 0:
        k = math.ceil(extra_link_fraction * len(remaining))
        for target in rng.sample(remaining, k):
            if graph.add_edge(do, target):
                new_edges.append((do, target))
    return new_edges


def grow_graph(n: int, link_probability: float = 0.5, extra_link_fraction: float = 0.33,
               rng: Random | None = None, seed: int = 1) -> FriendshipGraph:
    """Grow an n-node USW graph outside the full simulator.

    Used for graph-metric studies; the simulator drives the same three
    operations through its event loop.
    """
    rng = rng if rng is not None else Random(seed)
    graph = FriendshipGraph()
    connected: list[int] = []
    for do in range(1, n + 1):
        state = start_wander(do, graph, connected, rng)
        max_steps = 10 * max(len(graph), 1)
        while not state.connected:
            wander_step(state, graph, link_probability, rng, max_steps)
        finalize_links(state, graph, extra_link_fraction, rng)
        connected.append(do)
    return graph


def clustering_coefficient(graph: FriendshipGraph) -> float:
    """Mean over nodes of realized / possible edges among each node's neighbors.

    Nodes with fewer than two neighbors contribute zero.
    """
    if len(graph) == 0:
        raise ValueError("clustering coefficient of an empty graph")
    total = 0.0
    for u in graph.adj:
        neigh = graph.adj[u]
        k = len(neigh)
        if k < 2:
            continue
        nl = sorted(neigh)
        links = 0
        for i, v in enumerate(nl):
            adj_v = graph.adj[v]
            for w in nl[i + 1:]:
                if w in adj_v:
                    links += 1
        total += 2.0 * links / (k * (k - 1))
    return total / len(graph)


def avg_path_length(graph: FriendshipGraph) -> tuple[float, bool]:
    """Mean shortest-path length over unordered node pairs.

    BFS distances are computed from every node (vectorized through
    scipy's unweighted shortest-path machinery).  On a disconnected graph
    the mean is taken over the largest component and the returned flag is
    True.
    """
    n = len(graph)
    if n == 0:
        raise ValueError("path length of an empty graph")
    if n == 1:
        return 0.0, False
    nodes = graph.nodes()
    index = {u: i for i, u in enumerate(nodes)}
    rows, cols = [], []
    for u in nodes:
        iu = index[u]
        for v in graph.adj[u]:
            rows.append(iu)
            cols.append(index[v])
    data = np.ones(len(rows), dtype=np.int8)
    mat = csr_matrix((data, (rows, cols)), shape=(n, n))

    ncomp, labels = connected_components(mat, directed=False)
    disconnected = ncomp > 1
    if disconnected:
        sizes = np.bincount(labels)
        keep = np.flatnonzero(labels == sizes.argmax())
        mat = mat[keep][:, keep]
        m = len(keep)
    else:
        keep = np.arange(n)
        m = n
    if m == 1:
        return 0.0, disconnected

    total = 0.0
    chunk = 512
    for start in range(0, m, chunk):
        idx = np.arange(start, min(start + chunk, m))
        dist = dijkstra(mat, directed=False, unweighted=True, indices=idx)
        total += dist.sum()
    # Each unordered pair was counted twice.
    pairs = m * (m - 1) / 2
    return total / 2.0 / pairs, disconnected


def uniform_random_graph(n: int, m: int, rng: Random) -> FriendshipGraph:
    """Baseline G(n, m): m distinct edges drawn uniformly over 1..n."""
    limit = n * (n - 1) // 2
    if m > limit:
        raise ValueError(f"{m} edges exceed the {limit} possible on {n} nodes")
    graph = FriendshipGraph()
    for u in range(1, n + 1):
        graph.add_node(u)
    while graph.edge_count < m:
        u = rng.randrange(1, n + 1)
        v = rng.randrange(1, n + 1)
        if u != v:
            graph.add_edge(u, v)
    return graph
