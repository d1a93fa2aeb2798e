"""Maximum s-t flow via highest-label push-relabel with the gap heuristic.

Arcs are stored pairwise so arc ``a`` and its reverse are ``a ^ 1``; pushing
along one adds residual capacity to the other.  After the flow saturates,
the min-cut partition is recovered as residual reachability from the source,
and the solution is checked: cut capacity equals the flow (duality), excess
is conserved at every non-terminal node, and no arc exceeds its capacity.

Plain-Python implementation: ample for the oracle-checked unit graphs and
for GrabCut on crop-sized images; a full 320x320 mask with a 70 px band
takes on the order of a minute, which suits offline mask precomputation.
"""

from collections import deque

import numpy as np


class FlowGraph:
    """Directed graph with nonnegative arc capacities."""

    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.head: list[int] = []
        self.cap: list[float] = []
        self.adj: list[list[int]] = [[] for _ in range(n_nodes)]

    def add_edge(self, u: int, v: int, cap_uv: float, cap_vu: float = 0.0):
        """Arc u->v with capacity cap_uv; cap_vu makes the edge (partly) undirected."""
        if cap_uv < 0.0 or cap_vu < 0.0:
            raise ValueError("capacities must be nonnegative")
        self.adj[u].append(len(self.head))
        self.head.append(v)
        self.cap.append(float(cap_uv))
        self.adj[v].append(len(self.head))
        self.head.append(u)
        self.cap.append(float(cap_vu))


def max_flow(graph: FlowGraph, source: int, sink: int) -> tuple[float, np.ndarray]:
    """Returns (flow value, source-side membership mask of the min cut)."""
    n = graph.n
    head = graph.head
    cap = list(graph.cap)  # residual capacities; originals stay on the graph
    adj = graph.adj

    excess = [0.0] * n
    height = [0] * n
    height[source] = n
    count = [0] * (2 * n + 1)  # nodes per height level, for the gap heuristic
    count[0] = n - 1
    count[n] = 1

    buckets: list[list[int]] = [[] for _ in range(2 * n + 1)]
    in_bucket = [False] * n
    highest = 0

    def activate(v: int):
        nonlocal highest
        if v != source and v != sink and not in_bucket[v] and excess[v] > 0.0:
            in_bucket[v] = True
            buckets[height[v]].append(v)
            if height[v] > highest:
                highest = height[v]

    cur = [0] * n  # current-arc pointers
    for a in adj[source]:
        c = cap[a]
        if c > 0.0:
            cap[a] = 0.0
            cap[a ^ 1] += c
            excess[head[a]] += c
            excess[source] -= c
            activate(head[a])

    while highest >= 0:
        if not buckets[highest]:
            highest -= 1
            continue
        u = buckets[highest].pop()
        in_bucket[u] = False
        if excess[u] <= 0.0:
            continue
        while excess[u] > 0.0:
            arcs = adj[u]
            if cur[u] == len(arcs):
                # Relabel: lift u to one above its lowest residual neighbour.
                old = height[u]
                new_h = 2 * n
                for a in arcs:
                    if cap[a] > 0.0:
                        h = height[head[a]] + 1
                        if h < new_h:
                            new_h = h
                count[old] -= 1
                if count[old] == 0 and old < n:
                    # Gap: nothing can route below; lift the stranded nodes.
                    for v in range(n):
                        if old < height[v] <= n and v != source:
                            count[height[v]] -= 1
                            height[v] = n + 1
                            count[n + 1] += 1
                    if old < new_h:
                        new_h = max(new_h, n + 1)
                height[u] = new_h
                count[new_h] += 1
                cur[u] = 0
                if height[u] >= 2 * n:
                    break
                continue
            a = arcs[cur[u]]
            v = head[a]
            if cap[a] > 0.0 and height[u] == height[v] + 1:
                delta = excess[u] if excess[u] < cap[a] else cap[a]
                cap[a] -= delta
                cap[a ^ 1] += delta
                excess[u] -= delta
                excess[v] += delta
                activate(v)
            else:
                cur[u] += 1
        if excess[u] > 0.0 and height[u] < 2 * n:
            activate(u)

    flow = excess[sink]

    # Min-cut side: residual reachability from the source.
    source_side = np.zeros(n, dtype=bool)
    source_side[source] = True
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for a in adj[u]:
            v = head[a]
            if cap[a] > 0.0 and not source_side[v]:
                source_side[v] = True
                queue.append(v)

    _check_solution(graph, cap, excess, source, sink, flow, source_side)
    return flow, source_side


def _check_solution(graph, residual, excess, source, sink, flow, source_side):
    """Duality, conservation and capacity invariants, asserted per solve."""
    n = graph.n
    cut = 0.0
    for u in range(n):
        if not source_side[u]:
            continue
        for a in graph.adj[u]:
            if not source_side[graph.head[a]]:
                cut += graph.cap[a]
    scale = max(1.0, abs(flow))
    assert abs(cut - flow) <= 1e-6 * scale, f"min-cut {cut} != max-flow {flow}"
    for u in range(n):
        if u in (source, sink):
            continue
        assert abs(excess[u]) <= 1e-6 * scale, f"conservation violated at node {u}"
    for a in range(len(graph.cap)):
        # flow on arc a is cap0 - residual; it may not exceed the capacity
        assert residual[a] >= -1e-9 * scale, "negative residual capacity"
