"""Exact s-t max-flow / min-cut by shortest augmenting paths (Edmonds-Karp)."""
from __future__ import annotations

from collections import deque


class FlowNetwork:
    """Directed network with nonnegative real capacities.

    Arcs are stored in pairs: arc ``2e`` is the forward arc of edge ``e`` and
    ``2e + 1`` its reverse (which may carry its own capacity).
    """

    def __init__(self, n_nodes):
        self.n_nodes = n_nodes
        self.adj = [[] for _ in range(n_nodes)]
        self.head = []
        self.cap = []

    def add_edge(self, u, v, cap, rev_cap=0.0):
        if cap < 0 or rev_cap < 0:
            raise ValueError("capacities must be nonnegative")
        if cap != cap or rev_cap != rev_cap or cap == float("inf") or rev_cap == float("inf"):
            raise ValueError("capacities must be finite")
        e = len(self.head)
        self.head += [v, u]
        self.cap += [float(cap), float(rev_cap)]
        self.adj[u].append(e)
        self.adj[v].append(e + 1)
        return e // 2

    @classmethod
    def from_matrix(cls, capacity):
        n = len(capacity)
        net = cls(n)
        for u in range(n):
            for v in range(n):
                if u != v and capacity[u][v] > 0:
                    net.add_edge(u, v, capacity[u][v])
        return net


def max_flow_min_cut(network, source, sink):
    """Return ``(flow value, source-side vertex set)`` of a minimum cut.

    The source side is the set reachable from ``source`` in the final
    residual graph. The input network is left unmodified.
    """
    if source == sink:
        raise ValueError("source and sink must differ")
    head, adj = network.head, network.adj
    res = list(network.cap)
    eps = 1e-12 * max(res, default=0.0)
    flow = 0.0
    n = network.n_nodes
    while True:
        parent_arc = [-1] * n
        parent_arc[source] = -2
        queue = deque([source])
        while queue and parent_arc[sink] == -1:
            u = queue.popleft()
            for a in adj[u]:
                v = head[a]
                if parent_arc[v] == -1 and res[a] > eps:
                    parent_arc[v] = a
                    if v == sink:
                        break
                    queue.append(v)
        if parent_arc[sink] == -1:
            break
        push = float("inf")
        v = sink
        while v != source:
            a = parent_arc[v]
            push = min(push, res[a])
            v = head[a ^ 1]
        v = sink
        while v != source:
            a = parent_arc[v]
            res[a] -= push
            res[a ^ 1] += push
            v = head[a ^ 1]
        flow += push

    seen = {source}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for a in adj[u]:
            v = head[a]
            if v not in seen and res[a] > eps:
                seen.add(v)
                queue.append(v)
    return flow, frozenset(seen)
