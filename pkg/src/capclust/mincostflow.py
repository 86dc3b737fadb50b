"""Min-cost flow by successive shortest augmenting paths with potentials.

Costs must be nonnegative; capacities integral.  Dijkstra ties break on node
id, and edges relax in insertion order, so results are deterministic.
"""

from __future__ import annotations

import heapq

INF = float("inf")


class MinCostFlow:
    def __init__(self, n: int):
        self.n = n
        self.head: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []

    def add_edge(self, u: int, v: int, cap: int, cost: float) -> int:
        """Add a directed edge; returns its id (even; odd id is the reverse)."""
        eid = len(self.to)
        self.head[u].append(eid)
        self.to.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.head[v].append(eid + 1)
        self.to.append(u)
        self.cap.append(0)
        self.cost.append(-cost)
        return eid

    def flow_on(self, eid: int) -> int:
        """Units currently routed through forward edge `eid`."""
        return self.cap[eid + 1]

    def _shortest(self, src: int, potential: list[float]):
        dist = [INF] * self.n
        parent_edge = [-1] * self.n
        dist[src] = 0.0
        pq = [(0.0, src)]
        while pq:
            d, u = heapq.heappop(pq)
            if d > dist[u] + 1e-15:
                continue
            for eid in self.head[u]:
                if self.cap[eid] <= 0:
                    continue
                v = self.to[eid]
                nd = d + self.cost[eid] + potential[u] - potential[v]
                if nd < dist[v] - 1e-15:
                    dist[v] = nd
                    parent_edge[v] = eid
                    heapq.heappush(pq, (nd, v))
        return dist, parent_edge

    def _bellman_ford(self, src: int) -> list[float]:
        """Valid potentials for a residual graph that may hold negative
        reverse arcs; unreachable nodes get potential 0."""
        dist = [INF] * self.n
        dist[src] = 0.0
        for _ in range(self.n):
            changed = False
            for eid in range(len(self.to)):
                if self.cap[eid] <= 0:
                    continue
                u = self.to[eid ^ 1]
                if dist[u] == INF:
                    continue
                nd = dist[u] + self.cost[eid]
                if nd < dist[self.to[eid]] - 1e-12:
                    dist[self.to[eid]] = nd
                    changed = True
            if not changed:
                break
        return [0.0 if d == INF else d for d in dist]

    def augment(self, src: int, dst: int, limit: int,
                potential: list[float] | None = None):
        """Push up to `limit` units along successive shortest src->dst paths.

        Returns (units_pushed, cost_added, potential).  Stops early when dst
        becomes unreachable.
        """
        if potential is None:
            potential = self._bellman_ford(src)
        pushed = 0
        added = 0.0
        while pushed < limit:
            dist, parent = self._shortest(src, potential)
            if dist[dst] == INF:
                break
            for v in range(self.n):
                if dist[v] < INF:
                    potential[v] += dist[v]
            # bottleneck along the path
            delta = limit - pushed
            v = dst
            while v != src:
                eid = parent[v]
                delta = min(delta, self.cap[eid])
                v = self.to[eid ^ 1]
            v = dst
            while v != src:
                eid = parent[v]
                self.cap[eid] -= delta
                self.cap[eid ^ 1] += delta
                added += delta * self.cost[eid]
                v = self.to[eid ^ 1]
            pushed += delta
        return pushed, added, potential


def solve_transport(supplies: list[int], demands: list[int],
                    cost_fn) -> tuple[float, list[list[int]]]:
    """Exact min-cost transportation between small supply/demand vectors.

    cost_fn(i, j) prices one unit from supply node i to demand node j.
    Returns (total_cost, shipment_matrix).  Total supply must equal total
    demand.
    """
    ns, nd = len(supplies), len(demands)
    total = sum(supplies)
    if total != sum(demands):
        raise ValueError("unbalanced transportation problem")
    if total == 0:
        return 0.0, [[0] * nd for _ in range(ns)]
    g = MinCostFlow(ns + nd + 2)
    src, dst = ns + nd, ns + nd + 1
    eids = [[-1] * nd for _ in range(ns)]
    for i in range(ns):
        if supplies[i]:
            g.add_edge(src, i, supplies[i], 0.0)
    for j in range(nd):
        if demands[j]:
            g.add_edge(ns + j, dst, demands[j], 0.0)
    for i in range(ns):
        if not supplies[i]:
            continue
        for j in range(nd):
            if demands[j]:
                eids[i][j] = g.add_edge(i, ns + j, supplies[i], cost_fn(i, j))
    pushed, cost, _ = g.augment(src, dst, total)
    if pushed < total:
        raise ValueError("transportation infeasible")
    ship = [[g.flow_on(eids[i][j]) if eids[i][j] >= 0 else 0
             for j in range(nd)] for i in range(ns)]
    return cost, ship
