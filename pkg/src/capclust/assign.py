"""Optimal client->center assignment for a fixed center set.

The assignment problem is a min-cost flow: every client unit has demand 1,
every open center is a sink of capacity eta, edge costs are dist^p.  A
memoized exhaustive enumeration over capacity vectors serves as the
independent oracle in tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

from .instance import (COST_RTOL, InfeasibleError, Instance, Solution,
                       cost_power, solution_cost)
from .mincostflow import MinCostFlow


def assignment_with_capacities(inst: Instance, centers: tuple[int, ...],
                               capacities: dict[int, int] | None = None,
                               client_units: list[int] | None = None,
                               unit_locations: list[int] | None = None):
    """Min-cost feasible assignment of client units to the given centers.

    centers are facility indices; capacities default to eta each.  The
    optional unit overrides let callers assign a sub-multiset of clients at
    relocated positions.  Returns (cost, assignment list per unit).
    """
    centers = tuple(centers)
    if not centers:
        raise InfeasibleError("no centers given")
    caps = {c: inst.eta for c in centers}
    if capacities:
        caps.update(capacities)
    units = list(range(inst.n)) if client_units is None else list(client_units)
    locs = ([inst.clients[u] for u in units] if unit_locations is None
            else list(unit_locations))
    if sum(caps[c] for c in centers) < len(units):
        raise InfeasibleError(
            f"infeasible: total capacity {sum(caps[c] for c in centers)}"
            f" < {len(units)} client units")

    # group units by location so augmentations move whole batches
    loc_groups: dict[int, list[int]] = {}
    for pos, loc in enumerate(locs):
        loc_groups.setdefault(loc, []).append(pos)
    group_locs = sorted(loc_groups)

    ng, nc = len(group_locs), len(centers)
    g = MinCostFlow(ng + nc + 2)
    src, dst = ng + nc, ng + nc + 1
    for gi, loc in enumerate(group_locs):
        g.add_edge(src, gi, len(loc_groups[loc]), 0.0)
    center_eids = []
    for ci, c in enumerate(centers):
        center_eids.append(g.add_edge(ng + ci, dst, caps[c], 0.0))
    edge_ids = [[0] * nc for _ in range(ng)]
    for gi, loc in enumerate(group_locs):
        for ci, c in enumerate(centers):
            d = inst.metric.dist(loc, inst.facilities[c])
            edge_ids[gi][ci] = g.add_edge(gi, ng + ci, len(loc_groups[loc]),
                                          cost_power(d, inst.p))
    pushed, cost, _ = g.augment(src, dst, len(units))
    if pushed < len(units):
        raise InfeasibleError("assignment flow did not satisfy all demand")

    assignment = [None] * len(units)
    for gi, loc in enumerate(group_locs):
        members = loc_groups[loc]
        at = 0
        for ci, c in enumerate(centers):
            take = g.flow_on(edge_ids[gi][ci])
            for _ in range(take):
                assignment[members[at]] = c
                at += 1
    return cost, assignment


def optimal_assignment(inst: Instance, centers) -> Solution:
    """Min-cost assignment respecting capacity eta per center."""
    centers = tuple(sorted(set(centers)))
    for c in centers:
        if not (0 <= c < inst.m):
            raise ValueError(f"center index {c} out of range")
    if len(centers) * inst.eta < inst.n:
        raise InfeasibleError(
            f"infeasible: {len(centers)} centers * eta {inst.eta}"
            f" < {inst.n} clients")
    _, assignment = assignment_with_capacities(inst, centers)
    return Solution.from_assignment(inst, centers, assignment)


@dataclass
class VerifyReport:
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_solution(inst: Instance, sol: Solution) -> VerifyReport:
    """Collect feasibility violations; violations are data, not errors."""
    v: list[str] = []
    if len(sol.centers) > inst.k:
        v.append(f"too many centers: {len(sol.centers)} > k = {inst.k}")
    for c in sol.centers:
        if not (0 <= c < inst.m):
            v.append(f"center {c} is not a candidate facility")
    if len(sol.assignment) != inst.n:
        v.append(f"assignment covers {len(sol.assignment)} of {inst.n} units")
    centers = set(sol.centers)
    loads: dict[int, int] = {}
    cost = 0.0
    for i, f in enumerate(sol.assignment):
        if f not in centers:
            v.append(f"client unit {i} assigned to non-center {f}")
            continue
        loads[f] = loads.get(f, 0) + 1
        cost += inst.unit_cost(i, f)
    for f, load in sorted(loads.items()):
        if load > inst.eta:
            v.append(f"center {f} load {load} exceeds eta = {inst.eta}")
    tol = COST_RTOL * max(1.0, abs(cost), abs(sol.cost))
    if abs(cost - sol.cost) > tol:
        v.append(f"cost field {sol.cost} != recomputed {cost}")
    return VerifyReport(v)


def brute_force_opt(inst: Instance, limit: int = 10 ** 5) -> Solution:
    """Exact optimum by enumerating center subsets, guarded by `limit`."""
    if comb(inst.m, min(inst.k, inst.m)) > limit:
        raise ValueError(
            f"brute force guard: C({inst.m}, {inst.k}) exceeds {limit}")
    min_size = max(1, -(-inst.n // inst.eta))  # ceil(n/eta)
    best: Solution | None = None
    for size in range(min_size, min(inst.k, inst.m) + 1):
        for subset in combinations(range(inst.m), size):
            try:
                sol = optimal_assignment(inst, subset)
            except InfeasibleError:
                continue
            if best is None or sol.cost < best.cost:
                best = sol
    if best is None:
        raise InfeasibleError("no feasible center subset")
    return best


def enumerate_assignment_cost(inst: Instance, centers) -> float:
    """Exhaustive minimum over all capacity-respecting assignments.

    Memoized on (next client unit, remaining capacity vector); a code path
    independent of the flow solver, used as the oracle.
    """
    centers = tuple(sorted(set(centers)))
    n = inst.n
    costs = [[inst.unit_cost(i, c) for c in centers] for i in range(n)]
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def go(i: int, caps: tuple[int, ...]) -> float:
        if i == n:
            return 0.0
        best = float("inf")
        for ci in range(len(centers)):
            if caps[ci] > 0:
                rest = go(i + 1, caps[:ci] + (caps[ci] - 1,) + caps[ci + 1:])
                cand = costs[i][ci] + rest
                if cand < best:
                    best = cand
        return best

    result = go(0, tuple(inst.eta for _ in centers))
    go.cache_clear()
    if result == float("inf"):
        raise InfeasibleError("no capacity-respecting assignment")
    return result
