"""Client rerouting machinery between two solutions.

Given an optimal-ish solution and a reference solution of the same instance,
build the bipartite multigraph with one capacity-2 edge per client between
the two center sets, route an even demand flow through it, round the scaled
flow to an integral matching, and derive the edge sequences, reassignment
and center-swap samples whose feasibility and cost bounds the test suite
checks empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance, Solution, cost_power
from .mincostflow import MinCostFlow


@dataclass(frozen=True)
class ExchangeEdge:
    eid: int
    unit: int   # client unit index
    a: int      # position in a_centers (first solution's center list)
    b: int      # position in b_centers (second solution's center list)
    cost: float


@dataclass
class ExchangeNetwork:
    inst: Instance
    first: Solution
    second: Solution
    a_centers: tuple[int, ...]
    b_centers: tuple[int, ...]
    edges: list[ExchangeEdge]
    deleted: list[tuple[int, int, int]]   # (unit, a, b) removed for parity
    eta_prime: int
    deg_a: list[int]
    deg_b: list[int]

    def edges_from_a(self, a: int) -> list[ExchangeEdge]:
        return [e for e in self.edges if e.a == a]

    def edges_into_b(self, b: int) -> list[ExchangeEdge]:
        return [e for e in self.edges if e.b == b]

    def fac_loc_a(self, a: int) -> int:
        return self.inst.facilities[self.a_centers[a]]

    def fac_loc_b(self, b: int) -> int:
        return self.inst.facilities[self.b_centers[b]]

    def link_dist(self, b: int, a: int) -> float:
        """Metric distance between matched facilities."""
        return self.inst.metric.dist(self.fac_loc_b(b), self.fac_loc_a(a))


def _edge_cost(inst: Instance, unit: int, fa: int, fb: int) -> float:
    # dist(c,f) + dist(c,l) for p = 1; the p-th power variant otherwise
    return inst.unit_cost(unit, fa) + inst.unit_cost(unit, fb)


def build_exchange_graph(inst: Instance, first: Solution,
                         second: Solution) -> ExchangeNetwork:
    """One capacity-2 edge per client unit; odd eta triggers the parity
    deletion of one edge per full-degree vertex."""
    if inst.eta < 2:
        raise ValueError("exchange graph requires eta >= 2")
    a_centers = tuple(first.centers)
    b_centers = tuple(second.centers)
    a_pos = {f: i for i, f in enumerate(a_centers)}
    b_pos = {f: i for i, f in enumerate(b_centers)}
    raw: list[ExchangeEdge] = []
    for u in range(inst.n):
        a = a_pos[first.assignment[u]]
        b = b_pos[second.assignment[u]]
        raw.append(ExchangeEdge(len(raw), u, a, b,
                                _edge_cost(inst, u, first.assignment[u],
                                           second.assignment[u])))
    deleted: list[tuple[int, int, int]] = []
    if inst.eta % 2 == 1:
        deg_a = [0] * len(a_centers)
        deg_b = [0] * len(b_centers)
        for e in raw:
            deg_a[e.a] += 1
            deg_b[e.b] += 1
        full_a = {i for i, d in enumerate(deg_a) if d == inst.eta}
        full_b = {j for j, d in enumerate(deg_b) if d == inst.eta}
        if full_a or full_b:
            frac = [(e.eid, e.a, e.b, e.cost, 1.0 / inst.eta) for e in raw]
            chosen = round_fractional_matching(
                len(a_centers), len(b_centers), frac,
                must_cover_a=full_a, must_cover_b=full_b)
            drop = set()
            for eid in chosen:
                e = raw[eid]
                if e.a in full_a or e.b in full_b:
                    drop.add(eid)
            for eid in sorted(drop):
                e = raw[eid]
                deleted.append((e.unit, e.a, e.b))
            raw = [e for e in raw if e.eid not in drop]
    edges = [ExchangeEdge(i, e.unit, e.a, e.b, e.cost)
             for i, e in enumerate(raw)]
    deg_a = [0] * len(a_centers)
    deg_b = [0] * len(b_centers)
    for e in edges:
        deg_a[e.a] += 1
        deg_b[e.b] += 1
    eta_prime = inst.eta - (inst.eta % 2)
    return ExchangeNetwork(inst, first, second, a_centers, b_centers,
                           edges, deleted, eta_prime, deg_a, deg_b)


# ------------------------------------------------- fractional matching

def round_fractional_matching(n_a: int, n_b: int, frac_edges,
                              must_cover_a=frozenset(),
                              must_cover_b=frozenset()) -> list[int]:
    """Round a fractional bipartite matching to an integral one.

    frac_edges: (eid, a, b, weight, value) with value in [0,1].  Vertices
    with fractional degree 1 stay matched, the weight never increases, and
    only support edges are used.  Alternating cycles, then leaf-to-leaf
    paths, are shifted toward lower weight until every value is 0 or 1.
    """
    x: dict[int, float] = {}
    meta: dict[int, tuple[int, int, float]] = {}
    for eid, a, b, w, v in frac_edges:
        if v < 0 or v > 1 + 1e-9:
            raise ValueError("fractional value out of range")
        x[eid] = min(1.0, v)
        meta[eid] = (a, n_a + b, w)
    nv = n_a + n_b

    def deg(v: int) -> float:
        return sum(x[e] for e in incident[v])

    incident: list[list[int]] = [[] for _ in range(nv)]
    for eid, (u, v, _) in sorted(meta.items()):
        incident[u].append(eid)
        incident[v].append(eid)
    saturated = [v for v in range(nv) if abs(deg(v) - 1.0) < 1e-9]

    def fractional(eid: int) -> bool:
        return 1e-9 < x[eid] < 1 - 1e-9

    def frac_edges_at(v: int) -> list[int]:
        return [e for e in incident[v] if fractional(e)]

    def walk_from(v0: int):
        """Forward walk along unused fractional edges.

        Started at a leaf it ends at another leaf (maximal path); started
        anywhere in a leafless subgraph it must close a cycle.
        """
        walk_edges: list[int] = []
        used: set[int] = set()
        pos = {v0: 0}
        cur = v0
        while True:
            nxt_edge = None
            for e in frac_edges_at(cur):
                if e not in used:
                    nxt_edge = e
                    break
            if nxt_edge is None:
                return "path", walk_edges, v0, cur
            used.add(nxt_edge)
            u, v, _ = meta[nxt_edge]
            cur = v if cur == u else u
            walk_edges.append(nxt_edge)
            if cur in pos:
                start = pos[cur]
                return "cycle", walk_edges[start:], cur, cur
            pos[cur] = len(walk_edges)

    while True:
        seed_vertex = None
        for v in range(nv):
            if len(frac_edges_at(v)) == 1:
                seed_vertex = v
                break
        if seed_vertex is None:
            for v in range(nv):
                if frac_edges_at(v):
                    seed_vertex = v
                    break
        if seed_vertex is None:
            break
        kind, loop, first, last = walk_from(seed_vertex)
        signs = [1 if i % 2 == 0 else -1 for i in range(len(loop))]
        swing = sum(s * meta[e][2] for s, e in zip(signs, loop))
        sigma = -1 if swing > 0 else 1
        # a maximal-path endpoint has exactly one fractional edge and no
        # matched edge, so the edge bounds already cap its degree at 1
        delta = math.inf
        for s, e in zip(signs, loop):
            if sigma * s > 0:
                delta = min(delta, 1 - x[e])
            else:
                delta = min(delta, x[e])
        if not (1e-12 < delta < math.inf):
            raise AssertionError("matching rounding stalled")
        for s, e in zip(signs, loop):
            x[e] += sigma * s * delta
            if x[e] < 1e-9:
                x[e] = 0.0
            elif x[e] > 1 - 1e-9:
                x[e] = 1.0

    chosen = sorted(e for e, v in x.items() if v > 0.5)
    got = set()
    for e in chosen:
        u, v, _ = meta[e]
        if u in got or v in got:
            raise AssertionError("rounded matching is not a matching")
        got.add(u)
        got.add(v)
    for v in saturated:
        if v not in got:
            raise AssertionError(f"saturated vertex {v} left unmatched")
    for a in must_cover_a:
        if a not in got:
            raise AssertionError(f"required vertex {a} left unmatched")
    for b in must_cover_b:
        if n_a + b not in got:
            raise AssertionError(f"required vertex {b} left unmatched")
    return chosen


# --------------------------------------------------------- demand flow

@dataclass
class DemandFlow:
    edge_flow: list[int]        # per exchange edge: 0 or 2
    through_a: list[int]
    through_b: list[int]
    cost: float
    value: int

    def saturated_a(self, net: ExchangeNetwork) -> list[int]:
        return [i for i, t in enumerate(self.through_a)
                if net.eta_prime > 0 and t == net.eta_prime]

    def saturated_b(self, net: ExchangeNetwork) -> list[int]:
        return [j for j, t in enumerate(self.through_b)
                if net.eta_prime > 0 and t == net.eta_prime]


def max_demand_flow(net: ExchangeNetwork) -> DemandFlow:
    """Min-cost maximal flow meeting demand 2*floor(deg/2) at every center.

    Works in halved units (edge capacity 1 <-> flow 2) so integral flows are
    0/2 by construction; lower bounds become supplies on a circulation.
    """
    inst = net.inst
    na, nb = len(net.a_centers), len(net.b_centers)
    half_cap = inst.eta // 2
    s, t = na + nb, na + nb + 1
    src, dst = na + nb + 2, na + nb + 3
    g = MinCostFlow(na + nb + 4)

    lower_a = [net.deg_a[i] // 2 for i in range(na)]
    lower_b = [net.deg_b[j] // 2 for j in range(nb)]
    sa_edges = [g.add_edge(s, i, half_cap - lower_a[i], 0.0)
                for i in range(na)]
    bt_edges = [g.add_edge(na + j, t, half_cap - lower_b[j], 0.0)
                for j in range(nb)]
    client_eids = [g.add_edge(e.a, na + e.b, 1, e.cost) for e in net.edges]
    ts_edge = g.add_edge(t, s, 10 ** 9, 0.0)

    # lower bounds: a_i received lower_a[i] (supply), s owes it (demand);
    # t received sum(lower_b) (supply), each b_j owes lower_b[j]
    total_supply = 0
    for i in range(na):
        if lower_a[i]:
            g.add_edge(src, i, lower_a[i], 0.0)
            total_supply += lower_a[i]
    if sum(lower_b):
        g.add_edge(src, t, sum(lower_b), 0.0)
        total_supply += sum(lower_b)
    if sum(lower_a):
        g.add_edge(s, dst, sum(lower_a), 0.0)
    for j in range(nb):
        if lower_b[j]:
            g.add_edge(na + j, dst, lower_b[j], 0.0)
    pushed, _, _ = g.augment(src, dst, total_supply)
    if pushed < total_supply:
        raise RuntimeError("demand flow infeasible: lower bounds unmet")

    # freeze the circulation closure, then push to maximality
    g.cap[ts_edge] = 0
    g.cap[ts_edge ^ 1] = 0
    g.augment(s, t, 10 ** 9)

    edge_flow = [2 * g.flow_on(eid) for eid in client_eids]
    through_a = [0] * na
    through_b = [0] * nb
    cost = 0.0
    for e, fl in zip(net.edges, edge_flow):
        through_a[e.a] += fl
        through_b[e.b] += fl
        cost += fl * e.cost
    return DemandFlow(edge_flow, through_a, through_b, cost,
                      sum(edge_flow) // 2)


# ------------------------------------------------------------- matching

@dataclass
class ExchangeMatching:
    edge_ids: list[int]
    a_of_b: dict[int, int]
    b_of_a: dict[int, int]
    weight: float

    @property
    def matched_a(self) -> set[int]:
        return set(self.b_of_a)

    @property
    def matched_b(self) -> set[int]:
        return set(self.a_of_b)


def round_matching(net: ExchangeNetwork, flow: DemandFlow) -> ExchangeMatching:
    """Round flow/eta' (a fractional matching) to an integral matching that
    keeps every saturated center matched along a positive-flow edge."""
    if net.eta_prime == 0:
        return ExchangeMatching([], {}, {}, 0.0)
    frac = []
    for e in net.edges:
        v = flow.edge_flow[e.eid] / net.eta_prime
        if v > 0:
            frac.append((e.eid, e.a, e.b, e.cost, v))
    chosen = round_fractional_matching(len(net.a_centers),
                                       len(net.b_centers), frac)
    a_of_b: dict[int, int] = {}
    b_of_a: dict[int, int] = {}
    weight = 0.0
    for eid in chosen:
        e = net.edges[eid]
        a_of_b[e.b] = e.a
        b_of_a[e.a] = e.b
        weight += e.cost
    return ExchangeMatching(chosen, a_of_b, b_of_a, weight)


# ------------------------------------------------------------ sequences

@dataclass
class Sequence:
    start_a: int
    edges: list[int]
    kind: str        # "matched" or "unmatched"
    terminal: int    # a index if matched, b index if unmatched


@dataclass
class SequenceMap:
    p_map: dict[int, tuple[str, int]]   # eid -> ("edge", eid) | ("vertex", a)
    seqs: list[Sequence]
    by_start_edge: dict[int, int]       # start eid -> index into seqs
    next_matched: dict[int, int]        # eid -> partner a of this edge's b

    def seq_for_edge_start(self, eid: int) -> Sequence | None:
        idx = self.by_start_edge.get(eid)
        return self.seqs[idx] if idx is not None else None


def build_sequences(net: ExchangeNetwork, flow: DemandFlow,
                    matching: ExchangeMatching) -> SequenceMap:
    """Iterate the per-pair edge mapping from every unmatched first-solution
    center until it stops at a matched center or an unmatched second one."""
    p_map: dict[int, tuple[str, int]] = {}
    for b, a in sorted(matching.a_of_b.items()):
        incoming = [e for e in net.edges if e.b == b and e.a != a]
        outgoing = [e for e in net.edges if e.a == a and e.b != b]
        for saturated in (False, True):
            inc = [e.eid for e in incoming
                   if (flow.edge_flow[e.eid] == 2) == saturated]
            out = [e.eid for e in outgoing
                   if (flow.edge_flow[e.eid] == 2) == saturated]
            for i, eid in enumerate(inc):
                if i < len(out):
                    p_map[eid] = ("edge", out[i])
                else:
                    p_map[eid] = ("vertex", a)

    next_matched = {}
    for e in net.edges:
        if e.b in matching.a_of_b:
            next_matched[e.eid] = matching.a_of_b[e.b]

    seqs: list[Sequence] = []
    by_start: dict[int, int] = {}
    unmatched_a = [a for a in range(len(net.a_centers))
                   if a not in matching.matched_a]
    for a in unmatched_a:
        for e in sorted(net.edges_from_a(a), key=lambda e: e.eid):
            chain = [e.eid]
            cur = e
            kind = None
            terminal = -1
            while True:
                if cur.b not in matching.a_of_b:
                    kind, terminal = "unmatched", cur.b
                    break
                step = p_map[cur.eid]
                if step[0] == "vertex":
                    kind, terminal = "matched", step[1]
                    break
                cur = net.edges[step[1]]
                chain.append(cur.eid)
            seqs.append(Sequence(a, chain, kind, terminal))
            by_start[e.eid] = len(seqs) - 1
    return SequenceMap(p_map, seqs, by_start, next_matched)


def sequence_edge_disjoint(seq_map: SequenceMap) -> bool:
    seen: set[int] = set()
    for s in seq_map.seqs:
        for eid in s.edges:
            if eid in seen:
                return False
            seen.add(eid)
    return True


def heavy_unmatched_report(net: ExchangeNetwork, matching: ExchangeMatching,
                           seq_map: SequenceMap) -> list[str]:
    """Heavy unmatched centers may start at most eta'/2 - 1 sequences that
    end at an unmatched second-solution center."""
    bad: list[str] = []
    limit = net.eta_prime // 2 - 1
    for a in range(len(net.a_centers)):
        if a in matching.matched_a or net.deg_a[a] < net.eta_prime / 2:
            continue
        count = sum(1 for s in seq_map.seqs
                    if s.start_a == a and s.kind == "unmatched")
        if count > limit:
            bad.append(f"center {a}: {count} unmatched-routed sequences"
                       f" > {limit}")
    return bad


# -------------------------------------------------------- path lengths

def path_length(net: ExchangeNetwork, matching: ExchangeMatching,
                seq: Sequence) -> float:
    """Length of the facility path realizing a sequence.

    For p = 1 this is the plain sum of client-edge spans and matched-pair
    links; for p > 1 each hop (edge span plus following link) is raised to
    the p-th power before summing.
    """
    p = net.inst.p
    total = 0.0
    for eid in seq.edges:
        e = net.edges[eid]
        span = net.inst.metric.dist(net.fac_loc_a(e.a), net.fac_loc_b(e.b))
        link = 0.0
        if e.b in matching.a_of_b:
            link = net.link_dist(e.b, matching.a_of_b[e.b])
        if p == 1:
            total += span + link
        else:
            total += cost_power(span + link, p)
    return total


def heavy_path_length_sum(net: ExchangeNetwork, matching: ExchangeMatching,
                          seq_map: SequenceMap) -> float:
    total = 0.0
    for s in seq_map.seqs:
        a = s.start_a
        if a not in matching.matched_a and \
                net.deg_a[a] >= net.eta_prime / 2:
            total += path_length(net, matching, s)
    return total


# ---------------------------------------------------------- reassignment

@dataclass
class ReassignmentResult:
    assignment: tuple[int, ...]       # per unit: facility index
    moved_units: tuple[int, ...]
    moved_cost: float
    loads: dict[int, int]
    violations: list[str]


def build_reassignment(net: ExchangeNetwork, matching: ExchangeMatching,
                       seq_map: SequenceMap) -> ReassignmentResult:
    """Move clients of heavy unmatched centers along their matched-routed
    sequences; everyone else keeps the first solution's assignment.

    For p = 1 a moved client lands on the terminal center of its sequence;
    for p > 1 every client along the sequence shifts one hop to the next
    matched center so each move is short.
    """
    inst = net.inst
    assignment = list(net.first.assignment)
    moved: list[int] = []
    moved_cost = 0.0
    p = inst.p
    for s in seq_map.seqs:
        a = s.start_a
        heavy = net.deg_a[a] >= net.eta_prime / 2
        if s.kind != "matched" or not heavy:
            continue
        if p == 1:
            e = net.edges[s.edges[0]]
            target = net.a_centers[s.terminal]
            assignment[e.unit] = target
            moved.append(e.unit)
            moved_cost += inst.unit_cost(e.unit, target)
        else:
            for eid in s.edges:
                e = net.edges[eid]
                target = net.a_centers[seq_map.next_matched[eid]]
                assignment[e.unit] = target
                moved.append(e.unit)
                moved_cost += inst.unit_cost(e.unit, target)

    loads: dict[int, int] = {}
    for f in assignment:
        loads[f] = loads.get(f, 0) + 1
    violations: list[str] = []
    for i, fac in enumerate(net.a_centers):
        load = loads.get(fac, 0)
        if i in matching.matched_a:
            if load > inst.eta:
                violations.append(f"matched center {i} load {load} > eta")
        else:
            if load > inst.eta // 2:
                violations.append(
                    f"unmatched center {i} load {load} > floor(eta/2)")
    return ReassignmentResult(tuple(assignment), tuple(sorted(set(moved))),
                              moved_cost, loads, violations)


# ------------------------------------------------- partition and pairs

@dataclass
class PartitionResult:
    swap_a: list[int]
    swap_b: list[int]
    close_a: list[int]
    close_b: list[int]
    phi: dict[int, int]           # swap_a member -> swap_b member
    nearest_b: dict[int, int]     # unmatched a -> nearest unmatched b
    pairs: list[tuple[int, int]]  # (far, near) sharing a nearest target


def partition_and_pairs(net: ExchangeNetwork,
                        matching: ExchangeMatching) -> PartitionResult:
    """Split both center lists into a swappable part (1-to-1 mapped) and a
    closable part of equal sizes."""
    na, nb = len(net.a_centers), len(net.b_centers)
    if na != nb:
        raise ValueError(
            f"partition needs equal center counts, got {na} vs {nb}")
    unmatched_a = [a for a in range(na) if a not in matching.matched_a]
    unmatched_b = [b for b in range(nb) if b not in matching.matched_b]
    nearest: dict[int, int] = {}
    for a in unmatched_a:
        best = None
        best_d = math.inf
        for b in unmatched_b:
            d = net.inst.metric.dist(net.fac_loc_a(a), net.fac_loc_b(b))
            if d < best_d - 1e-15 or (abs(d - best_d) <= 1e-15
                                      and (best is None or b < best)):
                best, best_d = b, d
        if best is not None:
            nearest[a] = best
    groups: dict[int, list[int]] = {}
    for a in unmatched_a:
        if a in nearest:
            groups.setdefault(nearest[a], []).append(a)
    solo = [g[0] for b, g in sorted(groups.items()) if len(g) == 1]
    shared = [a for b, g in sorted(groups.items()) if len(g) > 1 for a in g]

    swap_a = sorted(set(solo) | matching.matched_a)
    swap_b = sorted({nearest[a] for a in solo} | matching.matched_b)
    close_a = sorted(shared)
    close_b = sorted(set(range(nb)) - set(swap_b))
    phi = dict(matching.b_of_a)
    for a in solo:
        phi[a] = nearest[a]

    pairs: list[tuple[int, int]] = []
    for b, g in sorted(groups.items()):
        if len(g) < 2:
            continue
        members = sorted(g)
        for i in range(0, len(members) - 1, 2):
            x, y = members[i], members[i + 1]
            dx = net.inst.metric.dist(net.fac_loc_a(x), net.fac_loc_b(b))
            dy = net.inst.metric.dist(net.fac_loc_a(y), net.fac_loc_b(b))
            far, near = (x, y) if (dx, x) >= (dy, y) else (y, x)
            pairs.append((far, near))
    return PartitionResult(swap_a, swap_b, close_a, close_b, phi, nearest,
                           pairs)


# ------------------------------------------------------------ pipeline

@dataclass
class StructureState:
    net: ExchangeNetwork
    flow: DemandFlow
    matching: ExchangeMatching
    seq_map: SequenceMap
    reassignment: ReassignmentResult
    partition: PartitionResult


def build_structure(inst: Instance, first: Solution,
                    second: Solution) -> StructureState:
    net = build_exchange_graph(inst, first, second)
    flow = max_demand_flow(net)
    matching = round_matching(net, flow)
    seq_map = build_sequences(net, flow, matching)
    reassignment = build_reassignment(net, matching, seq_map)
    partition = partition_and_pairs(net, matching)
    return StructureState(net, flow, matching, seq_map, reassignment,
                          partition)


# ----------------------------------------------------------- samplers

def _terminal_assignment(net: ExchangeNetwork, seq_map: SequenceMap,
                         eid: int) -> int | None:
    seq = seq_map.seq_for_edge_start(eid)
    if seq is not None and seq.kind == "matched":
        return net.a_centers[seq.terminal]
    return None


def sample_pair_closing(state: StructureState, eps: float,
                        seed: int) -> Solution:
    """Close the far member of each selected pair, rerouting its clients to
    sequence terminals or to the surviving near member."""
    if not (0 < eps <= 1):
        raise ValueError("selection probability must be in (0, 1]")
    net = state.net
    inst = net.inst
    rng = np.random.default_rng(seed)
    selected = [pair for pair in state.partition.pairs
                if rng.random() < eps]
    assignment = list(net.first.assignment)
    closed: set[int] = set()
    for far, near in selected:
        closed.add(far)
        near_fac = net.a_centers[near]
        for a in (far, near):
            for e in sorted(net.edges_from_a(a), key=lambda e: e.eid):
                target = _terminal_assignment(net, state.seq_map, e.eid)
                if target is not None:
                    assignment[e.unit] = target
                elif a == far:
                    assignment[e.unit] = near_fac
        for unit, a, _b in net.deleted:
            if a == far:
                assignment[unit] = near_fac
    centers = tuple(sorted(set(net.first.centers)
                           - {net.a_centers[a] for a in closed}))
    return Solution.from_assignment(inst, centers, assignment)


def sample_swap(state: StructureState, base: Solution, pi: float,
                seed: int) -> Solution:
    """Swap each selected swappable center for its mapped partner, pin the
    partner's reference clients to it, and repair overflow through the
    slots those clients vacated."""
    if not (0 < pi <= 1):
        raise ValueError("swap probability must be in (0, 1]")
    net = state.net
    inst = net.inst
    partition = state.partition
    rng = np.random.default_rng(seed)
    selected = [a for a in partition.swap_a if rng.random() < pi * pi]
    assignment = list(base.assignment)
    centers = set(base.centers)
    for a in selected:
        fac_a = net.a_centers[a]
        if fac_a not in centers:
            continue
        b = partition.phi[a]
        fac_b = net.b_centers[b]
        if fac_b in centers and fac_b != fac_a:
            continue  # partner already open; nothing to swap
        centers.discard(fac_a)
        centers.add(fac_b)
        a_matched = a in state.matching.matched_a
        edge_of_unit = {e.unit: e for e in net.edges_from_a(a)}
        for u, f in enumerate(assignment):
            if f != fac_a:
                continue
            if a_matched:
                assignment[u] = fac_b
                continue
            e = edge_of_unit.get(u)
            target = _terminal_assignment(net, state.seq_map, e.eid) \
                if e is not None else None
            assignment[u] = target if target is not None else fac_b
        # pin the reference clients of the incoming center
        freed: list[int] = []
        for u in range(inst.n):
            if net.second.assignment[u] == net.b_centers[b] and \
                    assignment[u] != fac_b:
                if assignment[u] in centers:
                    freed.append(assignment[u])
                assignment[u] = fac_b
        loads: dict[int, int] = {}
        for f in assignment:
            loads[f] = loads.get(f, 0) + 1
        overflow = loads.get(fac_b, 0) - inst.eta
        if overflow > 0:
            movable = [u for u, f in enumerate(assignment)
                       if f == fac_b and net.second.assignment[u] != fac_b]
            for u in movable[:overflow]:
                placed = False
                for slot in freed:
                    if slot in centers and loads.get(slot, 0) < inst.eta:
                        assignment[u] = slot
                        loads[slot] = loads.get(slot, 0) + 1
                        loads[fac_b] -= 1
                        freed.remove(slot)
                        placed = True
                        break
                if not placed:
                    # fall back to the cheapest open center with room
                    options = sorted(
                        (inst.unit_cost(u, f), f) for f in centers
                        if loads.get(f, 0) < inst.eta and f != fac_b)
                    if not options:
                        raise RuntimeError("swap repair failed")
                    _, f = options[0]
                    assignment[u] = f
                    loads[f] = loads.get(f, 0) + 1
                    loads[fac_b] -= 1
    return Solution.from_assignment(inst, tuple(sorted(centers)), assignment)
