"""Instance transformation driven by a cut report and a reference solution.

Overcut clients have their demand moved to the facility serving them in the
reference solution L.  Overcut facilities of L are forced open: all their
L-clients are pinned to them up front and the facility keeps only its
residual capacity for the dynamic program.  Solutions of the transformed
instance lift back to the original one by reassigning pinned units and
recomputing costs at original locations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .assign import assignment_with_capacities, verify_solution
from .decomp import CutReport, DecompositionTree
from .instance import (InfeasibleError, Instance, InstanceError, Solution,
                       cost_power)


@dataclass(frozen=True)
class TransformedInstance:
    base: Instance
    reference: Solution
    relocated: dict[int, int]     # client unit -> facility idx it moved to
    forced_open: dict[int, int]   # facility idx -> residual capacity
    pinned: dict[int, int]        # client unit -> facility idx (pre-assigned)
    cost_offset: float

    @property
    def active_units(self) -> tuple[int, ...]:
        return tuple(u for u in range(self.base.n) if u not in self.pinned)

    def unit_location(self, u: int) -> int:
        """Location of unit u in the transformed instance."""
        if u in self.relocated:
            return self.base.facilities[self.relocated[u]]
        return self.base.clients[u]

    def is_trivial(self) -> bool:
        return not self.relocated and not self.forced_open

    def unit_cost(self, u: int, fac_idx: int) -> float:
        d = self.base.metric.dist(self.unit_location(u),
                                  self.base.facilities[fac_idx])
        return cost_power(d, self.base.p)

    def cost_relocated(self, assignment) -> float:
        """Cost of a full per-unit assignment at transformed locations."""
        return sum(self.unit_cost(u, f) for u, f in enumerate(assignment))

    def make_solution(self, centers, active_assignment) -> Solution:
        """Assemble a transformed-instance solution from the active part."""
        centers = tuple(sorted(set(centers) | set(self.forced_open)))
        full: list[int] = [0] * self.base.n
        for u, f in self.pinned.items():
            full[u] = f
        for u, f in zip(self.active_units, active_assignment):
            full[u] = f
        cost = self.cost_relocated(full)
        loads: dict[int, int] = {}
        for f in full:
            loads[f] = loads.get(f, 0) + 1
        return Solution(centers, tuple(full), cost, tuple(sorted(loads.items())))

    def validate(self, sol: Solution) -> list[str]:
        bad: list[str] = []
        centers = set(sol.centers)
        for f in self.forced_open:
            if f not in centers:
                bad.append(f"forced facility {f} not open")
        for u, f in self.pinned.items():
            if sol.assignment[u] != f:
                bad.append(f"pinned unit {u} not assigned to {f}")
        loads: dict[int, int] = {}
        for f in sol.assignment:
            loads[f] = loads.get(f, 0) + 1
        for f, load in sorted(loads.items()):
            if load > self.base.eta:
                bad.append(f"center {f} load {load} exceeds eta")
        if len(centers) > self.base.k:
            bad.append(f"{len(centers)} centers exceed k")
        return bad

    def optimal_valid_assignment(self, centers) -> Solution:
        """Min-cost valid solution using exactly the given open centers."""
        centers = tuple(sorted(set(centers) | set(self.forced_open)))
        caps = {c: self.base.eta for c in centers}
        caps.update(self.forced_open)
        units = list(self.active_units)
        locs = [self.unit_location(u) for u in units]
        _, assignment = assignment_with_capacities(
            self.base, centers, capacities=caps, client_units=units,
            unit_locations=locs)
        return self.make_solution(centers, assignment)


def build_transformed(inst: Instance, tree: DecompositionTree, ref: Solution,
                      report: CutReport) -> TransformedInstance:
    """Apply the relocation and forced-open rules for one decomposition."""
    loads = ref.load_map()
    for f, load in loads.items():
        if load > inst.eta:
            raise InstanceError(
                f"reference solution overloads facility {f} ({load} > eta)")

    relocated: dict[int, int] = {}
    for u in range(inst.n):
        if report.is_overcut(inst.clients[u]):
            relocated[u] = ref.assignment[u]

    forced: dict[int, int] = {}
    pinned: dict[int, int] = {}
    for f in ref.centers:
        if report.is_overcut(inst.facilities[f]):
            forced[f] = inst.eta - loads.get(f, 0)
    for u in range(inst.n):
        f = ref.assignment[u]
        if f in forced:
            pinned[u] = f

    tid = TransformedInstance(inst, ref, relocated, forced, pinned, 0.0)
    offset = sum(tid.unit_cost(u, f) for u, f in pinned.items())
    return TransformedInstance(inst, ref, relocated, forced, pinned, offset)


def distortion_bound(tid: TransformedInstance, eps: float) -> float:
    """Solution-independent bound on the two-sided relocation distortion:
    sum over relocated units of dist(c, L(c))^p / (eps/(p+1))^p."""
    inst = tid.base
    p = inst.p
    denom = (eps / (p + 1)) ** p
    total = 0.0
    for u, f in sorted(tid.relocated.items()):
        d = inst.metric.dist(inst.clients[u], inst.facilities[f])
        total += cost_power(d, p) / denom
    return total


def lift_solution(tid: TransformedInstance, sol: Solution) -> Solution:
    """Map a valid transformed-instance solution back to the original."""
    bad = tid.validate(sol)
    if bad:
        raise InstanceError("solution not valid for transformed instance: "
                            + "; ".join(bad))
    return Solution.from_assignment(tid.base, sol.centers, sol.assignment)


def best_valid_brute(tid: TransformedInstance,
                     limit: int = 10 ** 5) -> Solution:
    """Exhaustive best valid solution, measured at original locations.

    Enumerates center supersets of the forced-open set; oracle for tests.
    """
    inst = tid.base
    forced = tuple(sorted(tid.forced_open))
    free = [f for f in range(inst.m) if f not in tid.forced_open]
    best: Solution | None = None
    best_cost = float("inf")
    max_extra = inst.k - len(forced)
    if max_extra < 0:
        raise InfeasibleError("forced-open facilities already exceed k")
    count = 0
    for extra in range(0, max_extra + 1):
        for combo in combinations(free, extra):
            count += 1
            if count > limit:
                raise ValueError("brute force guard exceeded")
            centers = forced + combo
            if not centers:
                continue
            try:
                sol = tid.optimal_valid_assignment(centers)
            except InfeasibleError:
                continue
            lifted = lift_solution(tid, sol)
            if lifted.cost < best_cost:
                best, best_cost = sol, lifted.cost
    if best is None:
        raise InfeasibleError("no feasible valid solution")
    return best
