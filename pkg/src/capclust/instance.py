"""Problem instances for uniform-capacity k-clustering.

An instance is a set of client demand units and candidate facilities over a
metric that is either Euclidean points in the plane or an explicit symmetric
distance matrix.  Costs are dist^p.  Client demand is carried as multiplicity:
the same location may appear several times in the client list and every unit
is assigned independently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

METRIC_TOL = 1e-9
COST_RTOL = 1e-9


class InstanceError(ValueError):
    """Raised when an instance violates a structural invariant."""


class InfeasibleError(RuntimeError):
    """Raised when the requested computation has no feasible solution."""


def cost_power(d: float, p: float) -> float:
    """d**p, with exact repeated multiplication for small integer p."""
    if d < 0:
        raise ValueError("negative distance")
    ip = int(p)
    if p == ip and 0 <= ip <= 4:
        r = 1.0
        for _ in range(ip):
            r *= d
        return r
    if d == 0.0:
        return 0.0
    return math.exp(p * math.log(d))


@dataclass(frozen=True)
class Metric:
    """Distance oracle over a fixed table of locations.

    kind "plane": `coords` is an (L, 2) array, distances are Euclidean.
    kind "matrix": `matrix` is an (L, L) symmetric nonnegative array.
    """

    kind: str
    coords: np.ndarray | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "plane":
            c = np.asarray(self.coords, dtype=float)
            if c.ndim != 2 or c.shape[1] != 2:
                raise InstanceError("plane coordinates must be (L, 2)")
            if not np.all(np.isfinite(c)):
                raise InstanceError("coordinates must be finite")
            c.setflags(write=False)
            object.__setattr__(self, "coords", c)
        elif self.kind == "matrix":
            m = np.asarray(self.matrix, dtype=float)
            validate_distance_matrix(m)
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)
        else:
            raise InstanceError(f"unknown metric kind {self.kind!r}")

    @property
    def n_locations(self) -> int:
        if self.kind == "plane":
            return self.coords.shape[0]
        return self.matrix.shape[0]

    def dist(self, a: int, b: int) -> float:
        if self.kind == "plane":
            dx = self.coords[a, 0] - self.coords[b, 0]
            dy = self.coords[a, 1] - self.coords[b, 1]
            return math.hypot(dx, dy)
        return float(self.matrix[a, b])

    def pairwise(self) -> np.ndarray:
        """Full (L, L) distance matrix."""
        if self.kind == "matrix":
            return self.matrix
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return np.sqrt((diff * diff).sum(axis=2))

    def min_positive_distance(self) -> float:
        d = self.pairwise()
        pos = d[d > 0]
        return float(pos.min()) if pos.size else 0.0

    def diameter(self) -> float:
        return float(self.pairwise().max())


def validate_distance_matrix(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InstanceError("matrix must be square")
    if np.any(m < 0):
        raise InstanceError("metric has negative entries")
    if np.any(np.abs(np.diag(m)) > METRIC_TOL):
        raise InstanceError("metric diagonal not zero")
    if np.any(np.abs(m - m.T) > METRIC_TOL):
        raise InstanceError("metric not symmetric")
    # triangle inequality: d[i,k] <= d[i,j] + d[j,k] for all j
    n = m.shape[0]
    for j in range(n):
        via = m[:, j][:, None] + m[j, :][None, :]
        if np.any(m > via + METRIC_TOL):
            raise InstanceError("metric violates triangle inequality")


@dataclass(frozen=True)
class Instance:
    """Capacitated k-clustering input.

    clients / facilities hold location ids into `metric`; clients may repeat
    a location (demand multiplicity) and each unit is assigned independently.
    """

    metric: Metric
    clients: tuple[int, ...]
    facilities: tuple[int, ...]
    k: int
    eta: int
    p: float

    def __post_init__(self):
        if self.k < 1 or self.eta < 1:
            raise InstanceError("k and eta must be positive")
        if self.p < 1:
            raise InstanceError("p must be >= 1")
        n = len(self.clients)
        if self.k * self.eta < n:
            raise InstanceError(
                f"infeasible: k*eta = {self.k * self.eta} < {n} clients"
            )
        if not self.facilities:
            raise InstanceError("no candidate facilities")
        L = self.metric.n_locations
        for loc in list(self.clients) + list(self.facilities):
            if not (0 <= loc < L):
                raise InstanceError(f"location id {loc} out of range")
        if len(set(self.facilities)) != len(self.facilities):
            raise InstanceError("duplicate facility locations")

    @property
    def n(self) -> int:
        return len(self.clients)

    @property
    def m(self) -> int:
        return len(self.facilities)

    def dist(self, a: int, b: int) -> float:
        return self.metric.dist(a, b)

    def unit_cost(self, client_idx: int, fac_idx: int) -> float:
        """Cost of serving client unit `client_idx` by facility `fac_idx`."""
        d = self.metric.dist(self.clients[client_idx], self.facilities[fac_idx])
        return cost_power(d, self.p)

    def all_location_ids(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.clients) | set(self.facilities)))


@dataclass(frozen=True)
class Solution:
    """Centers plus a per-unit assignment.

    centers and assignment entries are indices into instance.facilities.
    """

    centers: tuple[int, ...]
    assignment: tuple[int, ...]
    cost: float
    loads: tuple[tuple[int, int], ...] = field(default=())

    @staticmethod
    def from_assignment(inst: Instance, centers, assignment) -> "Solution":
        centers = tuple(sorted(centers))
        assignment = tuple(assignment)
        cost = 0.0
        loads: dict[int, int] = {c: 0 for c in centers}
        for i, f in enumerate(assignment):
            cost += inst.unit_cost(i, f)
            loads[f] = loads.get(f, 0) + 1
        return Solution(centers, assignment, cost,
                        tuple(sorted(loads.items())))

    def load_map(self) -> dict[int, int]:
        return dict(self.loads)


def solution_cost(inst: Instance, sol: Solution) -> float:
    """Recompute sum of dist^p for a solution; raises on stray assignments."""
    centers = set(sol.centers)
    fac = set(range(inst.m))
    if not centers <= fac:
        raise InstanceError("centers not a subset of facilities")
    if len(sol.assignment) != inst.n:
        raise InstanceError("assignment does not cover all client units")
    total = 0.0
    for i, f in enumerate(sol.assignment):
        if f not in centers:
            raise InstanceError(f"client unit {i} assigned to non-center {f}")
        total += inst.unit_cost(i, f)
    return total


def relaxed_triangle_bound(a, b, c, p: float, eps: float) -> tuple[float, float]:
    """Evaluate both sides of the relaxed triangle inequality for dist^p.

    Returns (dist(a,b)^p, (1+eps)^p dist(a,c)^p + (1+1/eps)^p dist(c,b)^p).
    Points are coordinate pairs.
    """
    ax, ay = a
    bx, by = b
    cx, cy = c
    dab = math.hypot(ax - bx, ay - by)
    dac = math.hypot(ax - cx, ay - cy)
    dcb = math.hypot(cx - bx, cy - by)
    lhs = cost_power(dab, p)
    rhs = ((1 + eps) ** p) * cost_power(dac, p) + \
        ((1 + 1 / eps) ** p) * cost_power(dcb, p)
    return lhs, rhs


# ---------------------------------------------------------------- file I/O

def _build_plane_instance(raw: dict) -> Instance:
    client_pts = [tuple(map(float, pt)) for pt in raw["clients"]]
    fac_pts = [tuple(map(float, pt)) for pt in raw["facilities"]]
    table: dict[tuple[float, float], int] = {}
    for pt in client_pts + fac_pts:
        if pt not in table:
            table[pt] = len(table)
    coords = np.array(list(table.keys()), dtype=float)
    metric = Metric("plane", coords=coords)
    clients = tuple(table[pt] for pt in client_pts)
    facs = []
    for pt in fac_pts:
        if table[pt] not in facs:
            facs.append(table[pt])
    return Instance(metric, clients, tuple(facs),
                    int(raw["k"]), int(raw["eta"]), float(raw["p"]))


def instance_from_dict(raw: dict) -> Instance:
    for key in ("p", "k", "eta", "clients", "facilities"):
        if key not in raw:
            raise InstanceError(f"missing field {key!r}")
    if "matrix" in raw and raw["matrix"] is not None:
        metric = Metric("matrix", matrix=np.array(raw["matrix"], dtype=float))
        clients = tuple(int(i) for i in raw["clients"])
        facilities = tuple(int(i) for i in raw["facilities"])
        return Instance(metric, clients, facilities,
                        int(raw["k"]), int(raw["eta"]), float(raw["p"]))
    return _build_plane_instance(raw)


def load_instance(path) -> Instance:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"cannot parse {path}: {exc}") from exc
    return instance_from_dict(raw)


def instance_to_dict(inst: Instance) -> dict:
    raw: dict = {"p": inst.p, "k": inst.k, "eta": inst.eta}
    if inst.metric.kind == "plane":
        raw["clients"] = [list(inst.metric.coords[i]) for i in inst.clients]
        raw["facilities"] = [list(inst.metric.coords[i]) for i in inst.facilities]
    else:
        raw["clients"] = list(inst.clients)
        raw["facilities"] = list(inst.facilities)
        raw["matrix"] = inst.metric.matrix.tolist()
    return raw


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), sort_keys=True))


def solution_to_dict(sol: Solution) -> dict:
    return {
        "centers": list(sol.centers),
        "assignment": list(sol.assignment),
        "cost": sol.cost,
    }


def solution_from_dict(raw: dict) -> Solution:
    return Solution(tuple(raw["centers"]), tuple(raw["assignment"]),
                    float(raw["cost"]))


# --------------------------------------------- aspect-ratio normalization

@dataclass(frozen=True)
class Relocation:
    """Maps each original client unit to its (possibly merged) location."""

    original: Instance
    moved: Instance
    unit_location: tuple[int, ...]   # location id in `moved` per original unit
    displacement: tuple[float, ...]  # metric distance moved per original unit


def normalize_aspect_ratio(inst: Instance, reference_cost: float,
                           eps: float) -> tuple[Instance, Relocation]:
    """Merge client locations closer than eps*reference_cost/n^3.

    Demand is conserved as multiplicity at the surviving location.  Chained
    merges move a unit at most n hops of < threshold each, so per-unit
    displacement stays below eps*reference_cost/n^2.
    """
    if reference_cost <= 0:
        raise ValueError("reference_cost must be positive")
    if not (0 < eps < 0.5):
        raise ValueError("eps must be in (0, 1/2)")
    n = inst.n
    threshold = eps * reference_cost / n ** 3

    # target[loc] follows merge chains; demand moves, facilities stay put.
    active = sorted(set(inst.clients))
    target = {loc: loc for loc in active}
    while True:
        merged = False
        for i in range(len(active)):
            for j in range(i + 1, len(active)):
                a, b = active[i], active[j]
                d = inst.metric.dist(a, b)
                if 0 < d < threshold:
                    target[b] = a
                    active.remove(b)
                    merged = True
                    break
            if merged:
                break
        if not merged:
            break

    def resolve(loc: int) -> int:
        while target.get(loc, loc) != loc:
            loc = target[loc]
        return loc

    unit_location = tuple(resolve(loc) for loc in inst.clients)
    displacement = tuple(
        inst.metric.dist(orig, new)
        for orig, new in zip(inst.clients, unit_location)
    )
    moved = Instance(inst.metric, unit_location, inst.facilities,
                     inst.k, inst.eta, inst.p)
    return moved, Relocation(inst, moved, unit_location, displacement)


def lift_relocated_solution(rel: Relocation, sol: Solution) -> Solution:
    """Reinterpret a solution of the merged instance on the original one."""
    return Solution.from_assignment(rel.original, sol.centers, sol.assignment)


# ------------------------------------------------------------- generators

GENERATOR_KINDS = ("uniform-square", "clustered", "line", "matrix-random")


def generate_instance(kind: str, n: int, m: int, k: int, eta: int,
                      p: float, seed: int) -> Instance:
    """Deterministic random instance of the requested family."""
    if kind not in GENERATOR_KINDS:
        raise ValueError(f"unknown generator kind {kind!r}")
    if k * eta < n:
        raise InstanceError(f"infeasible parameters: k*eta = {k*eta} < n = {n}")
    rng = np.random.default_rng(seed)
    if kind == "matrix-random":
        size = n + m
        raw = rng.uniform(0.5, 2.0, size=(size, size))
        raw = (raw + raw.T) / 2
        np.fill_diagonal(raw, 0.0)
        # shortest-path closure enforces the triangle inequality
        for j in range(size):
            raw = np.minimum(raw, raw[:, j][:, None] + raw[j, :][None, :])
        metric = Metric("matrix", matrix=raw)
        return Instance(metric, tuple(range(n)), tuple(range(n, n + m)),
                        k, eta, p)

    if kind == "uniform-square":
        pts = rng.uniform(0.0, 1.0, size=(n + m, 2))
    elif kind == "line":
        xs = np.sort(rng.uniform(0.0, 1.0, size=n + m))
        pts = np.column_stack([xs, np.zeros(n + m)])
    else:  # clustered
        blob_centers = rng.uniform(0.0, 1.0, size=(k, 2))
        idx = rng.integers(0, k, size=n + m)
        pts = blob_centers[idx] + rng.normal(0.0, 0.05, size=(n + m, 2))
    # nudge exact duplicates apart so the location table stays injective
    seen: set[tuple[float, float]] = set()
    for i in range(pts.shape[0]):
        while (pts[i, 0], pts[i, 1]) in seen:
            pts[i] += rng.uniform(1e-6, 2e-6, size=2)
        seen.add((pts[i, 0], pts[i, 1]))
    metric = Metric("plane", coords=pts)
    return Instance(metric, tuple(range(n)), tuple(range(n, n + m)),
                    k, eta, p)
