"""Randomized hierarchical decompositions of the input point set.

Two kinds are built over the same box/level interface:

* split tree -- per level, a random permutation of a greedy net carves balls
  of radius drawn from [2^(i-1), 2^i); works for any explicit metric.
* quadtree -- randomly shifted dyadic dissection of the plane; level-i cells
  are squares of side 2^(i+1).

Coordinates are rescaled before leveling (minimum pairwise distance 1 for
split trees, 4 for quadtrees so that side-2 leaf cells are singletons); the
scale factor is recorded and all queries run in rescaled units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instance import Metric


@dataclass
class Box:
    level: int
    index: int
    points: tuple[int, ...]
    parent: int = -1
    children: tuple[int, ...] = ()
    cell: tuple[float, float, float] | None = None  # quadtree: x0, y0, side


@dataclass
class DecompositionTree:
    kind: str
    seed: int
    scale: float
    levels: list[list[Box]]
    box_of: list[np.ndarray]       # per level: location id -> box index
    dist_scaled: np.ndarray        # pairwise distances in rescaled units
    shifted: np.ndarray | None = None  # quadtree: point coords after shift

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def top_level(self) -> int:
        return len(self.levels) - 1

    @property
    def n_points(self) -> int:
        return self.dist_scaled.shape[0]

    def root(self) -> Box:
        return self.levels[-1][0]

    def diameter_scaled(self) -> float:
        return float(self.dist_scaled.max())

    def check_invariants(self) -> list[str]:
        """Refinement, diameter, fan-out and leveling violations, if any."""
        bad: list[str] = []
        n = self.n_points
        if sorted(len(b.points) for b in self.levels[0]) != [1] * n:
            bad.append("level 0 is not the singleton partition")
        if len(self.levels[-1]) != 1 or len(self.root().points) != n:
            bad.append("top level is not the whole point set")
        diam_factor = math.sqrt(2.0) if self.kind == "quadtree" else 1.0
        for i, level in enumerate(self.levels):
            covered = sorted(p for b in level for p in b.points)
            if covered != list(range(n)):
                bad.append(f"level {i} is not a partition")
            for b in level:
                pts = list(b.points)
                if len(pts) > 1:
                    diam = float(self.dist_scaled[np.ix_(pts, pts)].max())
                    if diam > diam_factor * 2.0 ** (i + 1) + 1e-9:
                        bad.append(
                            f"box {i}/{b.index} diameter {diam:.3g} exceeds "
                            f"{diam_factor:.3g}*2^{i + 1}")
                if i < self.top_level and b.parent < 0:
                    bad.append(f"box {i}/{b.index} has no parent")
                if i > 0:
                    fanout = len(b.children)
                    cap = 4 if self.kind == "quadtree" else None
                    if cap is not None and fanout > cap:
                        bad.append(f"box {i}/{b.index} fan-out {fanout} > 4")
                    child_pts = sorted(
                        p for ci in b.children
                        for p in self.levels[i - 1][ci].points)
                    if child_pts != sorted(b.points):
                        bad.append(f"box {i}/{b.index} children do not refine")
        return bad

    def dump(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "scale": self.scale,
            "levels": [
                [{"index": b.index, "points": list(b.points),
                  "parent": b.parent, "children": list(b.children)}
                 for b in level]
                for level in self.levels
            ],
        }


def greedy_net(dist, ids, delta: float) -> list[int]:
    """Greedy delta-net over `ids` in index order.

    Every point ends within delta of the net; net points are pairwise more
    than delta apart.  `dist` is a pairwise matrix indexed by location id.
    """
    net: list[int] = []
    for x in ids:
        if all(dist[x, y] > delta for y in net):
            net.append(x)
    return net


def _link_levels(levels: list[list[Box]]) -> None:
    for i in range(len(levels) - 1):
        where: dict[int, int] = {}
        for b in levels[i]:
            for p in b.points:
                where[p] = b.index
        for parent in levels[i + 1]:
            kids = sorted({where[p] for p in parent.points})
            parent.children = tuple(kids)
            for ci in kids:
                levels[i][ci].parent = parent.index


def _box_of_arrays(levels: list[list[Box]], n: int) -> list[np.ndarray]:
    out = []
    for level in levels:
        arr = np.full(n, -1, dtype=int)
        for b in level:
            for p in b.points:
                arr[p] = b.index
        out.append(arr)
    return out


def build_split_tree(metric: Metric, seed: int) -> DecompositionTree:
    """Randomized ball-carving hierarchy over an explicit metric."""
    n = metric.n_locations
    base = np.asarray(metric.pairwise(), dtype=float)
    if n == 1:
        levels = [[Box(0, 0, (0,))]]
        return DecompositionTree("splittree", seed, 1.0, levels,
                                 _box_of_arrays(levels, 1),
                                 np.zeros((1, 1)))
    min_d = float(base[base > 0].min())
    scale = 1.0 / min_d
    dist = base * scale
    diameter = float(dist.max())
    top = max(1, math.ceil(math.log2(diameter)) + 1)

    rng = np.random.default_rng(seed)
    levels: list[list[Box]] = [None] * (top + 1)  # type: ignore[list-item]
    levels[top] = [Box(top, 0, tuple(range(n)))]
    parent_of = np.zeros(n, dtype=int)
    for i in range(top - 1, -1, -1):
        delta = 2.0 ** (i - 1)
        net = greedy_net(dist, range(n), delta)
        order = rng.permutation(len(net))
        radii = rng.uniform(2.0 ** (i - 1), 2.0 ** i, size=len(net))
        owner = np.full(n, -1, dtype=int)
        for pos in order:
            u = net[pos]
            mask = (owner == -1) & (dist[u] <= radii[pos])
            owner[mask] = u
        # group points by (parent box, carving owner), deterministic order
        groups: dict[tuple[int, int], list[int]] = {}
        for x in range(n):
            groups.setdefault((parent_of[x], owner[x]), []).append(x)
        boxes = []
        new_parent = np.zeros(n, dtype=int)
        for _, pts in sorted(groups.items()):
            b = Box(i, len(boxes), tuple(pts))
            for x in pts:
                new_parent[x] = b.index
            boxes.append(b)
        levels[i] = boxes
        parent_of = new_parent
    _link_levels(levels)
    return DecompositionTree("splittree", seed, scale, levels,
                             _box_of_arrays(levels, n), dist)


QUADTREE_MIN_DIST = 4.0


def build_quadtree(points: np.ndarray, seed: int) -> DecompositionTree:
    """Randomly shifted dyadic dissection of plane points.

    Points are rescaled so the minimum pairwise distance is 4; level-i cells
    are squares of side 2^(i+1), which makes side-2 leaf cells singletons.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (n, 2)")
    n = pts.shape[0]
    if n == 1:
        levels = [[Box(0, 0, (0,), cell=(0.0, 0.0, 2.0))]]
        return DecompositionTree("quadtree", seed, 1.0, levels,
                                 _box_of_arrays(levels, 1),
                                 np.zeros((1, 1)), shifted=np.zeros((1, 2)))
    diff = pts[:, None, :] - pts[None, :, :]
    base = np.sqrt((diff * diff).sum(axis=2))
    pos = base[base > 0]
    if pos.size == 0:
        raise ValueError("quadtree requires distinct points")
    scale = QUADTREE_MIN_DIST / float(pos.min())
    scaled = (pts - pts.min(axis=0)) * scale
    extent = float(scaled.max()) if scaled.size else 0.0
    half = 2.0 ** math.ceil(math.log2(max(extent, QUADTREE_MIN_DIST)))
    top = int(math.log2(half))  # root cell side 2*half = 2^(top+1)

    rng = np.random.default_rng(seed)
    shift = rng.uniform(0.0, half, size=2)
    shifted = scaled + shift

    levels: list[list[Box]] = []
    for i in range(top + 1):
        side = 2.0 ** (i + 1)
        cells = np.floor(shifted / side).astype(int)
        groups: dict[tuple[int, int], list[int]] = {}
        for x in range(n):
            groups.setdefault((cells[x, 0], cells[x, 1]), []).append(x)
        boxes = []
        for (cx, cy), members in sorted(groups.items()):
            boxes.append(Box(i, len(boxes), tuple(members),
                             cell=(cx * side, cy * side, side)))
        levels.append(boxes)
    _link_levels(levels)
    return DecompositionTree("quadtree", seed, scale, levels,
                             _box_of_arrays(levels, n), base * scale,
                             shifted=shifted)


def build_tree_for_metric(metric: Metric, kind: str,
                          seed: int) -> DecompositionTree:
    if kind == "quadtree":
        if metric.kind != "plane":
            raise ValueError("quadtree requires plane input")
        return build_quadtree(metric.coords, seed)
    return build_split_tree(metric, seed)


def ball_cut_at_level(tree: DecompositionTree, center: int, radius: float,
                      level: int) -> bool:
    """True iff >= 2 level boxes meet B(center, radius) while one box at
    level+1 contains it.  Radius is in rescaled units."""
    if not (0 <= level < tree.top_level):
        return False
    ball = np.nonzero(tree.dist_scaled[center] <= radius)[0]
    if ball.size == 0:
        return False
    if np.unique(tree.box_of[level + 1][ball]).size != 1:
        return False
    return np.unique(tree.box_of[level][ball]).size >= 2


def points_separated_at_level(tree: DecompositionTree, a: int, b: int,
                              level: int) -> bool:
    return tree.box_of[level][a] != tree.box_of[level][b]


# ------------------------------------------------------ overcut classifier

@dataclass
class CutReport:
    """Ring-by-ring cut flags per point; a point is overcut when some ball
    around it is cut at a level far above the ring scale."""

    eps: float
    p: float
    dim: int
    ring_range: tuple[int, int]
    rings: dict[int, list[tuple[int, bool]]] = field(default_factory=dict)
    overcut: dict[int, bool] = field(default_factory=dict)
    ring_constant: float = 0.0

    def is_overcut(self, point: int) -> bool:
        return self.overcut.get(point, False)

    def any_overcut(self) -> bool:
        return any(self.overcut.values())


def cut_threshold_level(j: int, dim: int, n_points: int, eps: float,
                        p: float) -> int:
    """Ring j is flagged when its ball is cut strictly above this level."""
    logn = math.log2(max(2, n_points))
    gap = (eps / (p + 1)) ** (5 * p)
    return math.ceil(math.log2(dim * logn / gap)) + j


def ring_bounds(tree: DecompositionTree) -> tuple[int, int]:
    d = tree.dist_scaled
    pos = d[d > 0]
    if pos.size == 0:
        return 0, 0
    j_min = math.ceil(math.log2(float(pos.min())))
    j_max = math.ceil(math.log2(float(pos.max())))
    return j_min, j_max


def classify_overcut(tree: DecompositionTree, point_ids, eps: float, p: float,
                     dim: int | None = None) -> CutReport:
    """Flag every ring whose ball is cut above the threshold level.

    A point is overcut iff at least one of its rings is flagged.
    """
    if not (0 < eps < 1):
        raise ValueError("eps must be in (0, 1)")
    if dim is None:
        dim = 2 if tree.kind == "quadtree" else estimate_doubling_dim(tree)
    j_min, j_max = ring_bounds(tree)
    n = tree.n_points
    report = CutReport(eps, p, dim, (j_min, j_max))
    max_rings = 0
    for c in point_ids:
        ring_flags: list[tuple[int, bool]] = []
        point_flag = False
        for j in range(j_min, j_max + 1):
            t_j = cut_threshold_level(j, dim, n, eps, p)
            flagged = False
            for lvl in range(max(0, t_j + 1), tree.top_level):
                if ball_cut_at_level(tree, c, 2.0 ** j, lvl):
                    flagged = True
                    break
            ring_flags.append((j, flagged))
            point_flag = point_flag or flagged
        report.rings[c] = ring_flags
        report.overcut[c] = point_flag
        max_rings = max(max_rings, len(ring_flags))
    logn = math.log2(max(2, n))
    report.ring_constant = max_rings * eps / logn
    return report


def estimate_doubling_dim(tree: DecompositionTree, cap: int = 8) -> int:
    """log2 of the worst net-size ratio between consecutive scales."""
    d = tree.dist_scaled
    n = d.shape[0]
    if n <= 1:
        return 1
    j_min, j_max = ring_bounds(tree)
    best = 1
    prev = None
    for j in range(j_min, j_max + 1):
        size = len(greedy_net(d, range(n), 2.0 ** j))
        if prev is not None and size > 0:
            ratio = prev / size
            if ratio > 1:
                best = max(best, math.ceil(math.log2(ratio)))
        prev = size
    return min(best, cap)
