"""Region adjacency graph construction and greedy mean-color merging.

Each superpixel becomes a node carrying exact RGB channel sums and a pixel
count, so merged means are computed without drift. merge_at_threshold
repeatedly fuses the adjacent pair with the smallest mean-color distance
while that distance stays below t; find_threshold binary-searches t until
exactly two regions remain (or the search budget runs out, keeping the best
configuration with at least two regions).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .imagecore import _check_mask, _check_rgb

__all__ = [
    "RegionNode",
    "RegionGraph",
    "MergeConfig",
    "build_rag",
    "color_distance",
    "merge_at_threshold",
    "find_threshold",
]


@dataclass
class RegionNode:
    """One region: exact channel sums plus pixel count; mean is derived."""

    id: int
    pixel_count: int
    total_color: np.ndarray  # float64 (3,), summed RGB

    @property
    def mean_color(self) -> np.ndarray:
        return self.total_color / self.pixel_count


@dataclass
class RegionGraph:
    """Simple undirected graph over regions.

    nodes: region id -> RegionNode. edges: sorted (a, b) id pairs for regions
    sharing a 4-adjacent pixel boundary. pixel_assignment: (h, w) int32 map
    of pixels to node ids, -1 outside the region of interest.
    """

    nodes: dict[int, RegionNode] = field(default_factory=dict)
    edges: set[tuple[int, int]] = field(default_factory=set)
    pixel_assignment: np.ndarray = field(default_factory=lambda: np.empty((0, 0), np.int32))

    @property
    def node_count(self) -> int:
        return len(self.nodes)


@dataclass
class MergeConfig:
    """Binary-search bounds and stopping rules for find_threshold."""

    t_lo: float = 0.0
    t_hi: float = 500.0
    epsilon: float = 0.1
    max_iterations: int = 32

    def validate(self) -> None:
        if not 0 <= self.t_lo < self.t_hi:
            raise ValueError("need 0 <= t_lo < t_hi")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def build_rag(img: np.ndarray, labels: np.ndarray, roi: np.ndarray) -> RegionGraph:
    """Build the region adjacency graph over in-roi pixels.

    Pixels outside roi contribute to no node; labels that fall entirely
    outside roi are dropped. Raises ValueError on an empty roi.
    """
    img = _check_rgb(img)
    roi = _check_mask(roi)
    labels = np.asarray(labels)
    if labels.shape != roi.shape or labels.shape != img.shape[:2]:
        raise ValueError("image, labels and roi dimensions differ")
    if not roi.any():
        raise ValueError("empty region of interest, nothing to segment")

    assignment = np.where(roi, labels, -1).astype(np.int32)
    inside = assignment[roi].astype(np.int64)
    if inside.min() < 0:
        raise ValueError("labels inside the roi must be non-negative")
    nmax = int(inside.max()) + 1
    counts = np.bincount(inside, minlength=nmax)
    sums = np.empty((nmax, 3), dtype=np.float64)
    pix = img[roi].astype(np.float64)
    for ch in range(3):
        sums[:, ch] = np.bincount(inside, weights=pix[:, ch], minlength=nmax)

    nodes = {
        int(i): RegionNode(int(i), int(counts[i]), sums[i].copy())
        for i in np.flatnonzero(counts)
    }

    a_h, b_h = assignment[:, :-1], assignment[:, 1:]
    a_v, b_v = assignment[:-1, :], assignment[1:, :]
    pa, pb = [], []
    for a, b in ((a_h, b_h), (a_v, b_v)):
        keep = (a >= 0) & (b >= 0) & (a != b)
        pa.append(a[keep])
        pb.append(b[keep])
    pa = np.concatenate(pa).astype(np.int64)
    pb = np.concatenate(pb).astype(np.int64)
    lo, hi = np.minimum(pa, pb), np.maximum(pa, pb)
    keys = np.unique(lo * nmax + hi)
    edges = {(int(k // nmax), int(k % nmax)) for k in keys}

    return RegionGraph(nodes=nodes, edges=edges, pixel_assignment=assignment)


def color_distance(a: RegionNode, b: RegionNode) -> float:
    """Euclidean distance between the two regions' mean colors."""
    d = a.mean_color - b.mean_color
    return float(np.sqrt(d @ d))


def merge_at_threshold(graph: RegionGraph, t: float) -> RegionGraph:
    """Greedily merge adjacent regions while the smallest distance is < t.

    Smallest-distance pair first (ties by smallest (min id, max id) pair);
    the merged node keeps the smaller id, sums counts and totals, and
    inherits the union of the two neighborhoods. The input graph is left
    untouched.
    """
    if t < 0:
        raise ValueError("threshold must be >= 0")
    count = {i: n.pixel_count for i, n in graph.nodes.items()}
    total = {i: n.total_color.copy() for i, n in graph.nodes.items()}
    adj: dict[int, set[int]] = {i: set() for i in graph.nodes}
    for a, b in graph.edges:
        adj[a].add(b)
        adj[b].add(a)

    def dist(a: int, b: int) -> float:
        d = total[a] / count[a] - total[b] / count[b]
        return float(np.sqrt(d @ d))

    version = {i: 0 for i in graph.nodes}
    heap = [(dist(a, b), a, b, 0, 0) for a, b in graph.edges]
    heapq.heapify(heap)
    merged_into: dict[int, int] = {}

    while heap:
        d, a, b, va, vb = heapq.heappop(heap)
        if a in merged_into or b in merged_into:
            continue
        if version[a] != va or version[b] != vb:
            continue  # stale entry, a fresher one exists
        if d >= t:
            break
        keep, gone = (a, b) if a < b else (b, a)
        count[keep] += count[gone]
        total[keep] += total[gone]
        merged_into[gone] = keep
        version[keep] += 1
        neighbors = (adj[keep] | adj[gone]) - {keep, gone}
        for nb in neighbors:
            adj[nb].discard(gone)
            adj[nb].add(keep)
        adj[keep] = neighbors
        del adj[gone]
        vk = version[keep]
        for nb in neighbors:
            x, y = (keep, nb) if keep < nb else (nb, keep)
            vx = vk if x == keep else version[x]
            vy = vk if y == keep else version[y]
            heapq.heappush(heap, (dist(x, y), x, y, vx, vy))

    def resolve(i: int) -> int:
        while i in merged_into:
            i = merged_into[i]
        return i

    nodes = {i: RegionNode(i, count[i], total[i]) for i in adj}
    edges = set()
    for a, neighbors in adj.items():
        for b in neighbors:
            if a < b:
                edges.add((a, b))

    assignment = graph.pixel_assignment
    out = assignment
    if merged_into and assignment.size:
        lut = np.arange(int(assignment.max()) + 1, dtype=np.int32)
        for i in graph.nodes:
            lut[i] = resolve(i)
        out = np.where(assignment >= 0, lut[np.maximum(assignment, 0)], -1).astype(np.int32)
    return RegionGraph(nodes=nodes, edges=edges, pixel_assignment=out.copy())


def find_threshold(
    graph: RegionGraph, cfg: MergeConfig | None = None, probes: list[tuple[float, int]] | None = None
) -> tuple[float, RegionGraph]:
    """Binary-search the merge threshold aiming for exactly two regions.

    Probes the interval midpoint, raising the lower bound while more than
    two regions survive and lowering the upper bound when fewer than two
    do. Stops on a two-region hit, after max_iterations probes, or once the
    interval is narrower than epsilon. If no probe ever hit two regions the
    best evaluated threshold with the fewest (but at least two) regions is
    returned; with none at all, falls back to t_lo. Pass a list as `probes`
    to capture every evaluated (t, node_count) pair.
    """
    cfg = cfg or MergeConfig()
    cfg.validate()
    if graph.node_count < 2:
        raise ValueError("need at least two regions to search over")

    lo, hi = cfg.t_lo, cfg.t_hi
    best: tuple[int, float, RegionGraph] | None = None
    for _ in range(cfg.max_iterations):
        if hi - lo < cfg.epsilon:
            break
        t = (lo + hi) / 2.0
        merged = merge_at_threshold(graph, t)
        n = merged.node_count
        if probes is not None:
            probes.append((t, n))
        if n == 2:
            return t, merged
        if n > 2:
            lo = t
            if best is None or n < best[0]:
                best = (n, t, merged)
        else:
            hi = t
    if best is not None:
        return best[1], best[2]
    return cfg.t_lo, merge_at_threshold(graph, cfg.t_lo)
