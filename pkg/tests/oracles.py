"""Independent reference implementations used to derive expected test values.

Everything here is written for clarity over speed: per-pixel loops, full
rescans, breadth-first search. Tests compare the package's vectorized
implementations against these.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np


def otsu_exhaustive(values) -> int:
    """Try every threshold 0..254, return the first maximizer of
    between-class variance over {v <= T} and {v > T}."""
    hist = [0] * 256
    for v in values:
        hist[int(v)] += 1
    n = sum(hist)
    best_t, best_var = 0, -1.0
    for t in range(255):
        n0 = sum(hist[: t + 1])
        n1 = n - n0
        if n0 == 0 or n1 == 0:
            var = 0.0
        else:
            mu0 = sum(v * c for v, c in enumerate(hist[: t + 1])) / n0
            mu1 = sum(v * c for v, c in enumerate(hist[t + 1 :], start=t + 1)) / n1
            var = (n0 / n) * (n1 / n) * (mu0 - mu1) ** 2
        if var > best_var:
            best_t, best_var = t, var
    return best_t


def flood_fill_holes(mask: np.ndarray) -> np.ndarray:
    """Fill holes by BFS-flooding background from the border and inverting."""
    h, w = mask.shape
    reachable = np.zeros((h, w), dtype=bool)
    queue: deque[tuple[int, int]] = deque()
    for x in range(w):
        for y in (0, h - 1):
            if not mask[y, x] and not reachable[y, x]:
                reachable[y, x] = True
                queue.append((y, x))
    for y in range(h):
        for x in (0, w - 1):
            if not mask[y, x] and not reachable[y, x]:
                reachable[y, x] = True
                queue.append((y, x))
    while queue:
        y, x = queue.popleft()
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < h and 0 <= nx < w and not mask[ny, nx] and not reachable[ny, nx]:
                reachable[ny, nx] = True
                queue.append((ny, nx))
    return mask | ~reachable


def minkowski_dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Set every pixel within Euclidean distance `radius` of a foreground pixel."""
    h, w = mask.shape
    out = np.zeros((h, w), dtype=bool)
    offsets = [
        (dy, dx)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if dy * dy + dx * dx <= radius * radius
    ]
    for y in range(h):
        for x in range(w):
            if mask[y, x]:
                for dy, dx in offsets:
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w:
                        out[ny, nx] = True
    return out


def confusion_enumerate(pred: np.ndarray, truth: np.ndarray) -> tuple[int, int, int, int]:
    """Per-pixel tally; returns (tp, tn, fp, fn)."""
    tp = tn = fp = fn = 0
    for p, t in zip(pred.ravel(), truth.ravel()):
        if p and t:
            tp += 1
        elif p and not t:
            fp += 1
        elif not p and t:
            fn += 1
        else:
            tn += 1
    return tp, tn, fp, fn


def bfs_components(values: np.ndarray) -> np.ndarray:
    """4-connected components of equal values, ids in raster discovery order."""
    h, w = values.shape
    comp = np.full((h, w), -1, dtype=np.int64)
    next_id = 0
    for sy in range(h):
        for sx in range(w):
            if comp[sy, sx] >= 0:
                continue
            v = values[sy, sx]
            comp[sy, sx] = next_id
            queue = deque([(sy, sx)])
            while queue:
                y, x = queue.popleft()
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if 0 <= ny < h and 0 <= nx < w and comp[ny, nx] < 0 and values[ny, nx] == v:
                        comp[ny, nx] = next_id
                        queue.append((ny, nx))
            next_id += 1
    return comp


def kmeans_full_assign(
    features: np.ndarray, seeds: list[tuple[int, int]], ratio: float, iterations: int
) -> np.ndarray:
    """Plain k-means over every pixel (no search window), same distance form."""
    h, w = features.shape[:2]
    centers_c = np.array([features[y, x] for x, y in seeds], dtype=np.float64)
    centers_x = np.array([float(x) for x, _ in seeds])
    centers_y = np.array([float(y) for _, y in seeds])
    labels = np.zeros((h, w), dtype=np.int64)
    for _ in range(iterations):
        for y in range(h):
            for x in range(w):
                best, best_d = 0, math.inf
                for c in range(len(seeds)):
                    dc = math.sqrt(float(((features[y, x] - centers_c[c]) ** 2).sum()))
                    dsp = math.hypot(x - centers_x[c], y - centers_y[c])
                    d = dc + ratio * dsp
                    if d < best_d:
                        best, best_d = c, d
                labels[y, x] = best
        for c in range(len(seeds)):
            sel = labels == c
            if sel.any():
                centers_c[c] = features[sel].mean(axis=0)
                ys, xs = np.nonzero(sel)
                centers_x[c] = xs.mean()
                centers_y[c] = ys.mean()
    return labels


def greedy_merge_rescan(
    counts: dict[int, int],
    totals: dict[int, tuple[float, float, float]],
    edges: set[tuple[int, int]],
    t: float,
):
    """Greedy smallest-distance-first merging with a full rescan per step.

    Returns (counts, totals, edges) after merging. Survivor keeps the
    smaller id; ties on distance break by the (min id, max id) pair.
    """
    counts = dict(counts)
    totals = {i: np.array(v, dtype=np.float64) for i, v in totals.items()}
    edges = {tuple(sorted(e)) for e in edges}

    def dist(a, b):
        da = totals[a] / counts[a] - totals[b] / counts[b]
        return math.sqrt(float((da * da).sum()))

    while True:
        best = None
        for a, b in sorted(edges):
            d = dist(a, b)
            if best is None or d < best[0]:
                best = (d, a, b)
        if best is None or best[0] >= t:
            return counts, totals, edges
        _, a, b = best
        keep, gone = min(a, b), max(a, b)
        counts[keep] += counts.pop(gone)
        totals[keep] = totals[keep] + totals.pop(gone)
        new_edges = set()
        for x, y in edges:
            x = keep if x == gone else x
            y = keep if y == gone else y
            if x != y:
                new_edges.add((min(x, y), max(x, y)))
        edges = new_edges


def clahe_reference(img: np.ndarray, clip_limit: float, tiles: int) -> np.ndarray:
    """Per-pixel CLAHE with the same parameter conventions, written naively."""
    h, w = img.shape
    bounds_y = [i * h // tiles for i in range(tiles + 1)]
    bounds_x = [i * w // tiles for i in range(tiles + 1)]

    def tile_mapping(y0, y1, x0, x1):
        hist = [0] * 256
        for y in range(y0, y1):
            for x in range(x0, x1):
                hist[img[y, x]] += 1
        n = sum(hist)
        clip = max(int(clip_limit * n), 1)
        excess = sum(max(c - clip, 0) for c in hist)
        hist = [min(c, clip) for c in hist]
        share, rem = divmod(excess, 256)
        hist = [c + share for c in hist]
        for i in range(rem):
            hist[i] += 1
        cdf = []
        running = 0
        for c in hist:
            running += c
            cdf.append(running)
        cdf_min = next(c for c in cdf if c > 0)
        if n == cdf_min:
            return [float(v) for v in range(256)]
        return [(c - cdf_min) / (n - cdf_min) * 255.0 for c in cdf]

    maps = [
        [
            tile_mapping(bounds_y[i], bounds_y[i + 1], bounds_x[j], bounds_x[j + 1])
            for j in range(tiles)
        ]
        for i in range(tiles)
    ]
    centers_y = [(bounds_y[i] + bounds_y[i + 1] - 1) / 2.0 for i in range(tiles)]
    centers_x = [(bounds_x[j] + bounds_x[j + 1] - 1) / 2.0 for j in range(tiles)]

    def locate(centers, coord):
        if coord <= centers[0]:
            return 0, 0, 0.0
        if coord >= centers[-1]:
            return len(centers) - 1, len(centers) - 1, 0.0
        for i in range(len(centers) - 1):
            if centers[i] <= coord <= centers[i + 1]:
                frac = (coord - centers[i]) / (centers[i + 1] - centers[i])
                return i, i + 1, frac
        raise AssertionError("unreachable")

    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        i0, i1, fy = locate(centers_y, float(y))
        for x in range(w):
            j0, j1, fx = locate(centers_x, float(x))
            v = img[y, x]
            value = (
                maps[i0][j0][v] * (1 - fy) * (1 - fx)
                + maps[i0][j1][v] * (1 - fy) * fx
                + maps[i1][j0][v] * fy * (1 - fx)
                + maps[i1][j1][v] * fy * fx
            )
            out[y, x] = min(max(int(math.floor(value + 0.5)), 0), 255)
    return out
