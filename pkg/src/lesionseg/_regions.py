"""Run-based connected-component labeling over 2-D value maps.

Labels 4-connected components of equal values by scanning row runs and
merging vertically overlapping runs with a union-find. Component ids are
assigned in raster order of each component's first pixel, which downstream
code relies on for deterministic "previously visited" rules.
"""

from __future__ import annotations

import numpy as np

__all__ = ["RunLabeling", "label_components"]


class RunLabeling:
    """Result of :func:`label_components`.

    Attributes:
        component_map: (h, w) int32 array of component ids (0..n-1, raster order).
        sizes: pixel count per component.
        adjacency: list of sets; adjacency[i] holds ids of components sharing
            a 4-edge with component i (always across differing values).
    """

    def __init__(self, component_map: np.ndarray, sizes: np.ndarray, adjacency: list[set[int]]):
        self.component_map = component_map
        self.sizes = sizes
        self.adjacency = adjacency

    @property
    def count(self) -> int:
        return len(self.sizes)


def _find(parent: list[int], i: int) -> int:
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        parent[i], i = root, parent[i]
    return root


def label_components(values: np.ndarray, with_adjacency: bool = False) -> RunLabeling:
    """Label 4-connected components of equal values in a 2-D array."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError("expected a 2-D array")
    h, w = values.shape
    flat = values.ravel()
    n = flat.size

    # Maximal same-value runs: break on value change or row boundary.
    breaks = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    row_starts = np.arange(1, h, dtype=np.int64) * w
    starts = np.unique(np.concatenate(([0], breaks, row_starts)))
    ends = np.append(starts[1:], n)
    run_values = flat[starts]
    nruns = len(starts)

    parent = list(range(nruns))
    adj_run_pairs: list[tuple[int, int]] = []

    # Index of the first run in each row.
    row_first = np.searchsorted(starts, np.arange(h, dtype=np.int64) * w)

    for row in range(h):
        lo = row_first[row]
        hi = row_first[row + 1] if row + 1 < h else nruns
        if with_adjacency:
            for r in range(lo + 1, hi):
                adj_run_pairs.append((r - 1, r))
        if row == 0:
            continue
        # Two-pointer sweep over this row's runs and the previous row's.
        # Runs partition each row, so run q overlaps span [a, b) iff
        # start(q) < b and end(q) > a.
        p = row_first[row - 1]
        p_hi = lo
        for r in range(lo, hi):
            a, b = starts[r] - row * w, ends[r] - row * w  # column span [a, b)
            while p < p_hi and ends[p] - (row - 1) * w <= a:
                p += 1
            q = p
            while q < p_hi and starts[q] - (row - 1) * w < b:
                if run_values[q] == run_values[r]:
                    ra, rb = _find(parent, q), _find(parent, r)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
                elif with_adjacency:
                    adj_run_pairs.append((q, r))
                q += 1

    roots = np.fromiter((_find(parent, r) for r in range(nruns)), dtype=np.int64, count=nruns)

    # Component ids in raster order of first pixel = order of first run with that root.
    first_seen: dict[int, int] = {}
    comp_of_run = np.empty(nruns, dtype=np.int32)
    for r in range(nruns):
        root = roots[r]
        cid = first_seen.get(root)
        if cid is None:
            cid = len(first_seen)
            first_seen[root] = cid
        comp_of_run[r] = cid
    ncomp = len(first_seen)

    lengths = ends - starts
    component_map = np.repeat(comp_of_run, lengths).reshape(h, w)
    sizes = np.bincount(comp_of_run, weights=lengths, minlength=ncomp).astype(np.int64)

    adjacency: list[set[int]] = [set() for _ in range(ncomp)]
    if with_adjacency:
        for ra, rb in adj_run_pairs:
            ca, cb = int(comp_of_run[ra]), int(comp_of_run[rb])
            if ca != cb:
                adjacency[ca].add(cb)
                adjacency[cb].add(ca)

    return RunLabeling(component_map, sizes, adjacency)
