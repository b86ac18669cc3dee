"""Final-mask extraction from merged region labels.

Order of operations: prune regions below an area fraction, build an Otsu
reference mask from the contrast-equalized grayscale image, pick the region
that best agrees with it (Jaccard), fill enclosed holes, then dilate with a
Euclidean disk. Pruned regions dissolve into neighbors instead of being
erased so pixel coverage survives for the Jaccard comparison.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from ._regions import label_components
from .imagecore import _check_mask, _check_rgb, to_gray

__all__ = [
    "PostprocessConfig",
    "DegenerateInputError",
    "prune_small_regions",
    "adaptive_equalize",
    "otsu_threshold",
    "otsu_reference_mask",
    "jaccard",
    "select_lesion_label",
    "fill_holes",
    "dilate_disk",
    "postprocess_pipeline",
]


class DegenerateInputError(ValueError):
    """Input carries no usable contrast (e.g. a single-intensity roi)."""


@dataclass
class PostprocessConfig:
    """Post-processing knobs.

    otsu_foreground picks which Otsu class is treated as lesion: "dark"
    (the lower-mean class, the usual case) or "light".
    """

    min_area_fraction: float = 0.02
    dilation_radius: int = 8
    clahe_clip_limit: float = 0.01
    clahe_tiles: int = 8
    otsu_foreground: str = "dark"

    def validate(self) -> None:
        if not 0 < self.min_area_fraction < 1:
            raise ValueError("min_area_fraction must be in (0, 1)")
        if self.dilation_radius < 0:
            raise ValueError("dilation_radius must be >= 0")
        if self.clahe_clip_limit <= 0:
            raise ValueError("clahe_clip_limit must be > 0")
        if self.clahe_tiles < 1:
            raise ValueError("clahe_tiles must be >= 1")
        if self.otsu_foreground not in ("dark", "light"):
            raise ValueError(f"unknown otsu_foreground {self.otsu_foreground!r}")


def prune_small_regions(labels: np.ndarray, min_area_fraction: float) -> np.ndarray:
    """Dissolve regions below min_area_fraction of the image area.

    Smallest region first, each absorbed by the neighbor sharing the most
    boundary pixel pairs (ties by smaller label). Regions with no neighbor
    are kept, so at least one region always survives. Pixels labeled -1 are
    outside the domain and untouched. Output labels are compacted to 0..n-1
    in raster order of first appearance.
    """
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("expected a 2-D label map")
    h, w = labels.shape
    min_size = min_area_fraction * h * w

    valid = labels >= 0
    if not valid.any():
        return labels.astype(np.int32).copy()
    flat = labels[valid].astype(np.int64)
    nmax = int(flat.max()) + 1
    sizes = np.bincount(flat, minlength=nmax)

    # Shared-boundary pair counts between adjacent regions.
    pairs: dict[tuple[int, int], int] = {}
    neighbors: dict[int, set[int]] = {int(i): set() for i in np.flatnonzero(sizes)}
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        keep = (a >= 0) & (b >= 0) & (a != b)
        pa, pb = a[keep].astype(np.int64), b[keep].astype(np.int64)
        lo, hi = np.minimum(pa, pb), np.maximum(pa, pb)
        keys, counts = np.unique(lo * nmax + hi, return_counts=True)
        for k, c in zip(keys, counts):
            x, y = int(k // nmax), int(k % nmax)
            pairs[(x, y)] = pairs.get((x, y), 0) + int(c)
            neighbors[x].add(y)
            neighbors[y].add(x)

    size_of = {i: int(sizes[i]) for i in neighbors}
    version = {i: 0 for i in neighbors}
    heap = [(size_of[i], i, 0) for i in neighbors]
    heapq.heapify(heap)
    merged_into: dict[int, int] = {}

    def pair_key(x: int, y: int) -> tuple[int, int]:
        return (x, y) if x < y else (y, x)

    while heap:
        size, r, ver = heapq.heappop(heap)
        if r in merged_into or version[r] != ver:
            continue
        if size >= min_size:
            break  # sizes only grow, so everything left is large enough
        if not neighbors[r]:
            continue  # isolated region, nothing can absorb it
        target = min(neighbors[r], key=lambda nb: (-pairs[pair_key(r, nb)], nb))
        size_of[target] += size
        merged_into[r] = target
        for nb in neighbors[r]:
            cnt = pairs.pop(pair_key(r, nb))
            if nb != target:
                k = pair_key(target, nb)
                pairs[k] = pairs.get(k, 0) + cnt
                neighbors[nb].discard(r)
                neighbors[nb].add(target)
                neighbors[target].add(nb)
        neighbors[target].discard(r)
        del neighbors[r]
        version[target] += 1
        heapq.heappush(heap, (size_of[target], target, version[target]))

    def resolve(i: int) -> int:
        while i in merged_into:
            i = merged_into[i]
        return i

    lut = np.full(nmax, -1, dtype=np.int64)
    for i in version:
        lut[i] = resolve(i)
    resolved = np.where(valid, lut[np.maximum(labels, 0)], -1)

    # Compact in raster order of first appearance.
    flat_resolved = resolved.ravel()
    in_domain = np.flatnonzero(flat_resolved >= 0)
    uniq, first_idx = np.unique(flat_resolved[in_domain], return_index=True)
    compact = np.full(nmax, -1, dtype=np.int32)
    compact[uniq[np.argsort(first_idx)]] = np.arange(len(uniq), dtype=np.int32)
    return np.where(resolved >= 0, compact[np.maximum(resolved, 0)], -1).astype(np.int32)


def _tile_map(hist: np.ndarray, clip_limit: float) -> np.ndarray:
    """Equalization map (256 floats) for one tile's histogram."""
    n = int(hist.sum())
    clip = max(int(clip_limit * n), 1)
    clipped = np.minimum(hist, clip)
    excess = int(hist.sum() - clipped.sum())
    clipped = clipped + excess // 256
    clipped[: excess % 256] += 1
    cdf = np.cumsum(clipped)
    cdf_min = cdf[np.flatnonzero(clipped)[0]]
    if n == cdf_min:
        return np.arange(256, dtype=np.float64)
    return (cdf - cdf_min) / (n - cdf_min) * 255.0


def adaptive_equalize(img: np.ndarray, cfg: PostprocessConfig | None = None) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization (CLAHE).

    Per-tile clipped histograms with bilinear interpolation between the
    tile-center mappings. Requires the image to be at least tiles x tiles.
    """
    cfg = cfg or PostprocessConfig()
    cfg.validate()
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("expected a uint8 grayscale image")
    h, w = img.shape
    t = cfg.clahe_tiles
    if h < t or w < t:
        raise ValueError(f"image {w}x{h} smaller than the {t}x{t} tile grid")

    ys = np.array([i * h // t for i in range(t + 1)], dtype=np.int64)
    xs = np.array([i * w // t for i in range(t + 1)], dtype=np.int64)
    maps = np.empty((t, t, 256), dtype=np.float64)
    for i in range(t):
        for j in range(t):
            tile = img[ys[i] : ys[i + 1], xs[j] : xs[j + 1]]
            hist = np.bincount(tile.ravel(), minlength=256)
            maps[i, j] = _tile_map(hist, cfg.clahe_clip_limit)

    cy = (ys[:-1] + ys[1:] - 1) / 2.0
    cx = (xs[:-1] + xs[1:] - 1) / 2.0

    def axis_blend(centers: np.ndarray, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        i0 = np.clip(np.searchsorted(centers, coords, side="right") - 1, 0, len(centers) - 1)
        i1 = np.minimum(i0 + 1, len(centers) - 1)
        span = centers[i1] - centers[i0]
        frac = np.where(span > 0, (coords - centers[i0]) / np.where(span > 0, span, 1), 0.0)
        return i0, i1, np.clip(frac, 0.0, 1.0)

    ry0, ry1, fy = axis_blend(cy, np.arange(h, dtype=np.float64))
    cx0, cx1, fx = axis_blend(cx, np.arange(w, dtype=np.float64))

    v = img.astype(np.int64)
    fy = fy[:, None]
    fx = fx[None, :]
    out = (
        maps[ry0[:, None], cx0[None, :], v] * (1 - fy) * (1 - fx)
        + maps[ry0[:, None], cx1[None, :], v] * (1 - fy) * fx
        + maps[ry1[:, None], cx0[None, :], v] * fy * (1 - fx)
        + maps[ry1[:, None], cx1[None, :], v] * fy * fx
    )
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def otsu_threshold(img: np.ndarray, roi: np.ndarray) -> int:
    """Between-class-variance-maximizing threshold over in-roi pixels.

    Classes are {p <= T} and {p > T}; ties resolve to the smallest T.
    Raises on a single-intensity roi.
    """
    img = np.asarray(img)
    roi = _check_mask(roi)
    if img.shape != roi.shape:
        raise ValueError("image and roi dimensions differ")
    values = img[roi]
    hist = np.bincount(values, minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise DegenerateInputError("need at least two distinct intensities to threshold")

    n = hist.sum()
    csum = np.cumsum(hist)
    cmean = np.cumsum(hist * np.arange(256))
    w0 = csum[:255]
    w1 = n - w0
    total = cmean[255]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = cmean[:255] / w0
        mu1 = (total - cmean[:255]) / w1
        var = w0 * w1 * (mu0 - mu1) ** 2
    var[(w0 == 0) | (w1 == 0)] = 0.0
    return int(np.argmax(var))


def otsu_reference_mask(
    img: np.ndarray, roi: np.ndarray, cfg: PostprocessConfig | None = None
) -> np.ndarray:
    """Reference lesion mask: equalize, Otsu-threshold, keep the dark class.

    Pixels outside roi are always background. cfg.otsu_foreground flips the
    kept class to "light" for unusual imagery.
    """
    cfg = cfg or PostprocessConfig()
    img = _check_rgb(img)
    roi = _check_mask(roi)
    eq = adaptive_equalize(to_gray(img), cfg)
    t = otsu_threshold(eq, roi)
    if cfg.otsu_foreground == "dark":
        return (eq <= t) & roi
    return (eq > t) & roi


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    a = _check_mask(a)
    b = _check_mask(b)
    if a.shape != b.shape:
        raise ValueError("mask dimensions differ")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def select_lesion_label(labels: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Mask of the region with the highest Jaccard against the reference.

    Ties go to the smaller label. Raises if the label map has no region.
    """
    labels = np.asarray(labels)
    reference = _check_mask(reference)
    if labels.shape != reference.shape:
        raise ValueError("labels and reference dimensions differ")
    valid = labels >= 0
    if not valid.any():
        raise ValueError("label map has no region")
    flat = labels[valid].astype(np.int64)
    nmax = int(flat.max()) + 1
    sizes = np.bincount(flat, minlength=nmax)
    inter = np.bincount(labels[valid & reference].astype(np.int64), minlength=nmax)
    union = sizes + np.count_nonzero(reference) - inter
    scores = np.where(sizes > 0, inter / np.maximum(union, 1), -1.0)
    best = int(np.argmax(scores))
    return labels == best


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Turn background components not 4-connected to the border into foreground."""
    mask = _check_mask(mask)
    if mask.size == 0:
        return mask.copy()
    lab = label_components(mask.astype(np.uint8))
    cm = lab.component_map
    border = np.concatenate([cm[0], cm[-1], cm[:, 0], cm[:, -1]])
    open_to_border = np.zeros(lab.count, dtype=bool)
    open_to_border[np.unique(border)] = True
    return mask | ~open_to_border[cm]


def dilate_disk(mask: np.ndarray, radius: int) -> np.ndarray:
    """Dilate with the Euclidean disk {(dx,dy): dx*dx + dy*dy <= radius**2}."""
    mask = _check_mask(mask)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0 or not mask.any():
        return mask.copy()

    h, w = mask.shape

    def hshift(m: np.ndarray, dx: int) -> np.ndarray:
        out = np.zeros_like(m)
        if dx > 0:
            out[:, dx:] = m[:, :-dx]
        elif dx < 0:
            out[:, :dx] = m[:, -dx:]
        else:
            out[:] = m
        return out

    # Horizontal dilations by every half-width 0..radius, built incrementally.
    horiz = [mask]
    for dx in range(1, radius + 1):
        horiz.append(horiz[-1] | hshift(mask, dx) | hshift(mask, -dx))

    out = np.zeros_like(mask)
    for dy in range(-radius, radius + 1):
        half = math.isqrt(radius * radius - dy * dy)
        row = horiz[half]
        if dy > 0:
            out[dy:] |= row[:-dy]
        elif dy < 0:
            out[:dy] |= row[-dy:]
        else:
            out |= row
    return out


def postprocess_pipeline(
    img: np.ndarray,
    merged_labels: np.ndarray,
    roi: np.ndarray,
    cfg: PostprocessConfig | None = None,
    debug: dict | None = None,
) -> np.ndarray:
    """Merged labels to final lesion mask; see the module docstring for order.

    With a single region after pruning the Otsu reference is skipped and
    that region passes straight to morphology. Pass a dict as `debug` to
    capture the pruned labels, reference mask and selected region.
    """
    cfg = cfg or PostprocessConfig()
    cfg.validate()
    img = _check_rgb(img)

    pruned = prune_small_regions(merged_labels, cfg.min_area_fraction)
    if debug is not None:
        debug["pruned_labels"] = pruned
    region_ids = np.unique(pruned[pruned >= 0])
    if len(region_ids) == 0:
        raise ValueError("no region to post-process")
    if len(region_ids) == 1:
        selected = pruned == region_ids[0]
    else:
        try:
            reference = otsu_reference_mask(img, roi, cfg)
        except DegenerateInputError:
            # No contrast to build a reference from; keep the largest region.
            sizes = np.bincount(pruned[pruned >= 0])
            selected = pruned == int(np.argmax(sizes))
        else:
            if debug is not None:
                debug["otsu_reference"] = reference
            selected = select_lesion_label(pruned, reference)
    if debug is not None:
        debug["selected_region"] = selected
    return dilate_disk(fill_holes(selected), cfg.dilation_radius)
