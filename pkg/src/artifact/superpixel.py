"""SLIC superpixels with guaranteed 4-connected segments, plus adjacency."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from skimage.color import rgb2lab
from skimage.measure import label as connected_components

DEFAULT_TARGET_COUNT = 200
DEFAULT_COMPACTNESS = 10.0
SLIC_ITERATIONS = 10


@dataclass(frozen=True, eq=False)
class SuperpixelDecomposition:
    segment_map: np.ndarray
    n_segments: int

    @cached_property
    def pixel_lists(self):
        """Flat pixel indices of each segment."""
        flat = self.segment_map.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.searchsorted(flat[order], np.arange(self.n_segments + 1))
        return [order[bounds[i]:bounds[i + 1]] for i in range(self.n_segments)]

    @cached_property
    def sizes(self):
        return np.bincount(self.segment_map.ravel(), minlength=self.n_segments)

    @cached_property
    def centroids(self):
        """(n_segments, 2) array of (row, col) centroids scaled to [0, 1]."""
        h, w = self.segment_map.shape
        rows, cols = np.indices((h, w))
        flat = self.segment_map.ravel()
        r = np.bincount(flat, rows.ravel(), self.n_segments) / self.sizes
        c = np.bincount(flat, cols.ravel(), self.n_segments) / self.sizes
        return np.stack([r / max(h - 1, 1), c / max(w - 1, 1)], axis=1)


def from_segment_map(segment_map):
    """Wrap an arbitrary integer raster, relabelling segments densely."""
    _, dense = np.unique(np.asarray(segment_map), return_inverse=True)
    dense = dense.reshape(np.shape(segment_map)).astype(np.int64)
    return SuperpixelDecomposition(dense, int(dense.max()) + 1)


def _enforce_connectivity(seg):
    """Keep the largest 4-connected piece of each segment; merge the rest.

    Orphan pieces join the largest segment they touch, growing outward
    from the kept pieces so every orphan ends up attached.
    """
    comps = connected_components(seg, connectivity=1, background=-1)
    n_comp = comps.max() + 1
    comp_seg = np.zeros(n_comp, dtype=np.int64)
    comp_seg[comps.ravel()] = seg.ravel()
    if n_comp == len(np.unique(seg)):
        return seg
    comp_size = np.bincount(comps.ravel(), minlength=n_comp)

    # largest piece per segment is kept; ties go to the lowest component index
    order = np.lexsort((np.arange(n_comp), -comp_size, comp_seg))
    first = np.ones(n_comp, dtype=bool)
    first[1:] = comp_seg[order][1:] != comp_seg[order][:-1]
    assigned = np.zeros(n_comp, dtype=bool)
    assigned[order[first]] = True

    seg_size = np.bincount(seg.ravel())
    pairs = _pixel_pairs(comps)
    neighbours = [[] for _ in range(n_comp)]
    for a, b in pairs:
        neighbours[a].append(b)
        neighbours[b].append(a)
    owner = comp_seg.copy()
    pending = [c for c in range(n_comp) if not assigned[c]]
    while pending:
        resolved = []
        for c in pending:
            touching = [owner[n] for n in neighbours[c] if assigned[n]]
            if touching:
                owner[c] = min(touching, key=lambda s_: (-seg_size[s_], s_))
                resolved.append(c)
        if not resolved:
            break
        assigned[resolved] = True
        pending = [c for c in pending if not assigned[c]]
    return owner[comps]


def _pixel_pairs(label_map):
    """Unique unordered label pairs across 4-neighbour pixel boundaries."""
    a = np.concatenate([label_map[:, :-1].ravel(), label_map[:-1, :].ravel()])
    b = np.concatenate([label_map[:, 1:].ravel(), label_map[1:, :].ravel()])
    diff = a != b
    lo = np.minimum(a[diff], b[diff])
    hi = np.maximum(a[diff], b[diff])
    if lo.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(np.stack([lo, hi], axis=1), axis=0).astype(np.int64)


def _grid_centres(h, w, target_count):
    ny = int(min(h, max(1, round(np.sqrt(target_count * h / w)))))
    nx = int(min(w, max(1, round(target_count / ny))))
    ys = (np.arange(ny) + 0.5) * h / ny
    xs = (np.arange(nx) + 0.5) * w / nx
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([yy.ravel(), xx.ravel()], axis=1)


def _slic_labels(lab, target_count, compactness, n_iter=SLIC_ITERATIONS):
    h, w = lab.shape[:2]
    step = np.sqrt(h * w / target_count)
    pos = _grid_centres(h, w, target_count)

    # nudge seeds to the lowest-gradient pixel in their 3x3 neighbourhood
    grad = np.zeros((h, w))
    grad[1:-1, 1:-1] = (np.sum((lab[1:-1, 2:] - lab[1:-1, :-2]) ** 2, axis=2)
                        + np.sum((lab[2:, 1:-1] - lab[:-2, 1:-1]) ** 2, axis=2))
    seeds = np.floor(pos).astype(int)
    for k, (r, c) in enumerate(seeds):
        r0, r1, c0, c1 = max(r - 1, 0), min(r + 2, h), max(c - 1, 0), min(c + 2, w)
        win = grad[r0:r1, c0:c1]
        dr, dc = np.unravel_index(np.argmin(win), win.shape)
        seeds[k] = (r0 + dr, c0 + dc)
    pos = seeds.astype(np.float64)
    colour = lab[seeds[:, 0], seeds[:, 1]].copy()

    rows, cols = np.indices((h, w))
    flat_lab = lab.reshape(-1, 3)
    radius = int(np.ceil(2 * step))
    scale = compactness / step
    labels = np.full((h, w), -1, dtype=np.int64)
    for _ in range(n_iter):
        best = np.full((h, w), np.inf)
        labels.fill(-1)
        for k in range(len(pos)):
            r, c = int(round(pos[k, 0])), int(round(pos[k, 1]))
            r0, r1 = max(r - radius, 0), min(r + radius + 1, h)
            c0, c1 = max(c - radius, 0), min(c + radius + 1, w)
            d_lab = np.sqrt(np.sum((lab[r0:r1, c0:c1] - colour[k]) ** 2, axis=2))
            d_xy = np.hypot(rows[r0:r1, c0:c1] - pos[k, 0], cols[r0:r1, c0:c1] - pos[k, 1])
            d = d_lab + scale * d_xy
            win_best = best[r0:r1, c0:c1]
            closer = d < win_best
            win_best[closer] = d[closer]
            labels[r0:r1, c0:c1][closer] = k
        lost = labels < 0
        if lost.any():
            d2 = ((rows[lost][:, None] - pos[None, :, 0]) ** 2
                  + (cols[lost][:, None] - pos[None, :, 1]) ** 2)
            labels[lost] = np.argmin(d2, axis=1)
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=len(pos))
        filled = counts > 0
        for ch in range(3):
            colour[filled, ch] = np.bincount(flat, flat_lab[:, ch], len(pos))[filled] / counts[filled]
        pos[filled, 0] = np.bincount(flat, rows.ravel(), len(pos))[filled] / counts[filled]
        pos[filled, 1] = np.bincount(flat, cols.ravel(), len(pos))[filled] / counts[filled]
    return labels


def slic_segment(image, target_count=DEFAULT_TARGET_COUNT, compactness=DEFAULT_COMPACTNESS):
    """Segment an RGB raster into roughly ``target_count`` superpixels.

    SLIC in CIELAB with distance ``d_lab + compactness * d_xy / S`` over a
    fixed number of iterations; deterministic for fixed inputs. Requests of
    at least H*W segments yield one segment per pixel.
    """
    pixels = np.asarray(getattr(image, "pixels", image))
    if target_count <= 0:
        raise ValueError("target_count must be positive")
    if compactness <= 0:
        raise ValueError("compactness must be positive")
    h, w = pixels.shape[:2]
    if target_count >= h * w:
        return SuperpixelDecomposition(np.arange(h * w, dtype=np.int64).reshape(h, w), h * w)
    lab = rgb2lab(pixels.astype(np.float64) / 255.0)
    seg = _slic_labels(lab, target_count, compactness)
    return from_segment_map(_enforce_connectivity(seg))


def adjacency(decomposition):
    """Sorted (E, 2) array of segment pairs i < j sharing a 4-neighbour boundary."""
    return _pixel_pairs(decomposition.segment_map)


def boundary_mask(decomposition):
    """Boolean raster marking pixels whose right or lower neighbour is another segment."""
    seg = decomposition.segment_map
    mask = np.zeros(seg.shape, dtype=bool)
    mask[:, :-1] |= seg[:, :-1] != seg[:, 1:]
    mask[:-1, :] |= seg[:-1, :] != seg[1:, :]
    return mask
