"""Global image descriptors (codebook columns) and superpixel descriptors.

Both work on CIELAB converted from 8-bit sRGB. The global descriptor is a
two-level spatial pyramid (whole image plus 2x2 cells) of per-channel Lab
histograms and magnitude-weighted gradient-orientation histograms,
L2-normalised overall. A region descriptor concatenates mean colour, a Lab
histogram, an orientation histogram and the normalised centroid, with each
block divided by the square root of its length so no block dominates
Euclidean distances.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage.color import rgb2lab

# bin edges: L in [0, 100], a/b in [-128, 128]
_LAB_LO = np.array([0.0, -128.0, -128.0])
_LAB_HI = np.array([100.0, 128.0, 128.0])


@dataclass(frozen=True)
class FeatureConfig:
    color_bins: int = 8
    orient_bins: int = 8
    pyramid_levels: tuple = (1, 2)

    @property
    def global_dim(self):
        cells = sum(g * g for g in self.pyramid_levels)
        return cells * (3 * self.color_bins + self.orient_bins)

    @property
    def region_blocks(self):
        """(name, length) of each region-descriptor block, in order."""
        return (("mean", 3), ("color", 3 * self.color_bins), ("gradient", self.orient_bins), ("position", 2))

    @property
    def region_dim(self):
        return sum(n for _, n in self.region_blocks)


DEFAULT_FEATURES = FeatureConfig()


@dataclass(frozen=True, eq=False)
class Codebook:
    matrix: np.ndarray  # (m, N), unit-norm columns
    identifiers: tuple

    @property
    def shape(self):
        return self.matrix.shape


def to_lab(pixels):
    return rgb2lab(np.asarray(pixels, dtype=np.float64) / 255.0)


def _color_bin_index(lab, bins):
    """Integer bin per pixel and channel, shape (..., 3)."""
    t = (lab - _LAB_LO) / (_LAB_HI - _LAB_LO)
    return np.clip((t * bins).astype(np.int64), 0, bins - 1)


def _orientation(lab, bins):
    """Unsigned gradient orientation bin and magnitude of the L channel."""
    lum = lab[..., 0]
    gy = ndimage.sobel(lum, axis=0, mode="nearest")
    gx = ndimage.sobel(lum, axis=1, mode="nearest")
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    idx = np.clip((theta / np.pi * bins).astype(np.int64), 0, bins - 1)
    return idx, mag


def _normalise_orientation(hist, eps=1e-9):
    """L1-normalise rows; rows with no gradient energy become uniform."""
    hist = np.asarray(hist, dtype=np.float64)
    total = hist.sum(axis=-1, keepdims=True)
    uniform = np.full_like(hist, 1.0 / hist.shape[-1])
    return np.where(total > eps, hist / np.where(total > eps, total, 1.0), uniform)


def raw_orientation_histogram(pixels, bins=8):
    """Magnitude-weighted orientation histogram before normalisation."""
    idx, mag = _orientation(to_lab(pixels), bins)
    return np.bincount(idx.ravel(), mag.ravel(), bins)


def _cell_slices(h, w, grid):
    rs = np.linspace(0, h, grid + 1).round().astype(int)
    cs = np.linspace(0, w, grid + 1).round().astype(int)
    for i in range(grid):
        for j in range(grid):
            yield slice(rs[i], rs[i + 1]), slice(cs[j], cs[j + 1])


def global_feature(image, config=DEFAULT_FEATURES):
    """Unit-norm descriptor of length ``config.global_dim``."""
    pixels = getattr(image, "pixels", image)
    lab = to_lab(pixels)
    h, w = lab.shape[:2]
    cbin = _color_bin_index(lab, config.color_bins)
    obin, mag = _orientation(lab, config.orient_bins)
    parts = []
    for grid in config.pyramid_levels:
        for rs, cs in _cell_slices(h, w, grid):
            cell = cbin[rs, cs].reshape(-1, 3)
            n = max(cell.shape[0], 1)
            for ch in range(3):
                parts.append(np.bincount(cell[:, ch], minlength=config.color_bins) / n)
            hist = np.bincount(obin[rs, cs].ravel(), mag[rs, cs].ravel(), config.orient_bins)
            parts.append(_normalise_orientation(hist))
    vec = np.concatenate(parts)
    return vec / np.linalg.norm(vec)


def region_features(image, decomposition, config=DEFAULT_FEATURES, lab=None):
    """(n_segments, d) matrix of balanced region descriptors."""
    pixels = getattr(image, "pixels", image)
    if lab is None:
        lab = to_lab(pixels)
    n = decomposition.n_segments
    seg = decomposition.segment_map.ravel()
    sizes = np.bincount(seg, minlength=n).astype(np.float64)
    if np.any(sizes == 0):
        raise ValueError("empty segment in decomposition")
    flat = lab.reshape(-1, 3)

    mean = np.stack([np.bincount(seg, flat[:, ch], n) for ch in range(3)], axis=1) / sizes[:, None]
    # uniform units keep block distances proportional to colour difference (Delta E / 100)
    mean = mean / 100.0

    bins = config.color_bins
    cbin = _color_bin_index(lab, bins).reshape(-1, 3)
    color = np.zeros((n, 3 * bins))
    for ch in range(3):
        color[:, ch * bins:(ch + 1) * bins] = np.bincount(
            seg * bins + cbin[:, ch], minlength=n * bins).reshape(n, bins)
    color /= 3.0 * sizes[:, None]

    obin, mag = _orientation(lab, config.orient_bins)
    ob = config.orient_bins
    grad = np.bincount(seg * ob + obin.ravel(), mag.ravel(), n * ob).reshape(n, ob)
    grad = _normalise_orientation(grad)

    blocks = [mean, color, grad, decomposition.centroids]
    return np.concatenate([b / np.sqrt(b.shape[1]) for b in blocks], axis=1)


def region_feature(image, decomposition, segment_index, config=DEFAULT_FEATURES):
    if not 0 <= segment_index < decomposition.n_segments:
        raise IndexError(f"segment {segment_index} out of range")
    return region_features(image, decomposition, config)[segment_index]


def split_blocks(feature, config=DEFAULT_FEATURES):
    """Undo block balancing: {block name: raw values}."""
    feature = np.asarray(feature)
    out, start = {}, 0
    for name, length in config.region_blocks:
        out[name] = feature[..., start:start + length] * np.sqrt(length)
        start += length
    return out


def build_codebook(database, config=DEFAULT_FEATURES):
    cols = [global_feature(im, config) for im in database.images]
    return Codebook(np.stack(cols, axis=1), tuple(im.identifier for im in database.images))


def database_digest(database, config=DEFAULT_FEATURES):
    h = hashlib.sha256(repr(config).encode())
    for im in database.images:
        h.update(im.identifier.encode())
        h.update(np.ascontiguousarray(im.pixels).tobytes())
    return h.hexdigest()[:16]


def cached_codebook(database, cache_dir, config=DEFAULT_FEATURES):
    """Build the codebook, reusing ``cache_dir/codebook-<digest>.npz`` when present."""
    path = Path(cache_dir) / f"codebook-{database_digest(database, config)}.npz"
    if path.is_file():
        with np.load(path) as data:
            return Codebook(data["matrix"], tuple(str(s) for s in data["identifiers"]))
    book = build_codebook(database, config)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, matrix=book.matrix, identifiers=np.array(book.identifiers))
    return book
