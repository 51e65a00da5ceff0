"""Deterministic synthetic tagged scenes with planted ground truth.

Each image has a background drawn from one class, rendered with a gentle
striped texture, and one to three flat shapes of other classes. Every
class keeps a single hue wherever it appears, so appearance alone ties
a pixel to its class while tags only say which classes are present.
"""
from __future__ import annotations

import numpy as np

from .dataset import AuxiliaryDatabase, GroundTruth, Label, TaggedImage

CLASS_COLOURS = {
    "red": (215, 45, 40),
    "green": (45, 175, 60),
    "blue": (40, 75, 215),
    "yellow": (235, 215, 45),
    "magenta": (205, 50, 200),
    "cyan": (55, 205, 215),
    "orange": (245, 145, 30),
    "purple": (110, 50, 150),
}
MAX_CLASSES = len(CLASS_COLOURS)
NOISE_SIGMA = 8.0
TEXTURE_AMPLITUDE = 14.0
AREA_RANGE = (0.2, 0.4)  # per-shape fraction of the image area


def class_names(n_classes):
    if not 1 <= n_classes <= MAX_CLASSES:
        raise ValueError(f"n_classes must be in 1..{MAX_CLASSES}")
    return sorted(list(CLASS_COLOURS)[:n_classes])


def _shape_mask(rng, h, w):
    area = rng.uniform(AREA_RANGE[0], AREA_RANGE[1]) * h * w
    aspect = rng.uniform(0.6, 1.6)
    rh = min(np.sqrt(area * aspect), 0.8 * h)
    rw = min(area / rh, 0.8 * w)
    cy = rng.uniform(rh / 2, h - rh / 2)
    cx = rng.uniform(rw / 2, w - rw / 2)
    rows, cols = np.indices((h, w)) + 0.5
    if rng.random() < 0.5:
        return (np.abs(rows - cy) <= rh / 2) & (np.abs(cols - cx) <= rw / 2)
    return ((rows - cy) / (rh / 2)) ** 2 + ((cols - cx) / (rw / 2)) ** 2 <= 1.0


def _texture(rng, h, w):
    theta = rng.uniform(0, np.pi)
    period = rng.uniform(6, 14)
    rows, cols = np.indices((h, w))
    phase = (rows * np.sin(theta) + cols * np.cos(theta)) * 2 * np.pi / period
    return TEXTURE_AMPLITUDE * np.sin(phase)


def synth_image(rng, n_classes, size=(96, 96), p_same=0.3):
    """One (pixels, label map) pair; label ids index the sorted class names."""
    h, w = size
    names = class_names(n_classes)
    colours = np.array([CLASS_COLOURS[n] for n in names], dtype=np.float64)
    background = int(rng.integers(n_classes))
    label_map = np.full((h, w), background, dtype=np.uint8)
    n_regions = int(rng.integers(1, 4))
    flat = np.zeros((h, w), dtype=bool)
    for _ in range(n_regions):
        # a shape may reuse the background class, which yields single-tag exemplars
        c = background if rng.random() < p_same else int(rng.integers(n_classes))
        mask = _shape_mask(rng, h, w)
        label_map[mask] = c
        flat |= mask
    img = colours[label_map]
    img += (_texture(rng, h, w) * ~flat)[..., None]
    img += rng.normal(0.0, NOISE_SIGMA, size=img.shape)
    return np.clip(np.round(img), 0, 255).astype(np.uint8), label_map


def synth_dataset(seed, n_images, n_classes, size=(96, 96), p_same=0.3):
    """Database of ``n_images`` tagged scenes and their ground truths.

    Tags are exactly the classes with at least one ground-truth pixel.
    """
    names = class_names(n_classes)
    rng = np.random.default_rng(seed)
    images, truths = [], []
    for k in range(n_images):
        pixels, label_map = synth_image(rng, n_classes, size, p_same)
        tags = frozenset(int(c) for c in np.unique(label_map))
        images.append(TaggedImage(pixels, tags, f"img{k:03d}.png"))
        truths.append(GroundTruth(label_map))
    table = tuple(Label(i, n) for i, n in enumerate(names))
    palette = np.array([CLASS_COLOURS[n] for n in names], dtype=np.uint8)
    return AuxiliaryDatabase(tuple(images), table, palette), truths


def split(database, truths, n_first):
    """Split a synthetic set into (database, truths) heads and tails."""
    head = AuxiliaryDatabase(database.images[:n_first], database.label_table, database.palette)
    tail = AuxiliaryDatabase(database.images[n_first:], database.label_table, database.palette)
    return (head, truths[:n_first]), (tail, truths[n_first:])
