"""Loading tagged image databases and writing labelled result rasters.

Directory layout::

    root/images/*.png|*.ppm
    root/tags.json          {"a.png": ["grass", "cow"], ...}
    root/labels.json        optional {"0": {"name": "cow", "color": [r, g, b]}, ...}
    root/gt/<stem>.png      optional id rasters, 255 = void
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

VOID = 255
IMAGE_SUFFIXES = (".png", ".ppm")


class DatasetError(ValueError):
    """Raised for malformed or inconsistent dataset inputs."""


@dataclass(frozen=True)
class Label:
    id: int
    name: str


@dataclass(frozen=True, eq=False)
class TaggedImage:
    pixels: np.ndarray
    tags: frozenset
    identifier: str

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise DatasetError(f"{self.identifier}: expected HxWx3 raster, got {px.shape}")
        if px.shape[0] < 16 or px.shape[1] < 16:
            raise DatasetError(f"{self.identifier}: image smaller than 16x16")
        if not self.tags:
            raise DatasetError(f"{self.identifier}: image has no tags")
        object.__setattr__(self, "pixels", px.astype(np.uint8, copy=False))
        object.__setattr__(self, "tags", frozenset(int(t) for t in self.tags))

    @property
    def shape(self):
        return self.pixels.shape[:2]


@dataclass(frozen=True, eq=False)
class AuxiliaryDatabase:
    images: tuple
    label_table: tuple
    palette: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "label_table", tuple(self.label_table))
        if not self.images:
            raise DatasetError("empty database")
        n_labels = len(self.label_table)
        for k, lab in enumerate(self.label_table):
            if lab.id != k:
                raise DatasetError("label ids must be dense 0..C-1")
        if len({lab.name for lab in self.label_table}) != n_labels:
            raise DatasetError("label names must be unique")
        for im in self.images:
            bad = [t for t in im.tags if t >= n_labels or t < 0]
            if bad:
                raise DatasetError(f"{im.identifier}: unknown label id {bad[0]}")
        if self.palette is None:
            object.__setattr__(self, "palette", default_palette(n_labels))

    def __len__(self):
        return len(self.images)

    @property
    def n_labels(self):
        return len(self.label_table)

    def tag_sets(self):
        return [im.tags for im in self.images]

    def label_id(self, name):
        for lab in self.label_table:
            if lab.name == name:
                return lab.id
        raise DatasetError(f"unknown label name {name!r}")

    def index_of(self, identifier):
        for k, im in enumerate(self.images):
            if im.identifier == identifier:
                return k
        return None


@dataclass(frozen=True, eq=False)
class GroundTruth:
    label_map: np.ndarray

    @property
    def void_fraction(self):
        return float(np.mean(self.label_map == VOID))

    def labels_present(self):
        ids = np.unique(self.label_map)
        return frozenset(int(i) for i in ids if i != VOID)


def default_palette(n):
    """Well-spread RGB colours, one per label id."""
    hues = (np.arange(n) * 0.618033988749895) % 1.0
    out = np.zeros((n, 3), dtype=np.uint8)
    for i, h in enumerate(hues):
        out[i] = _hsv_to_rgb(h, 0.75, 0.95)
    return out


def _hsv_to_rgb(h, s, v):
    i = int(h * 6) % 6
    f = h * 6 - int(h * 6)
    p, q, t = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    r, g, b = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    return np.round(np.array([r, g, b]) * 255).astype(np.uint8)


def read_rgb(path):
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise DatasetError(f"unreadable raster {path}: {exc}") from exc


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"malformed JSON in {path}: {exc}") from exc


def _read_labels_file(path):
    """Return {name: rgb or None} from an optional labels.json."""
    raw = _read_json(path)
    out = {}
    for key in sorted(raw, key=lambda k: int(k)):
        entry = raw[key]
        if isinstance(entry, str):
            out[entry] = None
        else:
            out[entry["name"]] = entry.get("color")
    return out


def load_dataset(root):
    """Load ``root`` into an :class:`AuxiliaryDatabase`.

    Label ids follow sorted tag-name order; images are sorted by file name.
    """
    root = Path(root)
    tags_path = root / "tags.json"
    if not tags_path.is_file():
        raise DatasetError(f"missing tags file {tags_path}")
    img_dir = root / "images"
    files = sorted(p.name for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES) if img_dir.is_dir() else []
    if not files:
        raise DatasetError("empty database")
    tags = _read_json(tags_path)
    missing = sorted(name for name in tags if not (img_dir / name).is_file())
    if missing:
        raise DatasetError(f"image referenced in tags but absent: {missing[0]}")

    declared = {}
    if (root / "labels.json").is_file():
        declared = _read_labels_file(root / "labels.json")
    names = sorted(set(declared) | {t for v in tags.values() for t in v})
    table = tuple(Label(i, n) for i, n in enumerate(names))
    ids = {n: i for i, n in enumerate(names)}
    palette = default_palette(len(names))
    for name, rgb in declared.items():
        if rgb is not None:
            palette[ids[name]] = np.asarray(rgb, dtype=np.uint8)

    images = []
    for name in files:
        if name not in tags:
            raise DatasetError(f"image {name} has no tags entry")
        if not tags[name]:
            raise DatasetError(f"image {name} has an empty tag list")
        images.append(TaggedImage(read_rgb(img_dir / name), frozenset(ids[t] for t in tags[name]), name))
    return AuxiliaryDatabase(tuple(images), table, palette)


def load_ground_truth(path, label_table, shape=None):
    """Read an id raster; ``shape`` (H, W) is checked when given."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im)
    except OSError as exc:
        raise DatasetError(f"unreadable raster {path}: {exc}") from exc
    return ground_truth_from_array(arr, label_table, shape)


def ground_truth_from_array(arr, label_table, shape=None):
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise DatasetError(f"ground truth must be a single-channel raster, got {arr.shape}")
    if shape is not None and tuple(arr.shape) != tuple(shape):
        raise DatasetError(f"dimension mismatch: ground truth {arr.shape} vs image {tuple(shape)}")
    n = len(label_table)
    bad = (arr != VOID) & (arr >= n)
    if bad.any():
        raise DatasetError(f"unknown label id {int(arr[bad][0])}")
    return GroundTruth(arr.astype(np.uint8))


def rasterize(segment_map, labels):
    """Per-pixel label ids from per-segment labels."""
    return np.asarray(labels)[segment_map]


def write_overlay(image, segment_map, labels, path, palette=None, alpha=0.55):
    """Write ``<stem>.labels.png`` and ``<stem>.overlay.png`` next to ``path``.

    ``labels`` holds one label id per superpixel of ``segment_map``.
    Returns the two written paths.
    """
    pixels = image.pixels if isinstance(image, TaggedImage) else np.asarray(image)
    labels = np.asarray(labels)
    if segment_map.max() >= len(labels):
        raise DatasetError("assignment does not cover every superpixel")
    if palette is None:
        palette = default_palette(int(labels.max()) + 1)
    id_raster = rasterize(segment_map, labels).astype(np.uint8)
    tint = np.asarray(palette, dtype=np.float64)[id_raster]
    overlay = np.round((1 - alpha) * pixels + alpha * tint).astype(np.uint8)

    stem = Path(path)
    if stem.suffix == ".png":
        stem = stem.with_suffix("")
    labels_path = stem.parent / f"{stem.name}.labels.png"
    overlay_path = stem.parent / f"{stem.name}.overlay.png"
    try:
        stem.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(id_raster).save(labels_path)
        Image.fromarray(overlay).save(overlay_path)
    except OSError as exc:
        raise DatasetError(f"cannot write to {stem.parent}: {exc}") from exc
    return labels_path, overlay_path


def write_dataset(root, database, ground_truths=None):
    """Write ``database`` in the on-disk layout read by :func:`load_dataset`."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    names = {lab.id: lab.name for lab in database.label_table}
    tags = {}
    for im in database.images:
        Image.fromarray(im.pixels).save(root / "images" / im.identifier)
        tags[im.identifier] = sorted(names[t] for t in im.tags)
    (root / "tags.json").write_text(json.dumps(tags, indent=1, sort_keys=True))
    labels = {str(lab.id): {"name": lab.name, "color": [int(c) for c in database.palette[lab.id]]}
              for lab in database.label_table}
    (root / "labels.json").write_text(json.dumps(labels, indent=1))
    if ground_truths is not None:
        (root / "gt").mkdir(exist_ok=True)
        for im, gt in zip(database.images, ground_truths):
            Image.fromarray(gt.label_map).save(root / "gt" / (Path(im.identifier).stem + ".png"))
