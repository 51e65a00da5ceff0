import numpy as np
import pytest

from artifact.synth import CLASS_COLOURS, MAX_CLASSES, class_names, split, synth_dataset


def test_bitwise_deterministic():
    a, ga = synth_dataset(3, 6, 4)
    b, gb = synth_dataset(3, 6, 4)
    for x, y in zip(a.images, b.images):
        np.testing.assert_array_equal(x.pixels, y.pixels)
        assert x.tags == y.tags and x.identifier == y.identifier
    for x, y in zip(ga, gb):
        np.testing.assert_array_equal(x.label_map, y.label_map)


def test_seeds_differ():
    a, _ = synth_dataset(1, 2, 4)
    b, _ = synth_dataset(2, 2, 4)
    assert not np.array_equal(a.images[0].pixels, b.images[0].pixels)


def test_single_class_tags_identical():
    db, _ = synth_dataset(0, 5, 1)
    assert {im.tags for im in db.images} == {frozenset({0})}


def test_tags_equal_classes_present():
    db, truths = synth_dataset(11, 30, 6)
    for im, gt in zip(db.images, truths):
        assert im.tags == gt.labels_present()
        assert gt.label_map.shape == im.pixels.shape[:2]


def test_class_limits():
    assert len(class_names(MAX_CLASSES)) == 8
    with pytest.raises(ValueError):
        synth_dataset(0, 2, MAX_CLASSES + 1)


def test_flat_regions_and_hues():
    db, truths = synth_dataset(4, 10, 4)
    for im, gt in zip(db.images, truths):
        for c in gt.labels_present():
            mean = im.pixels[gt.label_map == c].mean(axis=0)
            assert np.abs(mean - CLASS_COLOURS[class_names(4)[c]]).max() < 20


def test_split():
    db, truths = synth_dataset(0, 7, 3)
    (head, hg), (tail, tg) = split(db, truths, 5)
    assert len(head) == 5 and len(tail) == 2 and len(hg) == 5 and len(tg) == 2
    assert head.label_table == tail.label_table == db.label_table
