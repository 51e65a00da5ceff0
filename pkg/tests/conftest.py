import numpy as np
import pytest

from artifact.dataset import AuxiliaryDatabase, Label, TaggedImage


def flat_image(rgb, size=(24, 24), noise=0.0, seed=0):
    img = np.empty(size + (3,), dtype=np.float64)
    img[:] = rgb
    if noise:
        img += np.random.default_rng(seed).normal(0.0, noise, img.shape)
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def make_db(images_and_tags, names):
    table = tuple(Label(i, n) for i, n in enumerate(names))
    images = tuple(TaggedImage(px, frozenset(tags), f"im{k:02d}.png") for k, (px, tags) in enumerate(images_and_tags))
    return AuxiliaryDatabase(images, table)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    if module is None or not module.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in module.VERDICTS:
        terminalreporter.write_line(module.VERDICTS[number])
