import numpy as np
import pytest
from PIL import Image


def write_png(path, seed, size=48):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    Image.fromarray(pixels).save(path)


@pytest.fixture(scope="session")
def image_tree(tmp_path_factory):
    """3 categories x 2 images of random pixels."""
    root = tmp_path_factory.mktemp("images")
    for c, category in enumerate(["cars", "faces", "ships"]):
        (root / category).mkdir()
        for i in range(2):
            write_png(root / category / f"img_{i}.png", seed=100 * c + i)
    return root
