import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from regfuse.image import Image


def textured(seed: int, size: int = 40) -> Image:
    """Smooth random field with structure at several scales."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = (
        0.5
        + 0.2 * np.sin(2 * np.pi * (2.3 * xx + 1.7 * yy + rng.uniform()))
        + 0.15 * np.sin(2 * np.pi * (5.1 * xx - 3.3 * yy + rng.uniform()))
        + 0.1 * rng.random((size, size))
    )
    return Image(np.clip(img, 0.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
