from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rangepose.rangeio import RangeImage

DATA_DIR = Path(__file__).parent / "data"


def random_image(rng: np.random.Generator, height: int, width: int,
                 invalid_frac: float = 0.0) -> RangeImage:
    depth = rng.uniform(0.0, 100.0, (height, width))
    valid = np.ones((height, width), dtype=bool)
    if invalid_frac > 0:
        valid &= rng.random((height, width)) >= invalid_frac
    return RangeImage(depth, valid)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)
