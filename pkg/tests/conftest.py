"""Shared test helpers."""

from __future__ import annotations

import numpy as np
import pytest

from connseg import BinaryMask


def mask_from_rows(*rows: str) -> BinaryMask:
    """Build a mask from strings; '#', 'X' or '1' mark foreground."""
    grid = [[ch in "#X1" for ch in row] for row in rows]
    return BinaryMask(np.array(grid, dtype=bool))


def random_mask(rng: np.random.Generator, h: int, w: int, density: float) -> BinaryMask:
    return BinaryMask(rng.random((h, w)) < density)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
