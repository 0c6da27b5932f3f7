"""Core raster types (binary masks, probability maps, label maps) and mask algebra.

All types wrap read-only numpy arrays and are immutable after construction,
so they are safe to share across threads without locking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionMismatch",
    "BinaryMask",
    "ProbabilityMap",
    "LabelMap",
    "binarize",
    "mask_area",
    "mask_union",
    "mask_intersection",
    "canonicalize_labels",
]


class DimensionMismatch(ValueError):
    """Raised when two rasters that must share a shape do not."""


def _check_shapes(a, b):
    if a.shape != b.shape:
        raise DimensionMismatch(f"incompatible rasters: {a.shape} vs {b.shape}")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel foreground/background raster, shape (height, width), dtype bool."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=bool, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask must be a 2D raster with positive dims, got shape {arr.shape}")
        object.__setattr__(self, "pixels", _freeze(arr))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    """Per-pixel foreground probability in [0, 1], shape (height, width), float64.

    Kept in double precision so finite-difference checks against the soft
    loss gradient are not limited by storage quantization; file I/O converts
    to 32-bit floats at the PFM boundary.
    """

    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"probability map must be 2D with positive dims, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("probability map contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                f"probabilities must lie in [0, 1], got range [{arr.min()}, {arr.max()}]"
            )
        object.__setattr__(self, "probs", _freeze(arr))

    @property
    def height(self) -> int:
        return self.probs.shape[0]

    @property
    def width(self) -> int:
        return self.probs.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Connected-component id raster: 0 = background, components numbered 1..K.

    Labels are canonical: ids are dense and assigned in raster-scan order of
    each component's first pixel, so two labelings of the same partition
    compare bit-exactly.
    """

    labels: np.ndarray
    num_components: int

    def __post_init__(self):
        arr = np.array(self.labels, dtype=np.int32, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"label map must be 2D with positive dims, got shape {arr.shape}")
        k = int(self.num_components)
        flat = arr.ravel()
        nz = flat[flat != 0]
        if nz.size:
            if nz.min() < 1 or nz.max() != k:
                raise ValueError(f"labels must be dense 1..{k}, got range [{nz.min()}, {nz.max()}]")
            # first occurrence of each id must be in increasing raster order
            ids, first = np.unique(flat, return_index=True)
            if ids[0] == 0:
                ids, first = ids[1:], first[1:]
            if ids.size != k:
                raise ValueError(f"expected {k} distinct component ids, found {ids.size}")
            if np.any(np.diff(first) < 0):
                raise ValueError("label ids are not in raster-scan order of first pixels")
        elif k != 0:
            raise ValueError(f"empty label map but num_components = {k}")
        object.__setattr__(self, "labels", _freeze(arr))
        object.__setattr__(self, "num_components", k)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def foreground(self) -> BinaryMask:
        return BinaryMask(self.labels != 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelMap):
            return NotImplemented
        return (
            self.num_components == other.num_components
            and self.shape == other.shape
            and bool(np.array_equal(self.labels, other.labels))
        )


def binarize(p: ProbabilityMap, threshold: float = 0.5) -> BinaryMask:
    """Threshold a probability map; a pixel is foreground iff prob >= threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie strictly inside (0, 1), got {threshold}")
    return BinaryMask(p.probs >= threshold)


def mask_area(m: BinaryMask) -> int:
    """Number of foreground pixels."""
    return int(np.count_nonzero(m.pixels))


def mask_union(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """Pixelwise OR of two same-shaped masks."""
    _check_shapes(a.pixels, b.pixels)
    return BinaryMask(a.pixels | b.pixels)


def mask_intersection(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """Pixelwise AND of two same-shaped masks."""
    _check_shapes(a.pixels, b.pixels)
    return BinaryMask(a.pixels & b.pixels)


def canonicalize_labels(raw: np.ndarray) -> LabelMap:
    """Renumber arbitrary nonzero component ids into canonical dense form.

    Ids are reassigned 1..K in raster-scan order of each component's first
    pixel; 0 stays background. The input partition is preserved exactly.
    """
    arr = np.asarray(raw)
    if arr.ndim != 2:
        raise ValueError(f"label raster must be 2D, got shape {arr.shape}")
    flat = arr.ravel()
    ids, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    remap = np.zeros(ids.size, dtype=np.int32)
    order = np.argsort(first[ids != 0], kind="stable")
    nonzero_positions = np.flatnonzero(ids != 0)
    for rank, pos in enumerate(nonzero_positions[order], start=1):
        remap[pos] = rank
    out = remap[inverse].reshape(arr.shape)
    return LabelMap(out, int(np.count_nonzero(ids)))
