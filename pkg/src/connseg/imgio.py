"""Raster file I/O: 8-bit grayscale/RGB PNG and 32-bit float PFM.

Mask PNGs: on read any value > 0 is foreground; on write foreground = 255.
Probability maps use grayscale "Pf" PFM with a little-endian scale header;
rows are stored bottom-to-top as the format prescribes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .raster import BinaryMask, LabelMap, ProbabilityMap

__all__ = [
    "read_mask_png",
    "write_mask_png",
    "read_image",
    "write_image_png",
    "write_label_png",
    "read_pfm",
    "write_pfm",
    "read_probability_pfm",
    "write_probability_pfm",
]

# tolerated numeric slack when clamping PFM values into [0, 1]
_PFM_CLAMP_TOL = 1e-6


def read_mask_png(path: str | Path) -> BinaryMask:
    """Load a binary mask from an 8-bit grayscale PNG (any value > 0 is foreground)."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return BinaryMask(arr > 0)


def write_mask_png(mask: BinaryMask, path: str | Path) -> None:
    arr = np.where(mask.pixels, np.uint8(255), np.uint8(0))
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def read_image(path: str | Path) -> np.ndarray:
    """Load a color image as uint8 (h, w, 3)."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB")).copy()


def write_image_png(image: np.ndarray, path: str | Path) -> None:
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 (h, w, 3) image, got {arr.dtype} {arr.shape}")
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def write_label_png(lm: LabelMap, path: str | Path) -> None:
    """Write a component visualization with one gray level per component id.

    Background is 0; component i maps to round(i * 255 / K). Levels are
    distinct only while K <= 255; beyond that neighbors share a gray value.
    """
    k = max(lm.num_components, 1)
    levels = np.round(lm.labels.astype(np.float64) * 255.0 / k)
    arr = np.clip(levels, 0, 255).astype(np.uint8)
    arr[(lm.labels > 0) & (arr == 0)] = 1
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def _read_pfm_line(f) -> str:
    buf = b""
    while True:
        c = f.read(1)
        if not c:
            raise ValueError("unexpected end of PFM header")
        if c in b"\r\n":
            if buf:
                return buf.decode("ascii")
            continue
        buf += c


def read_pfm(path: str | Path) -> np.ndarray:
    """Read a PFM file; returns float32 (h, w) for "Pf" or (h, w, 3) for "PF"."""
    with open(path, "rb") as f:
        ident = _read_pfm_line(f)
        if ident == "Pf":
            channels = 1
        elif ident == "PF":
            channels = 3
        else:
            raise ValueError(f"not a PFM file (identifier {ident!r})")
        dims = _read_pfm_line(f).split()
        if len(dims) != 2:
            raise ValueError(f"malformed PFM dimension line: {dims!r}")
        width, height = int(dims[0]), int(dims[1])
        scale = float(_read_pfm_line(f))
        if scale == 0:
            raise ValueError("PFM scale must be nonzero")
        endian = "<" if scale < 0 else ">"
        count = width * height * channels
        raw = f.read(count * 4)
        if len(raw) != count * 4:
            raise ValueError("truncated PFM pixel data")
    data = np.frombuffer(raw, dtype=endian + "f4").astype(np.float32)
    if abs(scale) != 1.0:
        data = data * np.float32(abs(scale))
    if channels == 1:
        data = data.reshape(height, width)
    else:
        data = data.reshape(height, width, 3)
    # rows are stored bottom-to-top
    return data[::-1].copy()


def write_pfm(data: np.ndarray, path: str | Path) -> None:
    """Write float32 data as little-endian PFM ("Pf" for 2D, "PF" for (h, w, 3))."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        ident = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        ident = b"PF"
    else:
        raise ValueError(f"PFM data must be (h, w) or (h, w, 3), got {arr.shape}")
    h, w = arr.shape[0], arr.shape[1]
    with open(path, "wb") as f:
        f.write(ident + b"\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(arr[::-1].astype("<f4").tobytes())


def read_probability_pfm(path: str | Path) -> ProbabilityMap:
    """Read a grayscale PFM as a probability map, clamp-checking values into [0, 1]."""
    data = read_pfm(path)
    if data.ndim != 2:
        raise ValueError("probability PFM must be grayscale ('Pf')")
    if not np.all(np.isfinite(data)):
        raise ValueError(f"non-finite values in probability PFM {path}")
    lo, hi = float(data.min()), float(data.max())
    if lo < -_PFM_CLAMP_TOL or hi > 1.0 + _PFM_CLAMP_TOL:
        raise ValueError(f"values outside [0, 1] in probability PFM {path}: [{lo}, {hi}]")
    return ProbabilityMap(np.clip(data, 0.0, 1.0))


def write_probability_pfm(p: ProbabilityMap, path: str | Path) -> None:
    write_pfm(p.probs, path)
