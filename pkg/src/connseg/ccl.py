"""Connected-component labeling under 8-connectivity.

Two independent implementations share the canonical LabelMap contract:

* ``label_components_bbdt`` scans 2x2 blocks with a decision cascade over the
  four preceding neighbor blocks, merging provisional block labels through a
  union-find with path compression, then resolves and renumbers in a second
  pass. Within a 2x2 block every foreground pixel is 8-adjacent to every
  other, so one label per block suffices.
* ``label_components_floodfill`` is the brute-force oracle: a raster scan
  that flood-fills each unvisited foreground pixel via an explicit stack.

Both hot loops are numba-compiled; the Python layer owns validation and the
canonical-form guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .raster import BinaryMask, LabelMap

__all__ = [
    "UnionFind",
    "ComponentStats",
    "label_components_bbdt",
    "label_components_floodfill",
    "component_stats",
]


@njit(cache=True)
def _uf_find(parents, x):
    root = x
    while parents[root] != root:
        root = parents[root]
    while parents[x] != root:  # path compression
        nxt = parents[x]
        parents[x] = root
        x = nxt
    return root


@njit(cache=True)
def _uf_union(parents, a, b):
    ra = _uf_find(parents, a)
    rb = _uf_find(parents, b)
    if ra == rb:
        return ra
    if rb < ra:
        ra, rb = rb, ra
    parents[rb] = ra  # smaller root wins, keeps merges deterministic
    return ra


class UnionFind:
    """Array-backed disjoint-set forest over provisional label ids.

    Id 0 is reserved for background and never unioned. ``find``/``union``
    delegate to the same compiled helpers the labeling kernels use.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.parents = np.zeros(capacity + 1, dtype=np.int32)
        self.next_label = 1

    def make_label(self) -> int:
        lbl = self.next_label
        if lbl >= self.parents.size:
            raise IndexError("union-find capacity exhausted")
        self.parents[lbl] = lbl
        self.next_label += 1
        return lbl

    def find(self, x: int) -> int:
        if not 1 <= x < self.next_label:
            raise IndexError(f"unknown provisional label {x}")
        return int(_uf_find(self.parents, x))

    def union(self, a: int, b: int) -> int:
        if not (1 <= a < self.next_label and 1 <= b < self.next_label):
            raise IndexError(f"unknown provisional label in union({a}, {b})")
        return int(_uf_union(self.parents, a, b))

    def resolve(self) -> np.ndarray:
        """Map every provisional label to its root; index 0 stays 0."""
        out = np.zeros(self.next_label, dtype=np.int32)
        for x in range(1, self.next_label):
            out[x] = _uf_find(self.parents, x)
        return out


@dataclass(frozen=True)
class ComponentStats:
    """Area and bounding box of one component; bbox is (min_x, min_y, max_x, max_y) inclusive."""

    id: int
    area: int
    bbox: tuple[int, int, int, int]


@njit(cache=True)
def _bbdt_scan(fg):
    """Block-based two-pass labeling; returns (canonical labels, component count).

    For block X the preceding neighbors are S (left), Q (up), P (up-left) and
    R (up-right). X connects to S iff X's left column and S's right column
    both hold foreground (any such pixel pair is 8-adjacent); to Q likewise
    via X's top row and Q's bottom row; to P / R only through the single
    diagonal pixel pair at X's top corners.
    """
    h, w = fg.shape
    bw = (w + 1) // 2
    bh = (h + 1) // 2
    block_label = np.zeros(bh * bw, np.int32)
    parents = np.zeros(bh * bw + 1, np.int32)
    next_label = 1
    for by in range(bh):
        y0 = 2 * by
        for bx in range(bw):
            x0 = 2 * bx
            tl = fg[y0, x0]
            tr = x0 + 1 < w and fg[y0, x0 + 1]
            bl = y0 + 1 < h and fg[y0 + 1, x0]
            br = x0 + 1 < w and y0 + 1 < h and fg[y0 + 1, x0 + 1]
            if not (tl or tr or bl or br):
                continue
            bidx = by * bw + bx
            lbl = 0
            if bx > 0 and (tl or bl):
                if fg[y0, x0 - 1] or (y0 + 1 < h and fg[y0 + 1, x0 - 1]):
                    lbl = block_label[bidx - 1]
            if by > 0 and (tl or tr):
                if fg[y0 - 1, x0] or (x0 + 1 < w and fg[y0 - 1, x0 + 1]):
                    q = block_label[bidx - bw]
                    lbl = q if lbl == 0 else _uf_union(parents, lbl, q)
            if bx > 0 and by > 0 and tl and fg[y0 - 1, x0 - 1]:
                p = block_label[bidx - bw - 1]
                lbl = p if lbl == 0 else _uf_union(parents, lbl, p)
            if by > 0 and tr and x0 + 2 < w and fg[y0 - 1, x0 + 2]:
                r = block_label[bidx - bw + 1]
                lbl = r if lbl == 0 else _uf_union(parents, lbl, r)
            if lbl == 0:
                lbl = next_label
                parents[lbl] = lbl
                next_label += 1
            block_label[bidx] = lbl

    for i in range(bh * bw):
        if block_label[i] != 0:
            block_label[i] = _uf_find(parents, block_label[i])

    # second pass: write resolved labels, renumbered densely in raster-scan
    # order of each component's first pixel
    labels = np.zeros((h, w), np.int32)
    canon = np.zeros(next_label, np.int32)
    count = 0
    for y in range(h):
        brow = (y // 2) * bw
        for x in range(w):
            if fg[y, x]:
                root = block_label[brow + x // 2]
                if canon[root] == 0:
                    count += 1
                    canon[root] = count
                labels[y, x] = canon[root]
    return labels, count


@njit(cache=True)
def _floodfill_scan(fg):
    """Raster scan + stack-based 8-connected flood fill; canonical by construction."""
    h, w = fg.shape
    labels = np.zeros((h, w), np.int32)
    stack = np.empty(h * w, np.int64)
    count = 0
    for y0 in range(h):
        for x0 in range(w):
            if fg[y0, x0] and labels[y0, x0] == 0:
                count += 1
                labels[y0, x0] = count
                stack[0] = y0 * w + x0
                top = 1
                while top > 0:
                    top -= 1
                    idx = stack[top]
                    y = idx // w
                    x = idx % w
                    for dy in (-1, 0, 1):
                        ny = y + dy
                        if ny < 0 or ny >= h:
                            continue
                        for dx in (-1, 0, 1):
                            nx = x + dx
                            if 0 <= nx < w and fg[ny, nx] and labels[ny, nx] == 0:
                                labels[ny, nx] = count
                                stack[top] = ny * w + nx
                                top += 1
    return labels, count


def label_components_bbdt(m: BinaryMask) -> LabelMap:
    """Label 8-connected components with the block-based decision-tree scan."""
    labels, count = _bbdt_scan(m.pixels)
    return LabelMap(labels, int(count))


def label_components_floodfill(m: BinaryMask) -> LabelMap:
    """Label 8-connected components by exhaustive flood fill (oracle implementation)."""
    labels, count = _floodfill_scan(m.pixels)
    return LabelMap(labels, int(count))


def component_stats(lm: LabelMap) -> list[ComponentStats]:
    """Per-component area and bounding box, ordered by component id."""
    k = lm.num_components
    if k == 0:
        return []
    labels = lm.labels
    ys, xs = np.nonzero(labels)
    ids = labels[ys, xs] - 1
    areas = np.bincount(ids, minlength=k)
    min_x = np.full(k, labels.shape[1], dtype=np.int64)
    max_x = np.full(k, -1, dtype=np.int64)
    min_y = np.full(k, labels.shape[0], dtype=np.int64)
    max_y = np.full(k, -1, dtype=np.int64)
    np.minimum.at(min_x, ids, xs)
    np.maximum.at(max_x, ids, xs)
    np.minimum.at(min_y, ids, ys)
    np.maximum.at(max_y, ids, ys)
    return [
        ComponentStats(
            id=i + 1,
            area=int(areas[i]),
            bbox=(int(min_x[i]), int(min_y[i]), int(max_x[i]), int(max_y[i])),
        )
        for i in range(k)
    ]
