"""Hand-constructed mask fixtures shared by unit and acceptance tests."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from connseg import BinaryMask


def _fill(arr: np.ndarray, x0: int, x1: int, y0: int, y1: int) -> None:
    arr[y0 : y1 + 1, x0 : x1 + 1] = True


# Rectangles (x0, x1, y0, y1), inclusive, on a 16x12 canvas. Ground truth has
# four components (the first isolated), the prediction five (two isolated);
# the three matched pairs are gt2~pred2, gt3~pred5, gt4~pred4.
TOPOLOGY_GT_BOXES = [(6, 8, 0, 1), (0, 4, 4, 5), (12, 13, 4, 11), (5, 8, 8, 9)]
TOPOLOGY_PRED_BOXES = [(0, 2, 0, 1), (2, 6, 4, 5), (0, 2, 8, 9), (6, 9, 8, 9), (11, 14, 10, 11)]
TOPOLOGY_SHAPE = (12, 16)


def topology_fixture() -> tuple[BinaryMask, BinaryMask]:
    """Mask pair with 4 gt / 5 pred components, 3 pairs and 3 isolated."""
    gt = np.zeros(TOPOLOGY_SHAPE, bool)
    pred = np.zeros(TOPOLOGY_SHAPE, bool)
    for box in TOPOLOGY_GT_BOXES:
        _fill(gt, *box)
    for box in TOPOLOGY_PRED_BOXES:
        _fill(pred, *box)
    return BinaryMask(gt), BinaryMask(pred)


def topology_expected_sc() -> Fraction:
    """Independent enumeration of the fixture's semantic connectivity.

    Components are enumerated straight from the rectangle coordinates as
    pixel sets; per-gt connectivity is the mean IoU over intersecting
    prediction sets, averaged over gt components plus isolated predictions.
    """

    def pixels(box):
        x0, x1, y0, y1 = box
        return {(x, y) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1)}

    gts = [pixels(b) for b in TOPOLOGY_GT_BOXES]
    preds = [pixels(b) for b in TOPOLOGY_PRED_BOXES]

    per_gt = []
    matched_preds = set()
    for g in gts:
        ious = []
        for j, p in enumerate(preds):
            inter = len(g & p)
            if inter:
                ious.append(Fraction(inter, len(g | p)))
                matched_preds.add(j)
        per_gt.append(sum(ious) / len(ious) if ious else Fraction(0))
    n_isolated_preds = len(preds) - len(matched_preds)
    n_terms = len(gts) + n_isolated_preds
    return sum(per_gt, Fraction(0)) / n_terms


def fragmentation_fixture() -> tuple[BinaryMask, BinaryMask]:
    """1x16 pair: gt = {0-3} u {8-11}, pred = {0-3} u {10-13} u {15}; SC = 4/9."""
    g = np.zeros((1, 16), bool)
    g[0, 0:4] = True
    g[0, 8:12] = True
    p = np.zeros((1, 16), bool)
    p[0, 0:4] = True
    p[0, 10:14] = True
    p[0, 15] = True
    return BinaryMask(g), BinaryMask(p)


def disjoint_fixture() -> tuple[BinaryMask, BinaryMask]:
    """1x16 pair with no intersection: gt = {8-10}, pred = {0-1}; loss = 5/16."""
    g = np.zeros((1, 16), bool)
    g[0, 8:11] = True
    p = np.zeros((1, 16), bool)
    p[0, 0:2] = True
    return BinaryMask(g), BinaryMask(p)
