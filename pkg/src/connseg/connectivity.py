"""Semantic connectivity: component matching, the SC metric, and SC losses.

Ground-truth and prediction components are matched by nonzero pixel
intersection. Each ground-truth component scores the mean IoU over the
prediction components it intersects (0 if it intersects none); the semantic
connectivity SC averages those scores over N terms, where N counts every
ground-truth component plus every prediction component that intersects no
ground-truth component. SC is 1 exactly when the component structures agree
perfectly, and the hard loss is 1 - SC.

When no component pair exists at all (the cold-start regime) the loss
switches to the normalized covered area |P u G| / |I| so that gradients do
not vanish; the soft variant relaxes both branches to probability sums over
a component partition frozen from the thresholded prediction, which makes
the loss piecewise differentiable with an exact analytic gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ccl import label_components_bbdt
from .raster import BinaryMask, LabelMap, ProbabilityMap, binarize

__all__ = [
    "MatchGraph",
    "ConnectivityReport",
    "SoftLossResult",
    "match_components",
    "component_iou",
    "gt_connectivity",
    "semantic_connectivity",
    "sc_loss_hard",
    "sc_loss_soft",
    "combined_loss",
]


def _check_same_shape(a, b):
    if a.shape != b.shape:
        from .raster import DimensionMismatch

        raise DimensionMismatch(f"incompatible rasters: {a.shape} vs {b.shape}")


@dataclass(frozen=True)
class MatchGraph:
    """Intersection structure between ground-truth and prediction components.

    ``pairs`` maps each matched gt id to the tuple of prediction ids it
    intersects; one prediction id may appear under several gt ids and vice
    versa. Components with no intersection at all land in the isolated sets.
    """

    gt_components: tuple[int, ...]
    pred_components: tuple[int, ...]
    pairs: dict[int, tuple[int, ...]]
    pair_iou: dict[tuple[int, int], float]
    pair_intersection: dict[tuple[int, int], int]
    isolated_preds: frozenset[int]
    isolated_gts: frozenset[int]

    @property
    def num_pairs(self) -> int:
        return len(self.pair_iou)

    def has_pairs(self) -> bool:
        return bool(self.pair_iou)


@dataclass(frozen=True)
class ConnectivityReport:
    """Connectivity scores for one image pair.

    ``n_terms`` counts ground-truth components plus isolated prediction
    components; ``sc`` is the mean of per-gt connectivity over those terms
    (isolated predictions contribute zeros). Outside the cold-start regime
    ``loss`` equals 1 - sc.
    """

    per_gt_connectivity: tuple[tuple[int, float], ...]
    sc: float
    n_terms: int
    loss: float
    cold_start: bool
    isolated_preds: tuple[int, ...] = ()
    gt_matches: dict[int, tuple[int, ...]] | None = None  # gt id -> matched pred ids


@dataclass(frozen=True)
class SoftLossResult:
    loss: float
    grad: np.ndarray
    report: ConnectivityReport


def match_components(gt: LabelMap, pred: LabelMap) -> MatchGraph:
    """Find all intersecting (gt, pred) component pairs in one joint raster pass."""
    _check_same_shape(gt, pred)
    gl = gt.labels
    pl = pred.labels
    kg, kp = gt.num_components, pred.num_components

    both = (gl > 0) & (pl > 0)
    codes = gl[both].astype(np.int64) * (kp + 1) + pl[both]
    # direct counting is linear when the id product stays comparable to the
    # pixel count; pathological maps with huge K fall back to sorting
    n_codes = (kg + 1) * (kp + 1)
    if n_codes <= 4 * gl.size + 64:
        hist = np.bincount(codes, minlength=n_codes)
        uniq = np.flatnonzero(hist)
        counts = hist[uniq]
    else:
        uniq, counts = np.unique(codes, return_counts=True)
    g_ids = (uniq // (kp + 1)).astype(np.int64)
    p_ids = (uniq % (kp + 1)).astype(np.int64)

    area_g = np.bincount(gl.ravel(), minlength=kg + 1)
    area_p = np.bincount(pl.ravel(), minlength=kp + 1)

    pairs: dict[int, list[int]] = {}
    pair_iou: dict[tuple[int, int], float] = {}
    pair_inter: dict[tuple[int, int], int] = {}
    matched_preds = set()
    for g, p, inter in zip(g_ids, p_ids, counts):
        g, p, inter = int(g), int(p), int(inter)
        union = int(area_g[g]) + int(area_p[p]) - inter
        pair_iou[(g, p)] = inter / union
        pair_inter[(g, p)] = inter
        pairs.setdefault(g, []).append(p)
        matched_preds.add(p)

    gt_ids = tuple(range(1, kg + 1))
    pred_ids = tuple(range(1, kp + 1))
    return MatchGraph(
        gt_components=gt_ids,
        pred_components=pred_ids,
        pairs={g: tuple(sorted(ps)) for g, ps in pairs.items()},
        pair_iou=pair_iou,
        pair_intersection=pair_inter,
        isolated_preds=frozenset(p for p in pred_ids if p not in matched_preds),
        isolated_gts=frozenset(g for g in gt_ids if g not in pairs),
    )


def component_iou(g, p) -> float:
    """Intersection over union of two component pixel sets (same-shaped bool rasters)."""
    ga = g.pixels if isinstance(g, BinaryMask) else np.asarray(g, dtype=bool)
    pa = p.pixels if isinstance(p, BinaryMask) else np.asarray(p, dtype=bool)
    _check_same_shape(ga, pa)
    union = int(np.count_nonzero(ga | pa))
    if union == 0:
        raise ValueError("IoU of two empty pixel sets is undefined")
    inter = int(np.count_nonzero(ga & pa))
    return inter / union


def _per_gt_connectivity(graph: MatchGraph, pair_iou: dict) -> tuple[tuple[int, float], ...]:
    # shared by the hard and soft paths so that binary probabilities reproduce
    # the hard result bit-for-bit
    out = []
    for g in graph.gt_components:
        ps = graph.pairs.get(g)
        if not ps:
            out.append((g, 0.0))
        else:
            out.append((g, sum(pair_iou[(g, p)] for p in ps) / len(ps)))
    return tuple(out)


def gt_connectivity(graph: MatchGraph, g_id: int) -> float:
    """Connectivity of one ground-truth component: mean IoU over its matched
    prediction components, 0 if it is isolated."""
    if g_id not in graph.gt_components:
        raise KeyError(f"unknown ground-truth component id {g_id}")
    ps = graph.pairs.get(g_id)
    if not ps:
        return 0.0
    return sum(graph.pair_iou[(g_id, p)] for p in ps) / len(ps)


def _build_report(
    graph: MatchGraph,
    pair_iou: dict,
    loss_override: float | None,
    cold_start: bool,
) -> ConnectivityReport:
    per_gt = _per_gt_connectivity(graph, pair_iou)
    n_terms = len(graph.gt_components) + len(graph.isolated_preds)
    if n_terms == 0:
        sc = 1.0  # both masks empty: vacuously perfect
    else:
        sc = sum(c for _, c in per_gt) / n_terms
    loss = (1.0 - sc) if loss_override is None else loss_override
    return ConnectivityReport(
        per_gt_connectivity=per_gt,
        sc=sc,
        n_terms=n_terms,
        loss=loss,
        cold_start=cold_start,
        isolated_preds=tuple(sorted(graph.isolated_preds)),
        gt_matches={g: graph.pairs.get(g, ()) for g in graph.gt_components},
    )


def semantic_connectivity(gt: LabelMap, pred: LabelMap) -> ConnectivityReport:
    """Semantic connectivity of a prediction against the ground truth.

    Includes the loss under the same report: 1 - sc when any pair exists,
    the normalized covered area on cold start, 0 when both maps are empty.
    """
    graph = match_components(gt, pred)
    if graph.has_pairs():
        return _build_report(graph, graph.pair_iou, loss_override=None, cold_start=False)
    n_fg = int(np.count_nonzero(gt.labels)) + int(np.count_nonzero(pred.labels))
    if n_fg == 0:
        return _build_report(graph, graph.pair_iou, loss_override=0.0, cold_start=False)
    # no pair but some foreground: cold start. Components cannot overlap here,
    # so |P u G| is the plain sum of foreground areas.
    total = gt.labels.size
    return _build_report(graph, graph.pair_iou, loss_override=n_fg / total, cold_start=True)


def sc_loss_hard(gt: BinaryMask, pred: BinaryMask) -> tuple[float, ConnectivityReport]:
    """Semantic-connectivity loss on binary masks."""
    _check_same_shape(gt, pred)
    report = semantic_connectivity(label_components_bbdt(gt), label_components_bbdt(pred))
    return report.loss, report


def sc_loss_soft(
    q: ProbabilityMap, gt: BinaryMask, threshold: float = 0.5
) -> SoftLossResult:
    """Differentiable semantic-connectivity loss over a probability map.

    The component partition is fixed by thresholding q; matched pairs then
    use the soft IoU  sum_{g^p} q / (|g| + sum_p q - sum_{g^p} q)  and the
    cold-start branch uses (sum_P q + sum_G (1-q)) / |I|. The returned grad
    is the exact partial derivative of the loss with respect to each pixel's
    probability under that fixed partition, so it is valid away from
    threshold crossings. Evaluating with q in {0, 1} reproduces the hard
    loss and report exactly.
    """
    _check_same_shape(q, gt)
    pred_mask = binarize(q, threshold)
    gt_lm = label_components_bbdt(gt)
    pred_lm = label_components_bbdt(pred_mask)
    graph = match_components(gt_lm, pred_lm)

    qa = q.probs.astype(np.float64)
    h, w = qa.shape
    grad = np.zeros((h, w), dtype=np.float64)

    if not graph.has_pairs():
        n_fg = int(np.count_nonzero(gt.pixels)) + int(np.count_nonzero(pred_mask.pixels))
        if n_fg == 0:
            return SoftLossResult(
                loss=0.0,
                grad=grad,
                report=_build_report(graph, {}, loss_override=0.0, cold_start=False),
            )
        total = qa.size
        p_sel = pred_mask.pixels
        g_sel = gt.pixels
        loss = (float(qa[p_sel].sum()) + float((1.0 - qa[g_sel]).sum())) / total
        grad[p_sel] += 1.0 / total
        grad[g_sel] -= 1.0 / total
        return SoftLossResult(
            loss=loss,
            grad=grad,
            report=_build_report(graph, {}, loss_override=loss, cold_start=True),
        )

    area_g = np.bincount(gt_lm.labels.ravel(), minlength=gt_lm.num_components + 1)
    gt_sel = {g: gt_lm.labels == g for g in graph.pairs}
    pred_sel: dict[int, np.ndarray] = {}

    n_terms = len(graph.gt_components) + len(graph.isolated_preds)
    soft_iou: dict[tuple[int, int], float] = {}
    for g in graph.gt_components:
        ps = graph.pairs.get(g)
        if not ps:
            continue
        k = len(ps)
        weight = 1.0 / (n_terms * k)
        sg = gt_sel[g]
        for p in ps:
            sp = pred_sel.get(p)
            if sp is None:
                sp = pred_sel[p] = pred_lm.labels == p
            inter = sg & sp
            a = float(qa[inter].sum())
            s_p = float(qa[sp].sum())
            b = float(area_g[g]) + s_p - a
            soft_iou[(g, p)] = a / b
            # d loss / d q = -(1/(N k)) * d iou / d q
            grad[inter] -= weight / b
            grad[sp & ~sg] += weight * a / (b * b)

    report = _build_report(graph, soft_iou, loss_override=None, cold_start=False)
    return SoftLossResult(loss=report.loss, grad=grad, report=report)


def combined_loss(seg_loss: float, sc_loss: float, lam: float = 1.0) -> float:
    """Total training loss: segmentation loss plus lam times the connectivity loss."""
    if lam < 0:
        raise ValueError(f"loss weight must be nonnegative, got {lam}")
    return seg_loss + lam * sc_loss
