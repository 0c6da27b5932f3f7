"""Segmentation evaluation: confusion matrix, per-class IoU, mIoU, pixel accuracy,
and the manifest-level evaluation driver that also aggregates mean semantic
connectivity.

mIoU is computed from a single dataset-wide confusion matrix (not a per-image
mean); a class absent from both ground truth and prediction scores IoU 1 so
frames without people stay well-defined.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import imgio
from .connectivity import sc_loss_hard
from .raster import BinaryMask, DimensionMismatch, binarize

__all__ = [
    "ConfusionMatrix",
    "accumulate",
    "miou",
    "pixel_accuracy",
    "evaluate_manifest",
    "resolve_prediction",
]

_CLASSES = 2  # background, person


class ConfusionMatrix:
    """2x2 pixel-count table indexed (gt_class, pred_class); merge with ``+``."""

    def __init__(self, counts: np.ndarray | None = None):
        if counts is None:
            counts = np.zeros((_CLASSES, _CLASSES), dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (_CLASSES, _CLASSES) or np.any(counts < 0):
            raise ValueError("confusion matrix must be a nonnegative 2x2 count table")
        self.counts = counts.copy()

    def add(self, gt: BinaryMask, pred: BinaryMask) -> "ConfusionMatrix":
        if gt.shape != pred.shape:
            raise DimensionMismatch(f"incompatible rasters: {gt.shape} vs {pred.shape}")
        idx = gt.pixels.astype(np.int64) * _CLASSES + pred.pixels.astype(np.int64)
        self.counts += np.bincount(idx.ravel(), minlength=_CLASSES * _CLASSES).reshape(
            _CLASSES, _CLASSES
        )
        return self

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return bool(np.array_equal(self.counts, other.counts))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def accumulate(cm: ConfusionMatrix, gt: BinaryMask, pred: BinaryMask) -> ConfusionMatrix:
    """Add one image pair's pixel counts into the matrix."""
    return cm.add(gt, pred)


def _require_nonempty(cm: ConfusionMatrix):
    if cm.total == 0:
        raise ValueError("no pixels accumulated")


def miou(cm: ConfusionMatrix) -> float:
    """Mean IoU over the background and person classes."""
    _require_nonempty(cm)
    ious = []
    for c in range(_CLASSES):
        tp = int(cm.counts[c, c])
        denom = int(cm.counts[c, :].sum()) + int(cm.counts[:, c].sum()) - tp
        ious.append(1.0 if denom == 0 else tp / denom)
    return sum(ious) / _CLASSES


def pixel_accuracy(cm: ConfusionMatrix) -> float:
    """Fraction of correctly classified pixels."""
    _require_nonempty(cm)
    return int(np.trace(cm.counts)) / cm.total


def resolve_prediction(pred_dir: str | Path, image_path: str, mask_path: str) -> Path | None:
    """Locate the prediction file for one frame.

    Tries, in order: the image stem then the mask stem, each with .png then
    .pfm, inside pred_dir.
    """
    pred_dir = Path(pred_dir)
    for stem in (Path(image_path).stem, Path(mask_path).stem):
        for suffix in (".png", ".pfm"):
            cand = pred_dir / (stem + suffix)
            if cand.is_file():
                return cand
    return None


def _load_prediction(path: Path, threshold: float) -> BinaryMask:
    if path.suffix.lower() == ".pfm":
        return binarize(imgio.read_probability_pfm(path), threshold)
    return imgio.read_mask_png(path)


def _eval_one(frame, manifest, pred_dir, threshold):
    gt = imgio.read_mask_png(manifest.resolve_path(frame.mask_path))
    pred_path = resolve_prediction(pred_dir, frame.image_path, frame.mask_path)
    if pred_path is None:
        raise FileNotFoundError(
            f"no prediction found for {frame.image_path!r} in {str(pred_dir)!r}"
        )
    pred = _load_prediction(pred_path, threshold)
    cm = ConfusionMatrix().add(gt, pred)
    loss, report = sc_loss_hard(gt, pred)
    return cm, report.sc, loss, str(pred_path)


def evaluate_manifest(
    manifest,
    pred_dir: str | Path,
    threshold: float = 0.5,
    threads: int | None = None,
) -> dict:
    """Evaluate predictions against a manifest's masks.

    Returns a JSON-ready report with dataset mIoU / pixel accuracy, mean
    semantic connectivity, per-scene aggregates and per-image rows. Workers
    run per image; the reduction walks frames in manifest order, so the
    report is identical for any thread count.
    """
    frames = manifest.frames
    scene_of = {v.video_id: v.scene_id for v in manifest.videos}

    def job(frame):
        return _eval_one(frame, manifest, pred_dir, threshold)

    if threads is not None and threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    if threads == 1 or len(frames) <= 1:
        results = [job(f) for f in frames]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, frames))

    total_cm = ConfusionMatrix()
    per_image = []
    per_scene_cm: dict[str, ConfusionMatrix] = {}
    per_scene_sc: dict[str, list[float]] = {}
    sc_values = []
    for frame, (cm, sc, loss, pred_path) in zip(frames, results):
        total_cm = total_cm + cm
        sc_values.append(sc)
        scene = scene_of[frame.video_id]
        per_scene_cm[scene] = per_scene_cm.get(scene, ConfusionMatrix()) + cm
        per_scene_sc.setdefault(scene, []).append(sc)
        per_image.append(
            {
                "image_path": frame.image_path,
                "mask_path": frame.mask_path,
                "pred_path": pred_path,
                "scene_id": scene,
                "miou": miou(cm),
                "pixel_acc": pixel_accuracy(cm),
                "sc": sc,
                "sc_loss": loss,
            }
        )

    per_scene = {
        scene: {
            "miou": miou(per_scene_cm[scene]),
            "pixel_acc": pixel_accuracy(per_scene_cm[scene]),
            "mean_sc": sum(per_scene_sc[scene]) / len(per_scene_sc[scene]),
            "n_images": len(per_scene_sc[scene]),
        }
        for scene in sorted(per_scene_cm)
    }
    return {
        "miou": miou(total_cm) if total_cm.total else None,
        "pixel_acc": pixel_accuracy(total_cm) if total_cm.total else None,
        "mean_sc": sum(sc_values) / len(sc_values) if sc_values else None,
        "n_images": len(frames),
        "per_scene": per_scene,
        "per_image": per_image,
    }
