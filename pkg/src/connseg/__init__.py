"""Connectivity-aware portrait segmentation toolkit.

Connected-component labeling (block-based scan plus a flood-fill oracle),
the semantic-connectivity metric and its hard/cold-start/soft losses,
standard segmentation metrics, a dataset/compositing harness, and
inference-only lightweight network blocks.
"""

from .raster import (
    BinaryMask,
    DimensionMismatch,
    LabelMap,
    ProbabilityMap,
    binarize,
    canonicalize_labels,
    mask_area,
    mask_intersection,
    mask_union,
)
from .ccl import (
    ComponentStats,
    UnionFind,
    component_stats,
    label_components_bbdt,
    label_components_floodfill,
)
from .connectivity import (
    ConnectivityReport,
    MatchGraph,
    SoftLossResult,
    combined_loss,
    component_iou,
    gt_connectivity,
    match_components,
    sc_loss_hard,
    sc_loss_soft,
    semantic_connectivity,
)
from .metrics import ConfusionMatrix, accumulate, evaluate_manifest, miou, pixel_accuracy
from .dataset import (
    DatasetManifest,
    FrameRecord,
    ManifestError,
    VideoAttributes,
    composite,
    composite_batch,
    load_manifest,
    save_manifest,
    scene_split,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "ProbabilityMap",
    "LabelMap",
    "DimensionMismatch",
    "binarize",
    "mask_area",
    "mask_union",
    "mask_intersection",
    "canonicalize_labels",
    "UnionFind",
    "ComponentStats",
    "label_components_bbdt",
    "label_components_floodfill",
    "component_stats",
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
    "ConfusionMatrix",
    "accumulate",
    "miou",
    "pixel_accuracy",
    "evaluate_manifest",
    "DatasetManifest",
    "FrameRecord",
    "VideoAttributes",
    "ManifestError",
    "load_manifest",
    "save_manifest",
    "scene_split",
    "composite",
    "composite_batch",
]
