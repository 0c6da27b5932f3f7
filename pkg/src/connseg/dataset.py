"""Dataset manifest handling, scene-level splitting, and portrait compositing.

A manifest is one JSON document listing videos (with scene id and clip-level
attributes) and frames (image/mask paths plus the owning video). Relative
paths are resolved against the manifest file's directory.
"""

from __future__ import annotations

import json
import random
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import imgio
from .raster import BinaryMask, DimensionMismatch

__all__ = [
    "ManifestError",
    "FrameRecord",
    "VideoAttributes",
    "DatasetManifest",
    "load_manifest",
    "save_manifest",
    "scene_split",
    "fit_background",
    "composite",
    "composite_batch",
    "CompositeBatchResult",
]


class ManifestError(ValueError):
    """Raised when a manifest fails validation; message names the offending record."""


@dataclass(frozen=True)
class FrameRecord:
    image_path: str
    mask_path: str
    video_id: str
    frame_index: int

    def __post_init__(self):
        if not self.image_path or not self.mask_path:
            raise ManifestError(f"frame {self.video_id}/{self.frame_index}: empty path")
        if self.frame_index < 0:
            raise ManifestError(
                f"frame {self.video_id}/{self.frame_index}: negative frame_index"
            )


@dataclass(frozen=True)
class VideoAttributes:
    video_id: str
    scene_id: str
    num_participants: int = 0
    activities: tuple[str, ...] = ()
    wearing_mask: bool = False
    passersby: bool = False

    def __post_init__(self):
        if self.num_participants < 0:
            raise ManifestError(f"video {self.video_id!r}: negative num_participants")
        object.__setattr__(self, "activities", tuple(self.activities))


@dataclass
class DatasetManifest:
    frames: list[FrameRecord] = field(default_factory=list)
    videos: list[VideoAttributes] = field(default_factory=list)
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        self.validate()

    def validate(self):
        seen = set()
        for v in self.videos:
            if v.video_id in seen:
                raise ManifestError(f"duplicate video_id {v.video_id!r}")
            seen.add(v.video_id)
        for f in self.frames:
            if f.video_id not in seen:
                raise ManifestError(
                    f"frame {f.image_path!r} references unknown video_id {f.video_id!r}"
                )

    def video_by_id(self, video_id: str) -> VideoAttributes:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)

    def scene_ids(self) -> list[str]:
        return sorted({v.scene_id for v in self.videos})

    def resolve_path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path


def _frame_to_json(f: FrameRecord) -> dict:
    return {
        "image_path": f.image_path,
        "mask_path": f.mask_path,
        "video_id": f.video_id,
        "frame_index": f.frame_index,
    }


def _video_to_json(v: VideoAttributes) -> dict:
    return {
        "video_id": v.video_id,
        "scene_id": v.scene_id,
        "num_participants": v.num_participants,
        "activities": list(v.activities),
        "wearing_mask": v.wearing_mask,
        "passersby": v.passersby,
    }


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a manifest JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ManifestError(f"cannot parse {path}: {e}") from e
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: top-level JSON value must be an object")
    try:
        videos = [
            VideoAttributes(
                video_id=v["video_id"],
                scene_id=v["scene_id"],
                num_participants=int(v.get("num_participants", 0)),
                activities=tuple(v.get("activities", ())),
                wearing_mask=bool(v.get("wearing_mask", False)),
                passersby=bool(v.get("passersby", False)),
            )
            for v in doc.get("videos", [])
        ]
        frames = [
            FrameRecord(
                image_path=f["image_path"],
                mask_path=f["mask_path"],
                video_id=f["video_id"],
                frame_index=int(f["frame_index"]),
            )
            for f in doc.get("frames", [])
        ]
    except KeyError as e:
        raise ManifestError(f"{path}: record missing required field {e}") from e
    return DatasetManifest(frames=frames, videos=videos, base_dir=path.parent)


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    doc = {
        "videos": [_video_to_json(v) for v in manifest.videos],
        "frames": [_frame_to_json(f) for f in manifest.frames],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def scene_split(
    manifest: DatasetManifest,
    counts: tuple[int, int, int],
    seed: int = 0,
) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """Partition by scene into train/val/test manifests.

    Scene ids are shuffled with the given seed and dealt out by count, so
    every frame follows its scene and the split is reproducible.
    """
    scenes = manifest.scene_ids()
    if sum(counts) != len(scenes):
        raise ValueError(
            f"scene counts {counts} must sum to the number of distinct scenes ({len(scenes)})"
        )
    rng = random.Random(seed)
    shuffled = scenes[:]
    rng.shuffle(shuffled)
    buckets = (
        set(shuffled[: counts[0]]),
        set(shuffled[counts[0] : counts[0] + counts[1]]),
        set(shuffled[counts[0] + counts[1] :]),
    )

    def subset(scene_set):
        vids = [v for v in manifest.videos if v.scene_id in scene_set]
        vid_ids = {v.video_id for v in vids}
        frames = [f for f in manifest.frames if f.video_id in vid_ids]
        return DatasetManifest(frames=frames, videos=vids, base_dir=manifest.base_dir)

    return subset(buckets[0]), subset(buckets[1]), subset(buckets[2])


def fit_background(bg_image: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Scale then center-crop a background to (height, width), covering both dims
    without distorting the aspect ratio."""
    th, tw = size
    bh, bw = bg_image.shape[:2]
    if (bh, bw) == (th, tw):
        return bg_image
    scale = max(th / bh, tw / bw)
    nh, nw = max(th, int(np.ceil(bh * scale))), max(tw, int(np.ceil(bw * scale)))
    resized = np.asarray(
        Image.fromarray(bg_image, mode="RGB").resize((nw, nh), Image.BILINEAR)
    )
    y0 = (nh - th) // 2
    x0 = (nw - tw) // 2
    return resized[y0 : y0 + th, x0 : x0 + tw]


def _mask_boundary(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels 8-adjacent to at least one background pixel."""
    padded = np.pad(mask, 1, constant_values=False)
    interior = np.ones_like(mask)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            interior &= padded[1 + dy : 1 + dy + mask.shape[0], 1 + dx : 1 + dx + mask.shape[1]]
    return mask & ~interior


def composite(
    fg_image: np.ndarray,
    fg_mask: BinaryMask,
    bg_image: np.ndarray,
    feather: bool = False,
) -> np.ndarray:
    """Paste mask-selected foreground pixels onto a background image.

    The background is auto-fitted to the foreground's size. With ``feather``
    the 1-pixel mask boundary is linearly blended 50/50; otherwise the paste
    is exact: inside pixels equal the foreground, outside equal the background.
    """
    fg = np.asarray(fg_image)
    if fg.ndim != 3 or fg.shape[2] != 3:
        raise ValueError(f"foreground must be (h, w, 3), got {fg.shape}")
    if fg.shape[:2] != fg_mask.shape:
        raise DimensionMismatch(
            f"foreground {fg.shape[:2]} does not match mask {fg_mask.shape}"
        )
    bg = fit_background(np.asarray(bg_image), fg_mask.shape)
    if bg.shape != fg.shape:
        raise DimensionMismatch(f"background {bg.shape} does not match {fg.shape} after crop")
    sel = fg_mask.pixels[:, :, None]
    out = np.where(sel, fg, bg)
    if feather:
        edge = _mask_boundary(fg_mask.pixels)
        blend = (fg[edge].astype(np.float64) + bg[edge].astype(np.float64)) / 2.0
        out[edge] = np.round(blend).astype(out.dtype)
    return out


@dataclass
class CompositeBatchResult:
    manifest: DatasetManifest
    errors: list[tuple[FrameRecord, str]]


def composite_batch(
    manifest: DatasetManifest,
    bg_dir: str | Path,
    out_dir: str | Path,
    per_frame_backgrounds: int = 1,
    seed: int = 0,
    feather: bool = False,
) -> CompositeBatchResult:
    """Composite every manifest frame onto randomly assigned backgrounds.

    Emits images under out_dir/images and byte-identical mask copies under
    out_dir/masks, plus a manifest for the synthetic set. Background
    assignment is a seeded draw over the sorted background listing, so reruns
    reproduce it. Frames with missing files are reported and skipped.
    """
    bg_dir = Path(bg_dir)
    out_dir = Path(out_dir)
    bg_files = sorted(p for p in bg_dir.iterdir() if p.suffix.lower() == ".png")
    if not bg_files:
        raise ValueError(f"no .png backgrounds in {bg_dir}")
    if per_frame_backgrounds < 1:
        raise ValueError("per_frame_backgrounds must be >= 1")

    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)

    rng = random.Random(seed)
    # draw the full assignment first so failures cannot shift later draws
    assignment = [
        [rng.randrange(len(bg_files)) for _ in range(per_frame_backgrounds)]
        for _ in manifest.frames
    ]

    out_frames: list[FrameRecord] = []
    errors: list[tuple[FrameRecord, str]] = []
    for frame, bg_indices in zip(manifest.frames, assignment):
        try:
            fg = imgio.read_image(manifest.resolve_path(frame.image_path))
            mask = imgio.read_mask_png(manifest.resolve_path(frame.mask_path))
        except (OSError, ValueError) as e:
            errors.append((frame, str(e)))
            continue
        for j, bg_idx in enumerate(bg_indices):
            try:
                bg = imgio.read_image(bg_files[bg_idx])
                out = composite(fg, mask, bg, feather=feather)
            except (OSError, ValueError) as e:
                errors.append((frame, f"background {bg_files[bg_idx].name}: {e}"))
                continue
            stem = f"{frame.video_id}_{frame.frame_index:05d}_{j:02d}"
            img_rel = f"images/{stem}.png"
            mask_rel = f"masks/{stem}{Path(frame.mask_path).suffix}"
            imgio.write_image_png(out, out_dir / img_rel)
            shutil.copyfile(manifest.resolve_path(frame.mask_path), out_dir / mask_rel)
            out_frames.append(
                FrameRecord(
                    image_path=img_rel,
                    mask_path=mask_rel,
                    video_id=frame.video_id,
                    frame_index=frame.frame_index * per_frame_backgrounds + j,
                )
            )

    out_manifest = DatasetManifest(
        frames=out_frames, videos=list(manifest.videos), base_dir=out_dir
    )
    return CompositeBatchResult(manifest=out_manifest, errors=errors)
