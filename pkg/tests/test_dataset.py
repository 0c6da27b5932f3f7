"""Manifest handling, scene splits, and the compositing pipeline."""

import numpy as np
import pytest

from connseg import (
    BinaryMask,
    DatasetManifest,
    DimensionMismatch,
    FrameRecord,
    ManifestError,
    VideoAttributes,
    composite,
    composite_batch,
    load_manifest,
    save_manifest,
    scene_split,
)
from connseg import imgio
from connseg.dataset import fit_background

from conftest import mask_from_rows, random_mask


def make_manifest(n_scenes=3, videos_per_scene=2, frames_per_video=2) -> DatasetManifest:
    videos = []
    frames = []
    for s in range(n_scenes):
        for v in range(videos_per_scene):
            vid = f"s{s:02d}_v{v}"
            videos.append(
                VideoAttributes(
                    video_id=vid,
                    scene_id=f"scene{s:02d}",
                    num_participants=v + 1,
                    activities=("talking",),
                )
            )
            for f in range(frames_per_video):
                frames.append(
                    FrameRecord(
                        image_path=f"img/{vid}_{f}.png",
                        mask_path=f"ann/{vid}_{f}.png",
                        video_id=vid,
                        frame_index=f,
                    )
                )
    return DatasetManifest(frames=frames, videos=videos)


class TestManifest:
    def test_empty_manifest_is_valid(self):
        m = DatasetManifest()
        assert m.frames == [] and m.videos == []

    def test_duplicate_video_id_rejected(self):
        with pytest.raises(ManifestError, match="dup_id"):
            DatasetManifest(
                videos=[
                    VideoAttributes(video_id="dup_id", scene_id="a"),
                    VideoAttributes(video_id="dup_id", scene_id="b"),
                ]
            )

    def test_dangling_video_reference_rejected(self):
        with pytest.raises(ManifestError, match="ghost"):
            DatasetManifest(
                frames=[
                    FrameRecord(
                        image_path="x.png", mask_path="y.png", video_id="ghost", frame_index=0
                    )
                ]
            )

    def test_negative_frame_index_rejected(self):
        with pytest.raises(ManifestError):
            FrameRecord(image_path="x.png", mask_path="y.png", video_id="v", frame_index=-1)

    def test_round_trip(self, tmp_path):
        m = make_manifest()
        path = tmp_path / "m.json"
        save_manifest(m, path)
        back = load_manifest(path)
        assert back.frames == m.frames
        assert back.videos == m.videos

    def test_parse_error_reported(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_missing_field_reported(self, tmp_path):
        path = tmp_path / "missing.json"
        path.write_text('{"videos": [], "frames": [{"image_path": "a.png"}]}')
        with pytest.raises(ManifestError, match="mask_path"):
            load_manifest(path)

    def test_resolve_path_relative_to_manifest(self, tmp_path):
        m = make_manifest()
        save_manifest(m, tmp_path / "m.json")
        back = load_manifest(tmp_path / "m.json")
        assert back.resolve_path("img/a.png") == tmp_path / "img" / "a.png"


class TestSceneSplit:
    def test_23_scenes_into_11_6_6(self):
        m = make_manifest(n_scenes=23)
        train, val, test = scene_split(m, (11, 6, 6), seed=7)
        assert len(train.scene_ids()) == 11
        assert len(val.scene_ids()) == 6
        assert len(test.scene_ids()) == 6

    def test_scene_disjointness_and_frame_conservation(self):
        m = make_manifest(n_scenes=23)
        parts = scene_split(m, (11, 6, 6), seed=3)
        all_scenes = [s for p in parts for s in p.scene_ids()]
        assert len(all_scenes) == len(set(all_scenes)) == 23
        assert sum(len(p.frames) for p in parts) == len(m.frames)

    def test_deterministic_for_fixed_seed(self):
        m = make_manifest(n_scenes=23)
        a = scene_split(m, (11, 6, 6), seed=42)
        b = scene_split(m, (11, 6, 6), seed=42)
        for pa, pb in zip(a, b):
            assert pa.frames == pb.frames
            assert pa.videos == pb.videos

    def test_different_seeds_differ(self):
        m = make_manifest(n_scenes=23)
        a, _, _ = scene_split(m, (11, 6, 6), seed=0)
        b, _, _ = scene_split(m, (11, 6, 6), seed=1)
        assert a.scene_ids() != b.scene_ids()

    def test_three_scenes_one_each(self):
        m = make_manifest(n_scenes=3)
        parts = scene_split(m, (1, 1, 1), seed=5)
        for p in parts:
            assert len(p.scene_ids()) == 1
            scene = p.scene_ids()[0]
            vids = {v.video_id for v in m.videos if v.scene_id == scene}
            expected = [f for f in m.frames if f.video_id in vids]
            assert p.frames == expected

    def test_count_mismatch_rejected(self):
        m = make_manifest(n_scenes=3)
        with pytest.raises(ValueError):
            scene_split(m, (2, 2, 2), seed=0)


class TestComposite:
    def test_all_foreground_keeps_image(self, rng):
        fg = rng.integers(0, 256, size=(6, 8, 3), dtype=np.uint8)
        bg = rng.integers(0, 256, size=(6, 8, 3), dtype=np.uint8)
        out = composite(fg, BinaryMask(np.ones((6, 8), bool)), bg)
        assert np.array_equal(out, fg)

    def test_all_background_keeps_background(self, rng):
        fg = rng.integers(0, 256, size=(6, 8, 3), dtype=np.uint8)
        bg = rng.integers(0, 256, size=(6, 8, 3), dtype=np.uint8)
        out = composite(fg, BinaryMask(np.zeros((6, 8), bool)), bg)
        assert np.array_equal(out, bg)

    def test_left_half_mask(self, rng):
        fg = rng.integers(0, 256, size=(4, 8, 3), dtype=np.uint8)
        bg = rng.integers(0, 256, size=(4, 8, 3), dtype=np.uint8)
        mask = np.zeros((4, 8), bool)
        mask[:, :4] = True
        out = composite(fg, BinaryMask(mask), bg)
        assert np.array_equal(out[:, :4], fg[:, :4])
        assert np.array_equal(out[:, 4:], bg[:, 4:])

    def test_feather_blends_only_edge(self, rng):
        fg = np.full((5, 5, 3), 200, np.uint8)
        bg = np.full((5, 5, 3), 0, np.uint8)
        mask = mask_from_rows(".....", ".###.", ".###.", ".###.", ".....")
        plain = composite(fg, mask, bg, feather=False)
        soft = composite(fg, mask, bg, feather=True)
        # the 3x3 block's ring is boundary, the center pixel interior
        assert soft[2, 2].tolist() == [200, 200, 200]
        assert soft[1, 1].tolist() == [100, 100, 100]
        assert np.array_equal(plain[1, 1], [200, 200, 200])
        assert np.array_equal(soft[~mask.pixels], plain[~mask.pixels])

    def test_mask_size_mismatch_rejected(self, rng):
        fg = rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8)
        with pytest.raises(DimensionMismatch):
            composite(fg, BinaryMask(np.ones((5, 5), bool)), fg)

    def test_background_fitting(self, rng):
        bg = rng.integers(0, 256, size=(10, 30, 3), dtype=np.uint8)
        fitted = fit_background(bg, (8, 8))
        assert fitted.shape == (8, 8, 3)
        fg = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
        out = composite(fg, BinaryMask(np.zeros((8, 8), bool)), bg)
        assert out.shape == (8, 8, 3)


def build_composite_inputs(tmp_path, rng, n_frames=1):
    src = tmp_path / "src"
    bgs = tmp_path / "bgs"
    (src / "img").mkdir(parents=True)
    (src / "ann").mkdir(parents=True)
    bgs.mkdir()
    frames = []
    for i in range(n_frames):
        img = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
        mask = random_mask(rng, 8, 8, 0.4)
        imgio.write_image_png(img, src / "img" / f"f{i}.png")
        imgio.write_mask_png(mask, src / "ann" / f"f{i}.png")
        frames.append(
            FrameRecord(
                image_path=f"img/f{i}.png",
                mask_path=f"ann/f{i}.png",
                video_id="v0",
                frame_index=i,
            )
        )
    for b in range(3):
        bg = rng.integers(0, 256, size=(12, 9, 3), dtype=np.uint8)
        imgio.write_image_png(bg, bgs / f"bg{b}.png")
    manifest = DatasetManifest(
        frames=frames, videos=[VideoAttributes(video_id="v0", scene_id="s0")], base_dir=src
    )
    return manifest, bgs


class TestCompositeBatch:
    def test_one_frame_three_backgrounds(self, tmp_path, rng):
        manifest, bgs = build_composite_inputs(tmp_path, rng, n_frames=1)
        result = composite_batch(manifest, bgs, tmp_path / "out", per_frame_backgrounds=3)
        assert len(result.manifest.frames) == 3
        assert result.errors == []

    def test_masks_byte_identical(self, tmp_path, rng):
        manifest, bgs = build_composite_inputs(tmp_path, rng, n_frames=2)
        result = composite_batch(manifest, bgs, tmp_path / "out", per_frame_backgrounds=2)
        for src_frame, out_frames in zip(
            manifest.frames,
            [result.manifest.frames[:2], result.manifest.frames[2:]],
        ):
            src_bytes = manifest.resolve_path(src_frame.mask_path).read_bytes()
            for out_frame in out_frames:
                out_bytes = result.manifest.resolve_path(out_frame.mask_path).read_bytes()
                assert out_bytes == src_bytes

    def test_rerun_same_seed_is_identical(self, tmp_path, rng):
        manifest, bgs = build_composite_inputs(tmp_path, rng, n_frames=2)
        r1 = composite_batch(manifest, bgs, tmp_path / "out1", seed=9, per_frame_backgrounds=2)
        r2 = composite_batch(manifest, bgs, tmp_path / "out2", seed=9, per_frame_backgrounds=2)
        for f1, f2 in zip(r1.manifest.frames, r2.manifest.frames):
            assert f1.image_path == f2.image_path
            b1 = (tmp_path / "out1" / f1.image_path).read_bytes()
            b2 = (tmp_path / "out2" / f2.image_path).read_bytes()
            assert b1 == b2

    def test_missing_file_reported_and_skipped(self, tmp_path, rng):
        manifest, bgs = build_composite_inputs(tmp_path, rng, n_frames=2)
        (tmp_path / "src" / "img" / "f0.png").unlink()
        result = composite_batch(manifest, bgs, tmp_path / "out", per_frame_backgrounds=1)
        assert len(result.errors) == 1
        assert result.errors[0][0].frame_index == 0
        assert len(result.manifest.frames) == 1

    def test_outside_pixels_equal_background(self, tmp_path, rng):
        manifest, bgs = build_composite_inputs(tmp_path, rng, n_frames=1)
        result = composite_batch(manifest, bgs, tmp_path / "out", per_frame_backgrounds=1, seed=1)
        frame = result.manifest.frames[0]
        out_img = imgio.read_image(result.manifest.resolve_path(frame.image_path))
        mask = imgio.read_mask_png(result.manifest.resolve_path(frame.mask_path))
        src_img = imgio.read_image(manifest.resolve_path(manifest.frames[0].image_path))
        assert np.array_equal(out_img[mask.pixels], src_img[mask.pixels])
