"""Connected-component labeling: oracle agreement, canonical form, stats."""

import numpy as np
import pytest

from connseg import (
    BinaryMask,
    UnionFind,
    canonicalize_labels,
    component_stats,
    label_components_bbdt,
    label_components_floodfill,
    mask_area,
)

from conftest import mask_from_rows, random_mask


class TestUnionFind:
    def test_find_is_idempotent(self):
        uf = UnionFind(8)
        labels = [uf.make_label() for _ in range(5)]
        uf.union(labels[0], labels[3])
        uf.union(labels[3], labels[4])
        for x in labels:
            assert uf.find(uf.find(x)) == uf.find(x)

    def test_union_merges_to_single_root(self):
        uf = UnionFind(8)
        labels = [uf.make_label() for _ in range(4)]
        uf.union(labels[0], labels[1])
        uf.union(labels[2], labels[3])
        uf.union(labels[1], labels[2])
        roots = {uf.find(x) for x in labels}
        assert len(roots) == 1

    def test_resolve_maps_every_label_to_one_root(self):
        uf = UnionFind(16)
        labels = [uf.make_label() for _ in range(10)]
        for a, b in [(1, 2), (3, 4), (2, 3), (7, 8)]:
            uf.union(a, b)
        resolved = uf.resolve()
        assert resolved[0] == 0
        for x in labels:
            assert resolved[x] == uf.find(x)

    def test_bounds_checked(self):
        uf = UnionFind(2)
        uf.make_label()
        with pytest.raises(IndexError):
            uf.find(5)
        with pytest.raises(IndexError):
            uf.union(0, 1)


class TestFloodFill:
    def test_diagonal_checkerboard_is_one_component(self):
        lm = label_components_floodfill(mask_from_rows("#.", ".#"))
        assert lm.num_components == 1

    def test_hollow_ring_is_one_component(self):
        lm = label_components_floodfill(mask_from_rows("###", "#.#", "###"))
        assert lm.num_components == 1
        assert sorted(np.unique(lm.labels).tolist()) == [0, 1]

    def test_two_pixels_split_by_background_column(self):
        lm = label_components_floodfill(mask_from_rows("#.#"))
        assert lm.num_components == 2
        assert lm.labels.tolist() == [[1, 0, 2]]


class TestBBDT:
    def test_empty_mask(self):
        lm = label_components_bbdt(BinaryMask(np.zeros((5, 7), bool)))
        assert lm.num_components == 0
        assert not lm.labels.any()

    def test_diagonal_touch_is_one_component(self):
        lm = label_components_bbdt(mask_from_rows(".#", "#."))
        assert lm.num_components == 1

    def test_row_with_three_runs(self):
        row = np.zeros((1, 16), bool)
        row[0, 0:4] = True
        row[0, 8:12] = True
        row[0, 15] = True
        lm = label_components_bbdt(BinaryMask(row))
        assert lm.num_components == 3
        expected = np.zeros((1, 16), np.int32)
        expected[0, 0:4] = 1
        expected[0, 8:12] = 2
        expected[0, 15] = 3
        assert np.array_equal(lm.labels, expected)


@pytest.mark.parametrize("label_fn", [label_components_bbdt, label_components_floodfill])
class TestSharedContract:
    def test_all_foreground_single_component(self, label_fn):
        lm = label_fn(BinaryMask(np.ones((7, 5), bool)))
        assert lm.num_components == 1

    def test_areas_sum_to_mask_area(self, label_fn, rng):
        for _ in range(20):
            m = random_mask(rng, int(rng.integers(1, 40)), int(rng.integers(1, 40)), 0.5)
            lm = label_fn(m)
            stats = component_stats(lm)
            assert sum(s.area for s in stats) == mask_area(m)

    def test_transposition_preserves_partition(self, label_fn, rng):
        for _ in range(10):
            m = random_mask(rng, int(rng.integers(2, 30)), int(rng.integers(2, 30)), 0.5)
            lm = label_fn(m)
            lm_t = label_fn(BinaryMask(m.pixels.T))
            assert lm_t.num_components == lm.num_components
            # the transposed labeling is the transposed partition, renumbered
            assert canonicalize_labels(lm.labels.T) == lm_t

    def test_one_pixel_wide_images(self, label_fn, rng):
        for _ in range(20):
            n = int(rng.integers(1, 50))
            col = random_mask(rng, n, 1, 0.6)
            row = random_mask(rng, 1, n, 0.6)
            for m in (col, row):
                lm = label_fn(m)
                oracle = label_components_floodfill(m)
                assert lm == oracle


class TestOracleEquivalence:
    def test_random_masks_match_oracle(self, rng):
        for _ in range(200):
            h = int(rng.integers(1, 64))
            w = int(rng.integers(1, 64))
            m = random_mask(rng, h, w, rng.uniform(0.05, 0.95))
            assert label_components_bbdt(m) == label_components_floodfill(m)

    def test_structured_patterns(self):
        patterns = [
            ["#" * 16] * 16,
            ["#.#.#.#.", ".#.#.#.#"] * 4,
            ["########", "#......#", "#.####.#", "#.#..#.#", "#.####.#", "#......#", "########"],
            ["#"],
            ["."],
            ["##", "##"],
        ]
        for rows in patterns:
            m = mask_from_rows(*rows)
            assert label_components_bbdt(m) == label_components_floodfill(m)

    def test_relabel_then_canonicalize_identity(self, rng):
        for _ in range(10):
            m = random_mask(rng, 20, 20, 0.5)
            lm = label_components_bbdt(m)
            if lm.num_components == 0:
                continue
            perm = np.concatenate([[0], rng.permutation(lm.num_components) + 1])
            assert canonicalize_labels(perm[lm.labels]) == lm


class TestComponentStats:
    def test_empty(self):
        lm = label_components_bbdt(BinaryMask(np.zeros((4, 4), bool)))
        assert component_stats(lm) == []

    def test_full_image(self):
        lm = label_components_bbdt(BinaryMask(np.ones((4, 4), bool)))
        (s,) = component_stats(lm)
        assert s.id == 1
        assert s.area == 16
        assert s.bbox == (0, 0, 3, 3)

    def test_row_areas(self):
        row = np.zeros((1, 16), bool)
        row[0, 0:4] = True
        row[0, 8:12] = True
        row[0, 15] = True
        stats = component_stats(label_components_bbdt(BinaryMask(row)))
        assert [s.area for s in stats] == [4, 4, 1]
        assert stats[0].bbox == (0, 0, 3, 0)
        assert stats[2].bbox == (15, 0, 15, 0)

    def test_bbox_encloses_component(self, rng):
        m = random_mask(rng, 25, 25, 0.3)
        lm = label_components_bbdt(m)
        for s in component_stats(lm):
            ys, xs = np.nonzero(lm.labels == s.id)
            assert s.bbox == (xs.min(), ys.min(), xs.max(), ys.max())
