import io
import math

import numpy as np
import pytest

from aiou import (
    GroupKey,
    Map,
    attention_iou,
    average_map,
    bilinear_downsample,
    heatmap_score,
    mask_score,
    read_labels,
    stratify,
)
from aiou.errors import DimensionMismatchError, EmptySetError, NoMatchedImagesError


def table_from_rows(rows):
    lines = ["image_id,t,p"]
    for image_id, t, p in rows:
        lines.append(f"{image_id},{t},{p}")
    return read_labels(io.StringIO("\n".join(lines) + "\n"))


def random_maps(rng, n, h=6, w=6, prefix="img"):
    out = {}
    for i in range(n):
        data = rng.random((h, w))
        data.flat[0] += 0.5
        out[f"{prefix}{i:03d}"] = Map(data)
    return out


class TestMaskScore:
    def test_proportional_pair_scores_one(self):
        attn = {"img0": Map([[1.0, 0.0], [0.0, 0.0]])}
        masks = {"img0": Map(np.kron([[1.0, 0.0], [0.0, 0.0]], np.ones((2, 2))))}
        report = mask_score(attn, masks)
        assert report.overall_mean == 1.0

    def test_disjoint_pair_scores_zero(self):
        attn = {"img0": Map([[1.0, 0.0], [0.0, 0.0]])}
        masks = {"img0": Map(np.kron([[0.0, 0.0], [0.0, 1.0]], np.ones((2, 2))))}
        assert mask_score(attn, masks).overall_mean == 0.0

    def test_population_stats(self):
        # Construct two images with metric values 0.8 and 0.6.
        attn = {
            "a": Map([[1.0, 0.0], [0.0, 0.0]]),
            "b": Map([[3.0, 1.0], [0.0, 0.0]]),
        }
        masks = {
            "a": Map([[0.5, 0.5], [0.0, 0.0]]),
            "b": Map([[0.0, 1.0], [0.0, 0.0]]),
        }
        v_a = attention_iou(attn["a"], masks["a"])
        v_b = attention_iou(attn["b"], masks["b"])
        report = mask_score(attn, masks)
        assert report.overall_mean == pytest.approx((v_a + v_b) / 2, abs=1e-12)
        assert report.overall_std == pytest.approx(abs(v_a - v_b) / 2, abs=1e-12)

    def test_degenerate_masks_skipped_and_counted(self):
        attn = {"a": Map([[1.0]]), "b": Map([[1.0]])}
        masks = {"a": Map([[1.0]]), "b": Map([[0.0]])}
        report = mask_score(attn, masks)
        assert report.n_scored == 1
        assert report.skipped_degenerate == 1

    def test_no_matched_images(self):
        with pytest.raises(NoMatchedImagesError):
            mask_score({"a": Map([[1.0]])}, {"b": Map([[1.0]])})

    def test_mask_range_enforced(self):
        with pytest.raises(ValueError):
            mask_score({"a": Map([[1.0]])}, {"a": Map([[2.0]])})

    def test_equals_per_image_brute_force(self):
        rng = np.random.default_rng(103)
        attn = random_maps(rng, 40, 4, 4)
        masks = {k: Map((rng.random((8, 8)) < 0.5) * 0.9 + 0.05) for k in attn}
        report = mask_score(attn, masks)
        expected = [
            attention_iou(attn[k], bilinear_downsample(masks[k], 4, 4))
            for k in sorted(attn)
        ]
        assert report.overall_mean == pytest.approx(math.fsum(expected) / len(expected), abs=1e-12)

    def test_worker_count_does_not_change_result(self):
        rng = np.random.default_rng(107)
        attn = random_maps(rng, 30, 5, 5)
        masks = {k: Map(rng.random((10, 10))) for k in attn}
        serial = mask_score(attn, masks, workers=1)
        parallel = mask_score(attn, masks, workers=4)
        assert serial.overall_mean == parallel.overall_mean
        assert serial.overall_std == parallel.overall_std

    def test_per_image_scaling_invariance(self):
        rng = np.random.default_rng(109)
        attn = random_maps(rng, 20, 5, 5)
        masks = {k: Map(rng.random((5, 5))) for k in attn}
        base = mask_score(attn, masks)
        scaled_attn = {k: Map(m.data * rng.uniform(0.1, 10.0)) for k, m in attn.items()}
        scaled = mask_score(scaled_attn, masks)
        assert scaled.overall_mean == pytest.approx(base.overall_mean, rel=1e-9)

    def test_reordering_input_is_invisible(self):
        rng = np.random.default_rng(113)
        attn = random_maps(rng, 25, 4, 4)
        masks = {k: Map(rng.random((4, 4))) for k in attn}
        forward = mask_score(attn, masks)
        reversed_attn = dict(reversed(list(attn.items())))
        reversed_masks = dict(reversed(list(masks.items())))
        backward = mask_score(reversed_attn, reversed_masks)
        assert forward.overall_mean == backward.overall_mean
        assert forward.overall_std == backward.overall_std


class TestHeatmapScore:
    def test_self_comparison_is_one(self):
        rng = np.random.default_rng(127)
        attn = random_maps(rng, 10)
        report = heatmap_score(attn, attn)
        assert report.overall_mean == 1.0

    def test_disjoint_pairs_zero(self):
        attn_t = {"a": Map([[1.0, 0.0], [0.0, 0.0]])}
        attn_p = {"a": Map([[0.0, 0.0], [0.0, 1.0]])}
        assert heatmap_score(attn_t, attn_p).overall_mean == 0.0

    def test_mixed_set_matches_brute_force(self):
        rng = np.random.default_rng(131)
        attn_t = random_maps(rng, 35)
        attn_p = random_maps(rng, 35)
        report = heatmap_score(attn_t, attn_p)
        expected = [attention_iou(attn_t[k], attn_p[k]) for k in sorted(attn_t)]
        assert report.overall_mean == pytest.approx(math.fsum(expected) / len(expected), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            heatmap_score({"a": Map([[1.0]])}, {"a": Map([[1.0, 2.0]])})


class TestStratify:
    def test_single_populated_group(self):
        values = {"img0": 0.5, "img1": 0.7}
        labels = table_from_rows([("img0", 1, 1), ("img1", 1, 1)])
        groups = stratify(values, labels, "t", "p")
        assert groups[GroupKey(1, 1)].n == 2
        assert groups[GroupKey(1, 1)].mean == pytest.approx(0.6)
        for key, row in groups.items():
            if key != GroupKey(1, 1):
                assert row.n == 0 and row.excluded

    def test_threshold_is_strict(self):
        # Sizes {60, 25, 14, 1} of 100 at 1%: the singleton is not excluded.
        sizes = {(0, 0): 60, (0, 1): 25, (1, 0): 14, (1, 1): 1}
        rows, values = [], {}
        counter = 0
        for (t, p), n in sizes.items():
            for _ in range(n):
                image_id = f"img{counter:03d}"
                rows.append((image_id, t, p))
                values[image_id] = 0.5
                counter += 1
        groups = stratify(values, table_from_rows(rows), "t", "p", threshold=0.01)
        assert not groups[GroupKey(1, 1)].excluded
        assert all(not row.excluded for row in groups.values())

    def test_constant_group_scores_recovered(self):
        constants = {(0, 0): 0.2, (0, 1): 0.4, (1, 0): 0.6, (1, 1): 0.8}
        rows, values = [], {}
        counter = 0
        for (t, p), value in constants.items():
            for _ in range(10):
                image_id = f"img{counter:03d}"
                rows.append((image_id, t, p))
                values[image_id] = value
                counter += 1
        groups = stratify(values, table_from_rows(rows), "t", "p")
        for (t, p), value in constants.items():
            assert groups[GroupKey(t, p)].mean == pytest.approx(value, abs=1e-12)
            assert groups[GroupKey(t, p)].std == pytest.approx(0.0, abs=1e-12)

    def test_groups_partition_scored_set(self):
        rng = np.random.default_rng(137)
        rows = [(f"img{i:03d}", int(rng.integers(0, 2)), int(rng.integers(0, 2))) for i in range(50)]
        values = {image_id: float(rng.random()) for image_id, _, _ in rows}
        groups = stratify(values, table_from_rows(rows), "t", "p")
        assert sum(row.n for row in groups.values()) == 50

    def test_report_partition_includes_skips(self):
        attn = {f"img{i}": Map([[1.0]]) for i in range(6)}
        masks = {f"img{i}": Map([[1.0 if i % 3 else 0.0]]) for i in range(6)}
        labels = table_from_rows([(f"img{i}", i % 2, 0) for i in range(6)])
        report = mask_score(attn, masks, labels=labels, protected="p", target="t")
        n_groups = sum(row.n for row in report.per_group.values())
        assert n_groups + report.skipped_degenerate == 6


class TestAverageMap:
    def test_single_map_scaled_to_peak_one(self):
        out = average_map([Map([[2.0, 1.0]])])
        np.testing.assert_allclose(out.data, [[1.0, 0.5]])

    def test_two_identical_maps(self):
        m = Map([[2.0, 1.0]])
        out = average_map([m, m])
        np.testing.assert_allclose(out.data, [[1.0, 0.5]])

    def test_two_disjoint_one_hots(self):
        out = average_map([Map([[1.0, 0.0]]), Map([[0.0, 1.0]])])
        np.testing.assert_allclose(out.data, [[1.0, 1.0]])

    def test_empty_raises(self):
        with pytest.raises(EmptySetError):
            average_map([])

    def test_mismatched_shapes(self):
        with pytest.raises(DimensionMismatchError):
            average_map([Map([[1.0]]), Map([[1.0, 2.0]])])
