import io
import math

import numpy as np
import pytest

from aiou import (
    BiasFixture,
    BlobSpec,
    gen_bias_fixture,
    gen_blob_map,
    kendall_tau,
    mask_score,
    write_container,
)


def fixture_scores(leakage, n=60, seed=5, feature="bird"):
    attention, masks, _ = gen_bias_fixture(
        BiasFixture(n_images=n, map_size=(8, 8), leakage=leakage, seed=seed)
    )
    attn = {r.image_id: r.map for r in attention if r.feature == "target"}
    mask = {r.image_id: r.map for r in masks if r.feature == feature}
    return mask_score(attn, mask).overall_mean


class TestGenBlobMap:
    def test_small_sigma_is_near_one_hot(self):
        m = gen_blob_map((9, 9), [BlobSpec((0.5, 0.5), sigma=0.05, amplitude=1.0)])
        assert m.data[4, 4] == m.data.max()
        assert m.data.sum() == pytest.approx(m.data[4, 4], rel=1e-6)

    def test_swap_symmetry(self):
        blobs = [
            BlobSpec((0.25, 0.25), sigma=1.5, amplitude=2.0),
            BlobSpec((0.75, 0.75), sigma=1.5, amplitude=2.0),
        ]
        m = gen_blob_map((10, 10), blobs)
        np.testing.assert_allclose(m.data, m.data[::-1, ::-1], atol=1e-12)

    def test_matches_closed_form(self):
        rng = np.random.default_rng(157)
        blobs = [
            BlobSpec((float(rng.random()), float(rng.random())),
                     sigma=float(rng.uniform(0.5, 3)), amplitude=float(rng.uniform(0.5, 2)))
            for _ in range(3)
        ]
        h, w = 7, 11
        m = gen_blob_map((h, w), blobs)
        for i in (0, 3, 6):
            for j in (0, 5, 10):
                expected = 0.0
                for blob in blobs:
                    dr = (i + 0.5) - blob.center[0] * h
                    dc = (j + 0.5) - blob.center[1] * w
                    expected += blob.amplitude * math.exp(-(dr**2 + dc**2) / (2 * blob.sigma**2))
                assert m.data[i, j] == pytest.approx(expected, abs=1e-9)

    def test_rejects_bad_blob(self):
        with pytest.raises(ValueError):
            BlobSpec((0.5, 0.5), sigma=0.0, amplitude=1.0)


class TestBiasFixture:
    def test_deterministic_containers(self):
        fixture = BiasFixture(n_images=10, map_size=(8, 8), leakage=0.4, seed=9)
        blobs = []
        for _ in range(2):
            attention, masks, labels = gen_bias_fixture(fixture)
            buf_a, buf_m = io.BytesIO(), io.BytesIO()
            write_container(attention, buf_a)
            write_container(masks, buf_m)
            blobs.append((buf_a.getvalue(), buf_m.getvalue(), labels.ground_truth.tobytes()))
        assert blobs[0] == blobs[1]

    def test_no_leakage_scores_high(self):
        assert fixture_scores(0.0) > 0.9

    def test_full_leakage_scores_low(self):
        assert fixture_scores(1.0) < 0.05

    def test_monotone_trend(self):
        grid = [0.0, 0.25, 0.5, 0.75, 1.0]
        bird = [fixture_scores(lam, feature="bird") for lam in grid]
        background = [fixture_scores(lam, feature="background") for lam in grid]
        assert all(a > b for a, b in zip(bird, bird[1:]))
        assert all(a < b for a, b in zip(background, background[1:]))
        assert kendall_tau(grid, bird) == -1.0
        assert kendall_tau(grid, background) == 1.0

    def test_invalid_leakage(self):
        with pytest.raises(ValueError):
            BiasFixture(n_images=1, map_size=(4, 4), leakage=1.5, seed=0)
