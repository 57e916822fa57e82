import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mod2t.bgmodel import (DualGaussianBackground, GaussianCell, decayed_age, extract_blobs,
                           grid_statistics, update_cell)
from mod2t.core import AffineTransform, InvalidInputError
from mod2t.synth import value_noise


class TestUpdateCell:
    def test_fresh_cell_adopts_observation(self):
        c = update_cell(GaussianCell(123.0, 55.0, 0.0), 20.0, 9.0)
        assert (c.mean, c.var, c.age) == (20.0, 9.0, 1.0)

    def test_age_one_averages(self):
        assert update_cell(GaussianCell(10.0, 4.0, 1.0), 20.0, 4.0).mean == 15.0

    def test_high_variance_decays_age_first(self):
        theta_v, lam, t = 400.0, 0.01, 50.0
        age = 9.0
        c = update_cell(GaussianCell(0.0, theta_v + t, age), 10.0, 0.0, theta_v, lam)
        a = age * math.exp(-lam * t)
        assert c.age == pytest.approx(a + 1)
        assert c.mean == pytest.approx(10.0 / (a + 1))

    def test_no_decay_at_threshold(self):
        assert decayed_age(5.0, 400.0, 400.0, 0.5) == 5.0

    @given(st.floats(0, 255), st.floats(0, 1e4), st.floats(0, 1e3),
           st.floats(0, 255), st.floats(0, 1e4))
    def test_convex_update(self, mean, var, age, m, v):
        c = update_cell(GaussianCell(mean, var, age), m, v)
        assert min(mean, m) - 1e-9 <= c.mean <= max(mean, m) + 1e-9
        assert min(var, v) - 1e-9 <= c.var <= max(var, v) + 1e-9
        assert c.age >= 1.0

    @given(st.floats(0, 1e3), st.floats(0, 1e5))
    def test_age_grows_by_one_without_decay(self, age, var):
        c = update_cell(GaussianCell(0.0, var, age), 0.0, 0.0, theta_v=1e6)
        assert c.age == pytest.approx(age + 1)


class TestGridStatistics:
    def test_constant_cell(self):
        m, v = grid_statistics(np.full((4, 4), 7.0))
        assert m[0, 0] == 7 and v[0, 0] == 0

    def test_two_values(self):
        m, v = grid_statistics(np.array([[0, 10, 0, 10]] * 4, dtype=float))
        assert m[0, 0] == 5 and v[0, 0] == 25

    def test_truncated_edge_cells(self, rng):
        img = rng.integers(0, 256, (5, 5)).astype(float)
        m, v = grid_statistics(img, 4)
        assert m.shape == (2, 2)
        for (r0, r1), (c0, c1), i, j in [((0, 4), (4, 5), 0, 1), ((4, 5), (0, 4), 1, 0), ((4, 5), (4, 5), 1, 1)]:
            cell = img[r0:r1, c0:c1]
            assert m[i, j] == pytest.approx(cell.mean())
            assert v[i, j] == pytest.approx(max(cell.max() - cell.mean(), cell.mean() - cell.min()) ** 2)

    def test_against_loops(self, rng):
        img = rng.integers(0, 256, (23, 17)).astype(float)
        m, v = grid_statistics(img, 3)
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                cell = img[3 * i:3 * i + 3, 3 * j:3 * j + 3]
                mu = sum(cell.ravel()) / cell.size
                assert m[i, j] == pytest.approx(mu)
                assert v[i, j] == pytest.approx(max((x - mu) ** 2 for x in cell.ravel()))


class TestExtractBlobs:
    def test_empty(self):
        assert extract_blobs(np.zeros((30, 30), bool)) == []

    def test_single_region(self):
        m = np.zeros((30, 30), bool)
        m[5:15, 5:15] = True
        (b,) = extract_blobs(m, min_blob_area=10)
        assert (b.x, b.y, b.w, b.h) == (5, 5, 10, 10)

    def test_two_regions(self):
        m = np.zeros((30, 40), bool)
        m[5:15, 5:15] = True
        m[5:15, 20:30] = True
        assert len(extract_blobs(m, min_blob_area=10)) == 2

    def test_speckle_removed(self):
        m = np.zeros((30, 30), bool)
        m[3, 3] = m[20, 7] = True
        assert extract_blobs(m, min_blob_area=0) == []

    def test_area_filter(self):
        m = np.zeros((30, 30), bool)
        m[5:10, 5:10] = True
        assert extract_blobs(m, min_blob_area=26) == []
        assert len(extract_blobs(m, min_blob_area=25)) == 1


def textured(h=120, w=160, seed=3):
    return np.clip(value_noise((h, w), seed, 40), 0, 255)


class TestDualGaussianBackground:
    def test_static_constant_video_is_background(self):
        bg = DualGaussianBackground()
        masks = bg.fit_transform([np.full((48, 64), 90.0)] * 6)
        assert not masks[-1].any()

    def test_square_entering_is_detected(self, rng):
        base = textured()
        frames = [base + rng.normal(0, 2, base.shape) for _ in range(15)]
        k = 10
        for t in range(k, 15):
            frames[t] = frames[t].copy()
            frames[t][40:60, 30 + 2 * t:50 + 2 * t] = 240
        bg = DualGaussianBackground()
        masks = bg.fit_transform(frames)
        m = masks[k + 3]
        truth = np.zeros(base.shape, bool)
        truth[40:60, 30 + 2 * (k + 3):50 + 2 * (k + 3)] = True
        assert m[truth].mean() >= 0.7
        assert m[~truth].mean() < 0.01

    def test_illumination_change_swaps_and_recovers(self, rng):
        base = textured()
        pre = 12
        frames = [base + rng.normal(0, 1, base.shape) for _ in range(pre)]
        frames += [base + 60 + rng.normal(0, 1, base.shape) for _ in range(3 * pre)]
        bg = DualGaussianBackground()
        swapped, recovered = False, None
        ages_before = None
        for t, f in enumerate(frames):
            if t == pre:
                ages_before = bg.age_[0].max()
            mask = bg.step(f)
            if t >= pre:
                swapped |= bool(bg.swapped_.any())
                if recovered is None and mask.mean() < 0.01:
                    recovered = t - pre
        assert swapped
        assert recovered is not None and recovered <= 2 * ages_before

    def test_swap_only_when_candidate_older(self, rng):
        bg = DualGaussianBackground()
        frames = [textured() + rng.normal(0, 1, (120, 160)) for _ in range(4)]
        frames += [textured() + 80 for _ in range(8)]
        for f in frames:
            bg.step(f)
            assert np.all(bg.age_[0][bg.swapped_] >= bg.age_[1][bg.swapped_])
            assert np.all(bg.age_[0] >= bg.age_[1])

    def test_foreground_uses_current_model_only(self):
        bg = DualGaussianBackground(grid_cell=4)
        img = np.full((8, 8), 100.0)
        bg.step(img)
        bg.mean_[1] = 100.0
        bg.var_[1] = 1e6
        bg.mean_[0] = 0.0
        bg.var_[0] = 1.0
        assert bg._foreground(img).all()
        bg.mean_[0], bg.mean_[1] = 100.0, 0.0
        assert not bg._foreground(img).any()

    def test_camera_compensation_keeps_background_quiet(self, rng):
        ground = np.clip(value_noise((200, 260), 5, 40), 0, 255)
        frames = [ground[40 - t:160 - t, 50 - 2 * t:210 - 2 * t] + rng.normal(0, 1, (120, 160)) for t in range(12)]
        warps = [AffineTransform.identity()] + [AffineTransform.translation(2, 1)] * 11
        still = DualGaussianBackground().fit_transform(frames, warps)
        assert still[-1].mean() < 0.02

    def test_rejects_shape_change(self):
        bg = DualGaussianBackground()
        bg.step(np.zeros((32, 32)))
        with pytest.raises(InvalidInputError):
            bg.step(np.zeros((32, 31)))

    def test_get_params_round_trip(self):
        bg = DualGaussianBackground(grid_cell=8, theta_d=3.0)
        assert DualGaussianBackground(**bg.get_params()).get_params() == bg.get_params()

    def test_invalid_param(self):
        with pytest.raises(InvalidInputError):
            DualGaussianBackground(theta_s=-1).step(np.zeros((8, 8)))
