import numpy as np
import pytest

from swipt_noma.channel import (
    GeometryConfig,
    los_vector,
    normalize_draw,
    path_loss,
    sample_draw,
    sample_instance,
    sample_positions,
    sample_rician_vector,
    sample_siso_instance,
    trial_rng,
)
from swipt_noma.system import SystemParams


class TestPathLoss:
    def test_reference_distance(self):
        assert path_loss(1.0, 4.0) == pytest.approx(1e-3)
        assert path_loss(2.0, 2.0) == pytest.approx(2.5e-4)

    def test_vectorised(self):
        np.testing.assert_allclose(path_loss(np.array([1.0, 10.0]), 2.0), [1e-3, 1e-5])

    def test_rejects_zero_distance(self):
        with pytest.raises(ValueError):
            path_loss(0.0, 2.0)


class TestRician:
    def test_unit_average_power(self):
        rng = np.random.default_rng(0)
        v = np.array([sample_rician_vector(rng, 3.0, 2) for _ in range(20000)])
        assert np.mean(np.abs(v) ** 2) == pytest.approx(1.0, abs=0.02)

    def test_mean_is_los_component(self):
        rng = np.random.default_rng(1)
        v = np.array([sample_rician_vector(rng, 3.0, 1)[0] for _ in range(20000)])
        assert v.mean() == pytest.approx(np.sqrt(0.75), abs=0.02)

    def test_pure_los_and_rayleigh(self):
        rng = np.random.default_rng(2)
        np.testing.assert_array_equal(sample_rician_vector(rng, np.inf, 3), los_vector(3))
        v = np.array([sample_rician_vector(rng, 0.0, 1)[0] for _ in range(20000)])
        assert abs(v.mean()) < 0.03

    def test_bad_arguments(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_rician_vector(rng, -1.0, 2)
        with pytest.raises(ValueError):
            sample_rician_vector(rng, 1.0, 0)


class TestGeometry:
    def test_positions_inside_room_and_separated(self):
        geo = GeometryConfig(min_separation_m=0.5)
        rng = np.random.default_rng(3)
        bs = np.array(geo.bs_position)
        for _ in range(200):
            p1, p2 = sample_positions(rng, geo)
            for p in (p1, p2):
                assert 0 <= p[0] <= geo.room_depth_m and 0 <= p[1] <= geo.room_width_m
            assert min(np.linalg.norm(p1 - bs), np.linalg.norm(p2 - bs), np.linalg.norm(p1 - p2)) >= 0.5

    def test_impossible_separation(self):
        geo = GeometryConfig(room_width_m=0.1, room_depth_m=0.1, min_separation_m=5.0, max_redraws=5)
        with pytest.raises(RuntimeError):
            sample_positions(np.random.default_rng(0), geo)

    def test_invalid_room(self):
        with pytest.raises(ValueError):
            GeometryConfig(room_width_m=0.0)


class TestNormalisation:
    def test_gains_scale_with_power(self):
        geo = GeometryConfig()
        lo, hi = SystemParams(transmit_power_dbm=0.0), SystemParams(transmit_power_dbm=10.0)
        draw = sample_draw(trial_rng(0, 0), lo, geo)
        a, b = normalize_draw(draw, lo, geo), normalize_draw(draw, hi, geo)
        np.testing.assert_allclose(b.h1_vec, np.sqrt(10.0) * a.h1_vec)
        # the relay gain carries path loss only
        assert a.g == b.g

    def test_relay_gain_matches_distance(self):
        p, geo = SystemParams(), GeometryConfig()
        draw = sample_draw(trial_rng(4, 2), p, geo)
        inst = normalize_draw(draw, p, geo)
        d12 = np.linalg.norm(draw.pos_user1 - draw.pos_user2)
        assert inst.g == pytest.approx(1e-3 * d12**-2 * abs(draw.raw_g1) ** 2)

    def test_antenna_count(self):
        inst = sample_instance(np.random.default_rng(0), SystemParams(antenna_count_nt=4))
        assert inst.nt == 4

    def test_siso_uses_first_antenna(self):
        p = SystemParams(antenna_count_nt=3)
        full = sample_instance(trial_rng(1, 1), p)
        s = sample_siso_instance(trial_rng(1, 1), p)
        assert s.h1 == pytest.approx(abs(full.h1_vec[0]) ** 2)


class TestSeeding:
    def test_trial_streams_reproducible(self):
        a = trial_rng(7, 3).standard_normal(4)
        np.testing.assert_array_equal(a, trial_rng(7, 3).standard_normal(4))

    def test_trial_streams_distinct(self):
        assert not np.allclose(trial_rng(7, 3).standard_normal(4), trial_rng(7, 4).standard_normal(4))
        assert not np.allclose(trial_rng(7, 3).standard_normal(4), trial_rng(8, 3).standard_normal(4))
