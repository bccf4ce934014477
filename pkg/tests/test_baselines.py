import math

import numpy as np
import pytest

from swipt_noma.baselines import (
    BaselineResult,
    matched_filter_gains,
    noncoop_alpha,
    noncoop_noma_miso,
    noncoop_noma_siso,
    oma_dynamic,
    oma_fixed,
    target_sinrs,
)
from swipt_noma.system import MisoInstance, SisoInstance


class TestNoncoopSiso:
    def test_target_equal_to_weak_gain_uses_all_power(self):
        inst = SisoInstance(2.0, 5.0, 0.1)
        res = noncoop_noma_siso(inst, 2.0)
        assert noncoop_alpha(inst, 2.0) == pytest.approx(1.0)
        assert res.feasible and res.R2 == pytest.approx(0.0, abs=1e-12)

    def test_small_target(self):
        assert noncoop_alpha(SisoInstance(2.0, 5.0, 0.1), 1e-9) < 1e-8

    def test_matches_grid_search(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            h1, h2 = 10 ** rng.uniform(-0.5, 2, size=2)
            gamma = rng.uniform(0.1, 3.0)
            inst = SisoInstance(h1, h2, 0.5)
            alpha = np.linspace(0, 1, 1_000_001)
            ok = (alpha * h1 / ((1 - alpha) * h1 + 1) >= gamma) & (alpha * h2 / ((1 - alpha) * h2 + 1) >= gamma)
            res = noncoop_noma_siso(inst, gamma)
            assert res.feasible == bool(ok.any())
            if res.feasible:
                snr = (1 - alpha[ok][0]) * h2
                assert res.R2 == pytest.approx(math.log2(1 + snr), abs=1e-5)

    def test_binding_user_tight(self):
        inst = SisoInstance(1.5, 8.0, 0.1)
        a = noncoop_alpha(inst, 1.0)
        sinr = [a * h / ((1 - a) * h + 1) for h in (inst.h1, inst.h2)]
        assert min(sinr) == pytest.approx(1.0, abs=1e-12)

    def test_infeasible_zeroes_rates(self):
        res = noncoop_noma_siso(SisoInstance(0.5, 5.0, 0.1), 1.0)
        assert not res.feasible and res.R1 == 0.0 and res.Rsum == 0.0

    def test_rejects_zero_target(self):
        with pytest.raises(ValueError):
            noncoop_noma_siso(SisoInstance(1.0, 1.0, 1.0), 0.0)


class TestNoncoopMiso:
    def test_tiny_target_serves_user2(self):
        inst = MisoInstance(np.array([1.0, 2.0j]), np.array([3.0, 1.0]), 0.5)
        res = noncoop_noma_miso(inst, 1e-8)
        assert res.R2 == pytest.approx(math.log2(1 + 10.0), rel=1e-6)

    def test_parallel_channels_match_scalar(self):
        d = np.array([1.0, 1.0j]) / math.sqrt(2)
        rng = np.random.default_rng(1)
        for _ in range(5):
            a1, a2 = 10 ** rng.uniform(0, 1.5, size=2)
            inst = MisoInstance(math.sqrt(a1) * d, math.sqrt(a2) * d, 0.3)
            res = noncoop_noma_miso(inst, 1.0)
            ref = noncoop_noma_siso(SisoInstance(a1, a2, 0.3), 1.0)
            assert res.feasible == ref.feasible
            assert res.R2 == pytest.approx(ref.R2, abs=1e-6)

    def test_weak_user1_infeasible(self):
        inst = MisoInstance(np.array([0.5, 0.5]), np.array([3.0, 1.0]), 0.5)
        assert not noncoop_noma_miso(inst, 1.0).feasible


class TestOma:
    def test_dynamic_examples(self):
        res = oma_dynamic((3.0, 15.0), 1.0)
        assert res.internals["tau1"] == pytest.approx(0.5)
        assert res.R2 == pytest.approx(2.0)
        assert oma_dynamic((3.0, 15.0), 0.0).R2 == pytest.approx(4.0)
        edge = oma_dynamic((3.0, 15.0), 2.0)
        assert edge.feasible and edge.R2 == pytest.approx(0.0)
        assert not oma_dynamic((3.0, 15.0), 2.01).feasible

    def test_fixed_examples(self):
        assert oma_fixed((3.0, 15.0), 1.0).feasible
        assert oma_fixed((3.0, 15.0), 1.0).R2 == pytest.approx(2.0)
        assert not oma_fixed((3.0, 15.0), 1.01).feasible
        assert oma_fixed((1e-9, 1.0), 0.0).feasible

    def test_dynamic_dominates_fixed(self):
        rng = np.random.default_rng(2)
        for g1, g2, r in zip(10 ** rng.uniform(0, 3, 100), 10 ** rng.uniform(0, 3, 100), rng.uniform(0, 3, 100)):
            d, f = oma_dynamic((g1, g2), r), oma_fixed((g1, g2), r)
            if d.feasible and f.feasible:
                assert d.Rsum >= f.Rsum - 1e-12

    def test_bandwidth_scales(self):
        assert oma_dynamic((3.0, 15.0), 1.0, bandwidth_hz=1e6).R2 == pytest.approx(2e6)

    def test_gains(self):
        m = MisoInstance(np.array([1.0, 1j]), np.array([2.0, 0.0]), 0.1)
        assert matched_filter_gains(m) == pytest.approx((2.0, 4.0))
        assert matched_filter_gains(SisoInstance(3.0, 4.0, 0.1)) == (3.0, 4.0)

    def test_negative_rate(self):
        with pytest.raises(ValueError):
            oma_fixed((1.0, 1.0), -1.0)


class TestHelpers:
    def test_target_sinrs(self):
        assert target_sinrs(1.0) == pytest.approx((3.0, 1.0))

    def test_result_zeroed_when_infeasible(self):
        r = BaselineResult("x", 2.0, 3.0, False)
        assert (r.R1, r.R2, r.Rsum) == (0.0, 0.0, 0.0)
