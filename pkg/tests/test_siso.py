import math

import numpy as np
import pytest

from swipt_noma.siso import (
    GOLDEN_RATIO,
    brute_force_siso,
    closed_form_terms,
    constraint_slacks,
    count_strict_local_maxima,
    delta_sign,
    evaluate_h,
    f_prime,
    f_value,
    feasible_beta_interval,
    gss_iteration_bound,
    gss_solve,
    optimal_alpha,
)
from swipt_noma.system import SisoInstance, SolveStatus

CANNED = SisoInstance(1.0, 10.0, 2.0)


def random_instances(seed, count, gamma1=1.0):
    """Feasible instances with gains spread over two decades."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        h1, h2 = 10 ** rng.uniform(-1, 1.5, size=2)
        g = 10 ** rng.uniform(-2, 0.5)
        inst = SisoInstance(h1, h2, g)
        if feasible_beta_interval(inst, gamma1).feasible:
            out.append(inst)
    return out


class TestInterval:
    def test_canned(self):
        iv = feasible_beta_interval(CANNED, 1.0)
        assert iv.feasible
        assert iv.beta_min == 0.0 and iv.beta_max == pytest.approx(0.9)

    def test_needs_relay_when_direct_link_weak(self):
        iv = feasible_beta_interval(SisoInstance(0.5, 10.0, 0.5), 1.0)
        assert iv.beta_min == pytest.approx(0.5 / 5.0)

    def test_boundary_h2_equals_target(self):
        iv = feasible_beta_interval(SisoInstance(2.0, 1.0, 1.0), 1.0)
        assert iv.feasible and iv.beta_max == 0.0

    def test_infeasible(self):
        assert not feasible_beta_interval(SisoInstance(2.0, 0.5, 1.0), 1.0).feasible
        # weak direct link and a dead relay
        assert not feasible_beta_interval(SisoInstance(0.5, 10.0, 0.0), 1.0).feasible


class TestClosedForm:
    def test_canned_alpha_and_h(self):
        assert optimal_alpha(0.5, CANNED, 1.0) == pytest.approx(0.6, abs=1e-15)
        assert evaluate_h(0.5, CANNED, 1.0) == pytest.approx(2.0, abs=1e-14)

    def test_canned_terms(self):
        a, b = closed_form_terms(0.5, CANNED, 1.0)
        assert a == pytest.approx(0.6)
        # hand value: c = 1 - 0.5*20 = -9, B = -9*2/(-8*1)
        assert b == pytest.approx(2.25)
        # beta is past the relay threshold, so A alone decides
        assert optimal_alpha(0.5, CANNED, 1.0) == pytest.approx(a)

    def test_endpoint_is_zero(self):
        for inst in random_instances(0, 50):
            iv = feasible_beta_interval(inst, 1.0)
            assert abs(evaluate_h(iv.beta_max, inst, 1.0)) <= 1e-9

    def test_small_target_needs_little_power(self):
        assert optimal_alpha(0.5, CANNED, 1e-9) < 1e-8

    def test_outside_interval_is_sentinel(self):
        inst = SisoInstance(0.5, 10.0, 0.5)
        assert evaluate_h(0.05, inst, 1.0) == -math.inf
        assert evaluate_h(0.95, CANNED, 1.0) == -math.inf

    def test_beta_one_rejected(self):
        with pytest.raises(ValueError):
            optimal_alpha(1.0, CANNED, 1.0)

    def test_activity(self):
        for inst in random_instances(1, 30):
            iv = feasible_beta_interval(inst, 1.0)
            thresh = 1.0 / (inst.h2 * inst.g)
            for beta in np.linspace(iv.beta_min, iv.beta_max, 25)[:-1]:
                alpha = optimal_alpha(beta, inst, 1.0)
                sic, qos = constraint_slacks(alpha, beta, inst, 1.0)
                assert sic >= -1e-9 and qos >= -1e-9
                if alpha < 1.0:
                    tight = sic if beta >= thresh else min(sic, qos)
                    assert abs(tight) <= 1e-9

    def test_b_bound(self):
        for inst in random_instances(2, 30):
            iv = feasible_beta_interval(inst, 1.0)
            hi = min(1.0 / (inst.h2 * inst.g), iv.beta_max)
            for beta in np.linspace(iv.beta_min, hi, 20):
                _, b = closed_form_terms(beta, inst, 1.0)
                assert -1e-12 <= b <= 1 + 1e-12


class TestGss:
    def test_canned_matches_brute_force(self):
        sol = gss_solve(CANNED, 1.0)
        ref = brute_force_siso(CANNED, 1.0, 2001)
        assert sol.status is SolveStatus.OPTIMAL
        assert sol.objective == pytest.approx(ref.objective, rel=1e-3)
        assert sol.objective >= ref.objective - 1e-9

    def test_short_interval_returns_midpoint(self):
        inst = SisoInstance(2.0, 1.00001, 1.0)
        iv = feasible_beta_interval(inst, 1.0)
        sol = gss_solve(inst, 1.0, eps=1e-3)
        assert sol.iterations == 0
        assert sol.beta == pytest.approx(0.5 * (iv.beta_min + iv.beta_max))

    def test_strong_direct_link_gives_positive_rate(self):
        sol = gss_solve(SisoInstance(5.0, 20.0, 10.0), 1.0)
        assert sol.objective > 0
        assert sol.beta < 0.1

    def test_infeasible_status(self):
        sol = gss_solve(SisoInstance(2.0, 0.5, 1.0), 1.0)
        assert sol.status is SolveStatus.INFEASIBLE and not sol.feasible

    def test_iteration_bound(self):
        for inst in random_instances(3, 30):
            iv = feasible_beta_interval(inst, 1.0)
            sol = gss_solve(inst, 1.0, eps=1e-5)
            assert sol.iterations <= gss_iteration_bound(iv.length, 1e-5)
            assert len(sol.history) == sol.iterations

    def test_contraction_ratio(self):
        assert gss_iteration_bound(1.0, GOLDEN_RATIO**10 * 1.0001) == 10

    def test_unit_search_agrees(self):
        for inst in random_instances(4, 10):
            a = gss_solve(inst, 1.0, eps=1e-7)
            b = gss_solve(inst, 1.0, eps=1e-7, search="unit")
            assert b.objective == pytest.approx(a.objective, rel=1e-4)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            gss_solve(CANNED, 1.0, eps=0.0)
        with pytest.raises(ValueError):
            gss_solve(CANNED, 1.0, search="grid")

    def test_dominates_brute_force(self):
        for inst in random_instances(5, 15):
            sol = gss_solve(inst, 1.0)
            ref = brute_force_siso(inst, 1.0, 401)
            assert sol.objective >= ref.objective - 1e-9


class TestBruteForce:
    def test_infeasible(self):
        assert not brute_force_siso(SisoInstance(2.0, 0.5, 1.0), 1.0, 51).feasible

    def test_grid_check(self):
        with pytest.raises(ValueError):
            brute_force_siso(CANNED, 1.0, 1)

    def test_returned_point_feasible(self):
        r = brute_force_siso(CANNED, 1.0, 201)
        sic, qos = constraint_slacks(r.alpha, r.beta, CANNED, 1.0)
        assert sic >= 0 and qos >= 0
        assert r.objective == pytest.approx((1 - r.alpha) * (1 - r.beta) * CANNED.h2)


class TestDerivatives:
    def _feasible_points(self, seed, count):
        rng = np.random.default_rng(seed)
        pts = []
        while len(pts) < count:
            inst = random_instances(int(rng.integers(1 << 30)), 1)[0]
            hi = min((1.0 + 1.0) / (inst.h2 * inst.g), 1.0)
            beta = rng.uniform(0, 0.95 * hi)
            pts.append((inst, beta))
        return pts

    def test_finite_difference(self):
        for inst, beta in self._feasible_points(6, 200):
            step = 1e-6 * max(beta, 1e-3)
            lo = max(beta - step, 0.0)
            fd = (f_value(beta + step, inst, 1.0) - f_value(lo, inst, 1.0)) / (beta + step - lo)
            assert f_prime(beta, inst, 1.0) == pytest.approx(fd, abs=1e-6, rel=1e-6)

    def test_zero_relay_gain(self):
        inst = SisoInstance(3.0, 10.0, 0.0)
        g = 1.5
        expect = (g * g + g) * (inst.h1 + 1) / ((g + 1) ** 2 * inst.h1) - 1
        assert f_prime(0.3, inst, g) == pytest.approx(expect)

    def test_delta_sign_matches(self):
        for inst, beta in self._feasible_points(7, 200):
            hg = inst.h2 * inst.g
            # f' = num/den - 1, so num - den = f' * den
            num_minus_den = f_prime(beta, inst, 1.0) * (2.0 - beta * hg) ** 2 * inst.h1**2
            d = delta_sign(beta, inst, 1.0)
            if abs(d) > 1e-9 * (1 + abs(num_minus_den)):
                assert np.sign(d) == np.sign(num_minus_den)

    def test_delta_vanishes(self):
        inst = SisoInstance(2.0, 4.0, 0.5)  # h2 g = gamma1 + 1
        assert delta_sign(1.0, inst, 1.0) == pytest.approx(0.0, abs=1e-14)

    def test_delta_decreasing(self):
        for inst in random_instances(8, 20):
            hg = inst.h2 * inst.g
            iv = feasible_beta_interval(inst, 1.0)
            hi = min(1.0 / hg, iv.beta_max)
            if hi <= iv.beta_min:
                continue
            d = [delta_sign(b, inst, 1.0) for b in np.linspace(iv.beta_min, hi, 50)]
            assert np.all(np.diff(d) < 0)


class TestUnimodality:
    def test_at_most_one_peak(self):
        for inst in random_instances(9, 100):
            iv = feasible_beta_interval(inst, 1.0)
            h = [evaluate_h(b, inst, 1.0) for b in np.linspace(iv.beta_min, iv.beta_max, 1000)]
            assert count_strict_local_maxima(np.array(h)) <= 1

    def test_counter(self):
        assert count_strict_local_maxima(np.array([0, 1, 0, 1, 0])) == 2
        assert count_strict_local_maxima(np.array([0, 1, 1, 1, 0])) == 1
        assert count_strict_local_maxima(np.array([-np.inf, -np.inf])) == 0
