import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from jitterchan.channel import ChannelParams, sample_block
from jitterchan.detect import (
    amplitude_second_moment,
    detect_block,
    eps_min,
    fixed_threshold_detect,
    gap_bound,
    genie_detect,
    lln_detect,
    optimal_single_probe_threshold,
)

# mpmath, 30 digits
GAP_BOUND_REF = 0.293447892554443854697232490005
EPS_MIN_REF = 0.0490376523071899212109554833511
# quad over J + brentq on the likelihood ratio, xtol 1e-14
R0_REF = {
    (0.15, 0.2): 0.3558777141616689,
    (0.05, 0.3): 0.13459025556400192,
    (0.2, 0.1): 0.47373601371129964,
}


class TestSlicers:
    def test_genie_ties_go_to_zero(self):
        res = genie_detect([0.0, 0.4, 0.40000001, 1.0], 0.8)
        assert res.estimated_bits.tolist() == [False, False, True, True]
        assert res.threshold_used == 0.4 and res.detector_kind == "genie"

    def test_genie_domain(self):
        with pytest.raises(ValueError):
            genie_detect([0.1], 0.0)

    def test_lln_threshold_is_mean(self):
        r = np.array([0.1, 0.9, 0.5, 0.3])
        res = lln_detect(r)
        assert res.threshold_used == pytest.approx(0.45)
        assert res.estimated_bits.tolist() == [False, True, True, False]

    def test_lln_constant_input(self):
        # every output equals the mean: all ties, all zeros
        assert not lln_detect(np.full(8, 0.3)).estimated_bits.any()

    def test_lln_empty(self):
        with pytest.raises(ValueError):
            lln_detect([])

    def test_fixed(self):
        res = fixed_threshold_detect([0.2, 0.3, 0.31], 0.3)
        assert res.estimated_bits.tolist() == [False, False, True]

    @given(
        st.lists(st.floats(-2, 3, allow_nan=False), min_size=1, max_size=40),
        st.floats(0.01, 1.0),
    )
    def test_block_agrees_with_single(self, r, p):
        out = np.array([r])
        np.testing.assert_array_equal(detect_block("genie", out, np.array([p]))[0], genie_detect(r, p).estimated_bits)
        np.testing.assert_array_equal(detect_block("lln", out)[0], lln_detect(r).estimated_bits)
        np.testing.assert_array_equal(detect_block("fixed", out, r0=0.37)[0], fixed_threshold_detect(r, 0.37).estimated_bits)

    def test_block_argument_checks(self):
        out = np.zeros((1, 3))
        with pytest.raises(ValueError):
            detect_block("genie", out)
        with pytest.raises(ValueError):
            detect_block("fixed", out)
        with pytest.raises(ValueError):
            detect_block("ml", out)

    def test_noiseless_all_correct(self):
        blk = sample_block(ChannelParams(0.0, 0.2, num_probes=500), np.random.default_rng(0), 50)
        assert (detect_block("genie", blk.outputs, blk.amplitude) == blk.bits).all()

    def test_lln_biased_by_unbalanced_input(self):
        # 1 one among 100 zeros: the mean sits near 0 and noise crosses it
        bits = np.zeros(101, dtype=bool)
        bits[0] = True
        rng = np.random.default_rng(3)
        blk = sample_block(ChannelParams(0.1, 0.0, num_probes=101), rng, 200, bits=bits)
        err_lln = (detect_block("lln", blk.outputs) != blk.bits).mean()
        err_genie = (detect_block("genie", blk.outputs, blk.amplitude) != blk.bits).mean()
        assert err_lln > 10 * max(err_genie, 1e-4)


    @given(
        st.lists(st.floats(-1, 2, allow_nan=False), min_size=2, max_size=60),
        st.floats(0.05, 1.0),
    )
    def test_genie_and_lln_agree_outside_threshold_gap(self, r, p):
        g = genie_detect(r, p)
        ll = lln_detect(r)
        lo, hi = sorted((g.threshold_used, ll.threshold_used))
        r = np.asarray(r)
        outside = (r < lo) | (r > hi)
        np.testing.assert_array_equal(g.estimated_bits[outside], ll.estimated_bits[outside])

    def test_balanced_noiseless(self):
        p = 0.7
        res = lln_detect(np.array([0, 0, 1, 1]) * p)
        assert res.threshold_used == pytest.approx(p / 2)
        assert res.estimated_bits.tolist() == [False, False, True, True]

    def test_infinite_surrogates(self):
        r = np.array([-0.3, 0.2, 1.4])
        assert fixed_threshold_detect(r, -1e300).estimated_bits.all()
        assert not fixed_threshold_detect(r, 1e300).estimated_bits.any()


class TestOptimalThreshold:
    def test_no_jitter_is_half(self):
        assert optimal_single_probe_threshold(ChannelParams(0.1, 0.0)) == 0.5

    def test_needs_noise(self):
        with pytest.raises(ValueError):
            optimal_single_probe_threshold(ChannelParams(0.0, 0.2))

    @pytest.mark.parametrize("key", sorted(R0_REF))
    def test_against_quadrature_oracle(self, key):
        s, sj = key
        assert optimal_single_probe_threshold(ChannelParams(s, sj)) == pytest.approx(R0_REF[key], abs=1e-8)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 1.0), st.floats(0.0, 0.5))
    def test_range(self, s, sj):
        r0 = optimal_single_probe_threshold(ChannelParams(s, sj))
        assert 0.0 < r0 <= 0.5

    @staticmethod
    def _single_probe_error(r, s=0.15, sj=0.2, W=0.5):
        miss, _ = quad(
            lambda J: norm.pdf(J, scale=sj) * norm.cdf((r - math.exp(-J * J / W**2)) / s),
            -10 * sj, 10 * sj, points=[0], limit=400, epsrel=1e-12,
        )
        return 0.5 * norm.sf(r / s) + 0.5 * miss

    def test_argmin_of_exact_error_curve(self):
        # error probability on a 1e-4 threshold grid, each value by quadrature
        r0 = optimal_single_probe_threshold(ChannelParams(0.15, 0.2))
        grid = np.round(np.arange(r0 - 0.003, r0 + 0.003, 1e-4), 4)
        pe = np.array([self._single_probe_error(r) for r in grid])
        assert abs(grid[np.argmin(pe)] - r0) <= 2e-4

    def test_monte_carlo_threshold_sweep(self):
        # 1e6 bits; a 1e-4 grid is far finer than MC resolves, so check that
        # BER(r0) is statistically indistinguishable from the grid minimum
        P = ChannelParams(0.15, 0.2, num_probes=1000)
        blk = sample_block(P, np.random.default_rng(21), 1000)
        r0 = optimal_single_probe_threshold(P)
        out, bits = blk.outputs.ravel(), blk.bits.ravel()
        grid = np.arange(0.25, 0.45, 1e-4)
        o1 = np.sort(out[bits])
        o0 = np.sort(out[~bits])
        ber = lambda t: (np.searchsorted(o1, t, side="right") + o0.size - np.searchsorted(o0, t, side="right")) / out.size  # noqa: E731
        best = ber(grid).min()
        se = math.sqrt(best * (1 - best) / out.size)
        assert ber(np.array([r0]))[0] <= best + 3 * se
        best_r = grid[np.argmin(ber(grid))]
        assert self._single_probe_error(best_r) - self._single_probe_error(r0) >= -1e-12

    def test_fixed_never_beats_genie(self):
        P = ChannelParams(0.15, 0.2, num_probes=1000)
        blk = sample_block(P, np.random.default_rng(8), 400)
        r0 = optimal_single_probe_threshold(P)
        e_fixed = np.count_nonzero(detect_block("fixed", blk.outputs, r0=r0) != blk.bits)
        e_genie = np.count_nonzero(detect_block("genie", blk.outputs, blk.amplitude) != blk.bits)
        assert e_genie <= e_fixed


class TestGapBound:
    P = ChannelParams(0.2, 0.2, num_probes=1000)

    def test_second_moment(self):
        assert amplitude_second_moment(self.P) == pytest.approx(1 / math.sqrt(1.64), rel=1e-15)

    def test_value(self):
        assert gap_bound(self.P) == pytest.approx(GAP_BOUND_REF, rel=1e-13)

    def test_eps_min(self):
        assert eps_min(self.P) == pytest.approx(EPS_MIN_REF, rel=1e-13)

    def test_no_jitter_form(self):
        s = 0.2
        ref = 3 * (1 + 1 / (4 * s * s)) ** (1 / 3) / (2 * math.pi * 1000) ** (1 / 3)
        assert gap_bound(ChannelParams(s, 0.0, num_probes=1000)) == pytest.approx(ref, rel=1e-14)

    def test_monotone(self):
        by_n = [gap_bound(ChannelParams(0.2, 0.2, num_probes=n)) for n in (10, 100, 1000, 10000)]
        assert all(b < a for a, b in zip(by_n, by_n[1:]))
        by_s = [gap_bound(ChannelParams(s, 0.2, num_probes=1000)) for s in (0.5, 0.2, 0.1, 0.01)]
        assert all(b > a for a, b in zip(by_s, by_s[1:]))

    def test_second_moment_by_quadrature(self):
        assert self.P.amplitude().expect(lambda p: p * p) == pytest.approx(amplitude_second_moment(self.P), abs=1e-12)

    def test_cube_root_scaling(self):
        a = gap_bound(self.P)
        b = gap_bound(ChannelParams(0.2, 0.2, num_probes=8000))
        assert a / b == pytest.approx(2.0, rel=1e-13)

    def test_needs_noise(self):
        with pytest.raises(ValueError):
            gap_bound(ChannelParams(0.0, 0.2))
        with pytest.raises(ValueError):
            eps_min(ChannelParams(0.0, 0.2))

    def test_bounds_observed_gap(self):
        blk = sample_block(self.P, np.random.default_rng(1), 400)
        g = (detect_block("genie", blk.outputs, blk.amplitude) != blk.bits).mean()
        l = (detect_block("lln", blk.outputs) != blk.bits).mean()  # noqa: E741
        assert l - g <= gap_bound(self.P)
