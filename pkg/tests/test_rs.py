import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from jitterchan.channel import ChannelParams, sigma_from_snr
from jitterchan.rs import (
    DegenerateCriticalAmplitude,
    RsCode,
    _kl_curve,
    cond_bit_error,
    cond_symbol_error,
    cond_symbol_error_linear,
    critical_amplitude,
    critical_amplitude_estimate,
    high_rate_floor,
    interleaving_block_estimate,
    rate_function,
    ser_upper_bound,
)

# mpmath, 40 digits
E1_N10_F1E3 = 0.009955119790251790119955009999
BINOM_TAIL_255 = 2.695805060309905572308785632055e-18
KL_01_001 = 0.1444793474755121943622422345157
X_CRIT_TAU01_N10 = 4.617355007678836711176439955307  # p_c / sigma
P_HAT_C = 0.5594299245073074560611842744174


def code80(Ns=255):
    return RsCode.from_rate(10, Ns, 0.8)


class TestRsCode:
    def test_from_rate(self):
        c = code80()
        assert (c.info_symbols, c.correctable) == (204, 25)
        assert c.rate == pytest.approx(0.8)
        assert c.tau == pytest.approx(0.1)
        assert c.num_bits == 2550

    @pytest.mark.parametrize("args", [(10, 1024, 500), (10, 255, 0), (10, 255, 255), (0, 1, 1)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            RsCode(*args)

    def test_rate_domain(self):
        with pytest.raises(ValueError):
            RsCode.from_rate(10, 255, 1.0)


class TestConditionalErrors:
    def test_bit_error(self):
        assert cond_bit_error(1.0, 0.25) == pytest.approx(0.022750131948179207, rel=1e-14)
        assert cond_bit_error(1e-12, 0.25) == pytest.approx(0.5, abs=1e-11)

    def test_bit_error_bound(self):
        assert cond_bit_error(1.0, 0.25) <= 0.5 * math.exp(-2.0)

    def test_bit_error_domain(self):
        with pytest.raises(ValueError):
            cond_bit_error(1.5, 0.2)
        with pytest.raises(ValueError):
            cond_bit_error(0.5, 0.0)

    def test_symbol_from_bit(self):
        # choose p so that f = 1e-3 exactly is not needed: check the map itself
        from jitterchan.rs import _symbol_error_from_bit

        assert float(_symbol_error_from_bit(1e-3, 10)) == pytest.approx(E1_N10_F1E3, rel=1e-14)
        assert float(_symbol_error_from_bit(0.0, 10)) == 0.0
        assert abs(E1_N10_F1E3 - 0.01) / E1_N10_F1E3 < 0.005

    def test_single_bit_symbol(self):
        assert cond_symbol_error(0.6, 0.2, 1) == pytest.approx(float(cond_bit_error(0.6, 0.2)), rel=1e-14)

    def test_linearisation_above_exact(self):
        p = np.linspace(0.1, 1.0, 50)
        assert np.all(cond_symbol_error_linear(p, 0.1, 10) >= cond_symbol_error(p, 0.1, 10))

    def test_monotone_decreasing(self):
        e = cond_symbol_error(np.linspace(0.01, 1.0, 200), 0.15, 10)
        assert np.all(np.diff(e) < 0)


class TestRateFunction:
    def test_oracle(self):
        # pick p so that e1 = 0.01 at tau = 0.1
        from jitterchan.rs import _rate_from_e1

        pt = _rate_from_e1(0.1, 0.5, 0.01)
        assert pt.lambda_c == pytest.approx(math.log(11.0), rel=1e-14)
        assert pt.value == pytest.approx(KL_01_001, rel=1e-13)

    def test_boundary(self):
        from jitterchan.rs import _rate_from_e1

        pt = _rate_from_e1(0.1, 0.5, 0.1)
        assert pt.value == 0.0 and pt.lambda_c == pytest.approx(0.0, abs=1e-15)

    def test_lambda_grid_infimum(self):
        tau, e1 = 0.1, 0.01
        lam = np.arange(0.0, 6.0, 1e-4)
        sup = np.max(lam * tau - np.log1p(e1 * np.expm1(lam)))
        assert sup == pytest.approx(KL_01_001, abs=1e-9)

    def test_binomial_tail(self):
        exact = binom.sf(25, 255, 0.01)
        assert exact == pytest.approx(BINOM_TAIL_255, rel=1e-9)
        assert math.exp(-255 * KL_01_001) >= exact

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.01, 0.49), st.floats(0.01, 1.0), st.floats(0.02, 0.6), st.integers(1, 12))
    def test_nonnegative_and_positive_iff_below_tau(self, tau, p, sigma, n):
        pt = rate_function(tau, p, sigma, n)
        assert pt.value >= 0.0
        assert (pt.value > 0.0) == (pt.e1 < tau)
        assert (pt.lambda_c > 0) == (pt.e1 < tau)

    def test_chernoff_grid(self):
        code = code80()
        for Ns in (31, 255, 1023):
            t = int(code.tau * Ns)
            for p in np.linspace(0.3, 1.0, 15):
                pt = rate_function(code.tau, p, 0.1, 10)
                if pt.e1 >= code.tau:
                    continue
                assert math.exp(-Ns * pt.value) >= binom.sf(t, Ns, pt.e1) * (1 - 1e-9)

    def test_domain(self):
        with pytest.raises(ValueError):
            rate_function(0.5, 0.5, 0.1, 10)


class TestCriticalAmplitude:
    def test_oracle(self):
        assert critical_amplitude(0.1, 0.1, 10) == pytest.approx(0.1 * X_CRIT_TAU01_N10, rel=1e-11)

    def test_estimate(self):
        est = critical_amplitude_estimate(0.1, 0.1, 10)
        assert est == pytest.approx(P_HAT_C, rel=1e-14)
        assert critical_amplitude(0.1, 0.1, 10) <= est

    def test_solves_critical_condition(self):
        p_c = critical_amplitude(0.1, 0.08, 10)
        assert cond_symbol_error(p_c, 0.08, 10) == pytest.approx(0.1, abs=1e-10)

    def test_linear_in_sigma(self):
        assert critical_amplitude(0.1, 0.05, 10) == pytest.approx(0.5 * critical_amplitude(0.1, 0.1, 10), rel=1e-14)

    def test_degenerate(self):
        with pytest.raises(DegenerateCriticalAmplitude) as exc:
            critical_amplitude(0.05, 0.5, 10)
        assert exc.value.e1_at_one == pytest.approx(0.8222785407919722, rel=1e-12)
        assert exc.value.tau == 0.05

    def test_kl_curve_minimum_at_p_c(self):
        s = 0.1
        p_c = critical_amplitude(0.1, s, 10)
        F = _kl_curve(0.1, s, 10)
        grid = p_c + np.linspace(-0.2, 0.2, 81) * p_c
        vals = np.array([F(p) for p in grid])
        assert np.all(vals >= -1e-15)
        assert abs(F(p_c)) < 1e-12
        assert grid[np.argmin(vals)] == pytest.approx(p_c, abs=0.006 * p_c)


class TestSerBound:
    P = ChannelParams(sigma_from_snr(20.0), 0.2, num_probes=2550)

    def test_laplace_scaling(self):
        a = ser_upper_bound(self.P, code80(255))
        b = ser_upper_bound(self.P, code80(255), block_symbols=1020)
        assert b.laplace_term == pytest.approx(0.5 * a.laplace_term, rel=1e-13)
        assert b.floor_term == a.floor_term

    def test_converges_to_floor(self):
        terms = [ser_upper_bound(self.P, code80(255), block_symbols=Ns) for Ns in (255, 1023, 4095)]
        for x, y in zip(terms, terms[1:]):
            assert y.laplace_term / x.laplace_term == pytest.approx(0.5, rel=3e-3)
        assert terms[-1].total - terms[-1].floor_term < terms[0].total - terms[0].floor_term

    def test_floor_is_tail_at_p_c(self):
        b = ser_upper_bound(self.P, code80())
        assert b.floor_term == pytest.approx(self.P.amplitude().tail(b.p_c), rel=1e-14)
        assert b.curvature > 0
        floor, lap, total = b
        assert total == floor + lap

    def test_curvature_against_coarser_step(self):
        b = ser_upper_bound(self.P, code80())
        F = _kl_curve(0.1, self.P.sigma, 10)
        h = 1e-3 * b.p_c
        coarse = (F(b.p_c + h) - 2 * F(b.p_c) + F(b.p_c - h)) / h**2
        assert b.curvature == pytest.approx(coarse, rel=1e-4)

    def test_no_jitter(self):
        b = ser_upper_bound(ChannelParams(0.1, 0.0, num_probes=2550), code80())
        assert b.total == 0.0

    def test_degenerate_propagates(self):
        with pytest.raises(DegenerateCriticalAmplitude):
            ser_upper_bound(ChannelParams(0.5, 0.2, num_probes=2550), RsCode.from_rate(10, 255, 0.9))

    @pytest.mark.parametrize("sj", [0.15, 0.2, 0.3])
    def test_floor_power_law_slope(self, sj):
        # log10 floor vs SNR over 14..26 dB should fall at gamma/20 decades per dB
        snr = np.arange(14.0, 26.01, 1.0)
        floors = [
            ser_upper_bound(ChannelParams(sigma_from_snr(x), sj, num_probes=2550), code80()).floor_term for x in snr
        ]
        slope = np.polyfit(snr, np.log10(floors), 1)[0]
        target = -0.25 / (2 * sj * sj) / 20
        assert slope == pytest.approx(target, rel=0.10)


class TestHighRate:
    P = ChannelParams(0.1, 0.2)

    def test_exponent(self):
        _, g = high_rate_floor(self.P, code80())
        assert g == pytest.approx(3.125)
        assert -g / 20 == pytest.approx(-0.15625)

    def test_independent_of_rate_and_size(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            gs = {high_rate_floor(self.P, RsCode.from_rate(10, Ns, R))[1] for Ns in (255, 1023) for R in (0.5, 0.8, 0.9)}
        assert len(gs) == 1

    def test_coefficient_ratio(self):
        c9, g = high_rate_floor(self.P, RsCode.from_rate(10, 255, 0.9))
        c8, _ = high_rate_floor(self.P, code80())
        assert c9 / c8 < 1.35
        tau9 = RsCode.from_rate(10, 255, 0.9).tau
        assert c9 / c8 == pytest.approx((math.log(10 / (2 * tau9)) / math.log(50)) ** (g / 2), rel=1e-12)

    def test_warns_at_low_rate(self):
        with pytest.warns(UserWarning):
            high_rate_floor(self.P, RsCode.from_rate(10, 255, 0.5))

    def test_bounds_exact_floor_order(self):
        # coeff * sigma**gamma should sit within a modest factor of the exact floor at high SNR
        P = ChannelParams(sigma_from_snr(30.0), 0.2, num_probes=2550)
        coeff, g = high_rate_floor(P, code80())
        exact = ser_upper_bound(P, code80()).floor_term
        assert 0.1 < exact / (coeff * P.sigma**g) < 10


class TestInterleaving:
    @pytest.mark.parametrize("N,L,B", [(1000, 1, 10**6), (1, 1, 10**3), (4096, 4, 16_384_000)])
    def test_values(self, N, L, B):
        assert interleaving_block_estimate(N, L) == B

    def test_domain(self):
        with pytest.raises(ValueError):
            interleaving_block_estimate(0, 1)
