import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hodecoherence.bath import BathSpec, alpha_imag, alpha_real_zero_temp
from hodecoherence.errors import EndpointMismatchError, RegimeError
from hodecoherence.influence import (
    DomainError,
    OpticalSpec,
    PathPair,
    decoherence_time_thermal,
    decoherence_time_zero_temp,
    decoherence_weight,
    harmonic_action,
    influence_phase,
    optical_estimate,
    w_imag_asymptotic,
    w_imag_discrete,
    w_imag_ratio,
)
from hodecoherence.oscillator import OscillatorSystem, UnitSystem

B = BathSpec(eta=1.0, omega_cut=10.0)
SYS = OscillatorSystem(dim=8)


def smooth_pair(n_steps, t_final=1.0, seed=3):
    rng = np.random.default_rng(seed)
    cx, cy = rng.normal(size=(2, 3))
    k = np.arange(1, 4) * math.pi / t_final

    def f(c):
        return lambda t: np.cos(np.outer(t, k)) @ c

    return PathPair.from_functions(f(cx), f(cy), t_final, n_steps)


def brute_double_sum(paths, kernel, ordered):
    t = paths.t_grid
    w = paths.weights()
    d = paths.separation
    total = 0.0
    for i in range(t.size):
        for j in range(t.size):
            if ordered and j > i:
                continue
            f = 0.5 if (ordered and i == j) else 1.0
            total += f * w[i] * w[j] * d[i] * d[j] * kernel(t[i] - t[j])
    return total


class TestPathPair:
    def test_rejects_nonuniform(self):
        with pytest.raises(ValueError):
            PathPair(np.array([0.0, 0.1, 0.3]), np.zeros(3), np.zeros(3))

    def test_rejects_decreasing_and_short(self):
        with pytest.raises(ValueError):
            PathPair(np.array([0.0, -0.1]), np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            PathPair(np.array([0.0]), np.zeros(1), np.zeros(1))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            PathPair(np.linspace(0, 1, 4), np.zeros(4), np.zeros(3))

    def test_accepts_long_linspace(self):
        assert PathPair.constant_separation(1.0, 1.0, 16384).n_steps == 16384


class TestWImagDiscrete:
    def test_identical_paths(self):
        p = PathPair.from_functions(np.sin, np.sin, 1.0, 128)
        assert w_imag_discrete(p, B) == 0.0

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=15, deadline=None)
    def test_quadratic_scaling(self, seed):
        p = smooth_pair(64, seed=seed)
        doubled = PathPair(p.t_grid, p.y_vals + 2 * p.separation, p.y_vals)
        assert w_imag_discrete(doubled, B) == pytest.approx(4 * w_imag_discrete(p, B), rel=1e-12)

    def test_matches_brute_force(self):
        p = smooth_pair(40)
        ref = brute_double_sum(p, lambda tau: alpha_real_zero_temp(tau, B), ordered=False)
        assert w_imag_discrete(p, B) == pytest.approx(ref, rel=1e-12)

    def test_rejects_finite_temperature(self):
        with pytest.raises(RegimeError):
            w_imag_discrete(smooth_pair(8), replace(B, temperature=1.0))

    def test_refinement(self):
        vals = [w_imag_discrete(PathPair.constant_separation(1.0, 1.0, n), replace(B, omega_cut=40.0))
                for n in (4096, 8192)]
        assert abs(vals[1] - vals[0]) <= 1e-4 * abs(vals[1])

    def test_deterministic(self):
        p = smooth_pair(700)
        assert w_imag_discrete(p, B) == w_imag_discrete(p, B)

    def test_ratio_finite(self):
        r = w_imag_ratio(PathPair.constant_separation(1.0, 1.0, 512), B)
        assert math.isfinite(r) and r > 0


class TestAsymptotic:
    def test_unit_separation_value(self):
        p = PathPair.constant_separation(1.0, 1.0, 100)
        res = w_imag_asymptotic(p, BathSpec(eta=1.0, omega_cut=100.0))
        assert res.w_imag == 50.0
        assert res.exponent == 50.0

    def test_identical_paths(self):
        p = PathPair.from_functions(np.cos, np.cos, 2.0, 50)
        assert w_imag_asymptotic(p, B).w_imag == 0.0

    def test_hbar_scaling(self):
        p = smooth_pair(50)
        a = w_imag_asymptotic(p, B, UnitSystem(hbar=1.0)).exponent
        b = w_imag_asymptotic(p, B, UnitSystem(hbar=0.5)).exponent
        assert b == pytest.approx(2 * a, rel=1e-15)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=15, deadline=None)
    def test_nonnegative_and_time_reversal(self, seed):
        p = smooth_pair(50, seed=seed)
        rev = PathPair(p.t_grid, p.x_vals[::-1], p.y_vals[::-1])
        a = w_imag_asymptotic(p, B).w_imag
        assert a >= 0
        assert w_imag_asymptotic(rev, B).w_imag == pytest.approx(a, rel=1e-13)


class TestInfluencePhase:
    def test_identical_and_uncoupled(self):
        p = smooth_pair(64)
        same = PathPair(p.t_grid, p.x_vals, p.x_vals)
        assert influence_phase(same, B) == 0
        assert influence_phase(p, replace(B, eta=0.0)) == 0

    def test_full_square_imag_equals_w_imag_discrete(self):
        p = smooth_pair(300)
        full = influence_phase(p, B, region="full_square")
        assert full.imag == pytest.approx(w_imag_discrete(p, B), rel=1e-10)

    def test_ordered_is_half_of_full_square_for_real_kernel(self):
        p = smooth_pair(300)
        assert influence_phase(p, B).imag == pytest.approx(0.5 * influence_phase(p, B, region="full_square").imag,
                                                            rel=1e-12)

    def test_matches_brute_force(self):
        p = smooth_pair(30)
        im_ref = brute_double_sum(p, lambda tau: alpha_real_zero_temp(tau, B), ordered=True)
        # real part: -sum (x-y)(t) alpha_I(t-s) (x+y)(s)
        t, w, d, s = p.t_grid, p.weights(), p.separation, p.x_vals + p.y_vals
        re_ref = 0.0
        for i in range(t.size):
            for j in range(i + 1):
                f = 0.5 if i == j else 1.0
                re_ref -= f * w[i] * w[j] * d[i] * s[j] * alpha_imag(t[i] - t[j], B)
        w_val = influence_phase(p, B)
        assert w_val.imag == pytest.approx(im_ref, rel=1e-12)
        assert w_val.real == pytest.approx(re_ref, rel=1e-10)

    def test_refinement(self):
        a = influence_phase(smooth_pair(2048), B)
        b = influence_phase(smooth_pair(4096), B)
        assert abs(a.real - b.real) <= 1e-4 * abs(b.real)
        assert abs(a.imag - b.imag) <= 1e-4 * abs(b.imag)

    def test_finite_temperature_increases_imaginary_part(self):
        p = smooth_pair(64)
        cold = influence_phase(p, B).imag
        hot = influence_phase(p, replace(B, temperature=5.0)).imag
        assert hot > cold

    def test_unknown_region(self):
        with pytest.raises(ValueError):
            influence_phase(smooth_pair(8), B, region="triangle")


class TestAction:
    def test_quarter_period(self):
        t = np.linspace(0, math.pi / 4, 4097)
        assert harmonic_action(t, np.cos(t), SYS) == pytest.approx(-0.25, abs=1e-5)

    def test_half_period(self):
        # analytic -(1/4) sin(2T) at T = pi/2 is zero
        t = np.linspace(0, math.pi / 2, 4097)
        assert abs(harmonic_action(t, np.cos(t), SYS)) <= 1e-5

    def test_general_interval(self):
        tf = 1.3
        t = np.linspace(0, tf, 2049)
        s = OscillatorSystem(mass=2.0, omega=1.5, dim=4)
        x = np.cos(1.5 * t)
        # m omega^2/2 int (sin^2 - cos^2) = -(m omega / 4) sin(2 omega T)
        assert harmonic_action(t, x, s) == pytest.approx(-(2.0 * 1.5 / 4) * math.sin(3.0 * tf), abs=1e-5)


def gaussian_rho(y, x):
    return math.pi**-0.5 * math.exp(-(x * x + y * y) / 2)


class TestDecoherenceWeight:
    def test_identical_paths_give_density(self):
        p = PathPair.from_functions(lambda t: 0.3 + 0 * t, lambda t: 0.3 + 0 * t, 1.0, 32)
        w = decoherence_weight(p, gaussian_rho, SYS, B)
        assert w.imag == 0.0
        assert w.real == pytest.approx(gaussian_rho(0.3, 0.3), rel=1e-15)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=10, deadline=None)
    def test_modulus_identity(self, seed):
        p = smooth_pair(64, seed=seed)
        p = PathPair(p.t_grid, p.x_vals, p.y_vals - p.y_vals[-1] + p.x_vals[-1])
        w = decoherence_weight(p, gaussian_rho, SYS, B)
        im = influence_phase(p, B).imag
        rho = abs(gaussian_rho(p.y_vals[0], p.x_vals[0]))
        assert abs(w) == pytest.approx(math.exp(-im) * rho, rel=1e-12)
        assert abs(w) <= rho * math.exp(abs(im)) * (1 + 1e-12)

    def test_endpoint_mismatch(self):
        with pytest.raises(EndpointMismatchError):
            decoherence_weight(PathPair.constant_separation(0.1, 1.0, 8), gaussian_rho, SYS, B)


class TestDecoherenceTimes:
    def test_unit_case(self):
        assert decoherence_time_zero_temp(1.0, BathSpec(eta=1.0, omega_cut=1.0)).t_d == 1.0

    def test_direct_formula(self):
        assert decoherence_time_zero_temp(1.0, BathSpec(eta=2.0, omega_cut=5.0)).t_d == pytest.approx(0.1, rel=1e-15)

    def test_inverse_square(self):
        a = decoherence_time_zero_temp(1.0, B).t_d
        assert decoherence_time_zero_temp(2.0, B).t_d == pytest.approx(a / 4, rel=1e-15)

    @given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0.1, 10))
    @settings(max_examples=40, deadline=None)
    def test_identity(self, dx, eta, om, hbar):
        est = decoherence_time_zero_temp(dx, BathSpec(eta=eta, omega_cut=om), UnitSystem(hbar=hbar))
        assert est.t_d * eta * om * dx**2 / hbar == pytest.approx(1.0, rel=1e-14)
        assert est.regime == "zero_temperature"

    def test_domain_error(self):
        with pytest.raises(DomainError):
            decoherence_time_zero_temp(1.0, BathSpec(eta=0.0))

    def test_thermal(self):
        est = decoherence_time_thermal(1.0, 1.0, 1.0)
        assert est.t_d == 1.0 and est.regime == "high_temperature"
        assert decoherence_time_thermal(1.0, 1.0, 2.0).t_d == 0.5

    def test_thermal_ratio(self):
        assert decoherence_time_thermal(1.0, 1.0, 10.0, omega_cut=10.0).ratio_to_zero_temperature == 1.0
        e = decoherence_time_thermal(0.7, 0.3, 4.0, UnitSystem(2.0, 0.5), omega_cut=6.0)
        z = decoherence_time_zero_temp(0.7, BathSpec(eta=0.3, omega_cut=6.0), UnitSystem(2.0, 0.5))
        assert e.ratio_to_zero_temperature == pytest.approx(e.t_d / z.t_d, rel=1e-14)

    def test_thermal_rejects_zero_temperature(self):
        with pytest.raises(DomainError):
            decoherence_time_thermal(1.0, 1.0, 0.0)


class TestOptical:
    def test_order_of_magnitude(self):
        t = optical_estimate(OpticalSpec(1, 1.0))
        assert t == pytest.approx(3.3356e-11, rel=1e-4)
        assert 1e-11 <= t <= 1e-10

    def test_scalings(self):
        base = optical_estimate(OpticalSpec(1, 1.0))
        assert optical_estimate(OpticalSpec(10, 1.0)) == pytest.approx(base / 10, rel=1e-15)
        assert optical_estimate(OpticalSpec(1, 2.0)) == pytest.approx(base / 2, rel=1e-15)

    def test_invalid(self):
        with pytest.raises(ValueError):
            OpticalSpec(0.5, 1.0)
