import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hodecoherence.bath import (
    SERIES_SWITCH,
    BathSpec,
    alpha_imag,
    alpha_imag_integral,
    alpha_real_finite_temp,
    alpha_real_quadrature,
    alpha_real_zero_temp,
    kernel_integrand,
    omega_coth,
)
from hodecoherence.oscillator import UnitSystem

B = BathSpec(eta=1.0, omega_cut=10.0)
taus = st.floats(min_value=-20.0, max_value=20.0, allow_nan=False)


def sin_quad(tau, bath):
    """(eta/2pi) int_0^Omega w sin(w tau) dw by plain adaptive quadrature."""
    v, _ = integrate.quad(lambda w: w * math.sin(w * tau), 0, bath.omega_cut, epsabs=1e-12, epsrel=1e-11, limit=400)
    return bath.eta / (2 * math.pi) * v


def test_bath_invariants():
    for kw in ({"eta": -1}, {"omega_cut": 0}, {"temperature": -1e-3}):
        with pytest.raises(ValueError):
            BathSpec(**kw)
    assert B.dephasing_rate == pytest.approx(10 / math.pi)


class TestAlphaImag:
    def test_zero_at_origin(self):
        assert alpha_imag(0.0, B) == 0.0
        assert sin_quad(0.0, B) == 0.0

    @given(taus)
    @settings(max_examples=60, deadline=None)
    def test_odd(self, tau):
        assert alpha_imag(-tau, B) == pytest.approx(-alpha_imag(tau, B), rel=1e-14, abs=1e-300)

    @pytest.mark.parametrize("tau", [0.003, 0.3, 1.7, -2.2])
    def test_linear_in_eta(self, tau):
        assert alpha_imag(tau, replace(B, eta=2.0)) == pytest.approx(2 * alpha_imag(tau, B), rel=1e-14)

    @pytest.mark.parametrize("tau", [1e-6, 0.02, 0.37, 1.3, -4.1])
    def test_closed_form_is_minus_twice_printed_integral(self, tau):
        q = sin_quad(tau, B)
        assert alpha_imag_integral(tau, B) == pytest.approx(q, rel=1e-9, abs=1e-14)
        assert alpha_imag(tau, B) == pytest.approx(-2 * q, rel=1e-9, abs=1e-14)

    def test_series_continuity(self):
        t = SERIES_SWITCH / B.omega_cut
        below = alpha_imag(t * (1 - 1e-12), B)
        above = alpha_imag(t * (1 + 1e-12), B)
        assert abs(below - above) <= 1e-9 * abs(above)

    def test_array_matches_scalar(self):
        t = np.array([-1.0, 0.0, 1e-7, 0.5])
        np.testing.assert_array_equal(alpha_imag(t, B), [alpha_imag(v, B) for v in t])


class TestAlphaRealZeroTemp:
    def test_origin_value(self):
        assert alpha_real_zero_temp(0.0, B) == pytest.approx(100 / (2 * math.pi), rel=1e-15)
        q = alpha_real_quadrature(0.0, B, coth_one=True)
        assert q == pytest.approx(100 / (2 * math.pi), rel=1e-9)

    def test_zero_eta(self):
        z = replace(B, eta=0.0)
        np.testing.assert_array_equal(alpha_real_zero_temp(np.linspace(-3, 3, 11), z), 0.0)

    @given(taus)
    @settings(max_examples=60, deadline=None)
    def test_even(self, tau):
        assert alpha_real_zero_temp(-tau, B) == alpha_real_zero_temp(tau, B)

    def test_series_continuity(self):
        t = SERIES_SWITCH / B.omega_cut
        below = alpha_real_zero_temp(t * (1 - 1e-12), B)
        above = alpha_real_zero_temp(t * (1 + 1e-12), B)
        assert abs(below - above) <= 1e-9 * abs(above)

    @given(st.floats(min_value=-5.0, max_value=5.0))
    @settings(max_examples=30, deadline=None)
    def test_matches_quadrature(self, tau):
        closed = alpha_real_zero_temp(tau, B)
        q = alpha_real_quadrature(tau, B, coth_one=True)
        assert closed == pytest.approx(q, rel=1e-6, abs=1e-9)


class TestIntegrand:
    def test_zero_temperature_limit(self):
        assert abs(kernel_integrand(1e-10, 0.7, B)) <= 1e-6 * B.eta * B.omega_cut**2

    def test_finite_temperature_limit(self):
        units = UnitSystem(hbar=1.0, boltzmann=1.0)
        warm = replace(B, temperature=1.0)
        expected = 2 * warm.eta * units.boltzmann * warm.temperature / (math.pi * units.hbar)
        assert kernel_integrand(1e-10, 0.0, warm, units) == pytest.approx(expected, rel=1e-6)

    def test_omega_coth_branches_agree(self):
        # small-argument expansion vs direct evaluation across the switch
        units = UnitSystem(hbar=1.0, boltzmann=1.0)
        w = np.array([1.999e-4, 2.001e-4])
        direct = w / np.tanh(w / 2.0)
        np.testing.assert_allclose(omega_coth(w, 1.0, units), direct, rtol=1e-12)

    def test_omega_coth_at_zero_temperature(self):
        np.testing.assert_array_equal(omega_coth(np.array([0.0, 2.0]), 0.0), [0.0, 2.0])


class TestFiniteTemp:
    def test_zero_temperature_delegates(self):
        assert alpha_real_finite_temp(0.4, B) == alpha_real_zero_temp(0.4, B)

    def test_cold_limit(self):
        cold = replace(B, temperature=1e-12)
        assert alpha_real_finite_temp(1.0, cold) == pytest.approx(alpha_real_zero_temp(1.0, B), rel=1e-6)

    def test_high_temperature(self):
        hot = BathSpec(eta=1.0, omega_cut=1.0, temperature=100.0)
        approx = 2 * 100.0 / math.pi * math.sin(1.0)
        assert alpha_real_finite_temp(1.0, hot) == pytest.approx(approx, rel=1e-3)

    def test_units_enter_through_ratio(self):
        # scaling hbar and k_B together leaves both coth argument and prefactor unchanged
        b = BathSpec(eta=1.0, omega_cut=3.0, temperature=0.5)
        a1 = alpha_real_finite_temp(0.8, b, UnitSystem(1.0, 1.0))
        a2 = alpha_real_finite_temp(0.8, b, UnitSystem(2.0, 2.0))
        assert a1 == pytest.approx(a2, rel=1e-9)

    def test_monotone_in_temperature(self):
        temps = [0.0, 0.1, 0.5, 1.0, 3.0, 10.0]
        vals = [alpha_real_finite_temp(0.0, replace(B, temperature=t)) for t in temps]
        assert all(b >= a - 1e-12 * abs(a) for a, b in zip(vals, vals[1:]))

    @given(st.floats(min_value=0.05, max_value=6.0))
    @settings(max_examples=20, deadline=None)
    def test_even_at_finite_temperature(self, tau):
        warm = replace(B, temperature=2.0)
        assert alpha_real_finite_temp(tau, warm) == pytest.approx(alpha_real_finite_temp(-tau, warm), rel=1e-12)

    def test_zero_eta(self):
        assert alpha_real_finite_temp(1.0, BathSpec(eta=0.0, temperature=1.0)) == 0.0
