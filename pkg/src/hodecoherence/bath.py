"""Ohmic bath correlation kernels with a sharp frequency cutoff.

The real part of the kernel is

    alpha_R(tau) = (eta/pi) int_0^Omega w coth(hbar w / 2 k_B T) cos(w tau) dw

which has a closed form only at T = 0.  Closed forms are evaluated with
series branches for |Omega tau| < SERIES_SWITCH, where direct evaluation
loses precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import QuadratureError
from .oscillator import NATURAL, UnitSystem

SERIES_SWITCH = 1e-4
QUAD_TOL = 1e-10
QUAD_LIMIT = 500


@dataclass(frozen=True)
class BathSpec:
    eta: float = 1.0
    omega_cut: float = 10.0
    temperature: float = 0.0

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError("eta must be >= 0")
        if not self.omega_cut > 0:
            raise ValueError("omega_cut must be > 0")
        if not self.temperature >= 0:
            raise ValueError("temperature must be >= 0")

    @property
    def dephasing_rate(self) -> float:
        """eta * Omega / pi, the coefficient of the double commutator (times hbar)."""
        return self.eta * self.omega_cut / math.pi


def _cos_minus_sinc(u: np.ndarray) -> np.ndarray:
    """cos(u) - sin(u)/u without cancellation at small u."""
    u = np.asarray(u, dtype=float)
    near = np.abs(u) < 0.5
    safe = np.where(near, 1.0, u)
    far = np.cos(safe) - np.sin(safe) / safe
    # sum_k (-1)^k 2k u^(2k) / (2k+1)!
    u2 = u * u
    acc = np.zeros_like(u)
    power = np.ones_like(u)
    for k in range(1, 12):
        power = power * u2
        acc = acc + (-1) ** k * (2 * k) * power / math.factorial(2 * k + 1)
    return np.where(near, acc, far)


def alpha_imag(tau, bath: BathSpec):
    """Imaginary kernel (eta/pi)(Omega/tau)[cos(Omega tau) - sin(Omega tau)/(Omega tau)].

    Odd in tau.  Note this closed form equals -2 times
    (eta/2pi) int_0^Omega w sin(w tau) dw; see :func:`alpha_imag_integral`.
    Accepts scalars or arrays.
    """
    tau = np.asarray(tau, dtype=float)
    om = bath.omega_cut
    u = om * tau
    small = np.abs(u) < SERIES_SWITCH
    safe_u = np.where(small, 1.0, u)
    direct = (bath.eta / math.pi) * om**2 * _cos_minus_sinc(safe_u) / safe_u
    series = (bath.eta / math.pi) * om**2 * (-u / 3 + u**3 / 30 - u**5 / 840)
    out = np.where(small, series, direct)
    return float(out) if out.ndim == 0 else out


def alpha_imag_integral(tau: float, bath: BathSpec) -> float:
    """(eta/2pi) int_0^Omega w sin(w tau) dw, evaluated in closed form."""
    om = bath.omega_cut
    if abs(om * tau) < SERIES_SWITCH:
        u = om * tau
        return (bath.eta / (2 * math.pi)) * om**2 * (u / 3 - u**3 / 30)
    return (bath.eta / (2 * math.pi)) * (math.sin(om * tau) / tau**2 - om * math.cos(om * tau) / tau)


def alpha_real_zero_temp(tau, bath: BathSpec):
    """Zero-temperature real kernel.

    (eta/pi) Omega sin(Omega tau)/tau - (eta/2pi) (sin(Omega tau/2)/(tau/2))^2,
    even in tau, with limit eta Omega^2 / 2pi at tau = 0.
    """
    tau = np.asarray(tau, dtype=float)
    om = bath.omega_cut
    u = om * tau
    small = np.abs(u) < SERIES_SWITCH
    t = np.where(small, 1.0, tau)
    direct = (bath.eta / math.pi) * om * np.sin(om * t) / t - (bath.eta / (2 * math.pi)) * (
        np.sin(om * t / 2) / (t / 2)
    ) ** 2
    series = (bath.eta / math.pi) * om**2 * (0.5 - u**2 / 8 + u**4 / 144)
    out = np.where(small, series, direct)
    return float(out) if out.ndim == 0 else out


def omega_coth(omega, temperature: float, units: UnitSystem = NATURAL):
    """omega * coth(hbar omega / 2 k_B T), finite at omega = 0.

    At T = 0 coth is identically 1, so the result is omega itself and
    vanishes at omega = 0.  For T > 0 the omega -> 0 limit is 2 k_B T / hbar.
    """
    w = np.asarray(omega, dtype=float)
    if temperature == 0:
        out = w.copy()
    else:
        x = units.hbar * w / (2 * units.boltzmann * temperature)
        small = np.abs(x) < 1e-4
        xs = np.where(small, 1.0, x)
        # x / tanh(x) = 1 + x^2/3 - x^4/45 + ...
        ratio = np.where(small, 1 + x**2 / 3 - x**4 / 45, xs / np.tanh(xs))
        out = ratio * (2 * units.boltzmann * temperature / units.hbar)
    return float(out) if out.ndim == 0 else out


def kernel_integrand(omega, tau: float, bath: BathSpec, units: UnitSystem = NATURAL):
    """(eta/pi) omega coth(hbar omega / 2 k_B T) cos(omega tau)."""
    return (bath.eta / math.pi) * omega_coth(omega, bath.temperature, units) * np.cos(np.asarray(omega) * tau)


def _quad_cos(f, upper: float, tau: float) -> float:
    """int_0^upper f(w) cos(w tau) dw with QUADPACK's oscillatory rules."""
    with np.errstate(all="ignore"):
        if abs(tau) * upper < 1.0:
            res = integrate.quad(lambda w: f(w) * math.cos(w * tau), 0.0, upper,
                                 epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=QUAD_LIMIT, full_output=1)
        else:
            res = integrate.quad(f, 0.0, upper, weight="cos", wvar=abs(tau),
                                 epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=QUAD_LIMIT, full_output=1)
    value, err = res[0], res[1]
    # a fourth element is QUADPACK's warning message
    if len(res) > 3 and err > 1e-8 * max(1.0, abs(value)):
        raise QuadratureError(f"quadrature failed to converge at tau={tau}: {res[3]}")
    return value


def alpha_real_quadrature(tau: float, bath: BathSpec, units: UnitSystem = NATURAL, coth_one: bool = False) -> float:
    """Direct adaptive quadrature of the real kernel.

    With ``coth_one`` the thermal factor is replaced by 1, which is the
    reference the zero-temperature closed form must reproduce.
    """
    if coth_one:
        f = lambda w: w  # noqa: E731
    else:
        f = lambda w: omega_coth(w, bath.temperature, units)  # noqa: E731
    return (bath.eta / math.pi) * _quad_cos(f, bath.omega_cut, tau)


def alpha_real_finite_temp(tau: float, bath: BathSpec, units: UnitSystem = NATURAL) -> float:
    """Real kernel at temperature ``bath.temperature``.

    T = 0 is an exact branch that delegates to :func:`alpha_real_zero_temp`;
    otherwise the frequency integral is done by adaptive quadrature to
    1e-10 absolute and relative tolerance.
    """
    if bath.temperature == 0:
        return alpha_real_zero_temp(tau, bath)
    if bath.eta == 0:
        return 0.0
    return alpha_real_quadrature(tau, bath, units)
