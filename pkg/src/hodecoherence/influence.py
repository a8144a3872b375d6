"""Discretized influence functional and decoherence-time estimates.

Double time integrals are evaluated as trapezoidal double sums on the path
grid.  Because every kernel depends only on the lag t - s, the kernel is
tabulated once per lag and the sum is accumulated in fixed row blocks, so
results are reproducible bit for bit for a given ``BLOCK``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .bath import BathSpec, alpha_imag, alpha_real_finite_temp, alpha_real_zero_temp
from .errors import DecoherenceError, EndpointMismatchError, RegimeError
from .oscillator import NATURAL, OscillatorSystem, UnitSystem

BLOCK = 256
SPEED_OF_LIGHT_CM = 2.998e10

# Conventions this module commits to where the source formulas are ambiguous.
# The CLI copies these into every metadata sidecar.
CONVENTIONS = {
    "w_imag_discrete_region": "full_square",
    "influence_phase_region": "ordered_s_le_t",
    "action_phase": "exp(i[S(x)-S(y)]/hbar)",
    "alpha_imag_form": "closed_form_(eta/pi)(Omega/tau)[cos(Omega tau)-sin(Omega tau)/(Omega tau)]",
    "optical_mapping": "t_d = 1/(light_speed * gain * n_photons)",
}


class DomainError(DecoherenceError, ValueError):
    pass


@dataclass(frozen=True)
class PathPair:
    """Two amplitude histories x(t), y(t) on a shared uniform grid."""

    t_grid: np.ndarray
    x_vals: np.ndarray
    y_vals: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        x = np.asarray(self.x_vals, dtype=float)
        y = np.asarray(self.y_vals, dtype=float)
        if not (t.ndim == x.ndim == y.ndim == 1 and t.size == x.size == y.size):
            raise ValueError("t_grid, x_vals and y_vals must be 1-D arrays of equal length")
        if t.size < 2:
            raise ValueError("paths need at least two nodes")
        d = np.diff(t)
        if np.any(d <= 0):
            raise ValueError("time grid must be strictly increasing")
        h = (t[-1] - t[0]) / (t.size - 1)
        if np.max(np.abs(d - h)) > 1e-12 * max(abs(t[0]), abs(t[-1])):
            raise ValueError("time grid is not uniform")
        for name, arr in (("t_grid", t), ("x_vals", x), ("y_vals", y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_functions(cls, x_fn: Callable, y_fn: Callable, t_final: float, n_steps: int) -> "PathPair":
        t = np.linspace(0.0, t_final, n_steps + 1)
        return cls(t, np.broadcast_to(x_fn(t), t.shape), np.broadcast_to(y_fn(t), t.shape))

    @classmethod
    def constant_separation(cls, separation: float, t_final: float, n_steps: int, center: float = 0.0) -> "PathPair":
        t = np.linspace(0.0, t_final, n_steps + 1)
        return cls(t, np.full_like(t, center + separation / 2), np.full_like(t, center - separation / 2))

    @property
    def n_steps(self) -> int:
        return self.t_grid.size - 1

    @property
    def step(self) -> float:
        return (self.t_grid[-1] - self.t_grid[0]) / self.n_steps

    @property
    def separation(self) -> np.ndarray:
        return self.x_vals - self.y_vals

    def weights(self) -> np.ndarray:
        w = np.full(self.t_grid.size, self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w


def _lag_sum(u: np.ndarray, v: np.ndarray, lag_kernel: np.ndarray, ordered: bool):
    """sum_ij u_i K[i-j] v_j over the full square or over j <= i.

    ``lag_kernel`` holds K at signed lags -(n-1)..(n-1).  In the ordered
    case the diagonal is weighted by 1/2 so that a symmetric kernel gives
    exactly half the full-square sum.
    """
    n = u.size
    j = np.arange(n)
    total = 0.0
    for i0 in range(0, n, BLOCK):
        i = np.arange(i0, min(i0 + BLOCK, n))
        lag = i[:, None] - j[None, :]
        k = lag_kernel[lag + (n - 1)]
        if ordered:
            k = k * np.where(lag > 0, 1.0, np.where(lag == 0, 0.5, 0.0))
        total = total + u[i] @ (k @ v)
    return total


def _signed_lags(paths: PathPair) -> np.ndarray:
    n = paths.t_grid.size
    return np.arange(-(n - 1), n) * paths.step


def _unscaled_imag_kernel(tau: np.ndarray, bath: BathSpec) -> np.ndarray:
    # Omega sin(Omega tau)/tau - 1/2 (sin(Omega tau/2)/(tau/2))^2 with prefactor eta/pi;
    # identical to the zero-temperature real kernel
    return alpha_real_zero_temp(tau, bath)


def w_imag_discrete(paths: PathPair, bath: BathSpec) -> float:
    """Finite-cutoff imaginary influence phase at zero temperature.

    Trapezoidal double sum over the full square [0, t_f]^2 of
    (x-y)(t) (x-y)(s) K(t-s) with K the zero-temperature real kernel.
    Raises :class:`RegimeError` for T != 0.
    """
    if bath.temperature != 0:
        raise RegimeError("w_imag_discrete is the zero-temperature form; got T != 0")
    d = paths.separation * paths.weights()
    if not np.any(d):
        return 0.0
    kern = _unscaled_imag_kernel(_signed_lags(paths), bath)
    return float(_lag_sum(d, d, kern, ordered=False))


class AsymptoticPhase(NamedTuple):
    w_imag: float
    exponent: float  # w_imag / hbar


def w_imag_asymptotic(paths: PathPair, bath: BathSpec, units: UnitSystem = NATURAL) -> AsymptoticPhase:
    """Large-cutoff limit (eta Omega / 2) int (x-y)^2 dt, plus its value over hbar."""
    if bath.temperature != 0:
        raise RegimeError("w_imag_asymptotic is the zero-temperature form; got T != 0")
    w = 0.5 * bath.eta * bath.omega_cut * float(np.trapezoid(paths.separation**2, paths.t_grid))
    return AsymptoticPhase(w, w / units.hbar)


def w_imag_ratio(paths: PathPair, bath: BathSpec, units: UnitSystem = NATURAL) -> float:
    """Ratio of the finite-cutoff double sum to the asymptotic formula."""
    asym = w_imag_asymptotic(paths, bath, units).w_imag
    if asym == 0:
        return math.nan
    return w_imag_discrete(paths, bath) / asym


def _kernel_tables(paths: PathPair, bath: BathSpec, units: UnitSystem):
    """alpha_R and alpha_I at all signed lags of the grid."""
    n = paths.t_grid.size
    pos = np.arange(n) * paths.step
    if bath.temperature == 0:
        re_pos = alpha_real_zero_temp(pos, bath)
    else:
        re_pos = np.array([alpha_real_finite_temp(t, bath, units) for t in pos])
    im_pos = alpha_imag(pos, bath)
    re = np.concatenate([re_pos[:0:-1], re_pos])
    im = np.concatenate([-im_pos[:0:-1], im_pos])
    return re, im


def influence_phase(
    paths: PathPair, bath: BathSpec, units: UnitSystem = NATURAL, region: str = "ordered"
) -> complex:
    """Complex influence phase W for linear coupling.

    W = i sum_{s<=t} (x-y)(t) [alpha(t-s) x(s) - alpha*(t-s) y(s)],
    alpha = alpha_R + i alpha_I.  ``region="full_square"`` sums over the
    whole square instead; its imaginary part then coincides with
    :func:`w_imag_discrete` at T = 0.
    """
    if region not in ("ordered", "full_square"):
        raise ValueError(f"unknown region {region!r}")
    if bath.eta == 0:
        return 0j
    w = paths.weights()
    d = paths.separation * w
    if not np.any(d):
        return 0j
    re, im = _kernel_tables(paths, bath, units)
    ordered = region == "ordered"
    # alpha x - alpha* y = alpha_R (x - y) + i alpha_I (x + y)
    term_r = _lag_sum(d, paths.separation * w, re, ordered)
    term_i = _lag_sum(d, (paths.x_vals + paths.y_vals) * w, im, ordered)
    return complex(1j * (term_r + 1j * term_i))


def harmonic_action(t: np.ndarray, x: np.ndarray, system: OscillatorSystem) -> float:
    """int (m xdot^2 / 2 - m omega^2 x^2 / 2) dt.

    Velocities are finite differences over each step (midpoint), the
    potential term is trapezoidal.
    """
    h = np.diff(t)
    kinetic = 0.5 * system.mass * np.sum(np.diff(x) ** 2 / h)
    potential = 0.5 * system.mass * system.omega**2 * np.trapezoid(x**2, t)
    return float(kinetic - potential)


def decoherence_weight(
    paths: PathPair,
    rho0_position: Callable[[float, float], complex],
    system: OscillatorSystem,
    bath: BathSpec,
    units: UnitSystem = NATURAL,
    endpoint_tol: float = 1e-9,
) -> complex:
    """Path-pair contribution exp(i[S(x)-S(y)]/hbar) exp(iW) rho0(y0, x0).

    The paths must meet at the final time; otherwise
    :class:`EndpointMismatchError` is raised.
    """
    if abs(paths.x_vals[-1] - paths.y_vals[-1]) > endpoint_tol:
        raise EndpointMismatchError(
            f"paths end at different points: x={paths.x_vals[-1]!r}, y={paths.y_vals[-1]!r}"
        )
    ds = harmonic_action(paths.t_grid, paths.x_vals, system) - harmonic_action(paths.t_grid, paths.y_vals, system)
    w = influence_phase(paths, bath, units)
    rho = complex(rho0_position(paths.y_vals[0], paths.x_vals[0]))
    return complex(np.exp(1j * ds / units.hbar) * np.exp(1j * w) * rho)


@dataclass(frozen=True)
class DecoherenceEstimate:
    t_d: float
    regime: str
    delta_x: float
    eta: float
    omega_cut: Optional[float] = None
    temperature: Optional[float] = None
    ratio_to_zero_temperature: Optional[float] = None

    def __post_init__(self):
        if not self.t_d > 0:
            raise ValueError("decoherence time must be positive")
        if self.regime not in ("zero_temperature", "high_temperature"):
            raise ValueError(f"unknown regime {self.regime!r}")


def decoherence_time_zero_temp(delta_x: float, bath: BathSpec, units: UnitSystem = NATURAL) -> DecoherenceEstimate:
    """t_d = hbar / (eta Omega |dx|^2)."""
    denom = bath.eta * bath.omega_cut * delta_x**2
    if denom == 0:
        raise DomainError("eta * Omega * delta_x^2 vanishes; no finite decoherence time")
    return DecoherenceEstimate(
        t_d=units.hbar / denom,
        regime="zero_temperature",
        delta_x=delta_x,
        eta=bath.eta,
        omega_cut=bath.omega_cut,
        temperature=0.0,
    )


def decoherence_time_thermal(
    delta_x: float,
    eta: float,
    temperature: float,
    units: UnitSystem = NATURAL,
    omega_cut: Optional[float] = None,
) -> DecoherenceEstimate:
    """High-temperature estimate t_d = (hbar / eta k_B T) hbar / |dx|^2.

    If ``omega_cut`` is given, the ratio t_d(thermal) / t_d(T=0), which is
    hbar Omega / k_B T, is filled in.
    """
    if not temperature > 0:
        raise DomainError("thermal estimate needs T > 0; use decoherence_time_zero_temp at T = 0")
    denom = eta * units.boltzmann * temperature * delta_x**2
    if denom == 0:
        raise DomainError("eta * delta_x^2 vanishes; no finite decoherence time")
    ratio = None
    if omega_cut is not None:
        ratio = units.hbar * omega_cut / (units.boltzmann * temperature)
    return DecoherenceEstimate(
        t_d=units.hbar**2 / denom,
        regime="high_temperature",
        delta_x=delta_x,
        eta=eta,
        omega_cut=omega_cut,
        temperature=temperature,
        ratio_to_zero_temperature=ratio,
    )


@dataclass(frozen=True)
class OpticalSpec:
    n_photons: float
    gain: float  # per cm
    light_speed: float = SPEED_OF_LIGHT_CM  # cm / s

    def __post_init__(self):
        if not (self.n_photons >= 1 and self.gain > 0 and self.light_speed > 0):
            raise ValueError("n_photons >= 1, gain > 0 and light_speed > 0 required")


def optical_estimate(spec: OpticalSpec) -> float:
    """Decoherence time in seconds for an amplifying optical computer.

    Uses the rate light_speed * gain * n_photons in place of
    eta Omega |dx|^2 / hbar.
    """
    return 1.0 / (spec.light_speed * spec.gain * spec.n_photons)
