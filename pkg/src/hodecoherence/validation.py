"""Independent checks: quantum Hamilton-Jacobi residuals, position-space
quadrature of first-order population changes, and brute-force unitary
evolution of the oscillator together with a few explicit bath modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .bath import BathSpec
from .errors import DimensionError, GridTooSmallError, NodalRegionError
from .oscillator import (
    NATURAL,
    GridSpec,
    GridWavefunction,
    OscillatorSystem,
    UnitSystem,
    eigenfunction_grid,
    hamiltonian,
    position_operator,
)

MAX_JOINT_DIM = 4096
CONVENTIONS = ("as_printed", "standard_madelung")


def _d1(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central first derivative; two edge points are NaN."""
    out = np.full(f.shape, np.nan)
    out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    return out


def _d2(f: np.ndarray, h: float) -> np.ndarray:
    out = np.full(f.shape, np.nan)
    out[2:-2] = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * h * h)
    return out


@dataclass(frozen=True)
class ResidualReport:
    x: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray  # NaN where not evaluated
    interior: np.ndarray  # boolean mask of evaluated points
    max_abs: float


def _support(p: np.ndarray, threshold: float) -> slice:
    above = np.nonzero(p > threshold)[0]
    if above.size < 5:
        raise NodalRegionError("density is below threshold almost everywhere")
    lo, hi = above[0], above[-1]
    if np.any(p[lo:hi + 1] <= threshold):
        bad = lo + int(np.argmax(p[lo:hi + 1] <= threshold))
        raise NodalRegionError(f"density falls below {threshold:g} inside the support near grid index {bad}")
    return slice(lo, hi + 1)


def _spatial_terms(psi: np.ndarray, h: float, mass: float, units: UnitSystem, convention: str):
    """(hbar^2/2m)(grad phi)^2 and the chosen right-hand side on a support slice."""
    p = np.abs(psi) ** 2
    phase = np.unwrap(np.angle(psi))
    grad_phase = _d1(phase, h)
    lnp = np.log(p)
    g = _d1(lnp, h)
    lap = _d2(lnp, h)
    c = units.hbar**2 / (2 * mass)
    if convention == "as_printed":
        rhs = c * (0.5 * g**2 + lap)
    else:
        # grad^2 sqrt(p) / sqrt(p) = (1/4)(grad ln p)^2 + (1/2) grad^2 ln p
        rhs = c * (0.25 * g**2 + 0.5 * lap)
    return c * grad_phase**2, rhs


def hamilton_jacobi_residual(
    psi_series: Sequence[GridWavefunction],
    dt: float,
    potential: Callable[[np.ndarray], np.ndarray],
    units: UnitSystem = NATURAL,
    mass: float = 1.0,
    convention: str = "standard_madelung",
    threshold: float = 1e-12,
) -> ResidualReport:
    """Residual of the quantum Hamilton-Jacobi equation for the phase.

    Compares hbar dphi/dt + (hbar^2/2m)(grad phi)^2 + V with a quantum
    potential built from p = |psi|^2.  ``convention="standard_madelung"``
    uses (hbar^2/2m) grad^2 sqrt(p) / sqrt(p); ``"as_printed"`` uses
    (hbar^2/2m)[(1/2)(grad ln p)^2 + grad^2 ln p].

    With two slices (t, t+dt) the time derivative is a forward difference
    and spatial terms are averaged over both slices, i.e. everything is
    centred on t + dt/2.  With three slices (t-dt, t, t+dt) a central
    difference is used and spatial terms come from the middle slice.

    Points where p <= ``threshold`` are excluded if they lie in the tails;
    a sub-threshold point inside the support raises
    :class:`NodalRegionError`.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    if len(psi_series) not in (2, 3):
        raise ValueError("need two or three time slices")
    grid = psi_series[0].grid
    if any(w.grid != grid for w in psi_series):
        raise ValueError("all slices must share one grid")
    vals = [np.asarray(w.values) for w in psi_series]
    p_min = np.min([np.abs(v) ** 2 for v in vals], axis=0)
    sup = _support(p_min, threshold)
    h = grid.dx
    x = grid.x

    if len(vals) == 2:
        dphi = np.angle(vals[1][sup] * vals[0][sup].conj()) / dt
        terms = [_spatial_terms(v[sup], h, mass, units, convention) for v in vals]
        kin = 0.5 * (terms[0][0] + terms[1][0])
        rhs_s = 0.5 * (terms[0][1] + terms[1][1])
    else:
        dphi = np.angle(vals[2][sup] * vals[0][sup].conj()) / (2 * dt)
        kin, rhs_s = _spatial_terms(vals[1][sup], h, mass, units, convention)

    lhs_s = units.hbar * dphi + kin + np.asarray(potential(x[sup]), dtype=float)
    lhs = np.full(x.shape, np.nan)
    rhs = np.full(x.shape, np.nan)
    lhs[sup] = lhs_s
    rhs[sup] = rhs_s
    residual = lhs - rhs
    interior = np.isfinite(residual)
    return ResidualReport(x, lhs, rhs, residual, interior, float(np.max(np.abs(residual[interior]))))


def delta_rho_quadrature(
    rho0_grid: np.ndarray,
    grid: GridSpec,
    system: OscillatorSystem,
    n: int,
    bath: BathSpec,
    t: float,
    units: UnitSystem = NATURAL,
) -> float:
    """First-order population change of level ``n`` computed in position space.

    -(eta Omega / pi hbar) t  int int rho0(x,y) psi_n*(x) (x-y)^2 psi_n(y) dx dy
    by 2-D trapezoidal quadrature, with rho0(x, y) = <x|rho0|y> sampled on
    ``grid`` x ``grid``.
    """
    rho = np.asarray(rho0_grid)
    if rho.shape != (grid.n_points, grid.n_points):
        raise ValueError("rho0_grid must be n_points x n_points")
    w = grid.weights()
    mass_on_grid = float(np.real(w @ np.diag(rho)))
    if abs(1.0 - mass_on_grid) > 1e-8:
        raise GridTooSmallError(f"rho0 trace on grid is {mass_on_grid!r}; grid misses part of the state")
    psi = eigenfunction_grid(system, n, grid, units, normalize=False).values
    x = grid.x
    a = w * psi.conj()
    b = w * psi
    # (x - y)^2 = x^2 - 2xy + y^2
    integral = (a * x**2) @ rho @ b - 2 * (a * x) @ rho @ (b * x) + a @ rho @ (b * x**2)
    rate = bath.eta * bath.omega_cut / (math.pi * units.hbar)
    return float(np.real(-rate * t * integral))


@dataclass(frozen=True)
class BathModeSet:
    frequencies: np.ndarray
    couplings: np.ndarray
    dims: tuple

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        c = np.asarray(self.couplings, dtype=float)
        d = tuple(int(k) for k in self.dims)
        if not (f.size == c.size == len(d)):
            raise ValueError("frequencies, couplings and dims must have equal length")
        if np.any(f <= 0):
            raise ValueError("mode frequencies must be positive")
        if any(k < 2 for k in d):
            raise ValueError("mode dimensions must be >= 2")
        if math.prod(d) > MAX_JOINT_DIM:
            raise DimensionError(f"bath dimension {math.prod(d)} exceeds {MAX_JOINT_DIM}")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "couplings", c)
        object.__setattr__(self, "dims", d)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def scaled(self, factor: float) -> "BathModeSet":
        return BathModeSet(self.frequencies, self.couplings * factor, self.dims)


def ohmic_modes(
    bath: BathSpec, n_modes: int, local_dim: int, units: UnitSystem = NATURAL, scale: float = 1.0
) -> BathModeSet:
    """Discretize the ohmic continuum into ``n_modes`` evenly spaced oscillators on (0, Omega].

    Couplings satisfy c_k^2 = (2 eta hbar / pi) w_k dw, so that with the
    dimensionless mode quadrature (b + b^dagger)/sqrt(2) the zero-temperature
    bath correlation reproduces (eta hbar / pi) sum_k w_k dw cos(w_k t).
    """
    dw = bath.omega_cut / n_modes
    w = dw * np.arange(1, n_modes + 1)
    c = scale * np.sqrt(2 * bath.eta * units.hbar * w * dw / math.pi)
    return BathModeSet(w, c, (local_dim,) * n_modes)


def _ladder(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d)), 1).astype(complex)


def _embed(op: np.ndarray, k: int, dims: Sequence[int]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for j, d in enumerate(dims):
        out = np.kron(out, op if j == k else np.eye(d))
    return out


def joint_hamiltonian(
    system: OscillatorSystem,
    modes: BathModeSet,
    units: UnitSystem = NATURAL,
    coupling: Optional[np.ndarray] = None,
) -> np.ndarray:
    """H_S (x) 1 + sum_k 1 (x) hbar w_k (n_k + 1/2) + sum_k c_k X (x) q_k."""
    ds, db = system.dim, modes.total_dim
    if ds * db > MAX_JOINT_DIM:
        raise DimensionError(f"joint dimension {ds * db} exceeds {MAX_JOINT_DIM}")
    x = position_operator(system, units) if coupling is None else np.asarray(coupling, dtype=complex)
    hb = np.zeros((db, db), dtype=complex)
    h = np.kron(hamiltonian(system, units), np.eye(db))
    for k, (w, c, d) in enumerate(zip(modes.frequencies, modes.couplings, modes.dims)):
        a = _ladder(d)
        hb += _embed(units.hbar * w * (a.conj().T @ a + 0.5 * np.eye(d)), k, modes.dims)
        if c:
            q = (a + a.conj().T) / math.sqrt(2)
            h += c * np.kron(x, _embed(q, k, modes.dims))
    h += np.kron(np.eye(ds), hb)
    return 0.5 * (h + h.conj().T)


def partial_trace_bath(rho_joint: np.ndarray, system_dim: int) -> np.ndarray:
    """Trace out everything after the first ``system_dim``-dimensional factor."""
    db = rho_joint.shape[0] // system_dim
    r = np.asarray(rho_joint).reshape(system_dim, db, system_dim, db)
    return np.einsum("ibjb->ij", r)


def reduced_from_state(psi: np.ndarray, system_dim: int) -> np.ndarray:
    m = np.asarray(psi).reshape(system_dim, -1)
    return m @ m.conj().T


def product_state(system_state: np.ndarray, modes: BathModeSet) -> np.ndarray:
    """System state times every bath mode in its ground state."""
    bath = np.zeros(modes.total_dim, dtype=complex)
    bath[0] = 1.0
    return np.kron(np.asarray(system_state, dtype=complex), bath)


@dataclass(frozen=True)
class OracleResult:
    times: np.ndarray
    reduced: np.ndarray  # (n_times, ds, ds)
    purity: np.ndarray
    norm: np.ndarray
    states: np.ndarray  # joint state vectors, (n_times, ds * db)


def exact_system_bath(
    system: OscillatorSystem,
    modes: BathModeSet,
    psi0: np.ndarray,
    t_samples: Sequence[float],
    units: UnitSystem = NATURAL,
    coupling: Optional[np.ndarray] = None,
) -> OracleResult:
    """Exact unitary evolution of oscillator plus explicit bath modes.

    The joint Hamiltonian is diagonalized once; each sample is
    V exp(-i E t / hbar) V^dagger psi0.  Returns the reduced oscillator
    state and its purity at every sample.
    """
    h = joint_hamiltonian(system, modes, units, coupling)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (h.shape[0],):
        raise DimensionError(f"psi0 has shape {psi0.shape}, expected ({h.shape[0]},)")
    evals, vecs = np.linalg.eigh(h)
    c0 = vecs.conj().T @ psi0
    times = np.asarray(t_samples, dtype=float)
    states = np.array([vecs @ (np.exp(-1j * evals * t / units.hbar) * c0) for t in times])
    reduced = np.array([reduced_from_state(s, system.dim) for s in states])
    purity = np.real(np.einsum("tij,tji->t", reduced, reduced))
    norm = np.linalg.norm(states, axis=1)
    return OracleResult(times, reduced, purity, norm, states)
