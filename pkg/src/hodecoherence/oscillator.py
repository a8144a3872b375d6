"""Truncated Fock-space algebra for a single harmonic oscillator.

Everything here is a value type or a pure function.  Matrices are returned
as fresh ``complex128`` arrays; dataclass-held arrays are made read-only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GridTooSmallError, TruncationWarning

TAIL_WARN = 1e-8


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class UnitSystem:
    """Values of hbar and k_B.  Natural units by default."""

    hbar: float = 1.0
    boltzmann: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.boltzmann > 0):
            raise ValueError("hbar and boltzmann must be strictly positive")


NATURAL = UnitSystem()


@dataclass(frozen=True)
class OscillatorSystem:
    """Harmonic oscillator truncated to ``dim`` Fock levels.

    ``coupling`` optionally replaces the position operator as the operator
    through which the environment acts (see
    :func:`hodecoherence.master_eq.coupling_operator_override`).
    """

    mass: float = 1.0
    omega: float = 1.0
    dim: int = 32
    coupling: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be > 0")
        if not self.omega > 0:
            raise ValueError("omega must be > 0")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError("dim must be an integer >= 2")
        if self.coupling is not None:
            object.__setattr__(self, "coupling", _frozen(np.asarray(self.coupling, dtype=complex)))

    def length_scale(self, units: UnitSystem = NATURAL) -> float:
        """Oscillator length sqrt(hbar / m omega)."""
        return math.sqrt(units.hbar / (self.mass * self.omega))

    def energies(self, units: UnitSystem = NATURAL) -> np.ndarray:
        return units.hbar * self.omega * (np.arange(self.dim) + 0.5)

    def bohr_frequencies(self, units: UnitSystem = NATURAL) -> np.ndarray:
        """Matrix of (E_n - E_m) / hbar."""
        e = self.energies(units) / units.hbar
        return e[:, None] - e[None, :]


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).ravel()
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError(f"state not normalized (norm={np.linalg.norm(a)!r})")
        object.__setattr__(self, "amplitudes", _frozen(a))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        a = np.asarray(amplitudes, dtype=complex).ravel()
        return cls(a / np.linalg.norm(a))

    @classmethod
    def basis(cls, dim: int, n: int) -> "StateVector":
        a = np.zeros(dim, dtype=complex)
        a[n] = 1.0
        return cls(a)

    def expectation(self, op: np.ndarray) -> complex:
        a = self.amplitudes
        return complex(np.vdot(a, op @ a))

    def density(self) -> "DensityMatrix":
        a = self.amplitudes
        return DensityMatrix(np.outer(a, a.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-12:
            raise ValueError("density matrix not Hermitian")
        if abs(np.trace(m) - 1.0) > 1e-10:
            raise ValueError(f"density matrix trace {np.trace(m).real!r} != 1")
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise ValueError("density matrix has negative eigenvalues")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        m = self.matrix
        return float(np.real(np.vdot(m, m)))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 16:
            raise ValueError("grid needs at least 16 points")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights."""
        w = np.full(self.n_points, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


@dataclass(frozen=True)
class GridWavefunction:
    grid: GridSpec
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).ravel()
        if v.size != self.grid.n_points:
            raise ValueError("values do not match grid")
        object.__setattr__(self, "values", _frozen(v))
        if self.normalized and abs(self.norm() - 1.0) > 1e-8:
            raise ValueError(f"wavefunction flagged normalized but norm={self.norm()!r}")

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    @property
    def phase(self) -> np.ndarray:
        """Phase unwrapped along the grid, starting from the left edge."""
        return np.unwrap(np.angle(self.values))

    def norm(self) -> float:
        return float(self.grid.weights() @ self.density)

    def normalize(self) -> "GridWavefunction":
        return GridWavefunction(self.grid, self.values / math.sqrt(self.norm()), normalized=True)

    def inner(self, other: "GridWavefunction") -> complex:
        return complex(self.grid.weights() @ (self.values.conj() * other.values))


def position_operator(system: OscillatorSystem, units: UnitSystem = NATURAL) -> np.ndarray:
    """x = sqrt(hbar / 2 m omega) (a + a^dagger) in the Fock basis."""
    off = np.sqrt(np.arange(1, system.dim)) * math.sqrt(units.hbar / (2 * system.mass * system.omega))
    return (np.diag(off, 1) + np.diag(off, -1)).astype(complex)


def momentum_operator(system: OscillatorSystem, units: UnitSystem = NATURAL) -> np.ndarray:
    off = np.sqrt(np.arange(1, system.dim)) * math.sqrt(units.hbar * system.mass * system.omega / 2)
    return 1j * (np.diag(off, -1) - np.diag(off, 1))


def number_operator(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim)).astype(complex)


def parity_operator(dim: int) -> np.ndarray:
    return np.diag((-1.0) ** np.arange(dim)).astype(complex)


def hamiltonian(system: OscillatorSystem, units: UnitSystem = NATURAL) -> np.ndarray:
    return np.diag(system.energies(units)).astype(complex)


def _coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    c = np.empty(dim, dtype=complex)
    c[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    return c


def _warn_tail(raw: np.ndarray, what: str):
    tail = 1.0 - float(np.sum(np.abs(raw) ** 2))
    if tail > TAIL_WARN:
        warnings.warn(
            f"{what}: weight {tail:.3g} above the top Fock level; increase dim",
            TruncationWarning,
            stacklevel=3,
        )
    return tail


def coherent_state(alpha: complex, dim: int) -> StateVector:
    """Coherent state |alpha> truncated to ``dim`` levels and renormalized.

    Emits :class:`TruncationWarning` if more than 1e-8 of the untruncated
    norm lies above the top level.
    """
    raw = _coherent_amplitudes(alpha, dim)
    _warn_tail(raw, "coherent_state")
    return StateVector.normalized(raw)


def cat_state(alpha: complex, dim: int) -> StateVector:
    """Even cat state (|alpha> + |-alpha>) / norm."""
    plus = _coherent_amplitudes(alpha, dim)
    _warn_tail(plus, "cat_state")
    raw = plus + _coherent_amplitudes(-alpha, dim)
    if np.linalg.norm(raw) == 0.0:
        return StateVector.basis(dim, 0)
    return StateVector.normalized(raw)


def hermite_functions(n_max: int, xi: np.ndarray) -> np.ndarray:
    """Normalized Hermite functions h_0..h_{n_max-1} of the scaled coordinate.

    Returns an array of shape ``(n_max, len(xi))``, built by the standard
    three-term recurrence.
    """
    xi = np.asarray(xi, dtype=float)
    out = np.empty((n_max, xi.size))
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * xi**2)
    if n_max > 1:
        out[1] = math.sqrt(2.0) * xi * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * xi * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def eigenfunction_matrix(
    system: OscillatorSystem, x: np.ndarray, units: UnitSystem = NATURAL, n_max: Optional[int] = None
) -> np.ndarray:
    """psi_n(x) for n < n_max (default ``system.dim``), shape (n_max, len(x))."""
    ell = system.length_scale(units)
    return hermite_functions(n_max or system.dim, np.asarray(x) / ell) / math.sqrt(ell)


def _tail_mass(n: int, xi_lo: float, xi_hi: float) -> float:
    reach = math.sqrt(2 * n + 1) + 12.0
    total = 0.0
    for start, stop in ((xi_hi, max(xi_hi, reach) + 1.0), (-xi_lo, max(-xi_lo, reach) + 1.0)):
        s = np.linspace(start, stop, 4001)
        total += np.trapezoid(hermite_functions(n + 1, s)[n] ** 2, s)
    return float(total)


def eigenfunction_grid(
    system: OscillatorSystem, n: int, grid: GridSpec, units: UnitSystem = NATURAL, normalize: bool = True
) -> GridWavefunction:
    """Energy eigenfunction psi_n sampled on ``grid``.

    Raises :class:`GridTooSmallError` if more than 1e-8 of |psi_n|^2 falls
    outside the grid.
    """
    if not 0 <= n < system.dim:
        raise ValueError(f"level {n} outside 0..{system.dim - 1}")
    ell = system.length_scale(units)
    tail = _tail_mass(n, grid.x_min / ell, grid.x_max / ell)
    if tail > TAIL_WARN:
        raise GridTooSmallError(f"psi_{n} has tail mass {tail:.3g} outside [{grid.x_min}, {grid.x_max}]")
    vals = eigenfunction_matrix(system, grid.x, units, n + 1)[n]
    wf = GridWavefunction(grid, vals)
    return wf.normalize() if normalize else wf


def density_to_grid(
    rho: np.ndarray, system: OscillatorSystem, x: np.ndarray, units: UnitSystem = NATURAL,
    y: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Position representation <x|rho|y> of a Fock-basis density matrix."""
    rho = np.asarray(getattr(rho, "matrix", rho))
    d = rho.shape[0]
    px = eigenfunction_matrix(system, x, units, d)
    py = px if y is None else eigenfunction_matrix(system, y, units, d)
    return px.T @ rho @ py
