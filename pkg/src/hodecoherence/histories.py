"""Consistent-histories decoherence functional on finite-dimensional spaces.

A history is a time-ordered chain of projectors, one per time slot, each
drawn from a complete family for that slot.  Projectors are moved to the
Heisenberg picture with ``exp(iHt/hbar) P exp(-iHt/hbar)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError
from .oscillator import NATURAL, DensityMatrix, StateVector, UnitSystem

MAX_DIM = 256


@dataclass(frozen=True)
class Projector:
    matrix: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.matrix, dtype=complex)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("projector must be square")
        if np.max(np.abs(p - p.conj().T)) > 1e-12:
            raise ValueError("projector not Hermitian")
        if np.max(np.abs(p @ p - p)) > 1e-10:
            raise ValueError("projector not idempotent")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "matrix", p)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def make_projector(state: StateVector, env_dim: int = 1) -> Projector:
    """|a><a| (x) I_env, system index major."""
    if env_dim < 1:
        raise ValueError("env_dim must be >= 1")
    a = state.amplitudes
    p = np.kron(np.outer(a, a.conj()), np.eye(env_dim))
    # exact Hermitian symmetry, roundoff in the outer product aside
    return Projector(0.5 * (p + p.conj().T))


def basis_family(basis: np.ndarray, env_dim: int = 1) -> Tuple[Projector, ...]:
    """Complete family from the columns of a unitary ``basis``."""
    return tuple(make_projector(StateVector.normalized(basis[:, k]), env_dim) for k in range(basis.shape[1]))


def _propagator(hamiltonian: np.ndarray, t: float, units: UnitSystem) -> np.ndarray:
    return expm(-1j * np.asarray(hamiltonian) * t / units.hbar)


def evolve_projector(p: Projector, hamiltonian: np.ndarray, t: float, units: UnitSystem = NATURAL) -> Projector:
    """Heisenberg-picture projector exp(iHt/hbar) P exp(-iHt/hbar)."""
    h = np.asarray(hamiltonian)
    if h.shape != p.matrix.shape:
        raise DimensionError(f"Hamiltonian shape {h.shape} does not match projector {p.matrix.shape}")
    if h.shape[0] > MAX_DIM:
        raise DimensionError(f"dimension {h.shape[0]} above dense cap {MAX_DIM}")
    if t == 0:
        return p
    u = _propagator(h, t, units)
    m = u.conj().T @ p.matrix @ u
    return Projector(0.5 * (m + m.conj().T))


@dataclass(frozen=True)
class HistorySpec:
    """One history: slot times, the complete family per slot, and the chosen index per slot."""

    times: Tuple[float, ...]
    families: Tuple[Tuple[Projector, ...], ...]
    indices: Tuple[int, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        families = tuple(tuple(f) for f in self.families)
        indices = tuple(int(i) for i in self.indices)
        if not (len(times) == len(families) == len(indices)):
            raise ValueError("times, families and indices must have equal length")
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("slot times must be non-decreasing")
        for fam, idx in zip(families, indices):
            dim = fam[0].dim
            total = sum(p.matrix for p in fam)
            if np.max(np.abs(total - np.eye(dim))) > 1e-10:
                raise ValueError("projector family is not complete")
            if not 0 <= idx < len(fam):
                raise ValueError(f"index {idx} outside family of size {len(fam)}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "families", families)
        object.__setattr__(self, "indices", indices)

    def same_frame(self, other: "HistorySpec") -> bool:
        return self.times == other.times and all(
            len(a) == len(b) and all(p is q or np.array_equal(p.matrix, q.matrix) for p, q in zip(a, b))
            for a, b in zip(self.families, other.families)
        ) and len(self.families) == len(other.families)


class _PropagatorCache:
    """Memo of exp(-iHt/hbar) per slot time for one Hamiltonian."""

    def __init__(self, hamiltonian: np.ndarray, units: UnitSystem):
        self.h = np.asarray(hamiltonian)
        self.units = units
        self._store: Dict[float, np.ndarray] = {}

    def heisenberg(self, p: Projector, t: float) -> np.ndarray:
        if t == 0:
            return p.matrix
        if t not in self._store:
            self._store[t] = _propagator(self.h, t, self.units)
        u = self._store[t]
        return u.conj().T @ p.matrix @ u


def _chain(hist: HistorySpec, cache: _PropagatorCache) -> np.ndarray:
    """Class operator P_n(t_n) ... P_1(t_1)."""
    dim = hist.families[0][0].dim
    c = np.eye(dim, dtype=complex)
    for t, fam, idx in zip(hist.times, hist.families, hist.indices):
        c = cache.heisenberg(fam[idx], t) @ c
    return c


def _check_dims(rho: np.ndarray, hamiltonian: np.ndarray, dim: int):
    if rho.shape != (dim, dim) or np.shape(hamiltonian) != (dim, dim):
        raise DimensionError("rho0, Hamiltonian and projectors must share one dimension")
    if dim > MAX_DIM:
        raise DimensionError(f"dimension {dim} above dense cap {MAX_DIM}")


def decoherence_functional(
    hist_a: HistorySpec,
    hist_b: HistorySpec,
    rho0: DensityMatrix,
    hamiltonian: np.ndarray,
    units: UnitSystem = NATURAL,
) -> complex:
    """D(a, b) = Tr[C_a rho0 C_b^dagger] with C = P_n(t_n) ... P_1(t_1)."""
    if not hist_a.same_frame(hist_b):
        raise ValueError("histories must share slot times and projector families")
    rho = np.asarray(getattr(rho0, "matrix", rho0))
    _check_dims(rho, hamiltonian, hist_a.families[0][0].dim)
    cache = _PropagatorCache(hamiltonian, units)
    ca = _chain(hist_a, cache)
    cb = _chain(hist_b, cache)
    return complex(np.trace(ca @ rho @ cb.conj().T))


def all_histories(times: Sequence[float], families: Sequence[Sequence[Projector]]) -> Iterator[HistorySpec]:
    """Every history of the frame, in lexicographic index order."""
    for idx in itertools.product(*(range(len(f)) for f in families)):
        yield HistorySpec(tuple(times), tuple(tuple(f) for f in families), idx)


def decoherence_matrix(
    times: Sequence[float],
    families: Sequence[Sequence[Projector]],
    rho0: DensityMatrix,
    hamiltonian: np.ndarray,
    units: UnitSystem = NATURAL,
) -> Tuple[np.ndarray, List[Tuple[int, ...]]]:
    """Functional over all pairs of histories of a frame.

    Returns the matrix ``D[a, b]`` and the list of index tuples labelling
    its rows and columns.
    """
    rho = np.asarray(getattr(rho0, "matrix", rho0))
    hists = list(all_histories(times, families))
    _check_dims(rho, hamiltonian, hists[0].families[0][0].dim)
    cache = _PropagatorCache(hamiltonian, units)
    chains = [_chain(h, cache) for h in hists]
    left = [c @ rho for c in chains]
    m = len(hists)
    d = np.empty((m, m), dtype=complex)
    for a in range(m):
        for b in range(m):
            d[a, b] = np.trace(left[a] @ chains[b].conj().T)
    return d, [h.indices for h in hists]


@dataclass(frozen=True)
class Classification:
    decoherent: bool
    max_off_diagonal: float
    max_relative: float  # largest |D(a,b)| / sqrt(D(a,a) D(b,b)) over a != b


def classify_decoherent(d: np.ndarray, epsilon: float) -> Classification:
    """Decoherent iff every |D(a,b)| <= epsilon * sqrt(D(a,a) D(b,b)), a != b."""
    d = np.asarray(d)
    diag = np.clip(np.real(np.diag(d)), 0.0, None)
    mag = np.abs(d)
    np.fill_diagonal(mag, 0.0)
    rel = mag / (np.sqrt(np.outer(diag, diag)) + 1e-300)
    worst = float(rel.max(initial=0.0))
    return Classification(worst <= epsilon, float(mag.max(initial=0.0)), worst)
