"""Double-commutator master equation for the oscillator density matrix.

    d rho / dt = -i [omega_nm rho_nm] - (eta Omega / pi hbar) [x, [x, rho]]

in the Fock basis, with omega_nm = (E_n - E_m) / hbar.  The dissipative
term pumps energy into the oscillator at rate (eta Omega / pi) hbar / m
even at zero temperature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .bath import BathSpec
from .errors import (
    FirstOrderValidityWarning,
    PositivityError,
    StepSizeError,
    TruncationError,
)
from .oscillator import (
    NATURAL,
    DensityMatrix,
    OscillatorSystem,
    UnitSystem,
    eigenfunction_matrix,
    hamiltonian,
    position_operator,
)

POSITIVITY_FLOOR = -1e-6
TRUNCATION_LIMIT = 1e-6


@dataclass(frozen=True)
class EvolutionControl:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = math.inf
    initial_step: Optional[float] = None
    check_positivity: bool = True
    check_truncation: bool = True
    max_steps: int = 1_000_000  # accepted plus rejected

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0 and self.max_steps > 0):
            raise ValueError("tolerances, max_step and max_steps must be positive")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, dim, dim)
    n_accepted: int = 0
    n_rejected: int = 0

    def __len__(self):
        return self.times.size

    def __getitem__(self, k) -> DensityMatrix:
        return DensityMatrix(self.states[k])

    def populations(self) -> np.ndarray:
        return np.real(np.einsum("tii->ti", self.states))

    def traces(self) -> np.ndarray:
        return np.einsum("tii->t", self.states)

    def purities(self) -> np.ndarray:
        return np.real(np.einsum("tij,tij->t", self.states.conj(), self.states))


@dataclass(frozen=True)
class EnergyLossReport:
    delta_rho_diag: np.ndarray
    delta_e: float
    elapsed: float
    order: str  # "first_order" | "full_evolution"

    def __post_init__(self):
        if abs(float(np.sum(self.delta_rho_diag))) > 1e-9:
            raise ValueError("population changes do not sum to zero")


def coupling_operator(system: OscillatorSystem, units: UnitSystem = NATURAL) -> np.ndarray:
    if system.coupling is not None:
        return np.asarray(system.coupling)
    return position_operator(system, units)


def coupling_operator_override(system: OscillatorSystem, operator: np.ndarray) -> OscillatorSystem:
    """Copy of ``system`` whose environment couples through ``operator`` instead of x."""
    op = np.asarray(operator, dtype=complex)
    if op.shape != (system.dim, system.dim):
        raise ValueError(f"operator shape {op.shape} does not match dim {system.dim}")
    if np.max(np.abs(op - op.conj().T)) > 1e-12:
        raise ValueError("coupling operator must be Hermitian")
    return replace(system, coupling=op)


def _rate(bath: BathSpec, units: UnitSystem) -> float:
    return bath.eta * bath.omega_cut / (math.pi * units.hbar)


def _double_commutator(a: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """[a, [a, rho]] = a^2 rho - 2 a rho a + rho a^2."""
    ar = a @ rho
    return a @ ar - 2 * (ar @ a) + (rho @ a) @ a


def dissipator(rho, system: OscillatorSystem, bath: BathSpec, units: UnitSystem = NATURAL) -> np.ndarray:
    """-(eta Omega / pi hbar) [x, [x, rho]]."""
    r = np.asarray(getattr(rho, "matrix", rho))
    return -_rate(bath, units) * _double_commutator(coupling_operator(system, units), r)


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


class _Rhs:
    def __init__(self, system: OscillatorSystem, bath: BathSpec, units: UnitSystem):
        self.bohr = system.bohr_frequencies(units)
        self.a = coupling_operator(system, units)
        self.gamma = _rate(bath, units)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * self.bohr * rho
        if self.gamma:
            out = out - self.gamma * _double_commutator(self.a, rho)
        return out


# Dormand-Prince 5(4) tableau
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _guards(rho: np.ndarray, t: float, ctrl: EvolutionControl):
    if ctrl.check_truncation:
        top = np.real(np.diag(rho))[-2:]
        if np.any(top > TRUNCATION_LIMIT):
            raise TruncationError(
                f"t={t:.6g}: top Fock populations {top} exceed {TRUNCATION_LIMIT}; increase dim"
            )
    if ctrl.check_positivity:
        low = np.linalg.eigvalsh(rho).min()
        if low < POSITIVITY_FLOOR:
            raise PositivityError(f"t={t:.6g}: density matrix eigenvalue {low:.3g} below {POSITIVITY_FLOOR}")


def evolve(
    rho0,
    system: OscillatorSystem,
    bath: BathSpec,
    t_final: float,
    ctrl: EvolutionControl = EvolutionControl(),
    units: UnitSystem = NATURAL,
    sample_times: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Propagate the master equation from 0 to ``t_final``.

    Adaptive Dormand-Prince 5(4) steps on the full complex matrix; steps
    are shortened to land on every sample time (default: just 0 and
    ``t_final``).  The state is made exactly Hermitian after each step.

    Raises
    ------
    StepSizeError
        If the controller drives the step below ~1e-14 of the time scale,
        or ``ctrl.max_steps`` steps do not reach ``t_final``.
    PositivityError
        If an eigenvalue drops below -1e-6.
    TruncationError
        If either of the two highest Fock levels holds more than 1e-6.
    """
    rho = _hermitize(np.array(getattr(rho0, "matrix", rho0), dtype=complex))
    if rho.shape != (system.dim, system.dim):
        raise ValueError(f"rho0 shape {rho.shape} does not match dim {system.dim}")
    samples = np.array([0.0, t_final] if sample_times is None else sample_times, dtype=float)
    if samples[0] != 0.0 or np.any(np.diff(samples) < 0) or samples[-1] > t_final:
        raise ValueError("sample times must start at 0, be sorted and not exceed t_final")
    f = _Rhs(system, bath, units)
    _guards(rho, 0.0, ctrl)

    scale_t = max(abs(t_final), 1e-300)
    h = ctrl.initial_step or min(ctrl.max_step, 0.01 / max(1.0, np.abs(f.bohr).max(), f.gamma * 10), scale_t)
    t = 0.0
    out = [rho.copy()]
    k1 = f(rho)
    accepted = rejected = 0
    for target in samples[1:]:
        while t < target:
            h = min(h, ctrl.max_step)
            last = t + h >= target
            step = target - t if last else h
            if step < 1e-14 * scale_t:
                if last:
                    t = target
                    break
                raise StepSizeError(f"step size underflow at t={t:.6g}")
            if accepted + rejected >= ctrl.max_steps:
                raise StepSizeError(f"step budget {ctrl.max_steps} exhausted at t={t:.6g} (last step {step:.3g})")
            ks = [k1]
            for s in range(1, 7):
                y = rho + step * sum(a * k for a, k in zip(_A[s], ks) if a)
                ks.append(f(y))
            y5 = y  # stage 7 abscissa is the fifth-order solution (FSAL)
            err = step * sum(e * k for e, k in zip(_E, ks) if e)
            sc = ctrl.abs_tol + ctrl.rel_tol * np.maximum(np.abs(rho), np.abs(y5))
            enorm = math.sqrt(float(np.mean(np.abs(err / sc) ** 2)))
            if enorm <= 1.0:
                t = target if last else t + step
                rho = _hermitize(y5)
                k1 = ks[6]
                accepted += 1
                _guards(rho, t, ctrl)
                fac = 5.0 if enorm == 0 else min(5.0, max(0.2, 0.9 * enorm ** -0.2))
                # a shortened landing step must not shrink the next one
                h = max(step * fac, h) if last else step * fac
            else:
                rejected += 1
                h = step * max(0.2, 0.9 * enorm ** -0.2)
        out.append(rho.copy())
    states = np.array(out)
    states.setflags(write=False)
    samples.setflags(write=False)
    return Trajectory(samples, states, accepted, rejected)


def delta_rho_first_order(
    rho0, system: OscillatorSystem, bath: BathSpec, t: float, units: UnitSystem = NATURAL
) -> EnergyLossReport:
    """First-order population change over an interval ``t``.

    delta rho_nn = -(eta Omega / pi hbar) t <n|[x,[x,rho0]]|n>, and
    delta E = sum_n delta rho_nn E_n.  Warns if any |delta rho_nn| > 0.1.
    """
    d = -t * np.real(np.diag(_rate(bath, units) * _double_commutator(
        coupling_operator(system, units), np.asarray(getattr(rho0, "matrix", rho0)))))
    if np.max(np.abs(d), initial=0.0) > 0.1:
        warnings.warn("first-order population change exceeds 0.1; expansion unreliable",
                      FirstOrderValidityWarning, stacklevel=2)
    return EnergyLossReport(d, float(d @ system.energies(units)), t, "first_order")


def energy_change_full(trajectory: Trajectory, system: OscillatorSystem, units: UnitSystem = NATURAL) -> EnergyLossReport:
    """Signed energy change E(t) - E(0) between first and last trajectory samples."""
    h = hamiltonian(system, units)
    first, last = trajectory.states[0], trajectory.states[-1]
    de = float(np.real(np.trace(h @ last) - np.trace(h @ first)))
    d = np.real(np.diag(last) - np.diag(first))
    return EnergyLossReport(d, de, float(trajectory.times[-1] - trajectory.times[0]), "full_evolution")


def energy_expectation(rho, system: OscillatorSystem, units: UnitSystem = NATURAL) -> float:
    r = np.asarray(getattr(rho, "matrix", rho))
    return float(np.real(np.diag(r)) @ system.energies(units))


def position_coherence(rho, system: OscillatorSystem, x: float, y: float, units: UnitSystem = NATURAL) -> complex:
    """<x|rho|y> from Fock-basis data."""
    r = np.asarray(getattr(rho, "matrix", rho))
    px = eigenfunction_matrix(system, np.array([x]), units, r.shape[0])[:, 0]
    py = eigenfunction_matrix(system, np.array([y]), units, r.shape[0])[:, 0]
    return complex(px @ r @ py)


def coherence_decay_rate(
    rho0, system: OscillatorSystem, bath: BathSpec, x: float, y: float,
    t: float, units: UnitSystem = NATURAL, ctrl: EvolutionControl = EvolutionControl(),
) -> float:
    """Measured decay rate of |<x|rho|y>| attributable to the environment.

    Evolves with and without the bath over a short time ``t`` and returns
    -(ln|rho_bath(x,y)| - ln|rho_free(x,y)|) / t, which removes the
    coherent motion to leading order.
    """
    free = evolve(rho0, system, replace(bath, eta=0.0), t, ctrl, units)[-1]
    damped = evolve(rho0, system, bath, t, ctrl, units)[-1]
    return -(math.log(abs(position_coherence(damped, system, x, y, units)))
             - math.log(abs(position_coherence(free, system, x, y, units)))) / t


def simulated_decoherence_time(
    rho0, system: OscillatorSystem, bath: BathSpec, x: float, y: float,
    t_max: float, n_samples: int = 200, units: UnitSystem = NATURAL,
    ctrl: EvolutionControl = EvolutionControl(),
) -> float:
    """Time at which |<x|rho|y>| has fallen by 1/e relative to bath-free motion.

    Both runs are sampled on ``n_samples`` points up to ``t_max`` and the
    crossing is located by linear interpolation of the log ratio.
    """
    times = np.linspace(0.0, t_max, n_samples + 1)
    free = evolve(rho0, system, replace(bath, eta=0.0), t_max, ctrl, units, times)
    damped = evolve(rho0, system, bath, t_max, ctrl, units, times)
    logr = np.array([
        math.log(abs(position_coherence(damped.states[k], system, x, y, units)))
        - math.log(abs(position_coherence(free.states[k], system, x, y, units)))
        for k in range(times.size)
    ])
    below = np.nonzero(logr <= -1.0)[0]
    if below.size == 0:
        raise ValueError("coherence did not fall by 1/e within t_max")
    k = below[0]
    t0, t1, l0, l1 = times[k - 1], times[k], logr[k - 1], logr[k]
    return float(t0 + (-1.0 - l0) * (t1 - t0) / (l1 - l0))
