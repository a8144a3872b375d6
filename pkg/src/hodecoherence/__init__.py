"""Phase decoherence and zero-temperature energy dissipation of a harmonic
oscillator coupled to an ohmic bath."""

__version__ = "0.1.0"

from .bath import BathSpec, alpha_imag, alpha_real_finite_temp, alpha_real_zero_temp  # noqa: E402
from .oscillator import (  # noqa: E402
    DensityMatrix,
    GridSpec,
    GridWavefunction,
    OscillatorSystem,
    StateVector,
    UnitSystem,
    cat_state,
    coherent_state,
    hamiltonian,
    position_operator,
)

__all__ = [
    "BathSpec",
    "DensityMatrix",
    "GridSpec",
    "GridWavefunction",
    "OscillatorSystem",
    "StateVector",
    "UnitSystem",
    "alpha_imag",
    "alpha_real_finite_temp",
    "alpha_real_zero_temp",
    "cat_state",
    "coherent_state",
    "hamiltonian",
    "position_operator",
]
