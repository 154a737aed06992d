"""Traveling pulses of a doubly diffusive FitzHugh-Nagumo system and their Maslov index."""

from .core_dynamics import ParameterError, Params
from .corners import corner_diagnostics, shayman_classification
from .maslov import ConjugateLedger, compute_maslov, eigenvalue_scan, symplectic_conservation
from .singular import assemble_singular_orbit
from .wave import NoPulseFound, WaveProfile, continue_in_eps, pulse_at, solve_front, solve_pulse

__all__ = [
    "Params", "ParameterError", "assemble_singular_orbit", "WaveProfile", "solve_pulse", "solve_front",
    "continue_in_eps", "pulse_at", "NoPulseFound", "compute_maslov", "ConjugateLedger", "eigenvalue_scan",
    "symplectic_conservation", "corner_diagnostics", "shayman_classification",
]
__version__ = "0.1.0"
