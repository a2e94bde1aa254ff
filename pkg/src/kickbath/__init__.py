"""Kicked harmonic oscillator in a thermal bath, simulated in chord-function space."""

from .model import ModelParams, PhysicalParams, ParameterError, from_physical, validate
from .grid import ChordState, GridSpec, coherent_state, read_grid, sample, write_grid
from .dissipative import DissipativeMap, apply_dissipative, stationary_chord
from .kick import KickMap, apply_kick
from .observables import cycle_stats, marginals, moments, wigner
from .harness import (GridRequest, InitialState, KickedOscillator, Scenario, SweepSpec,
                      kicks_to_energy, preset, run_scenario, run_sweep)

__all__ = [
    "ModelParams",
    "PhysicalParams",
    "ParameterError",
    "from_physical",
    "validate",
    "ChordState",
    "GridSpec",
    "coherent_state",
    "read_grid",
    "sample",
    "write_grid",
    "DissipativeMap",
    "apply_dissipative",
    "stationary_chord",
    "KickMap",
    "apply_kick",
    "cycle_stats",
    "marginals",
    "moments",
    "wigner",
    "GridRequest",
    "InitialState",
    "KickedOscillator",
    "Scenario",
    "SweepSpec",
    "kicks_to_energy",
    "preset",
    "run_scenario",
    "run_sweep",
]

__version__ = "0.1.0"
