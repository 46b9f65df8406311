"""Mode-by-mode simulation of shear-enhanced mixing in the plane.

A passive scalar advected by the radial shear ``u = r^p e_theta`` and
diffusing with strength ``nu`` splits into independent angular modes.  The
package evolves single modes on a cell-centred radial grid, tracks the norms
entering the hypocoercive functional, fits decay rates across parameter
sweeps and checks the supporting weighted inequalities.
"""
from .functionals import HypoConstants, coefficients_abc, compute_constants, rates_and_times
from .grid import RadialGrid, build_grid
from .ledger import EnergyLedger
from .solver import FlowConfig, ModeState, NumericalError, build_stepper, evolve, initial_profile, step
from .sweep import DecayRateEstimator, ScalingExponentEstimator, run_sweep

__all__ = [
    "RadialGrid",
    "build_grid",
    "EnergyLedger",
    "FlowConfig",
    "ModeState",
    "NumericalError",
    "build_stepper",
    "step",
    "evolve",
    "initial_profile",
    "HypoConstants",
    "compute_constants",
    "coefficients_abc",
    "rates_and_times",
    "DecayRateEstimator",
    "ScalingExponentEstimator",
    "run_sweep",
]

__version__ = "0.1.0"
