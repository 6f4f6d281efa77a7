"""Exact simulation and quasi-stationary analysis of a stochastic chemostat.

The model couples a bacteria count N(t) (birth/washout/death jumps at
nutrient-dependent rates) to a nutrient concentration Y(t) (ODE between
jumps).  The package simulates the process exactly, locates the nutrient
equilibria y_n, and estimates the quasi-stationary distribution and the
exponential survival rate by a spectral solve and by particle Monte Carlo.
"""
from .model import (
    BirthLaw,
    ChemostatParams,
    DeathLaw,
    ModelError,
    birth_rate,
    death_rate,
    drift,
)
from .equilibria import EquilibriaTable, root, table
from .simulator import (
    EnsembleSummary,
    EventKind,
    HybridState,
    StepFailure,
    Trajectory,
    TrajectoryEvent,
    ensemble,
    flow,
    next_jump,
    simulate,
)

__version__ = "0.1.0"
