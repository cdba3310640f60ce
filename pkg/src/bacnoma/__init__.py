"""Link-level simulation and reflection-coefficient optimization for backscatter NOMA."""

from .config import CASE_I, CASE_II, FixedTau, SystemConfig, TargetRate
from .harness import AlphaSweep, DeviceSweep, ExperimentSpec, Fixed, SweepResult, run_experiment
from .solver import FeasibleRegion, SolverOptions, SolverResult, maximize, random_feasible

__all__ = [
    "CASE_I", "CASE_II", "FixedTau", "SystemConfig", "TargetRate",
    "AlphaSweep", "DeviceSweep", "ExperimentSpec", "Fixed", "SweepResult", "run_experiment",
    "FeasibleRegion", "SolverOptions", "SolverResult", "maximize", "random_feasible",
]
