"""Numerical laboratory for the mean-field integrate-and-fire equation with excitatory coupling."""

from .model import DriftSpec, FiringCurve, InitialLaw, ModelConfig, eval_drift, shift_curve, solve_flow

__version__ = "0.1.0"

__all__ = ["DriftSpec", "FiringCurve", "InitialLaw", "ModelConfig", "eval_drift", "shift_curve",
           "solve_flow", "__version__"]
