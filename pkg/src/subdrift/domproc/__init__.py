"""Dominating process built from a D/M/1 queue workload."""
from .process import (DominatingProcess, DomParams, alpha_beta, drift_constants, step_U, step_Y,
                      u_paths, y_paths, y_steps)

__all__ = ["DominatingProcess", "DomParams", "alpha_beta", "drift_constants", "step_U", "step_Y",
           "u_paths", "y_paths", "y_steps"]
