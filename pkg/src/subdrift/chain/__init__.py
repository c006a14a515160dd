"""Chain abstractions, simulation, stopping times and the Monte Carlo engine."""
from .engine import Estimate, map_batches, map_replicates, mc_expectation, summarize
from .kernels import BirthDeathChain, FiniteKernel, FunctionKernel, IdentityKernel, IntegerRange, Kernel
from .matrix import matrix_power_distribution, stationary_vector
from .sets import Everything, FiniteSet, Interval, LevelSet, SetPredicate, Union
from .simulate import (StoppingRecord, SubsampledPath, Trajectory, simulate_path, stopping_time,
                       subsampled_iterates, subsampled_return_time)

__all__ = [
    "Estimate", "map_batches", "map_replicates", "mc_expectation", "summarize",
    "BirthDeathChain", "FiniteKernel", "FunctionKernel", "IdentityKernel", "IntegerRange", "Kernel",
    "matrix_power_distribution", "stationary_vector",
    "Everything", "FiniteSet", "Interval", "LevelSet", "SetPredicate", "Union",
    "StoppingRecord", "SubsampledPath", "Trajectory", "simulate_path", "stopping_time",
    "subsampled_iterates", "subsampled_return_time",
]
