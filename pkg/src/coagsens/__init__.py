"""coagsens: stochastic particle estimation of parametric sensitivities
for coagulation dynamics, with a coupled triple-ensemble simulator, a
Marcus-Lushnikov central-difference baseline, and a truncated-ODE oracle."""

__version__ = "0.1.0"

from .driver import (EXACT_COUPLING, EXACT_INDEP, SimConfig, Snapshot,
                     TripleSimulation, run, simulate)
from .ensemble import Ensemble, NoSuchMassError
from .kernels import (DERIV_NEG, DERIV_POS, MAIN, AdditiveKernel, Feature,
                      KernelFamily, MajorantComponent, SootKernel,
                      majorant_value, make_kernel)
from .mldriver import CdConfig, CdSnapshot, run_cd, run_ml
from .oracle import (OracleSolution, StepSizeError, additive_analytic,
                     additive_analytic_sensitivity, solve_sensitivity,
                     solve_smoluchowski)
from .rng import UniformStream
from .stats import (RunSet, confidence_interval, d_var, gain_factor,
                    mean_sensitivity, variance)
from .sumtree import NoMassError, StaleHandleError, WeightedIndexTree

__all__ = [
    "__version__",
    "EXACT_COUPLING", "EXACT_INDEP", "SimConfig", "Snapshot",
    "TripleSimulation", "run", "simulate",
    "Ensemble", "NoSuchMassError",
    "DERIV_NEG", "DERIV_POS", "MAIN", "AdditiveKernel", "Feature",
    "KernelFamily", "MajorantComponent", "SootKernel", "majorant_value",
    "make_kernel",
    "CdConfig", "CdSnapshot", "run_cd", "run_ml",
    "OracleSolution", "StepSizeError", "additive_analytic",
    "additive_analytic_sensitivity", "solve_sensitivity", "solve_smoluchowski",
    "UniformStream",
    "RunSet", "confidence_interval", "d_var", "gain_factor",
    "mean_sensitivity", "variance",
    "NoMassError", "StaleHandleError", "WeightedIndexTree",
]
