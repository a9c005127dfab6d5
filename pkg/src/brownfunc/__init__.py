"""Monte Carlo toolkit for the additive functional X_t = int_0^t V(B_s) ds.

V(x) = x**alpha on x >= 0 and -lam |x|**alpha on x < 0, with B a standard
Brownian motion.  The package simulates exit times of X from (-a, b),
estimates their exponential tail rate, small-ball exponents, Levy-view
indices and liminf diagnostics, and runs everything from a JSON-configured
command line.
"""

__version__ = "0.1.0"

from .kernel_path import ConfigError, Kernel, PathSpec, SamplePath, kernel_eval, sample_path
from .exit_sampler import ExitBatch, ExitRecord, Side, StartState, Status, Window, sample_exits
from .estimators import build_survival_curve, estimate_rate, small_ball_fit

__all__ = [
    "ConfigError", "Kernel", "PathSpec", "SamplePath", "kernel_eval", "sample_path",
    "ExitBatch", "ExitRecord", "Side", "StartState", "Status", "Window", "sample_exits",
    "build_survival_curve", "estimate_rate", "small_ball_fit", "__version__",
]
