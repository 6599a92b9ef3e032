"""percdrift: biased random walk on the supercritical percolation cluster.

Simulators for the environment and the walk, exact electrical-network
and spectral solvers, trap-geometry analysis, and estimators for the
backtrack exponent, the critical bias, speed and displacement scaling.
"""

__version__ = "0.1.0"

from .backend import BACKEND_NAME as backend_name
from .geometry import BiasSpec, axial_bias
from .env import Edge, EnvConfig, Environment

__all__ = [
    "__version__", "backend_name",
    "BiasSpec", "axial_bias", "Edge", "EnvConfig", "Environment",
]
