"""Deep Ritz energy minimization with Fourier feature mappings.

Minimizes non-convex variational energies over a feed-forward ansatz,
optionally composed with a fixed sinusoid feature map, and provides an
empirical tangent-kernel laboratory for spectra and linearized dynamics.
"""

__version__ = "0.1.0"

from .features import FeatureMap, fourier1d, fourier2d_plus_identity, identity_map
from .network import Network, NetworkConfig, ParameterVector, init_network, init_params
from .problems import VariationalProblem, make_problem
from .training import TrainConfig, TrainResult, train

__all__ = [
    "FeatureMap",
    "Network",
    "NetworkConfig",
    "ParameterVector",
    "TrainConfig",
    "TrainResult",
    "VariationalProblem",
    "__version__",
    "fourier1d",
    "fourier2d_plus_identity",
    "identity_map",
    "init_network",
    "init_params",
    "make_problem",
    "train",
]
