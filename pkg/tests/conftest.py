import numpy as np
import pytest

from ritzff.network import Network, NetworkConfig, ParameterVector, init_network


def single_affine_net(a, b, activation: str = "relu", input_dim: int = 1) -> Network:
    """Network with one affine layer (no activation applied): u = a . z + b."""
    config = NetworkConfig(input_dim=input_dim, hidden_layers=1, width=1, activation=activation)
    weights = [np.atleast_2d(np.asarray(a, dtype=np.float64))]
    biases = [np.atleast_1d(np.asarray(b, dtype=np.float64))]
    return Network(config, ParameterVector(weights, biases))


def zero_output_net(input_dim: int = 1, hidden_layers: int = 2, width: int = 8,
                    activation: str = "smoothsqrt", seed: int = 0) -> Network:
    """Random net with the output layer zeroed, so u (and all derivatives) vanish."""
    config = NetworkConfig(input_dim=input_dim, hidden_layers=hidden_layers,
                           width=width, activation=activation)
    net = init_network(config, seed)
    net.params.weights[-1][:] = 0.0
    net.params.biases[-1][:] = 0.0
    return net


def exact_hat_net(offset: float = 0.0) -> Network:
    """ReLU net computing u = x - 2 relu(x - 0.5) + offset: the unit hat plus a shift.

    The pass-through unit is relu(x + 1) - 1 so its kink sits outside [0, 1];
    slopes are exactly +1 then -1 on the whole domain (+1 at the crest, where
    relu'(0) = 0 by convention).
    """
    config = NetworkConfig(input_dim=1, hidden_layers=1, width=2, activation="relu")
    weights = [np.array([[1.0], [1.0]]), np.array([[1.0, -2.0]])]
    biases = [np.array([1.0, -0.5]), np.array([offset - 1.0])]
    return Network(config, ParameterVector(weights, biases))


def perturbed(net: Network, flat: np.ndarray) -> Network:
    """Same architecture with replaced flat parameters."""
    return Network(net.config, ParameterVector.from_flat(flat, net.params.shapes()))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
