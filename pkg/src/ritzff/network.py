"""Fully connected scalar-output network: configuration, init, forward pass, checkpoints.

The network is a plain feed-forward stack: every hidden layer is affine
followed by the activation, the output layer is affine with a bias and no
activation. ``hidden_layers`` counts hidden layers only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, OrderUnsupportedError

CHECKPOINT_FORMAT = "ritzff-checkpoint-v1"


class Activation:
    """Elementwise activation with derivatives up to third order."""

    name: str = ""
    second_order_ok: bool = False

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d1(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d2(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d3(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ReLU(Activation):
    """max(0, x); slope at the kink is defined as 0 so runs are reproducible."""

    name = "relu"
    second_order_ok = False

    def value(self, x):
        return np.maximum(x, 0.0)

    def d1(self, x):
        return (x > 0.0).astype(np.float64)

    def d2(self, x):
        raise OrderUnsupportedError("relu has no second derivative")

    def d3(self, x):
        raise OrderUnsupportedError("relu has no third derivative")


class SmoothSqrt(Activation):
    """sqrt(x^2 + rho^2): a smooth overestimate of |x| with sigma(0) = rho."""

    name = "smoothsqrt"
    second_order_ok = True

    def __init__(self, rho: float):
        if rho <= 0.0:
            raise ValueError(f"smoothsqrt needs rho > 0, got {rho}")
        self.rho = float(rho)

    def value(self, x):
        return np.sqrt(x * x + self.rho * self.rho)

    def d1(self, x):
        return x / self.value(x)

    def d2(self, x):
        s = self.value(x)
        return self.rho * self.rho / (s * s * s)

    def d3(self, x):
        s = self.value(x)
        return -3.0 * self.rho * self.rho * x / (s ** 5)


def get_activation(name: str, rho: float = 0.1) -> Activation:
    if name == "relu":
        return ReLU()
    if name == "smoothsqrt":
        return SmoothSqrt(rho)
    raise ValueError(f"unknown activation {name!r} (expected 'relu' or 'smoothsqrt')")


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture of the ansatz: input width after the feature map, depth, activation."""

    input_dim: int
    hidden_layers: int
    width: int
    activation: str = "relu"
    rho: float = 0.1
    output_dim: int = 1

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.hidden_layers < 1:
            raise ValueError("hidden_layers must be >= 1")
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if self.output_dim != 1:
            raise ValueError("only scalar output is supported")
        get_activation(self.activation, self.rho)  # validates name and rho

    @property
    def layer_dims(self) -> list[int]:
        return [self.input_dim] + [self.width] * self.hidden_layers + [self.output_dim]

    def make_activation(self) -> Activation:
        return get_activation(self.activation, self.rho)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_layers": self.hidden_layers,
            "width": self.width,
            "activation": self.activation,
            "rho": self.rho,
            "output_dim": self.output_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(**d)


@dataclass
class ParameterVector:
    """Ordered layer records (A_i, b_i), flattenable to a single float64 vector.

    Flattening order is fixed: layer by layer, weight matrix row-major, then
    bias. Gradients use the identical class so layouts match bit for bit.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must have one entry per layer")
        for a, b in zip(self.weights, self.biases):
            if a.shape[0] != b.shape[0]:
                raise ValueError("bias length must equal weight row count")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_params(self) -> int:
        return sum(a.size + b.size for a, b in zip(self.weights, self.biases))

    def shapes(self) -> list[tuple[int, int]]:
        return [a.shape for a in self.weights]

    def to_flat(self) -> np.ndarray:
        parts = []
        for a, b in zip(self.weights, self.biases):
            parts.append(a.ravel())
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, flat: np.ndarray, shapes: list[tuple[int, int]], copy: bool = True) -> "ParameterVector":
        """Rebuild layer arrays from a flat vector.

        With copy=False the layer arrays are views into ``flat``, so in-place
        updates of the flat vector propagate to the layers (used by the trainer).
        """
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if copy:
            flat = flat.copy()
        weights, biases = [], []
        pos = 0
        for rows, cols in shapes:
            weights.append(flat[pos:pos + rows * cols].reshape(rows, cols))
            pos += rows * cols
            biases.append(flat[pos:pos + rows])
            pos += rows
        if pos != flat.size:
            raise ValueError(f"flat vector has length {flat.size}, layout needs {pos}")
        return cls(weights, biases)

    def copy(self) -> "ParameterVector":
        return ParameterVector([a.copy() for a in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "ParameterVector":
        return ParameterVector(
            [np.zeros_like(a) for a in self.weights],
            [np.zeros_like(b) for b in self.biases],
        )


# A gradient has the same per-layer structure and flattening convention.
ParameterGradient = ParameterVector


def init_params(config: NetworkConfig, seed: int) -> ParameterVector:
    """He-normal weights (std sqrt(2/fan_in)), zero biases.

    Deterministic for a given seed: one PCG64 stream consumed layer by layer,
    each weight matrix drawn row-major before its bias.
    """
    rng = np.random.default_rng(seed)
    dims = config.layer_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        std = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ParameterVector(weights, biases)


@dataclass
class Network:
    """A configuration plus its current parameters; the handle passed to the engine."""

    config: NetworkConfig
    params: ParameterVector
    activation: Activation = field(init=False)

    def __post_init__(self):
        self.activation = self.config.make_activation()


def init_network(config: NetworkConfig, seed: int) -> Network:
    return Network(config, init_params(config, seed))


def forward(net: Network, z: np.ndarray) -> float | np.ndarray:
    """Evaluate the network at z (shape (input_dim,) or (n, input_dim))."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None, :]
    if z.shape[1] != net.config.input_dim:
        raise DimensionMismatchError(
            f"input has dim {z.shape[1]}, network expects {net.config.input_dim}"
        )
    act = net.activation
    h = z
    last = net.params.n_layers - 1
    for i, (a, b) in enumerate(zip(net.params.weights, net.params.biases)):
        h = h @ a.T + b
        if i != last:
            h = act.value(h)
    out = h[:, 0]
    return float(out[0]) if single else out


def save_checkpoint(path: str | Path, config: NetworkConfig, params: ParameterVector,
                    seed: int, epoch: int) -> None:
    """Write a checkpoint: one JSON header line, then the flat parameters as
    little-endian float64 in the documented flattening order."""
    flat = params.to_flat().astype("<f8")
    header = {
        "format": CHECKPOINT_FORMAT,
        "config": config.to_dict(),
        "seed": int(seed),
        "epoch": int(epoch),
        "n_params": int(flat.size),
        "dtype": "<f8",
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        f.write(flat.tobytes())


def load_checkpoint(path: str | Path) -> tuple[NetworkConfig, ParameterVector, int, int]:
    """Read a checkpoint written by save_checkpoint; returns (config, params, seed, epoch)."""
    with open(path, "rb") as f:
        header_line = f.readline()
        payload = f.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} file: {path}")
    config = NetworkConfig.from_dict(header["config"])
    flat = np.frombuffer(payload, dtype="<f8", count=header["n_params"]).astype(np.float64)
    dims = config.layer_dims
    shapes = [(o, i) for i, o in zip(dims[:-1], dims[1:])]
    params = ParameterVector.from_flat(flat, shapes)
    return config, params, int(header["seed"]), int(header["epoch"])
