"""Stochastic training loop: collocation sampling, Adam, cosine-annealed steps.

Determinism contract: for a fixed seed and config the whole run is
reproducible bit for bit in single-worker mode. Network init consumes
``default_rng(seed)``; collocation sampling consumes an independent
``default_rng([seed, 1])`` stream. All arithmetic is float64.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine
from .errors import (
    DimensionMismatchError,
    NonFiniteGradientError,
    NonFiniteLossError,
    OrderUnsupportedError,
)
from .features import FeatureMap
from .network import (
    Network,
    NetworkConfig,
    ParameterGradient,
    ParameterVector,
    init_params,
    save_checkpoint,
)
from .problems import VariationalProblem

SCHEDULES = ("cosine", "constant")
SAMPLING_MODES = ("resample", "fixed")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run.

    output_init_scale damps the output layer of the freshly initialized
    network, so training starts from a near-zero ansatz and the energy descent
    is ordered by the kernel spectrum (largest eigendirections grow first)
    instead of sculpting the O(1) random initial function locally. Set it to
    1.0 to start from the raw init.
    """

    epochs: int
    batch_interior: int = 128
    batch_boundary: int = 2
    lr0: float = 1e-4
    lam: float = 500.0
    seed: int = 0
    schedule: str = "cosine"
    sampling: str = "resample"
    pool_interior: int = 600
    pool_boundary: int = 400
    loss_stride: int = 0  # 0 means epochs // 1000, at least 1
    output_init_scale: float = 1e-3

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_interior < 1 or self.batch_boundary < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.lr0 <= 0.0 or self.lam <= 0.0:
            raise ValueError("lr0 and lam must be positive")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative 64-bit integer")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"sampling must be one of {SAMPLING_MODES}")
        if not 0.0 < self.output_init_scale <= 1.0:
            raise ValueError("output_init_scale must lie in (0, 1]")

    @property
    def stride(self) -> int:
        return self.loss_stride if self.loss_stride > 0 else max(1, self.epochs // 1000)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class OptimizerState:
    """Adam moments; lengths equal the parameter count, t counts completed steps."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    @classmethod
    def zeros(cls, n_params: int) -> "OptimizerState":
        return cls(np.zeros(n_params), np.zeros(n_params))


def _adam_update_flat(state: OptimizerState, params_flat: np.ndarray,
                      grad_flat: np.ndarray, lr: float) -> None:
    """One bias-corrected Adam step, in place on the flat parameter vector."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grad_flat
    state.v *= b2
    state.v += (1.0 - b2) * grad_flat * grad_flat
    denom = np.sqrt(state.v / (1.0 - b2 ** state.t))
    denom += state.eps_adam
    params_flat -= (lr / (1.0 - b1 ** state.t)) * state.m / denom


def adam_step(state: OptimizerState, params: ParameterVector, grad: ParameterGradient,
              lr: float) -> tuple[ParameterVector, OptimizerState]:
    """Functional Adam step on layer-structured parameters."""
    grad_flat = grad.to_flat()
    if not np.all(np.isfinite(grad_flat)):
        raise NonFiniteGradientError("gradient contains NaN or infinity")
    flat = params.to_flat()
    if state.m.size != flat.size:
        raise ValueError("optimizer state length does not match parameter count")
    _adam_update_flat(state, flat, grad_flat, lr)
    return ParameterVector.from_flat(flat, params.shapes()), state


def lr_at(schedule: str, lr0: float, epoch: int, total_epochs: int) -> float:
    """Learning rate at a given epoch: lr0 at 0, zero at total for the cosine schedule."""
    if not 0 <= epoch <= total_epochs:
        raise ValueError("epoch must lie in [0, total_epochs]")
    if schedule == "constant":
        return lr0
    if schedule == "cosine":
        return lr0 * (1.0 + np.cos(np.pi * epoch / total_epochs)) / 2.0
    raise ValueError(f"unknown schedule {schedule!r}")


_EDGES_2D = (
    lambda t: np.stack([np.zeros_like(t), t], axis=1),   # x = 0
    lambda t: np.stack([np.ones_like(t), t], axis=1),    # x = 1
    lambda t: np.stack([t, np.zeros_like(t)], axis=1),   # y = 0
    lambda t: np.stack([t, np.ones_like(t)], axis=1),    # y = 1
)


def sample_batch(prob: VariationalProblem, config: TrainConfig,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw one collocation batch: interior i.i.d. uniform on D, boundary uniform on its edges.

    In 1D the boundary is always the two endpoints. In 2D the boundary batch
    is split equally across the four edges in the fixed order
    x=0, x=1, y=0, y=1.
    """
    if prob.dimension == 1:
        interior = rng.random((config.batch_interior, 1))
        boundary = np.array([[0.0], [1.0]])
        return interior, boundary
    interior = rng.random((config.batch_interior, 2))
    if config.batch_boundary % 4 != 0:
        raise ValueError("2D boundary batch size must be divisible by 4")
    per_edge = config.batch_boundary // 4
    boundary = np.concatenate([edge(rng.random(per_edge)) for edge in _EDGES_2D])
    return interior, boundary


@dataclass
class RunManifest:
    """Record of what actually ran; round-trips losslessly through to_dict/from_dict."""

    problem_id: str
    eps: float
    network: NetworkConfig
    feature_map: FeatureMap
    train: TrainConfig
    version: str
    wall_clock_s: float
    final_loss: float
    loss_stride: int

    def to_dict(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "eps": self.eps,
            "network": self.network.to_dict(),
            "feature_map": self.feature_map.to_dict(),
            "train": self.train.to_dict(),
            "version": self.version,
            "wall_clock_s": self.wall_clock_s,
            "final_loss": self.final_loss,
            "loss_stride": self.loss_stride,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(
            problem_id=d["problem_id"],
            eps=d["eps"],
            network=NetworkConfig.from_dict(d["network"]),
            feature_map=FeatureMap.from_dict(d["feature_map"]),
            train=TrainConfig.from_dict(d["train"]),
            version=d["version"],
            wall_clock_s=d["wall_clock_s"],
            final_loss=d["final_loss"],
            loss_stride=d["loss_stride"],
        )


@dataclass
class TrainResult:
    network: Network
    manifest: RunManifest
    history: dict = field(default_factory=dict)


def _interior_seeds(prob: VariationalProblem, x, tape, n: int):
    """Adjoint seeds of mean-of-W over the batch: partials of W divided by n."""
    u = tape.values()
    grad = tape.d_input()
    u_yy = tape.d2_yy() if prob.derivative_order == 2 else None
    w = prob.density(x, u, grad, u_yy)
    du, dgrad, duyy = prob.density_partials(x, u, grad, u_yy)
    seeds: list[np.ndarray | None] = [du / n if du.any() else None]
    for k in range(prob.dimension):
        col = dgrad[:, k]
        seeds.append(col / n if col.any() else None)
    if prob.derivative_order == 2:
        seeds.append(duyy / n if duyy.any() else None)
    return float(np.mean(w)), seeds


def train(prob: VariationalProblem, netconfig: NetworkConfig, fmap: FeatureMap,
          config: TrainConfig, checkpoint_dir: str | Path | None = None,
          initial_params: ParameterVector | None = None) -> TrainResult:
    """Minimize the penalized energy estimate with Adam.

    Per epoch: draw (or reuse) a collocation batch, estimate the loss, push
    its exact gradient through the engine, apply one Adam step at the
    scheduled learning rate. Raises NonFiniteLossError as soon as the loss or
    gradient stops being finite, carrying the last finite parameters.
    """
    if fmap.output_dim != netconfig.input_dim:
        raise DimensionMismatchError(
            f"feature map outputs dim {fmap.output_dim}, network expects {netconfig.input_dim}"
        )
    if fmap.input_dim != prob.dimension:
        raise DimensionMismatchError(
            f"feature map takes dim {fmap.input_dim}, problem is {prob.dimension}D"
        )
    if prob.derivative_order == 2 and netconfig.activation == "relu":
        raise OrderUnsupportedError("this problem needs u_yy; use a smooth activation")
    if prob.lam != config.lam:
        prob = dataclasses.replace(prob, lam=config.lam)

    start = time.perf_counter()
    if initial_params is not None:
        params0 = initial_params
    else:
        params0 = init_params(netconfig, config.seed)
        params0.weights[-1] *= config.output_init_scale
    flat = params0.to_flat()
    net = Network(netconfig, ParameterVector.from_flat(flat, params0.shapes(), copy=False))
    state = OptimizerState.zeros(flat.size)
    sampler = np.random.default_rng([config.seed, 1])

    if config.sampling == "fixed":
        pool_cfg = dataclasses.replace(
            config, batch_interior=config.pool_interior, batch_boundary=config.pool_boundary
        )
        pool = sample_batch(prob, pool_cfg, sampler)

    stride = config.stride
    hist_epoch, hist_loss, hist_penalty = [], [], []
    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    ckpt_stride = max(1, config.epochs // 10)
    order = prob.derivative_order
    n_b_inv = None
    loss = np.nan

    for epoch in range(config.epochs):
        if config.sampling == "fixed":
            xi, xb = pool
        else:
            xi, xb = sample_batch(prob, config, sampler)
        tape_i = engine.forward_jets(net, fmap, xi, order)
        interior_mean, seeds_i = _interior_seeds(prob, xi, tape_i, xi.shape[0])
        tape_b = engine.forward_jets(net, fmap, xb, 0)
        ub = tape_b.values()
        penalty = prob.lam * float(np.mean(ub * ub))
        loss = interior_mean + penalty

        if not np.isfinite(loss):
            raise NonFiniteLossError(
                f"loss became non-finite at epoch {epoch}", epoch=epoch, params=net.params.copy()
            )
        if epoch % stride == 0 or epoch == config.epochs - 1:
            hist_epoch.append(epoch)
            hist_loss.append(loss)
            hist_penalty.append(penalty)

        grad_flat = engine.backprop(tape_i, seeds_i)
        if n_b_inv is None:
            n_b_inv = 1.0 / xb.shape[0]
        grad_flat += engine.backprop(tape_b, [2.0 * prob.lam * n_b_inv * ub])
        if not np.all(np.isfinite(grad_flat)):
            raise NonFiniteLossError(
                f"gradient became non-finite at epoch {epoch}", epoch=epoch, params=net.params.copy()
            )

        _adam_update_flat(state, flat, grad_flat, lr_at(config.schedule, config.lr0, epoch, config.epochs))

        if ckpt_dir is not None and (epoch + 1) % ckpt_stride == 0 and epoch + 1 < config.epochs:
            save_checkpoint(ckpt_dir / f"checkpoint_{epoch + 1:08d}.ckpt",
                            netconfig, net.params, config.seed, epoch + 1)

    if ckpt_dir is not None:
        save_checkpoint(ckpt_dir / "checkpoint_final.ckpt",
                        netconfig, net.params, config.seed, config.epochs)

    manifest = RunManifest(
        problem_id=prob.id,
        eps=prob.eps,
        network=netconfig,
        feature_map=fmap,
        train=config,
        version=_package_version(),
        wall_clock_s=time.perf_counter() - start,
        final_loss=float(loss),
        loss_stride=stride,
    )
    history = {
        "epoch": np.asarray(hist_epoch, dtype=np.int64),
        "loss": np.asarray(hist_loss),
        "boundary_penalty": np.asarray(hist_penalty),
    }
    return TrainResult(network=net, manifest=manifest, history=history)


def _package_version() -> str:
    from . import __version__

    return __version__
