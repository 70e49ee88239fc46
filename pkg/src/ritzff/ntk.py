"""Empirical tangent-kernel analysis: Gram assembly, spectra, linearized dynamics.

The kernel treats the pair U = (u, u') per collocation point, so the block
Gram matrix on n points is 2n x 2n. A scalar (value-only) variant backs the
eigendecay experiments on circle-mapped inputs. Eigenvalues of the
Hessian-weighted product D * M are obtained through the symmetric similarity
D^(1/2) M D^(1/2) whenever every Hessian block is positive definite, which
guarantees a real positive spectrum; otherwise a general eigensolver is used
and any genuinely complex mode is counted as a hypothesis violation rather
than silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from . import engine
from .errors import (
    ComplexSpectrumError,
    EigenFailureError,
    InsufficientSpectrumError,
)
from .features import FeatureMap, fourier1d, identity_map
from .network import Network, NetworkConfig, ParameterVector, init_network
from .problems import VariationalProblem, convex_surrogate

IMAG_TOLERANCE = 1e-8


def ntk_block(net: Network, fmap: FeatureMap, x_m, x_n) -> np.ndarray:
    """The 2x2 kernel block grad_theta U(x_m) @ grad_theta U(x_n)^T."""
    x = np.stack([np.atleast_1d(np.asarray(x_m, dtype=np.float64)),
                  np.atleast_1d(np.asarray(x_n, dtype=np.float64))])
    rows = engine.gradient_rows(net, fmap, x, ("u", "ux"))
    return rows[0:2] @ rows[2:4].T


def gram_matrix(net: Network, fmap: FeatureMap, points: np.ndarray,
                components: tuple[str, ...] = ("u", "ux")) -> np.ndarray:
    """Dense symmetric Gram matrix of the chosen output components on all point pairs."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    rows = engine.gradient_rows(net, fmap, points, components)
    return rows @ rows.T


def init_scaled_gradient_rows(net: Network, fmap: FeatureMap, points: np.ndarray,
                              components: tuple[str, ...] = ("u",)) -> np.ndarray:
    """Gradient rows with each weight block rescaled by its init std sqrt(2/fan_in).

    This expresses the gradient in units of each parameter's natural scale.
    The resulting kernel converges as the width grows (the raw kernel does
    not: its last-layer block dominates by a factor of the width), so this is
    the finite-width stand-in for the width-limit kernel in the eigendecay
    experiments. Bias gradients are already order one and stay unscaled.
    """
    rows = engine.gradient_rows(net, fmap, points, components)
    pos = 0
    for a, b in zip(net.params.weights, net.params.biases):
        rows[:, pos:pos + a.size] *= np.sqrt(2.0 / a.shape[1])
        pos += a.size + b.size
    return rows


def hessian_blocks(prob: VariationalProblem, net: Network, fmap: FeatureMap,
                   points: np.ndarray) -> np.ndarray:
    """Per-point 2x2 Hessians of W in (u, u') at the current network state."""
    if prob.hessian_uu is None:
        raise ValueError(f"problem {prob.id!r} has no (u, u') Hessian (1D problems only)")
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    tape = engine.forward_jets(net, fmap, points, 1)
    return prob.hessian_uu(points, tape.values(), tape.d_input())


@dataclass
class GramSpectrum:
    """Gram matrix, optional Hessian blocks, and the spectrum of their product."""

    points: np.ndarray
    block_size: int
    gram: np.ndarray
    hessian: np.ndarray | None
    eigenvalues: np.ndarray
    modes: np.ndarray
    modes_inv: np.ndarray
    n_complex: int = 0

    @property
    def size(self) -> int:
        return self.gram.shape[0]


def _blockdiag(blocks: np.ndarray) -> np.ndarray:
    n, b, _ = blocks.shape
    full = np.zeros((n * b, n * b))
    for i in range(n):
        full[i * b:(i + 1) * b, i * b:(i + 1) * b] = blocks[i]
    return full


def _block_sqrt(blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Per-block symmetric square root and inverse root, or None if any block is not PD."""
    roots = np.empty_like(blocks)
    inv_roots = np.empty_like(blocks)
    for i, blk in enumerate(blocks):
        w, s = np.linalg.eigh(blk)
        if w[0] <= 0.0:
            return None
        sq = np.sqrt(w)
        roots[i] = (s * sq) @ s.T
        inv_roots[i] = (s / sq) @ s.T
    return roots, inv_roots


def assemble_gram(net: Network, fmap: FeatureMap, points: np.ndarray,
                  prob: VariationalProblem | None = None,
                  components: tuple[str, ...] = ("u", "ux")) -> GramSpectrum:
    """Assemble the block Gram matrix on the given points and decompose its spectrum.

    Without a problem the Gram matrix itself is decomposed by a symmetric
    solver. With a problem, the spectrum of D * M is computed, D being the
    block-diagonal matrix of density Hessians restricted to the requested
    components.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] < 1:
        raise ValueError("need at least one collocation point")
    b = len(components)
    m = gram_matrix(net, fmap, points, components)
    try:
        if prob is None:
            w, q = scipy.linalg.eigh(m)
            order = np.argsort(w)[::-1]
            return GramSpectrum(points, b, m, None, w[order], q[:, order],
                                q[:, order].T.copy())
        blocks = hessian_blocks(prob, net, fmap, points)[:, :b, :b]
        pd = _block_sqrt(blocks)
        if pd is not None:
            roots, inv_roots = pd
            rfull, rinv = _blockdiag(roots), _blockdiag(inv_roots)
            sym = rfull @ m @ rfull
            sym = (sym + sym.T) / 2.0
            w, u = scipy.linalg.eigh(sym)
            order = np.argsort(w)[::-1]
            w, u = w[order], u[:, order]
            return GramSpectrum(points, b, m, blocks, w, rfull @ u, u.T @ rinv)
        w, v = scipy.linalg.eig(_blockdiag(blocks) @ m)
        scale = np.max(np.abs(w)) if w.size else 0.0
        n_complex = int(np.sum(np.abs(w.imag) > IMAG_TOLERANCE * max(scale, 1e-300)))
        order = np.argsort(w.real)[::-1]
        w, v = w[order], v[:, order]
        if n_complex == 0:
            v = v.real
            v_inv = np.linalg.inv(v)
        else:
            v_inv = np.linalg.inv(v)
        return GramSpectrum(points, b, m, blocks, w.real, v, v_inv, n_complex)
    except np.linalg.LinAlgError as exc:
        raise EigenFailureError(f"eigendecomposition failed: {exc}") from exc


def linearized_dynamics(spectrum: GramSpectrum, initial_gradient: np.ndarray, eta: float,
                        n_points: int, times: np.ndarray) -> np.ndarray:
    """Closed-form evolution of the density-gradient vector along eigendirections.

    Row t is the predicted gradient vector at times[t]:
    modes @ diag(exp(-eta * lambda * t / n)) @ modes_inv @ g0.
    """
    if spectrum.n_complex > 0:
        raise ComplexSpectrumError(
            f"{spectrum.n_complex} eigenvalues are genuinely complex; "
            "the closed-form dynamics assume a real spectrum"
        )
    g0 = np.asarray(initial_gradient, dtype=np.float64)
    if g0.shape != (spectrum.size,):
        raise ValueError(f"initial gradient must have length {spectrum.size}")
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    coeffs = spectrum.modes_inv @ g0
    decay = np.exp(-eta * np.outer(times, spectrum.eigenvalues) / n_points)
    traj = (decay * coeffs) @ spectrum.modes.T
    return np.real_if_close(traj).astype(np.float64)


@dataclass
class DecayFit:
    slope: float
    intercept: float
    k_min: int
    k_max: int
    n_used: int


def eigendecay_fit(eigenvalues: np.ndarray, k_range: tuple[int, int] = (4, 64)) -> DecayFit:
    """Least-squares slope of log lambda_k against log k over a 1-based index window."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    k_min, k_max = k_range
    if not 1 <= k_min < k_max <= lam.size:
        raise ValueError(f"k_range {k_range} does not fit a spectrum of size {lam.size}")
    ks = np.arange(k_min, k_max + 1)
    vals = lam[k_min - 1:k_max]
    keep = vals > 1e-12 * lam[0]
    if np.sum(keep) < 10:
        raise InsufficientSpectrumError(
            f"only {int(np.sum(keep))} eigenvalues above the noise floor in k range {k_range}"
        )
    logk, logv = np.log(ks[keep]), np.log(vals[keep])
    a = np.vstack([logk, np.ones_like(logk)]).T
    coef, *_ = np.linalg.lstsq(a, logv, rcond=None)
    return DecayFit(float(coef[0]), float(coef[1]), k_min, k_max, int(np.sum(keep)))


def operator_eigenvalue_relation(kernel: Callable, n_values: tuple[int, ...],
                                 k_max: int = 8) -> dict[int, np.ndarray]:
    """lambda_k / n for nested uniform grids x_j = j/n; converges to the operator eigenvalues."""
    out = {}
    for n in n_values:
        x = np.arange(1, n + 1) / n
        gram = np.asarray(kernel(x[:, None], x[None, :]), dtype=np.float64)
        w = scipy.linalg.eigvalsh(gram)[::-1]
        out[int(n)] = w[:k_max] / n
    return out


def brownian_kernel(x1, x2):
    """Covariance min(x, x') of Brownian motion on [0, 1]."""
    return np.minimum(x1, x2)


def brownian_operator_eigenvalue(k: int) -> float:
    """Closed-form k-th eigenvalue 1 / ((k - 1/2) pi)^2 of the min-kernel integral operator."""
    return 1.0 / (((k - 0.5) * np.pi) ** 2)


def constant_kernel(x1, x2):
    return np.ones(np.broadcast_shapes(np.shape(x1), np.shape(x2)))


# ---------------------------------------------------------------------------
# Experiments


def uniform_grid(n: int) -> np.ndarray:
    """Deterministic midpoint grid on [0, 1] used for reproducible spectra."""
    return ((np.arange(n) + 0.5) / n)[:, None]


@dataclass
class DecayExperiment:
    eigenvalues: np.ndarray          # spectrum of the seed-averaged kernel
    fit: DecayFit                    # slope fitted on the averaged spectrum
    per_seed_slopes: np.ndarray      # spread across seeds
    n_points: int
    width: int
    freq_exponent: int


def scalar_decay_experiment(width: int = 512, n_points: int = 256, freq_exponent: int = 0,
                            seeds: tuple[int, ...] = tuple(range(8)),
                            k_range: tuple[int, int] = (4, 64),
                            hidden_layers: int = 1,
                            activation: str = "relu",
                            init_scaled: bool = True) -> DecayExperiment:
    """Eigendecay of the scalar (value-only) kernel for circle-mapped inputs.

    The kernel is averaged over several init seeds and, by default, computed
    from init-scaled gradients so it stands in for the width-limit kernel;
    per-seed fit slopes are returned as the spread.
    """
    fmap = fourier1d(freq_exponent)
    config = NetworkConfig(input_dim=fmap.output_dim, hidden_layers=hidden_layers,
                           width=width, activation=activation)
    points = uniform_grid(n_points)
    gram_sum = np.zeros((n_points, n_points))
    slopes = []
    for seed in seeds:
        net = init_network(config, seed)
        if init_scaled:
            rows = init_scaled_gradient_rows(net, fmap, points, ("u",))
            gram = rows @ rows.T
        else:
            gram = gram_matrix(net, fmap, points, ("u",))
        gram_sum += gram
        slopes.append(eigendecay_fit(scipy.linalg.eigvalsh(gram)[::-1], k_range).slope)
    gram_avg = gram_sum / len(seeds)
    eigenvalues = scipy.linalg.eigvalsh(gram_avg)[::-1]
    fit = eigendecay_fit(eigenvalues, k_range)
    return DecayExperiment(eigenvalues, fit, np.asarray(slopes), n_points, width, freq_exponent)


@dataclass
class ConvexDynamicsResult:
    """Gradient-descent run on the convex surrogate against the closed-form prediction."""

    times: np.ndarray
    measured_norm: np.ndarray
    predicted_norm: np.ndarray       # top-mode prediction of the norm
    measured_decay: np.ndarray       # measured_norm / measured_norm[0]
    predicted_decay: np.ndarray      # predicted_norm / predicted_norm[0]
    eigenvalues: np.ndarray
    param_drift: float               # |theta_T - theta_0| / |theta_0| at the last step
    gram_drift: float                # relative Frobenius drift of the block Gram matrix
    n_modes: int

    @property
    def decay_ratio(self) -> np.ndarray:
        return self.measured_decay / self.predicted_decay


def convex_dynamics_experiment(width: int = 1024, n_points: int = 64, lr: float = 1e-4,
                               compare_steps: int = 200, total_steps: int = 500,
                               seed: int = 0, n_modes: int = 5) -> ConvexDynamicsResult:
    """Train by plain full-batch gradient descent on W = (u - sin 2 pi x)^2 and
    compare the measured density-gradient decay with the spectral prediction.

    The density depends on u only, so the dynamics reduce to the value block:
    D has scalar blocks [2] and M is the value-only Gram matrix. The predicted
    norm uses the leading n_modes eigendirections.
    """
    prob = convex_surrogate()
    fmap = identity_map(1)
    config = NetworkConfig(input_dim=1, hidden_layers=1, width=width, activation="relu")
    net = init_network(config, seed)
    x = np.linspace(0.0, 1.0, n_points)[:, None]
    target = np.sin(2.0 * np.pi * x[:, 0])

    spectrum = assemble_gram(net, fmap, x, prob=prob, components=("u",))
    gram0 = spectrum.gram
    block_gram0 = gram_matrix(net, fmap, x, ("u", "ux"))
    theta0 = net.params.to_flat()
    flat = theta0.copy()
    net = Network(config, ParameterVector.from_flat(flat, net.params.shapes(), copy=False))

    def density_gradient() -> np.ndarray:
        u = engine.forward_jets(net, fmap, x, 0).values()
        return 2.0 * (u - target)

    g0 = density_gradient()
    measured = [np.linalg.norm(g0)]
    for step in range(total_steps):
        tape = engine.forward_jets(net, fmap, x, 0)
        resid = tape.values() - target
        grad = engine.backprop(tape, [2.0 * resid / n_points])
        flat -= lr * grad
        if step + 1 <= compare_steps:
            measured.append(np.linalg.norm(density_gradient()))

    times = np.arange(compare_steps + 1, dtype=np.float64)
    coeffs = spectrum.modes_inv @ g0
    lam = spectrum.eigenvalues[:n_modes]
    decay = np.exp(-lr * np.outer(times, lam) / n_points)
    pred_vectors = (decay * coeffs[:n_modes]) @ spectrum.modes[:, :n_modes].T
    predicted = np.linalg.norm(pred_vectors, axis=1)

    measured = np.asarray(measured)
    block_gram = gram_matrix(net, fmap, x, ("u", "ux"))
    return ConvexDynamicsResult(
        times=times,
        measured_norm=measured,
        predicted_norm=predicted,
        measured_decay=measured / measured[0],
        predicted_decay=predicted / predicted[0],
        eigenvalues=spectrum.eigenvalues,
        param_drift=float(np.linalg.norm(flat - theta0) / np.linalg.norm(theta0)),
        gram_drift=float(np.linalg.norm(block_gram - block_gram0) / np.linalg.norm(block_gram0)),
        n_modes=n_modes,
    )
