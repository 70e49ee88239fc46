"""Diagnostics for learned fields: grid evaluation, transition counting, energy reports.

Transition counting normalizes the slope samples to max |s| = 1, classifies
each sample against a dead zone (+1 above the threshold, -1 below its
negative, unclassified inside), collapses runs, and counts sign alternations
of the classified runs. The count is therefore invariant under positive
rescaling and flips of the samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .errors import AllUnclassifiedError
from .features import FeatureMap
from .network import Network
from .problems import VariationalProblem

DEFAULT_THRESHOLD = 0.5


@dataclass
class FieldGrid:
    """Uniform grid evaluation of u and its derivatives.

    In 2D the flat arrays are row-major with the x index major:
    flat index = ix * resolution + iy.
    """

    dimension: int
    resolution: int
    points: np.ndarray          # (n, d)
    u: np.ndarray               # (n,)
    du: np.ndarray              # (n, d)
    u_yy: np.ndarray | None = None


def grid_points(dimension: int, resolution: int) -> np.ndarray:
    if resolution < 2:
        raise ValueError("grid resolution must be >= 2")
    axis = np.linspace(0.0, 1.0, resolution)
    if dimension == 1:
        return axis[:, None]
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def evaluate_grid(net: Network, fmap: FeatureMap, prob: VariationalProblem,
                  resolution: int) -> FieldGrid:
    """Jets of the ansatz at every grid point, including the boundary."""
    points = grid_points(prob.dimension, resolution)
    order = prob.derivative_order
    tape = engine.forward_jets(net, fmap, points, order)
    return FieldGrid(
        dimension=prob.dimension,
        resolution=resolution,
        points=points,
        u=tape.values(),
        du=tape.d_input(),
        u_yy=tape.d2_yy() if order == 2 else None,
    )


@dataclass
class TransitionReport:
    count: int
    states: list[int]                 # signs of the classified slope runs, in order
    unclassified_fraction: float
    threshold: float


def count_transitions(samples: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> TransitionReport:
    """Count sign alternations of slope samples between the two wells."""
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size < 2:
        raise ValueError("need at least two samples")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    peak = np.max(np.abs(samples))
    if peak == 0.0:
        raise AllUnclassifiedError("all samples are zero")
    s = samples / peak
    labels = np.where(s > threshold, 1, np.where(s < -threshold, -1, 0))
    classified = labels[labels != 0]
    if classified.size == 0:
        raise AllUnclassifiedError("every sample falls inside the dead zone")
    runs = [int(classified[0])]
    for v in classified[1:]:
        if v != runs[-1]:
            runs.append(int(v))
    return TransitionReport(
        count=len(runs) - 1,
        states=runs,
        unclassified_fraction=float(np.mean(labels == 0)),
        threshold=threshold,
    )


def slope_line_samples(net: Network, fmap: FeatureMap, prob: VariationalProblem,
                       n_samples: int = 1024, x_slice: float = 0.5) -> np.ndarray:
    """Slope samples used for transition counting: u_x over [0,1] in 1D,
    u_y along the vertical line x = x_slice in 2D."""
    t = np.linspace(0.0, 1.0, n_samples)
    if prob.dimension == 1:
        tape = engine.forward_jets(net, fmap, t[:, None], 1)
        return tape.d_input()[:, 0]
    line = np.stack([np.full_like(t, x_slice), t], axis=1)
    tape = engine.forward_jets(net, fmap, line, 1)
    return tape.d_input()[:, 1]


def transition_report(net: Network, fmap: FeatureMap, prob: VariationalProblem,
                      n_samples: int = 1024, threshold: float = DEFAULT_THRESHOLD,
                      x_slice: float = 0.5) -> TransitionReport:
    return count_transitions(slope_line_samples(net, fmap, prob, n_samples, x_slice), threshold)


@dataclass
class EnergyReport:
    grid_energy: float
    mc_energy: float
    mc_standard_error: float
    boundary_penalty: float
    resolution: int
    mc_samples: int


def _density_on(net: Network, fmap: FeatureMap, prob: VariationalProblem,
                points: np.ndarray) -> np.ndarray:
    tape = engine.forward_jets(net, fmap, points, prob.derivative_order)
    u_yy = tape.d2_yy() if prob.derivative_order == 2 else None
    return prob.density(points, tape.values(), tape.d_input(), u_yy)


_EDGES_2D = (
    lambda t: np.stack([np.zeros_like(t), t], axis=1),
    lambda t: np.stack([np.ones_like(t), t], axis=1),
    lambda t: np.stack([t, np.zeros_like(t)], axis=1),
    lambda t: np.stack([t, np.ones_like(t)], axis=1),
)


def energy_report(net: Network, fmap: FeatureMap, prob: VariationalProblem,
                  resolution: int = 256, mc_samples: int = 100_000,
                  seed: int = 0) -> EnergyReport:
    """Interior energy by trapezoid quadrature and by Monte Carlo, plus the boundary penalty."""
    if resolution < 2:
        raise ValueError("grid resolution must be >= 2")
    axis = np.linspace(0.0, 1.0, resolution)
    w = _density_on(net, fmap, prob, grid_points(prob.dimension, resolution))
    if prob.dimension == 1:
        grid_energy = float(np.trapezoid(w, axis))
    else:
        grid_energy = float(np.trapezoid(np.trapezoid(w.reshape(resolution, resolution), axis, axis=1), axis))

    rng = np.random.default_rng(seed)
    mc_points = rng.random((mc_samples, prob.dimension))
    mc_w = _density_on(net, fmap, prob, mc_points)
    mc_energy = float(np.mean(mc_w))
    mc_se = float(np.std(mc_w, ddof=1) / np.sqrt(mc_samples))

    if prob.dimension == 1:
        ub = engine.forward_jets(net, fmap, np.array([[0.0], [1.0]]), 0).values()
        penalty = float(prob.lam * np.mean(ub * ub))
    else:
        total = 0.0
        for edge in _EDGES_2D:
            ue = engine.forward_jets(net, fmap, edge(axis), 0).values()
            total += np.trapezoid(ue * ue, axis)
        penalty = float(prob.lam * total / 4.0)

    return EnergyReport(grid_energy, mc_energy, mc_se, penalty, resolution, mc_samples)
