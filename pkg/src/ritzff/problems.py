"""Variational problems: energy densities, their partials, and oracle energies.

Four benchmark problems are built in, all with zero Dirichlet data enforced
through a boundary penalty:

  dw1d        (u_x^2 - 1)^2                       on [0,1]
  dw1d-lower  (u_x^2 - 1)^2 + u^2                 on [0,1]
  twin2d      u_x^2 + (u_y^2 - 1)^2               on [0,1]^2
  twin2d-reg  u_x^2 + (u_y^2 - 1)^2 + eps^2 u_yy^2 on [0,1]^2

A convex sanity problem (u - sin 2 pi x)^2 is provided for the kernel-dynamics
experiments, where a strictly convex density is required.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import engine
from .errors import EmptyBatchError, MissingSecondDerivativeError, OrderUnsupportedError
from .features import FeatureMap
from .network import Network

PROBLEM_IDS = ("dw1d", "dw1d-lower", "twin2d", "twin2d-reg")

DEFAULT_LAMBDA = 500.0
EPS_CHOICES = {"0": 0.0, "0.1/16": 0.1 / 16.0, "0.1/4": 0.1 / 4.0}


@dataclass(frozen=True)
class VariationalProblem:
    """One energy-minimization problem over the unit interval or square.

    The density callables are vectorized: x is (n, d), u is (n,), grad is
    (n, d), u_yy is (n,) or None. hessian_uu, present only for the 1D
    problems, returns the (n, 2, 2) Hessians of W in (u, u') per point.
    """

    id: str
    dimension: int
    derivative_order: int
    eps: float
    lam: float
    density: Callable
    density_partials: Callable
    hessian_uu: Callable | None = None


def _check_state(prob: VariationalProblem, x, u, grad, u_yy):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    grad = np.atleast_2d(np.asarray(grad, dtype=np.float64))
    if x.shape[1] != prob.dimension or grad.shape[1] != prob.dimension:
        raise ValueError(
            f"problem {prob.id!r} is {prob.dimension}D; got x dim {x.shape[1]}, grad dim {grad.shape[1]}"
        )
    if prob.derivative_order == 2:
        if u_yy is None:
            raise MissingSecondDerivativeError(f"problem {prob.id!r} needs u_yy")
        u_yy = np.atleast_1d(np.asarray(u_yy, dtype=np.float64))
    elif u_yy is not None:
        raise ValueError(f"problem {prob.id!r} takes no u_yy")
    return x, u, grad, u_yy


def lagrangian(prob: VariationalProblem, x, u, grad, u_yy=None) -> float:
    """The density W at a single evaluation state."""
    x, u, grad, u_yy = _check_state(prob, x, u, grad, u_yy)
    return float(prob.density(x, u, grad, u_yy)[0])


def lagrangian_partials(prob: VariationalProblem, x, u, grad, u_yy=None):
    """Exact partials (dW/du, dW/dgrad, dW/du_yy) at a single state."""
    x, u, grad, u_yy = _check_state(prob, x, u, grad, u_yy)
    du, dgrad, duyy = prob.density_partials(x, u, grad, u_yy)
    return float(du[0]), dgrad[0].copy(), (None if duyy is None else float(duyy[0]))


# ---------------------------------------------------------------------------
# Built-in densities


def _dw1d_density(x, u, grad, u_yy):
    q = grad[:, 0] ** 2 - 1.0
    return q * q


def _dw1d_partials(x, u, grad, u_yy):
    ux = grad[:, 0]
    d = np.zeros_like(u)
    dg = (4.0 * ux * (ux * ux - 1.0))[:, None]
    return d, dg, None


def _dw1d_hessian(x, u, grad):
    n = u.shape[0]
    h = np.zeros((n, 2, 2))
    h[:, 1, 1] = 12.0 * grad[:, 0] ** 2 - 4.0
    return h


def _dw1d_lower_density(x, u, grad, u_yy):
    q = grad[:, 0] ** 2 - 1.0
    return q * q + u * u


def _dw1d_lower_partials(x, u, grad, u_yy):
    ux = grad[:, 0]
    return 2.0 * u, (4.0 * ux * (ux * ux - 1.0))[:, None], None


def _dw1d_lower_hessian(x, u, grad):
    h = _dw1d_hessian(x, u, grad)
    h[:, 0, 0] = 2.0
    return h


def _twin2d_density(x, u, grad, u_yy):
    q = grad[:, 1] ** 2 - 1.0
    return grad[:, 0] ** 2 + q * q


def _twin2d_partials(x, u, grad, u_yy):
    dg = np.empty_like(grad)
    dg[:, 0] = 2.0 * grad[:, 0]
    uy = grad[:, 1]
    dg[:, 1] = 4.0 * uy * (uy * uy - 1.0)
    return np.zeros(u.shape[0]), dg, None


def make_problem(pid: str, eps: float = 0.0, lam: float = DEFAULT_LAMBDA) -> VariationalProblem:
    """Build one of the four benchmark problems by id."""
    if lam <= 0.0:
        raise ValueError("penalty weight lam must be positive")
    if pid == "dw1d":
        return VariationalProblem("dw1d", 1, 1, 0.0, lam,
                                  _dw1d_density, _dw1d_partials, _dw1d_hessian)
    if pid == "dw1d-lower":
        return VariationalProblem("dw1d-lower", 1, 1, 0.0, lam,
                                  _dw1d_lower_density, _dw1d_lower_partials, _dw1d_lower_hessian)
    if pid == "twin2d":
        return VariationalProblem("twin2d", 2, 1, 0.0, lam,
                                  _twin2d_density, _twin2d_partials, None)
    if pid == "twin2d-reg":
        if eps < 0.0:
            raise ValueError("eps must be nonnegative")
        e2 = eps * eps

        def density(x, u, grad, u_yy):
            return _twin2d_density(x, u, grad, None) + e2 * u_yy * u_yy

        def partials(x, u, grad, u_yy):
            du, dg, _ = _twin2d_partials(x, u, grad, None)
            return du, dg, 2.0 * e2 * u_yy

        return VariationalProblem("twin2d-reg", 2, 2, eps, lam, density, partials, None)
    raise ValueError(f"unknown problem id {pid!r}; expected one of {PROBLEM_IDS}")


def convex_surrogate(lam: float = DEFAULT_LAMBDA) -> VariationalProblem:
    """Strictly convex 1D sanity problem W = (u - sin 2 pi x)^2."""

    def density(x, u, grad, u_yy):
        r = u - np.sin(2.0 * np.pi * x[:, 0])
        return r * r

    def partials(x, u, grad, u_yy):
        r = u - np.sin(2.0 * np.pi * x[:, 0])
        return 2.0 * r, np.zeros_like(grad), None

    def hessian(x, u, grad):
        h = np.zeros((u.shape[0], 2, 2))
        h[:, 0, 0] = 2.0
        return h

    return VariationalProblem("convex1d", 1, 1, 0.0, lam, density, partials, hessian)


# ---------------------------------------------------------------------------
# Monte Carlo loss estimate (the training objective)


def penalized_loss_estimate(prob: VariationalProblem, net: Network, fmap: FeatureMap,
                            interior: np.ndarray, boundary: np.ndarray) -> float:
    """Mean of W over the interior batch plus lam * mean of u^2 over the boundary batch."""
    interior = np.atleast_2d(np.asarray(interior, dtype=np.float64))
    boundary = np.atleast_2d(np.asarray(boundary, dtype=np.float64))
    if interior.shape[0] == 0 or boundary.shape[0] == 0:
        raise EmptyBatchError("interior and boundary batches must be nonempty")
    tape = engine.forward_jets(net, fmap, interior, prob.derivative_order)
    u_yy = tape.d2_yy() if prob.derivative_order == 2 else None
    w = prob.density(interior, tape.values(), tape.d_input(), u_yy)
    ub = engine.forward_jets(net, fmap, boundary, 0).values()
    return float(np.mean(w) + prob.lam * np.mean(ub * ub))


# ---------------------------------------------------------------------------
# Closed-form trial fields and quadrature oracles


@dataclass(frozen=True)
class AnalyticField:
    """Closed-form trial function with exact derivatives; only oracles use it."""

    dimension: int
    value: Callable
    grad: Callable
    u_yy: Callable | None = None


def zero_field(dimension: int = 1) -> AnalyticField:
    return AnalyticField(
        dimension,
        value=lambda x: np.zeros(x.shape[0]),
        grad=lambda x: np.zeros_like(x),
        u_yy=lambda x: np.zeros(x.shape[0]),
    )


def hat_field() -> AnalyticField:
    """u = min(x, 1-x); slope exactly +1 up to the crest and -1 after it."""
    return AnalyticField(
        1,
        value=lambda x: np.minimum(x[:, 0], 1.0 - x[:, 0]),
        grad=lambda x: np.where(x[:, 0] <= 0.5, 1.0, -1.0)[:, None],
    )


def _triangle(t: np.ndarray, period: float) -> tuple[np.ndarray, np.ndarray]:
    """Triangle wave of the given period: slopes exactly +-1, peak height period/2.

    At interior tooth boundaries (t > 0 with t mod period = 0) the slope is
    taken from the left (-1), so the wave does not restart at the right edge
    of the domain.
    """
    t = np.asarray(t, dtype=np.float64)
    s = np.mod(t, period)
    s = np.where((s == 0.0) & (t > 0.0), period, s)
    half = period / 2.0
    up = s < half
    value = np.where(up, s, period - s)
    slope = np.where(up, 1.0, -1.0)
    return value, slope


def sawtooth_field(k: int) -> AnalyticField:
    """k-tooth triangular wave on [0,1]: period 1/k, amplitude 1/(2k), slopes +-1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    period = 1.0 / k
    return AnalyticField(
        1,
        value=lambda x: _triangle(x[:, 0], period)[0],
        grad=lambda x: _triangle(x[:, 0], period)[1][:, None],
    )


def sawtooth_sheet_field(k: int) -> AnalyticField:
    """2D field u(x, y) = k-tooth triangle in y: u_x = 0, u_y = +-1 a.e."""
    if k < 1:
        raise ValueError("k must be >= 1")
    period = 1.0 / k

    def grad(x):
        g = np.zeros_like(x)
        g[:, 1] = _triangle(x[:, 1], period)[1]
        return g

    return AnalyticField(
        2,
        value=lambda x: _triangle(x[:, 1], period)[0],
        grad=grad,
        u_yy=lambda x: np.zeros(x.shape[0]),
    )


def _grid_points(dimension: int, resolution: int) -> np.ndarray:
    if resolution < 2:
        raise ValueError("grid resolution must be >= 2")
    axis = np.linspace(0.0, 1.0, resolution)
    if dimension == 1:
        return axis[:, None]
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def _field_density_on_grid(prob: VariationalProblem, field: AnalyticField, resolution: int):
    points = _grid_points(prob.dimension, resolution)
    u = field.value(points)
    grad = field.grad(points)
    u_yy = None
    if prob.derivative_order == 2:
        if field.u_yy is None:
            raise MissingSecondDerivativeError("field lacks u_yy required by the problem")
        u_yy = field.u_yy(points)
    return points, prob.density(points, u, grad, u_yy)


def oracle_energy(prob: VariationalProblem, field: AnalyticField, grid_resolution: int = 1024) -> float:
    """Composite-trapezoid quadrature of the interior energy of a closed-form field."""
    _, w = _field_density_on_grid(prob, field, grid_resolution)
    axis = np.linspace(0.0, 1.0, grid_resolution)
    if prob.dimension == 1:
        return float(np.trapezoid(w, axis))
    w = w.reshape(grid_resolution, grid_resolution)
    return float(np.trapezoid(np.trapezoid(w, axis, axis=1), axis))


def boundary_penalty_oracle(prob: VariationalProblem, field: AnalyticField,
                            resolution: int = 1024) -> float:
    """lam times the uniform-measure boundary mean of u^2 for a closed-form field.

    In 2D the four unit edges carry equal weight, matching the sampler.
    """
    if prob.dimension == 1:
        pts = np.array([[0.0], [1.0]])
        u = field.value(pts)
        return float(prob.lam * np.mean(u * u))
    t = np.linspace(0.0, 1.0, resolution)
    total = 0.0
    for edge in _EDGE_BUILDERS:
        u = field.value(edge(t))
        total += np.trapezoid(u * u, t)
    return float(prob.lam * total / 4.0)


_EDGE_BUILDERS = (
    lambda t: np.stack([np.zeros_like(t), t], axis=1),   # x = 0
    lambda t: np.stack([np.ones_like(t), t], axis=1),    # x = 1
    lambda t: np.stack([t, np.zeros_like(t)], axis=1),   # y = 0
    lambda t: np.stack([t, np.ones_like(t)], axis=1),    # y = 1
)


# ---------------------------------------------------------------------------
# Strong-form residual for the 1D double well


def dw1d_strong_form_residual(u_x: float, u_xx: float) -> float:
    """d/dx[u_x (u_x^2 - 1)] expanded: u_xx (3 u_x^2 - 1)."""
    return u_xx * (3.0 * u_x * u_x - 1.0)


def euler_lagrange_residual_dw1d(net: Network, fmap: FeatureMap, x) -> float:
    """Residual of the strong-form equation at x for the current ansatz.

    The trivial solution u = 0 makes this vanish everywhere while its energy
    stays 1, which is why the strong form is not minimized here.
    """
    if not net.activation.second_order_ok:
        raise OrderUnsupportedError("the strong-form residual needs a twice-differentiable activation")
    jet = engine.evaluate_jet(net, fmap, x, order=2)
    return dw1d_strong_form_residual(jet.d_input[0], jet.d2_yy)
