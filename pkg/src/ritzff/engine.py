"""Derivative engine for the composed function net(delta(x)).

Spatial derivatives are carried forward as jets: per point we propagate the
value, one tangent per input coordinate, and (on request) the second
derivative in the last coordinate. Parameter gradients of any scalar built
from those outputs are then obtained by a reverse sweep over the same tape.
This forward-in-input / reverse-in-parameter split is cheap because the
spatial dimension is 1 or 2 while the parameter count is large.

Each jet component is kept as its own (n, width) array and multiplied by the
layer weights in its own GEMM, so the value and first-derivative components
follow an identical computation path whether or not the second-order
component is requested.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NonFiniteValueError, OrderUnsupportedError
from .features import FeatureMap, map_batch, map_jacobian_batch
from .network import Network, ParameterGradient, ParameterVector, ReLU


@dataclass
class JetValue:
    """Value and requested input derivatives of u at one point."""

    value: float
    d_input: np.ndarray | None
    d2_yy: float | None = None


@dataclass
class JetTape:
    """Saved forward state: layer inputs and pre-activations, per jet component."""

    net: Network
    order: int
    d: int
    n: int
    layer_inputs: list[list[np.ndarray]]
    pre_activations: list[list[np.ndarray] | None]
    outputs: list[np.ndarray]

    @property
    def n_comps(self) -> int:
        return len(self.outputs)

    def values(self) -> np.ndarray:
        return self.outputs[0][:, 0]

    def d_input(self) -> np.ndarray:
        return np.stack([self.outputs[k][:, 0] for k in range(1, self.d + 1)], axis=1)

    def d2_yy(self) -> np.ndarray:
        return self.outputs[self.d + 1][:, 0]


def _validate(net: Network, fmap: FeatureMap, x: np.ndarray, order: int) -> np.ndarray:
    if order not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {order}")
    if order == 2 and not net.activation.second_order_ok:
        raise OrderUnsupportedError(
            f"activation {net.activation.name!r} does not support second derivatives"
        )
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != fmap.input_dim:
        raise DimensionMismatchError(
            f"points have dim {x.shape[1]}, feature map expects {fmap.input_dim}"
        )
    if fmap.output_dim != net.config.input_dim:
        raise DimensionMismatchError(
            f"feature map outputs dim {fmap.output_dim}, network expects {net.config.input_dim}"
        )
    return x


def forward_jets(net: Network, fmap: FeatureMap, x: np.ndarray, order: int) -> JetTape:
    """Propagate value and input-derivative components through net(delta(x))."""
    x = _validate(net, fmap, x, order)
    n, d = x.shape
    act = net.activation

    comps = [map_batch(fmap, x)]
    if order >= 1:
        jac, d2 = map_jacobian_batch(fmap, x)
        comps += [np.ascontiguousarray(jac[:, :, k]) for k in range(d)]
        if order == 2:
            comps.append(d2)

    layer_inputs: list[list[np.ndarray]] = []
    pre_activations: list[list[np.ndarray] | None] = []
    last = net.params.n_layers - 1
    h = comps
    for li, (a, b) in enumerate(zip(net.params.weights, net.params.biases)):
        layer_inputs.append(h)
        pre = [c @ a.T for c in h]
        pre[0] = pre[0] + b
        if li == last:
            pre_activations.append(None)
            h = pre
        else:
            pre_activations.append(pre)
            s1 = act.d1(pre[0])
            out = [act.value(pre[0])]
            if order >= 1:
                out += [s1 * pre[k] for k in range(1, d + 1)]
                if order == 2:
                    ay = pre[d]
                    out.append(act.d2(pre[0]) * ay * ay + s1 * pre[d + 1])
            h = out
    return JetTape(net, order, d, n, layer_inputs, pre_activations, h)


def evaluate_jets(net: Network, fmap: FeatureMap, x: np.ndarray, order: int) -> JetTape:
    """Alias of forward_jets; the tape exposes values / d_input / d2_yy."""
    return forward_jets(net, fmap, x, order)


def evaluate_jet(net: Network, fmap: FeatureMap, x, order: int) -> JetValue:
    """Value and exact input derivatives of net(delta(x)) at a single point."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    tape = forward_jets(net, fmap, x[None, :], order)
    value = float(tape.values()[0])
    d_input = tape.d_input()[0].copy() if order >= 1 else None
    d2 = float(tape.d2_yy()[0]) if order == 2 else None
    return JetValue(value, d_input, d2)


def _add(acc, term):
    return term if acc is None else acc + term


def backprop(tape: JetTape, seeds: list[np.ndarray | None], per_point: bool = False):
    """Reverse sweep: gradient of sum_n sum_c seeds[c][n] * out_c[n] over all parameters.

    seeds has one entry per jet component; None marks a structurally zero
    adjoint (skipped; a zero adjoint stays zero through the whole sweep).
    Returns a flat (n_params,) vector, or an (n, n_params) matrix of per-point
    rows when per_point is True.
    """
    net, order, d, n = tape.net, tape.order, tape.d, tape.n
    act = net.activation
    curvature_free = isinstance(act, ReLU)
    n_comps = tape.n_comps
    if len(seeds) != n_comps:
        raise ValueError(f"expected {n_comps} seed entries, got {len(seeds)}")

    adj: list[np.ndarray | None] = [
        None if s is None else np.asarray(s, dtype=np.float64).reshape(n, 1)
        for s in seeds
    ]
    weights = net.params.weights
    n_layers = net.params.n_layers
    grads_a: list = [None] * n_layers
    grads_b: list = [None] * n_layers

    for li in reversed(range(n_layers)):
        pre = tape.pre_activations[li]
        if pre is not None:
            a0 = pre[0]
            s1 = act.d1(a0)
            s2 = None if curvature_free else act.d2(a0)
            new: list[np.ndarray | None] = [None] * n_comps
            c0 = None if adj[0] is None else adj[0] * s1
            for k in range(1, min(d, n_comps - 1) + 1):
                if adj[k] is None:
                    continue
                new[k] = adj[k] * s1
                if s2 is not None:
                    c0 = _add(c0, adj[k] * (s2 * pre[k]))
            if order == 2 and adj[d + 1] is not None:
                ay, ayy = pre[d], pre[d + 1]
                cyy = adj[d + 1]
                new[d + 1] = cyy * s1
                if s2 is not None:
                    s3 = act.d3(a0)
                    c0 = _add(c0, cyy * (s3 * ay * ay + s2 * ayy))
                    new[d] = _add(new[d], cyy * (2.0 * s2 * ay))
            new[0] = c0
            adj = new

        ins = tape.layer_inputs[li]
        ga = None
        gb = None
        for c in range(n_comps):
            if adj[c] is None:
                continue
            if per_point:
                ga = _add(ga, adj[c][:, :, None] * ins[c][:, None, :])
            else:
                ga = _add(ga, adj[c].T @ ins[c])
        if adj[0] is not None:
            gb = adj[0] if per_point else adj[0].sum(axis=0)
        out_dim, in_dim = weights[li].shape
        if ga is None:
            ga = np.zeros((n, out_dim, in_dim)) if per_point else np.zeros((out_dim, in_dim))
        if gb is None:
            gb = np.zeros((n, out_dim)) if per_point else np.zeros(out_dim)
        grads_a[li] = ga
        grads_b[li] = gb

        a = weights[li]
        adj = [None if adj[c] is None else adj[c] @ a for c in range(n_comps)]

    if per_point:
        parts = []
        for ga, gb in zip(grads_a, grads_b):
            parts.append(ga.reshape(n, -1))
            parts.append(gb)
        return np.concatenate(parts, axis=1)
    return ParameterVector(grads_a, grads_b).to_flat()


_SELECTORS = ("u", "ux", "uy", "uyy")


def _selector_index(selector: str, d: int) -> tuple[int, int]:
    """Map a selector name to (component index, required jet order)."""
    if selector == "u":
        return 0, 0
    if selector == "ux":
        return 1, 1
    if selector == "uy":
        if d < 2:
            raise DimensionMismatchError("selector 'uy' needs a 2D problem")
        return 2, 1
    if selector == "uyy":
        return d + 1, 2
    raise ValueError(f"unknown selector {selector!r}; expected one of {_SELECTORS}")


def parameter_gradient_of(selector: str, net: Network, fmap: FeatureMap, x) -> ParameterGradient:
    """Exact reverse-accumulated gradient of the selected output w.r.t. every parameter.

    The gradient comes back in the layer layout of ParameterVector; flatten it
    with to_flat() for the documented ordering.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    comp, order = _selector_index(selector, fmap.input_dim)
    tape = forward_jets(net, fmap, x[None, :], order)
    if not all(np.all(np.isfinite(o)) for o in tape.outputs):
        raise NonFiniteValueError("network output is not finite at the requested point")
    seeds: list[np.ndarray | None] = [None] * tape.n_comps
    seeds[comp] = np.ones(1)
    flat = backprop(tape, seeds)
    if not np.all(np.isfinite(flat)):
        raise NonFiniteValueError("parameter gradient is not finite")
    return ParameterVector.from_flat(flat, net.params.shapes())


def scalar_loss_gradient(net: Network, fmap: FeatureMap, x: np.ndarray, order: int,
                         seeds: list[np.ndarray | None]) -> tuple[JetTape, np.ndarray]:
    """Gradient of a scalar loss node sum_n sum_c seeds[c][n]*out_c[n]; returns (tape, flat grad)."""
    tape = forward_jets(net, fmap, x, order)
    return tape, backprop(tape, seeds)


def gradient_rows(net: Network, fmap: FeatureMap, x: np.ndarray,
                  selectors: tuple[str, ...] = ("u", "ux")) -> np.ndarray:
    """Per-point parameter-gradient rows, interleaved point-major.

    Row layout for selectors (s1, ..., sk): [s1(x_1), ..., sk(x_1), s1(x_2), ...],
    matching the block layout of the Gram matrix.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    comp_orders = [_selector_index(s, fmap.input_dim) for s in selectors]
    order = max(o for _, o in comp_orders)
    tape = forward_jets(net, fmap, x, order)
    n = tape.n
    rows = np.empty((n * len(selectors), net.params.n_params))
    for j, (comp, _) in enumerate(comp_orders):
        seeds: list[np.ndarray | None] = [None] * tape.n_comps
        seeds[comp] = np.ones(n)
        rows[j::len(selectors), :] = backprop(tape, seeds, per_point=True)
    return rows
