import numpy as np
import pytest

from ritzff.errors import EmptyBatchError, MissingSecondDerivativeError, OrderUnsupportedError
from ritzff.features import identity_map
from ritzff.network import NetworkConfig, init_network
from ritzff.problems import (
    boundary_penalty_oracle,
    convex_surrogate,
    dw1d_strong_form_residual,
    euler_lagrange_residual_dw1d,
    hat_field,
    lagrangian,
    lagrangian_partials,
    make_problem,
    oracle_energy,
    penalized_loss_estimate,
    sawtooth_field,
    sawtooth_sheet_field,
    zero_field,
)

from conftest import exact_hat_net, single_affine_net, zero_output_net

ALL_PROBLEMS = [
    make_problem("dw1d"),
    make_problem("dw1d-lower"),
    make_problem("twin2d"),
    make_problem("twin2d-reg", eps=0.1 / 4.0),
]


def _random_state(prob, rng):
    x = rng.random((1, prob.dimension))
    u = rng.standard_normal()
    grad = rng.standard_normal(prob.dimension)
    u_yy = rng.standard_normal() if prob.derivative_order == 2 else None
    return x[0], u, grad, u_yy


def test_dw1d_density_values():
    prob = make_problem("dw1d")
    assert lagrangian(prob, 0.3, 0.0, [1.0]) == 0.0
    assert lagrangian(prob, 0.3, 0.0, [0.0]) == 1.0


def test_twin2d_reg_density_value():
    prob = make_problem("twin2d-reg", eps=0.1 / 4.0)
    w = lagrangian(prob, [0.5, 0.5], 0.0, [0.0, 1.0], u_yy=4.0)
    assert w == pytest.approx((0.1 / 4.0) ** 2 * 16.0, rel=1e-15)
    assert w == pytest.approx(0.01, rel=1e-12)


def test_partials_closed_form_values():
    dw = make_problem("dw1d")
    du, dg, duyy = lagrangian_partials(dw, 0.1, 0.0, [1.0])
    assert du == 0.0 and dg[0] == 0.0 and duyy is None
    lower = make_problem("dw1d-lower")
    du, _, _ = lagrangian_partials(lower, 0.1, 0.5, [0.3])
    assert du == pytest.approx(1.0, abs=0)


@pytest.mark.parametrize("prob", ALL_PROBLEMS, ids=lambda p: p.id)
def test_partials_match_finite_differences(prob, rng):
    h = 1e-6
    for _ in range(10):
        x, u, grad, u_yy = _random_state(prob, rng)
        du, dgrad, duyy = lagrangian_partials(prob, x, u, grad, u_yy)
        fd_u = (lagrangian(prob, x, u + h, grad, u_yy) - lagrangian(prob, x, u - h, grad, u_yy)) / (2 * h)
        assert abs(du - fd_u) < 1e-7 * max(1.0, abs(du))
        for k in range(prob.dimension):
            dp = np.zeros(prob.dimension)
            dp[k] = h
            fd = (lagrangian(prob, x, u, grad + dp, u_yy) - lagrangian(prob, x, u, grad - dp, u_yy)) / (2 * h)
            assert abs(dgrad[k] - fd) < 1e-6 * max(1.0, abs(dgrad[k]))
        if u_yy is not None:
            fd = (lagrangian(prob, x, u, grad, u_yy + h) - lagrangian(prob, x, u, grad, u_yy - h)) / (2 * h)
            assert abs(duyy - fd) < 1e-7 * max(1.0, abs(duyy))


@pytest.mark.parametrize("prob", ALL_PROBLEMS, ids=lambda p: p.id)
def test_density_is_nonnegative(prob, rng):
    for _ in range(200):
        x, u, grad, u_yy = _random_state(prob, rng)
        assert lagrangian(prob, x, u, grad, u_yy) >= 0.0


def test_second_derivative_bookkeeping():
    reg = make_problem("twin2d-reg", eps=0.1)
    with pytest.raises(MissingSecondDerivativeError):
        lagrangian(reg, [0.5, 0.5], 0.0, [0.0, 1.0])
    plain = make_problem("twin2d")
    with pytest.raises(ValueError):
        lagrangian(plain, [0.5, 0.5], 0.0, [0.0, 1.0], u_yy=1.0)


def test_penalized_loss_zero_network_is_one():
    prob = make_problem("dw1d")
    net = zero_output_net()
    interior = np.linspace(0.1, 0.9, 17)[:, None]
    boundary = np.array([[0.0], [1.0]])
    assert penalized_loss_estimate(prob, net, identity_map(1), interior, boundary) == 1.0


def test_penalized_loss_boundary_term_arithmetic(rng):
    # shifted hat: interior density is exactly zero, u = 0.1 at both endpoints,
    # so the loss is lam * 0.01 = 5.
    prob = make_problem("dw1d", lam=500.0)
    net = exact_hat_net(offset=0.1)
    interior = rng.random((64, 1))
    boundary = np.array([[0.0], [1.0]])
    loss = penalized_loss_estimate(prob, net, identity_map(1), interior, boundary)
    assert loss == pytest.approx(5.0, rel=1e-12)


def test_penalized_loss_empty_batch():
    prob = make_problem("dw1d")
    net = zero_output_net()
    with pytest.raises(EmptyBatchError):
        penalized_loss_estimate(prob, net, identity_map(1), np.zeros((0, 1)), np.array([[0.0]]))


def test_monte_carlo_agrees_with_quadrature():
    prob = make_problem("dw1d")
    config = NetworkConfig(input_dim=1, hidden_layers=3, width=16, activation="smoothsqrt")
    net = init_network(config, seed=5)
    fmap = identity_map(1)
    from ritzff import engine

    grid = np.linspace(0.0, 1.0, 10_001)[:, None]
    tape = engine.forward_jets(net, fmap, grid, 1)
    w_grid = prob.density(grid, tape.values(), tape.d_input(), None)
    quad = np.trapezoid(w_grid, grid[:, 0])

    rng = np.random.default_rng(77)
    mc_points = rng.random((1_000_000, 1))
    tape = engine.forward_jets(net, fmap, mc_points, 1)
    w_mc = prob.density(mc_points, tape.values(), tape.d_input(), None)
    se = np.std(w_mc, ddof=1) / np.sqrt(w_mc.size)
    assert abs(np.mean(w_mc) - quad) < 3.0 * se


def test_oracle_energy_hat_function_is_zero():
    prob = make_problem("dw1d")
    for resolution in (64, 128, 256, 512, 1024):
        assert oracle_energy(prob, hat_field(), resolution) < 1e-12


def test_oracle_energy_zero_field_is_one():
    prob = make_problem("dw1d")
    assert oracle_energy(prob, zero_field(1), 513) == pytest.approx(1.0, abs=0)


def test_oracle_energy_sawtooth_closed_form():
    # (u_x^2-1)^2 vanishes; integral of u^2 for a k-tooth wave of amplitude
    # 1/(2k) is 1/(12 k^2)
    prob = make_problem("dw1d-lower")
    for k in (2, 4, 8):
        expected = 1.0 / (12.0 * k * k)
        got = oracle_energy(prob, sawtooth_field(k), 4097)
        # trapezoid bias on the piecewise-quadratic u^2 is 2 k^2 h^2 relative
        assert got == pytest.approx(expected, rel=1e-5)
    assert oracle_energy(prob, sawtooth_field(4), 4097) == pytest.approx(0.005208333, rel=1e-5)


def test_twin2d_sawtooth_family_cannot_satisfy_both_terms():
    # interior energy vanishes but the boundary penalty cannot
    prob = make_problem("twin2d")
    for k in (1, 2, 4, 8):
        field = sawtooth_sheet_field(k)
        assert oracle_energy(prob, field, 257) < 1e-10
        assert boundary_penalty_oracle(prob, field, 1025) > 0.0


def test_boundary_penalty_oracle_1d():
    prob = make_problem("dw1d", lam=500.0)
    assert boundary_penalty_oracle(prob, zero_field(1)) == 0.0
    assert boundary_penalty_oracle(prob, hat_field()) == 0.0


def test_strong_form_residual_of_zero_solution():
    net = zero_output_net(activation="smoothsqrt")
    fmap = identity_map(1)
    for x in np.linspace(0.0, 1.0, 100):
        assert euler_lagrange_residual_dw1d(net, fmap, [x]) == 0.0
    # yet the energy of u = 0 is exactly 1
    prob = make_problem("dw1d")
    assert oracle_energy(prob, zero_field(1), 101) == 1.0


def test_strong_form_residual_on_slope_one_ansatz():
    net = single_affine_net(a=1.0, b=0.0, activation="smoothsqrt")
    assert euler_lagrange_residual_dw1d(net, identity_map(1), [0.3]) == 0.0


def test_strong_form_residual_closed_form_vs_finite_difference():
    # u = x(1-x): u_x = 1-2x, u_xx = -2; residual at 0.25 is -2(3*0.25-1) = 0.5
    def ux(x):
        return 1.0 - 2.0 * x

    assert dw1d_strong_form_residual(ux(0.25), -2.0) == pytest.approx(0.5, abs=0)
    h = 1e-6

    def flux(x):
        return ux(x) * (ux(x) ** 2 - 1.0)

    fd = (flux(0.25 + h) - flux(0.25 - h)) / (2 * h)
    assert dw1d_strong_form_residual(ux(0.25), -2.0) == pytest.approx(fd, rel=1e-9)


def test_strong_form_residual_needs_smooth_activation():
    net = init_network(NetworkConfig(input_dim=1, hidden_layers=1, width=4, activation="relu"), 0)
    with pytest.raises(OrderUnsupportedError):
        euler_lagrange_residual_dw1d(net, identity_map(1), [0.5])


def test_convex_surrogate_density():
    prob = convex_surrogate()
    assert lagrangian(prob, 0.25, 1.0, [0.0]) == 0.0
    du, dg, _ = lagrangian_partials(prob, 0.25, 0.0, [0.0])
    assert du == pytest.approx(-2.0, rel=1e-15)
    assert dg[0] == 0.0


def test_make_problem_validation():
    with pytest.raises(ValueError):
        make_problem("poisson")
    with pytest.raises(ValueError):
        make_problem("dw1d", lam=0.0)
    with pytest.raises(ValueError):
        make_problem("twin2d-reg", eps=-0.1)
