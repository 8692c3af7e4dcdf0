"""Strict-feedback chains: gains, transforms, the cascade step, and the
tracking control law."""

import numpy as np
import pytest

from nashflow import backstep, convex, gnep


def scalar_game():
    # One agent, f = w^2 / 2, no shared constraints.
    return gnep.GnepProblem(
        agent_dims=[1],
        objective_grad=lambda i, w: np.array([w[0]]),
        local_sets=[convex.AllSpace(1)],
        objective_grad_all=lambda w: w.copy(),
        hessian_action=lambda w, lam, mu, d: d.copy(),
    )


def linear_chain(n=1):
    """Gamma_1 = 0, Theta_1 = 1, Gamma_2 = 0, Theta_2 = 1."""
    return backstep.StrictFeedbackSystem(
        n_agents=n, nbar=2,
        gamma=lambda i, ell, x: 0.0,
        theta=lambda i, ell, x: 1.0,
        dgamma1=lambda i, x1: np.zeros(n),
        dtheta1=lambda i, x1: np.zeros(n),
    )


def default_gains(n=1):
    return backstep.BacksteppingGains(k1=2.0, k=np.full((n, 1), 3.0),
                                      m_est=1.0)


def test_t_product_values():
    k = [2.0, 3.0]
    assert backstep.t_product(1, 1, k) == 2.0
    assert backstep.t_product(1, 2, k) == 5.0
    # Degree-2 products with repetition from {2, 3}: 4 + 6 + 9.
    assert backstep.t_product(2, 2, k) == 19.0
    assert backstep.t_product(0, 1, k) == 0.0
    assert backstep.t_product(-3, 1, k) == 0.0
    with pytest.raises(ValueError):
        backstep.t_product(1, 3, k)


def test_validate_gains_messages():
    ok = backstep.BacksteppingGains(k1=0.1, k=[[1.2]], m_est=40.0)
    assert backstep.validate_gains(ok) is None
    low_k = backstep.BacksteppingGains(k1=0.1, k=[[1.0]], m_est=40.0)
    assert "k_i2 > 1 fails" in backstep.validate_gains(low_k)
    low_k1 = backstep.BacksteppingGains(k1=0.01, k=[[1.2]], m_est=40.0)
    assert "k1*M > 1 fails" in backstep.validate_gains(low_k1)
    assert "not positive" in backstep.validate_gains(
        backstep.BacksteppingGains(k1=-1.0, k=[[1.2]], m_est=40.0))
    assert "not positive" in backstep.validate_gains(
        backstep.BacksteppingGains(k1=0.1, k=[[1.2]], m_est=0.0))


def test_zstate_copy_is_deep():
    s = backstep.ZState(np.zeros((1, 2)), np.zeros(1), np.zeros(1))
    c = s.copy()
    c.z[0, 0] = 5.0
    assert s.z[0, 0] == 0.0


def test_z_step_hand_values():
    problem = scalar_game()
    gains = default_gains()
    state = backstep.ZState(np.array([[1.0, 4.0]]), np.zeros(0),
                            np.zeros(0))
    new = backstep.z_step(problem, gains, state, h=0.01)
    # z1' = z1 + h(-k1 z1 + z2) = 1 + 0.01(-2 + 4); z2' = z2 - h k2 z2.
    assert np.isclose(new.z[0, 0], 1.02)
    assert np.isclose(new.z[0, 1], 4.0 - 0.01 * 12.0)
    with pytest.raises(ValueError):
        backstep.z_step(problem, gains, state, h=0.0)


def test_forward_inverse_round_trip():
    problem = scalar_game()
    sys = linear_chain()
    gains = default_gains()
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = rng.standard_normal((1, 2))
        z = backstep.forward_transform_2(problem, sys, gains, x,
                                         np.zeros(0), np.zeros(0))
        back = backstep.inverse_transform_2(problem, sys, gains, z)
        assert np.abs(back - x).max() < 1e-12
    # For this chain z2 = k1 w + x2 exactly.
    x = np.array([[0.5, 1.5]])
    z = backstep.forward_transform_2(problem, sys, gains, x, np.zeros(0),
                                     np.zeros(0))
    assert np.isclose(z.z[0, 1], 2.0 * 0.5 + 1.5)


def test_transform_shape_validation():
    problem = scalar_game()
    sys = linear_chain()
    gains = default_gains()
    with pytest.raises(ValueError):
        backstep.forward_transform_2(problem, sys, gains,
                                     np.zeros((2, 2)), np.zeros(0),
                                     np.zeros(0))


def test_dual_rates_projection():
    problem = gnep.GnepProblem(
        agent_dims=[1],
        objective_grad=lambda i, w: w.copy(),
        local_sets=[convex.AllSpace(1)],
        equality=(np.array([[1.0]]), np.array([-1.0])),
        ineq_value=lambda w: np.array([w[0] - 2.0]),
        ineq_jacobian=lambda w: np.array([[1.0]]),
    )
    x1 = np.array([3.0])
    lam_dot, mu_dot = backstep.dual_rates(problem, x1, np.zeros(1), 0.5)
    assert np.isclose(lam_dot[0], 0.5 * 2.0)
    assert np.isclose(mu_dot[0], 0.5 * 1.0)  # G > 0 pushes mu upward
    # At mu = 0 with G < 0 the projected rate is zero, not negative.
    lam_dot, mu_dot = backstep.dual_rates(problem, np.array([0.0]),
                                          np.zeros(1), 0.5)
    assert mu_dot[0] == 0.0


def test_control_law_on_linear_chain():
    problem = scalar_game()
    sys = linear_chain()
    gains = default_gains()
    x = np.array([[1.0, 4.0]])
    u = backstep.control_law_nonlinear_2(problem, sys, gains, x,
                                         np.zeros(0), np.zeros(0))
    # z2 = k1 x1 + x2 = 6, x1_dot = x2 = 4, and the only derivative term
    # is k1 * dgrad = k1 * x1_dot: u = -(k2 z2 + k1 x1_dot) = -26.
    assert np.isclose(u[0], -(3.0 * 6.0 + 2.0 * 4.0))


def test_control_law_requires_hessian_action():
    problem = gnep.GnepProblem(
        agent_dims=[1],
        objective_grad=lambda i, w: w.copy(),
        local_sets=[convex.AllSpace(1)],
    )
    with pytest.raises(ValueError, match="hessian_action"):
        backstep.control_law_nonlinear_2(problem, linear_chain(),
                                         default_gains(),
                                         np.zeros((1, 2)), np.zeros(0),
                                         np.zeros(0))


def test_closed_loop_cancels_to_cascade():
    # One Euler step of the plant under the tracking law must move z2 the
    # way the target cascade does, up to O(h^2).
    problem = scalar_game()
    sys = linear_chain()
    gains = default_gains()
    x = np.array([[0.7, -1.3]])
    h = 1e-5
    u = backstep.control_law_nonlinear_2(problem, sys, gains, x,
                                         np.zeros(0), np.zeros(0))
    z0 = backstep.forward_transform_2(problem, sys, gains, x, np.zeros(0),
                                      np.zeros(0))
    x_next = np.array([[x[0, 0] + h * x[0, 1], x[0, 1] + h * u[0]]])
    z1 = backstep.forward_transform_2(problem, sys, gains, x_next,
                                      np.zeros(0), np.zeros(0))
    fd = (z1.z[0, 1] - z0.z[0, 1]) / h
    assert abs(fd - (-gains.k[0, 0] * z0.z[0, 1])) < 1e-3


def test_steady_state_manifold_stacks_layers():
    n = 3
    sys = backstep.StrictFeedbackSystem(
        n_agents=n, nbar=2,
        gamma=lambda i, ell, x: (-x[i, 0] if ell == 1
                                 else 2.0 * x[i, 1]),
        theta=lambda i, ell, x: 1.0 if ell == 1 else 4.0,
    )
    x1 = np.array([1.0, -2.0, 0.5])
    x, u = backstep.steady_state_manifold(sys, x1)
    assert np.allclose(x[:, 1], x1)         # x2 = -(-x1)/1
    assert np.allclose(u, -2.0 * x1 / 4.0)  # u = -(2 x2)/4


def test_theta_guard_trips():
    sys = backstep.StrictFeedbackSystem(
        n_agents=1, nbar=2,
        gamma=lambda i, ell, x: 0.0,
        theta=lambda i, ell, x: 0.0,
    )
    with pytest.raises(backstep.ThetaSingularError):
        sys.theta_vec(1, np.zeros((1, 1)))


def test_thermal_manifold_and_law_agree_at_equilibrium(thermal10,
                                                       thermal10_oracle):
    res = thermal10_oracle
    xstar, ustar = backstep.steady_state_manifold(thermal10.sys, res.w)
    # The steady air temperature equals the mass temperature, and the
    # closed-form input matches the manifold input.
    assert np.allclose(xstar[:, 1], res.w)
    assert np.allclose(ustar, thermal10.manifold_input(res.w))
    # At the equilibrium every derivative term vanishes, so the tracking
    # law reduces to the steady input.
    # The 1/(Theta_1 Theta_2) factor amplifies the oracle's ~1e-13
    # stationarity residual by ~2.6e8, hence the loose-looking bound.
    u = backstep.control_law_nonlinear_2(thermal10.problem, thermal10.sys,
                                         thermal10.gains, xstar, res.lam,
                                         res.mu)
    assert np.abs(u - ustar).max() < 1e-4


def test_thermal_round_trip(thermal10, thermal10_oracle):
    rng = np.random.default_rng(8)
    gains = thermal10.gains
    for _ in range(10):
        x = 21.0 + 0.5 * rng.standard_normal((10, 2))
        # The game has no equality rows; mu enters through the gradient.
        z = backstep.forward_transform_2(thermal10.problem, thermal10.sys,
                                         gains, x, np.zeros(0),
                                         np.abs(rng.standard_normal(40)))
        back = backstep.inverse_transform_2(thermal10.problem,
                                            thermal10.sys, gains, z)
        assert np.abs(back - x).max() < 1e-8
