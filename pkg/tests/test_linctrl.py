"""Canonical forms, pole placement, scaling identities, coupling bounds,
and the assembled per-agent controller design."""

import numpy as np
import pytest

from nashflow import graph, linctrl, oracle, scenarios


def test_companion_layout():
    M = linctrl.companion(np.array([2.0, 3.0]))
    assert np.array_equal(M, [[0.0, 1.0], [-2.0, -3.0]])
    assert np.array_equal(linctrl.shift_matrix(3),
                          [[0, 1, 0], [0, 0, 1], [0, 0, 0]])


def test_ctrb():
    A = np.array([[1.0, 1.0], [0.0, 2.0]])
    b = np.array([1.0, 1.0])
    assert np.array_equal(linctrl.ctrb(A, b),
                          [[1.0, 2.0], [1.0, 2.0]])


def test_canonical_transform_of_companion_is_identity():
    a = np.array([2.0, 3.0])
    A = linctrl.companion(a)
    T, a_out = linctrl.to_controllable_canonical(A, np.array([0.0, 1.0]))
    assert np.allclose(T, np.eye(2), atol=1e-12)
    assert np.allclose(a_out, a, atol=1e-12)


def test_canonical_transform_random_systems():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        A = rng.standard_normal((n, n))
        B = rng.standard_normal(n)
        sv = np.linalg.svd(linctrl.ctrb(A, B), compute_uv=False)
        if sv[-1] / sv[0] < 1e-6:
            continue
        T, a = linctrl.to_controllable_canonical(A, B)
        T_inv = np.linalg.inv(T)
        assert np.abs(T @ A @ T_inv - linctrl.companion(a)).max() < 1e-8
        assert np.abs(T @ B - np.eye(n)[:, -1]).max() < 1e-8


def test_uncontrollable_pair_rejected():
    with pytest.raises(linctrl.NotControllableError):
        linctrl.to_controllable_canonical(np.eye(2),
                                          np.array([1.0, 0.0]))


def test_stabilizer_coefficients():
    # (s + 1)^4 = s^4 + 4 s^3 + 6 s^2 + 4 s + 1.
    assert np.array_equal(linctrl.design_stabilizer(4, -1.0),
                          [-1.0, -4.0, -6.0, -4.0])
    assert np.array_equal(linctrl.design_stabilizer(1, -2.0), [-2.0])
    with pytest.raises(ValueError):
        linctrl.design_stabilizer(2, 0.0)


def test_lyapunov_solutions_by_hand():
    # Scalar: 2 P (-1) = -1 so P = 1/2.
    P = linctrl.solve_lyapunov(np.array([[-1.0]]))
    assert np.allclose(P, [[0.5]])
    # n = 2, both poles at -1: P = [[1.5, 0.5], [0.5, 0.5]].
    A_cl = linctrl.shift_matrix(2)
    A_cl[-1, :] += linctrl.design_stabilizer(2, -1.0)
    P = linctrl.solve_lyapunov(A_cl)
    assert np.allclose(P, [[1.5, 0.5], [0.5, 0.5]], atol=1e-12)


def test_lyapunov_rejects_unstable():
    with pytest.raises(linctrl.LyapunovError):
        linctrl.solve_lyapunov(np.array([[1.0]]))


def test_scale_matrix_identities():
    rng = np.random.default_rng(5)
    for n in (1, 2, 3, 4, 6):
        for eps in rng.uniform(1e-4, 1.0, size=4):
            S = linctrl.scale_matrix(eps, n)
            Ahat = linctrl.shift_matrix(n)
            Bhat = np.eye(n)[:, -1]
            assert np.allclose(S @ Bhat, eps ** (n - 1) * Bhat,
                               rtol=1e-15, atol=0.0)
            assert np.allclose(eps * (S @ Ahat), Ahat @ S,
                               rtol=1e-14, atol=1e-300)


def test_scale_matrix_bar_cancels_gain_growth():
    eps = 0.1
    K0 = np.array([-1.0, -2.0])
    agent = linctrl.AgentCanonical(2, np.eye(2), np.eye(2),
                                   np.zeros(2), K0, np.eye(2), 1.0)
    # K(eps) = K0 diag(eps^{-1}, 1) / eps = [-100, -20] at eps = 0.1.
    assert np.allclose(agent.gain(eps), [-100.0, -20.0])


def test_certify_sigma_triangular_path():
    blk = np.array([[0.0, 0.0], [3.0, 1.0]])
    sigma, modes = linctrl.certify_sigma({(0, 1): blk, (1, 0): 2.0 * blk},
                                         [2, 2])
    assert modes == ["triangular", "triangular"]
    assert np.isclose(sigma[0], 1.01 * 3.0)  # max column sum of blk
    assert np.isclose(sigma[1], 1.01 * 6.0)


def test_certify_sigma_zero_coupling_floor():
    sigma, modes = linctrl.certify_sigma({}, [2, 2])
    assert modes == ["zero", "zero"]
    assert (sigma > 0.0).all()


def test_certify_sigma_unbounded_growth_rejected():
    # Any above-diagonal entry scales like a negative power of eps, so no
    # finite bound exists and the grid fallback must refuse to certify.
    for blk in (np.array([[0.0, 1.0], [0.0, 0.0]]),
                np.array([[1.0, 0.5], [1.0, 1.0]])):
        with pytest.raises(linctrl.SigmaCertificationError):
            linctrl.certify_sigma({(0, 1): blk}, [2, 2])


def test_choose_epsilon_formula():
    P0 = np.array([[1.5, 0.5], [0.5, 0.5]])  # 1-norm 2.0
    eps = linctrl.choose_epsilon([2.0, 1.0], [P0, P0], n_total=4,
                                 n_agents=2, margin=1.0)
    assert np.isclose(eps, 1.0 / (2.0 * 2.0 * 1.0 * 4.0 + 3.0))
    # A single agent has no couplings to dominate: eps = 1/(2 + margin).
    eps = linctrl.choose_epsilon([2.0], [P0], n_total=2, n_agents=1,
                                 margin=1.0)
    assert np.isclose(eps, 1.0 / 3.0)
    with pytest.raises(ValueError):
        linctrl.choose_epsilon([1.0], [P0], 2, 1, margin=-0.5)


def test_agree_epsilon_matches_central_rule():
    comm = graph.path_graph(3)
    P0 = np.array([[1.5, 0.5], [0.5, 0.5]])
    sigma = [1.0, 3.0, 2.0]
    eps, res = linctrl.agree_epsilon(comm, sigma, [P0] * 3, n_total=6)
    assert res.rounds == comm.diameter()
    assert np.all(eps == eps[0])
    worst = 1.01 * 3.0 * 2.0
    expected = 1.0 / (2.0 * np.sqrt(6.0) * 2.0 * worst + 3.0)
    assert np.allclose(eps, expected)


def test_control_law_scalar_example():
    agent = linctrl.AgentCanonical(1, np.array([[2.0]]), np.array([[0.5]]),
                                   np.array([3.0]), np.array([-1.0]),
                                   np.array([[0.5]]), 1.0)
    # u = (K(eps) + a) T (x - xbar) + ubar with K(0.5) = -2:
    # (-2 + 3) * 2 * 0.7 + 1 = 2.4.
    u = linctrl.control_law_linear(agent, 0.5, np.array([1.0]),
                                   np.array([0.3]), 1.0)
    assert np.isclose(u, 2.4)


def test_design_controllers_on_opf(opf3):
    canon = linctrl.design_controllers(opf3.net, comm=opf3.comm,
                                       transforms=opf3.transforms)
    assert len(canon.agents) == 3
    assert canon.sigma_modes == ["triangular"] * 3
    assert 0.0 < canon.epsilon < 1.0
    assert np.all(canon.eps_per_agent == canon.epsilon)
    assert canon.consensus is not None
    assert canon.consensus.rounds == opf3.comm.diameter()
    for i, agent in enumerate(canon.agents):
        A_ii = opf3.net.a_blocks[(i, i)]
        B_i = opf3.net.b_blocks[i]
        n = agent.n
        comp = linctrl.companion(agent.a)
        assert np.abs(agent.T @ A_ii @ agent.T_inv - comp).max() < 1e-10
        assert np.abs(agent.T @ B_i - np.eye(n)[:, -1]).max() < 1e-10
        A_cl = linctrl.shift_matrix(n)
        A_cl[-1, :] += agent.K0
        assert np.abs(agent.P0 @ A_cl + A_cl.T @ agent.P0
                      + np.eye(n)).max() < 1e-10
        assert agent.sigma > 0.0


def test_closed_form_transforms_match_computed(opf3):
    with_closed = linctrl.design_controllers(opf3.net,
                                             transforms=opf3.transforms)
    computed = linctrl.design_controllers(opf3.net)
    for a, b in zip(with_closed.agents, computed.agents):
        assert np.abs(a.T - b.T).max() < 1e-8
        assert np.abs(a.a - b.a).max() < 1e-8


def test_design_rejects_wrong_transform(opf3):
    bad = [(np.eye(4), np.zeros(4))] * 3
    with pytest.raises(ValueError, match="canonical"):
        linctrl.design_controllers(opf3.net, transforms=bad)


def test_steady_state_residual_at_oracle_targets(opf3, opf3_oracle):
    xbar, ubar = opf3.decision_to_aux(opf3_oracle.w)
    assert linctrl.steady_state_residual(opf3.net, xbar, ubar) < 1e-10


def test_network_assembly(opf3):
    A, B = opf3.net.assemble()
    assert A.shape == (12, 12)
    assert B.shape == (12, 3)
    # Diagonal blocks land on the diagonal, couplings off it.
    assert np.array_equal(A[:4, :4], opf3.net.a_blocks[(0, 0)])
    assert np.array_equal(A[:4, 4:8], opf3.net.a_blocks[(0, 1)])
    assert np.array_equal(A[:4, 8:], np.zeros((4, 4)))
    assert np.array_equal(B[4:8, 1], opf3.net.b_blocks[1].ravel())
