"""Active-set equilibrium oracle against hand-solved quadratic games."""

import numpy as np
import pytest

from nashflow import gnep, oracle

from conftest import (TINY_EQ_LAM, TINY_EQ_W, TINY_INEQ_LAM, TINY_INEQ_MU,
                      TINY_INEQ_W, tiny_equality_game, tiny_inequality_game)


def test_equality_only_solution():
    res = oracle.solve_ve_active_set(tiny_equality_game())
    assert np.allclose(res.w, TINY_EQ_W, atol=1e-12)
    assert np.allclose(res.lam, TINY_EQ_LAM, atol=1e-12)
    assert res.active == ()
    assert res.candidates_tried == 1
    assert res.kkt_residual < 1e-12


def test_active_inequality_solution():
    res = oracle.solve_ve_active_set(tiny_inequality_game())
    assert np.allclose(res.w, TINY_INEQ_W, atol=1e-12)
    assert np.allclose(res.lam, TINY_INEQ_LAM, atol=1e-12)
    assert np.allclose(res.mu, TINY_INEQ_MU, atol=1e-12)
    assert res.active == (("g", 0),)
    # The empty candidate fails feasibility first, so two sets are tried.
    assert res.candidates_tried == 2


def test_inactive_inequality_is_ignored():
    qg = tiny_equality_game()
    loose = oracle.QuadraticGnep(
        agent_dims=qg.agent_dims, q_blocks=qg.q_blocks,
        b_blocks=qg.b_blocks, equality=qg.equality,
        inequality=(np.array([[0.0, 1.0]]), np.array([-10.0])),
    )
    res = oracle.solve_ve_active_set(loose)
    assert np.allclose(res.w, TINY_EQ_W, atol=1e-12)
    assert res.mu[0] == 0.0
    assert res.active == ()


def test_active_box_face():
    # Single agent, f = (w - 3)^2 on [0, 1]: the upper face binds and the
    # face multiplier is -grad f(1) = 4 > 0.
    qg = oracle.QuadraticGnep(
        agent_dims=[1],
        q_blocks=[np.array([[2.0]])],
        b_blocks=[np.array([-6.0])],
        bounds=[(np.array([0.0]), np.array([1.0]))],
    )
    res = oracle.solve_ve_active_set(qg)
    assert np.allclose(res.w, [1.0])
    assert res.active == (("hi", 0),)
    assert res.kkt_residual < 1e-12
    assert res.mu.shape == (0,)


def test_oracle_state_scores_zero_on_problem():
    qg = tiny_inequality_game()
    res = oracle.solve_ve_active_set(qg)
    assert gnep.kkt_residual(qg.to_problem(), res.to_state()) < 1e-12


def test_nonmonotone_game_rejected_at_construction():
    with pytest.raises(oracle.OracleError):
        oracle.QuadraticGnep(
            agent_dims=[1],
            q_blocks=[np.array([[-1.0]])],
            b_blocks=[np.array([0.0])],
        )


def test_definiteness_checked_on_equality_nullspace():
    # Indefinite on R^2 but positive definite on the feasible line
    # w_1 = w_2 (null space of E = [1, -1]); construction must pass.
    qg = oracle.QuadraticGnep(
        agent_dims=[1, 1],
        q_blocks=[np.array([[1.0, 2.0]]), np.array([[2.0, 1.0]])],
        b_blocks=[np.array([-1.0]), np.array([-1.0])],
        equality=(np.array([[1.0, -1.0]]), np.array([0.0])),
    )
    res = oracle.solve_ve_active_set(qg)
    # On the line both gradients read 3w - 1, so w = (1/3, 1/3).
    assert np.allclose(res.w, [1.0 / 3.0, 1.0 / 3.0])


def test_budget_exceeded_raises():
    qg = tiny_inequality_game()
    with pytest.raises(oracle.OracleError, match="budget"):
        oracle.solve_ve_active_set(qg, budget=1)


def test_infeasible_game_raises():
    # Equality w_1 + w_2 = 10 contradicts the boxes [0, 1] x [0, 1].
    qg = oracle.QuadraticGnep(
        agent_dims=[1, 1],
        q_blocks=[np.array([[2.0, 0.0]]), np.array([[0.0, 2.0]])],
        b_blocks=[np.zeros(1), np.zeros(1)],
        equality=(np.array([[1.0, 1.0]]), np.array([-10.0])),
        bounds=[(np.zeros(1), np.ones(1)), (np.zeros(1), np.ones(1))],
    )
    with pytest.raises(oracle.OracleError, match="no feasible"):
        oracle.solve_ve_active_set(qg)


def test_shape_validation():
    with pytest.raises(ValueError):
        oracle.QuadraticGnep(agent_dims=[1],
                             q_blocks=[np.ones((1, 2))],
                             b_blocks=[np.zeros(1)])
    with pytest.raises(ValueError):
        oracle.QuadraticGnep(agent_dims=[1],
                             q_blocks=[np.ones((1, 1))],
                             b_blocks=[np.zeros(1)],
                             bounds=[(np.zeros(2), np.ones(2))])


def test_format_result_mentions_active_rows():
    res = oracle.solve_ve_active_set(tiny_inequality_game())
    text = oracle.format_result(res)
    assert "G[0]" in text
    assert "kkt_residual" in text
    res = oracle.solve_ve_active_set(tiny_equality_game())
    assert "(none)" in oracle.format_result(res)


def test_minimum_cardinality_wins():
    # Redundant duplicate rows: the zero-cardinality interior candidate
    # must be returned, not an equivalent degenerate active one.
    qg = oracle.QuadraticGnep(
        agent_dims=[1],
        q_blocks=[np.array([[2.0]])],
        b_blocks=[np.array([-2.0])],
        inequality=(np.array([[1.0], [1.0]]), np.array([-5.0, -5.0])),
    )
    res = oracle.solve_ve_active_set(qg)
    assert res.active == ()
    assert np.allclose(res.w, [1.0])
    assert res.candidates_tried == 1
