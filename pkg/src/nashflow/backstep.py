"""Backstepping equilibrium tracking for strict-feedback agent chains.

Agent i evolves through a chain of length nbar,

    dx_{i,l}/dt = Gamma_{i,l}(x^{[1..l]}) + Theta_{i,l}(x^{[1..l]}) x_{i,l+1}
    dx_{i,nbar}/dt = Gamma_{i,nbar}(x) + Theta_{i,nbar}(x) u_i ,

where x^{[l]} collects the l-th chain entry of every agent.  A coordinate
change turns the closed loop into the target cascade

    dz_{i,1}/dt = -k_1 grad_{z_{i,1}} L_i + z_{i,2}
    dz_{i,l}/dt = -k_{i,l} z_{i,l} + z_{i,l+1}        (l = 2..nbar-1)
    dz_{i,nbar}/dt = -k_{i,nbar} z_{i,nbar}

whose first layer is the primal-dual equilibrium flow of the game played
in the x^{[1]} variables.  The explicit control law is implemented for
nbar = 2 with exact chain-rule total derivatives; no numerical
differentiation is involved anywhere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import convex, gnep

# Runtime guard: Theta values closer to zero than this abort the run.
THETA_GUARD = 1e-9


class ThetaSingularError(RuntimeError):
    pass


@dataclass
class StrictFeedbackSystem:
    """Chain dynamics data for N agents of uniform length nbar.

    ``gamma(i, ell, x)`` and ``theta(i, ell, x)`` evaluate Gamma_{i,ell}
    and Theta_{i,ell}; ``ell`` is 1-based and ``x`` is the (N, ell) array
    of all chain entries up to layer ell.  For nbar = 2 the exact partial
    derivatives of the first layer with respect to x^{[1]} are required by
    the control law: ``dgamma1(i, x1)`` and ``dtheta1(i, x1)`` each return
    the (N,) gradient row.  Optional ``*_all`` callbacks provide stacked
    fast paths; they must agree with the per-agent ones.
    """

    n_agents: int
    nbar: int
    gamma: Callable[[int, int, np.ndarray], float]
    theta: Callable[[int, int, np.ndarray], float]
    dgamma1: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    dtheta1: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    gamma_all: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    theta_all: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    dgamma1_all: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dtheta1_all: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.n_agents < 1 or self.nbar < 1:
            raise ValueError("need at least one agent and one layer")

    def gamma_vec(self, ell: int, x: np.ndarray) -> np.ndarray:
        if self.gamma_all is not None:
            return np.asarray(self.gamma_all(ell, x), dtype=float)
        return np.array([self.gamma(i, ell, x) for i in range(self.n_agents)])

    def theta_vec(self, ell: int, x: np.ndarray) -> np.ndarray:
        if self.theta_all is not None:
            th = np.asarray(self.theta_all(ell, x), dtype=float)
        else:
            th = np.array([self.theta(i, ell, x)
                           for i in range(self.n_agents)])
        bad = np.abs(th) < THETA_GUARD
        if bad.any():
            raise ThetaSingularError(
                f"Theta_(i,{ell}) within {THETA_GUARD} of zero for agents "
                f"{np.nonzero(bad)[0].tolist()}")
        return th

    def dgamma1_mat(self, x1: np.ndarray) -> np.ndarray:
        if self.dgamma1_all is not None:
            return np.asarray(self.dgamma1_all(x1), dtype=float)
        if self.dgamma1 is None:
            raise ValueError("dgamma1 callback required for nbar = 2 law")
        return np.vstack([self.dgamma1(i, x1) for i in range(self.n_agents)])

    def dtheta1_mat(self, x1: np.ndarray) -> np.ndarray:
        if self.dtheta1_all is not None:
            return np.asarray(self.dtheta1_all(x1), dtype=float)
        if self.dtheta1 is None:
            raise ValueError("dtheta1 callback required for nbar = 2 law")
        return np.vstack([self.dtheta1(i, x1) for i in range(self.n_agents)])


@dataclass
class BacksteppingGains:
    """k_1 for the equilibrium layer, k[i, l-2] = k_{i,l} for l = 2..nbar,
    and the monotonicity estimate the gain condition is checked against."""

    k1: float
    k: np.ndarray
    m_est: float

    def __post_init__(self):
        self.k = np.atleast_2d(np.asarray(self.k, dtype=float))


def validate_gains(gains: BacksteppingGains) -> Optional[str]:
    """None when k_1 m > 1 and every k_{i,l} > 1; else the first violation."""
    if gains.k1 <= 0.0:
        return f"k1 = {gains.k1} is not positive"
    if gains.m_est <= 0.0:
        return f"monotonicity estimate M = {gains.m_est} is not positive"
    prod = gains.k1 * gains.m_est
    if prod <= 1.0:
        return f"k1*M > 1 fails: k1*M = {prod:.6g}"
    for i in range(gains.k.shape[0]):
        for ell in range(gains.k.shape[1]):
            if gains.k[i, ell] <= 1.0:
                return (f"k_i{ell + 2} > 1 fails: agent {i} has "
                        f"k_i{ell + 2} = {gains.k[i, ell]:.6g}")
    return None


@dataclass
class ZState:
    """Transformed coordinates (N, nbar) plus one multiplier copy."""

    z: np.ndarray
    lam: np.ndarray
    mu: np.ndarray

    def copy(self) -> "ZState":
        return ZState(self.z.copy(), self.lam.copy(), self.mu.copy())


def t_product(alpha: int, beta: int, k_i: Sequence[float]) -> float:
    """Sum of all alpha-fold products with repetition from k_i[:beta].

    The complete homogeneous symmetric polynomial of degree alpha in the
    first beta gains of (k_{i,2}, ..., k_{i,nbar}); zero for alpha <= 0 by
    convention.
    """
    if beta < 1 or beta > len(k_i):
        raise ValueError("beta out of range")
    if alpha <= 0:
        return 0.0
    vals = np.asarray(k_i, dtype=float)[:beta]
    total = 0.0
    for combo in itertools.combinations_with_replacement(range(beta), alpha):
        total += float(np.prod(vals[list(combo)]))
    return total


def _first_layer_gradient(problem: gnep.GnepProblem,
                          z1: np.ndarray,
                          lam: np.ndarray,
                          mu: np.ndarray) -> np.ndarray:
    if problem.dim != z1.shape[0]:
        raise ValueError("first-layer game must have one scalar per agent")
    return gnep.stacked_lagrangian_gradient(problem, z1, lam, mu)


def z_step(problem: gnep.GnepProblem,
           gains: BacksteppingGains,
           state: ZState,
           h: float) -> ZState:
    """One Euler step of the target cascade, any nbar >= 1.

    The multiplier update reuses the projected-Euler policy of the
    primal-dual flow at rate k_1, evaluated at the incoming first layer.
    """
    if h <= 0.0:
        raise ValueError("step size must be positive")
    z = state.z
    n, nbar = z.shape
    grad = _first_layer_gradient(problem, z[:, 0], state.lam, state.mu)
    znew = np.empty_like(z)
    drift = -gains.k1 * grad
    if nbar >= 2:
        drift = drift + z[:, 1]
    znew[:, 0] = z[:, 0] + h * drift
    for col in range(1, nbar):
        ell_gain = gains.k[:, col - 1]
        upstream = z[:, col + 1] if col + 1 < nbar else 0.0
        znew[:, col] = z[:, col] + h * (-ell_gain * z[:, col] + upstream)
    lam_new, mu_new = gnep.dual_step(problem, z[:, 0], state.lam, state.mu,
                                     h, gains.k1)
    return ZState(znew, lam_new, mu_new)


def forward_transform_2(problem: gnep.GnepProblem,
                        sys: StrictFeedbackSystem,
                        gains: BacksteppingGains,
                        x: np.ndarray,
                        lam: np.ndarray,
                        mu: np.ndarray) -> ZState:
    """(x, duals) -> z for nbar = 2.

    z_{i,1} = x_{i,1} and
    z_{i,2} = k_1 grad_{z_{i,1}} L_i + Theta_{i,1} x_{i,2} + Gamma_{i,1}.
    """
    if sys.nbar != 2 or x.shape != (sys.n_agents, 2):
        raise ValueError("forward_transform_2 requires nbar = 2 states")
    x1 = x[:, 0]
    grad = _first_layer_gradient(problem, x1, lam, mu)
    x1col = x1.reshape(-1, 1)
    z2 = gains.k1 * grad + sys.theta_vec(1, x1col) * x[:, 1] \
        + sys.gamma_vec(1, x1col)
    return ZState(np.column_stack([x1, z2]), np.asarray(lam, float).copy(),
                  np.asarray(mu, float).copy())


def inverse_transform_2(problem: gnep.GnepProblem,
                        sys: StrictFeedbackSystem,
                        gains: BacksteppingGains,
                        state: ZState) -> np.ndarray:
    """z -> x for nbar = 2; the Theta division is guarded."""
    if sys.nbar != 2 or state.z.shape != (sys.n_agents, 2):
        raise ValueError("inverse_transform_2 requires nbar = 2 states")
    z1 = state.z[:, 0]
    grad = _first_layer_gradient(problem, z1, state.lam, state.mu)
    z1col = z1.reshape(-1, 1)
    theta1 = sys.theta_vec(1, z1col)
    x2 = (state.z[:, 1] - gains.k1 * grad - sys.gamma_vec(1, z1col)) / theta1
    return np.column_stack([z1, x2])


def dual_rates(problem: gnep.GnepProblem,
               x1: np.ndarray,
               mu: np.ndarray,
               k1: float) -> tuple:
    """Continuous-time multiplier velocities (lam_dot, mu_dot) at rate k_1."""
    lam_dot = k1 * problem.eq_value(x1)
    if mu.size:
        orthant = convex.NonnegativeOrthant(mu.shape[0])
        mu_dot = convex.project_vector(orthant, mu,
                                       k1 * problem.ineq_value(x1))
    else:
        mu_dot = np.zeros(0)
    return lam_dot, mu_dot


def control_law_nonlinear_2(problem: gnep.GnepProblem,
                            sys: StrictFeedbackSystem,
                            gains: BacksteppingGains,
                            x: np.ndarray,
                            lam: np.ndarray,
                            mu: np.ndarray) -> np.ndarray:
    """Tracking law for nbar = 2 chains, exact total derivatives.

    u_i = -(1/(Theta_{i,1} Theta_{i,2})) [ k_{i,2} z_{i,2}
          + d/dt(k_1 grad_{z_{i,1}} L_i + Gamma_{i,1})
          + x_{i,2} d/dt Theta_{i,1} + Theta_{i,1} Gamma_{i,2} ]

    The total derivatives expand through the chain rule along the actual
    closed-loop velocities: dx^{[1]}/dt from the plant, multiplier rates
    from the projected dual flow, and the game's second-derivative action
    for the moving gradient.
    """
    if problem.hessian_action is None:
        raise ValueError("control law needs the game's hessian_action")
    x1 = x[:, 0]
    x2 = x[:, 1]
    x1col = x1.reshape(-1, 1)
    gamma1 = sys.gamma_vec(1, x1col)
    theta1 = sys.theta_vec(1, x1col)
    gamma2 = sys.gamma_vec(2, x)
    theta2 = sys.theta_vec(2, x)

    grad = _first_layer_gradient(problem, x1, lam, mu)
    z2 = gains.k1 * grad + theta1 * x2 + gamma1
    x1_dot = gamma1 + theta1 * x2
    lam_dot, mu_dot = dual_rates(problem, x1, mu, gains.k1)

    dgrad = problem.hessian_action(x1, lam, mu, x1_dot)
    if problem.equality is not None:
        dgrad = dgrad + problem.equality[0].T @ lam_dot
    if problem.ineq_value is not None and mu.size:
        dgrad = dgrad + problem.ineq_jacobian(x1).T @ mu_dot
    dgamma1 = sys.dgamma1_mat(x1) @ x1_dot
    dtheta1 = sys.dtheta1_mat(x1) @ x1_dot

    k2 = gains.k[:, 0]
    bracket = k2 * z2 + gains.k1 * dgrad + dgamma1 + x2 * dtheta1 \
        + theta1 * gamma2
    return -bracket / (theta1 * theta2)


def steady_state_manifold(sys: StrictFeedbackSystem,
                          x1: np.ndarray) -> tuple:
    """Chain tail and input holding the first layer at x1.

    Layer by layer, x_{i,l+1} = -Gamma_{i,l}/Theta_{i,l} evaluated on the
    values already fixed, and u_i = -Gamma_{i,nbar}/Theta_{i,nbar}.
    """
    x1 = np.asarray(x1, dtype=float)
    x = np.empty((sys.n_agents, sys.nbar))
    x[:, 0] = x1
    for ell in range(1, sys.nbar):
        head = x[:, :ell]
        x[:, ell] = -sys.gamma_vec(ell, head) / sys.theta_vec(ell, head)
    u = -sys.gamma_vec(sys.nbar, x) / sys.theta_vec(sys.nbar, x)
    return x, u
