"""Generalized Nash games with shared affine-equality and convex-inequality
constraints, and the projected primal-dual gradient flow that seeks their
variational equilibrium.

A problem couples N agents.  Agent i controls the block w_i of the stacked
decision w and minimizes f_i(w_i, w_-i) subject to the shared constraints
H(w) = 0, G(w) <= 0 and its local set W_i.  The flow integrates

    dw_i/dt = Pi_{W_i}(w_i, -k grad_{w_i} L_i(w, lam, mu))
    dlam/dt = k H(w)
    dmu/dt  = Pi_{R+}(mu, k G(w))

with L_i = f_i + lam' H + mu' G, discretized by a projected forward Euler
step.  One logical copy of (lam, mu) is kept; distributed bookkeeping of
the duals is an implementation concern of the enclosing scenario, not of
this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import convex


@dataclass
class GnepProblem:
    """Data of one generalized Nash game.

    Parameters
    ----------
    agent_dims : sequence of int
        Block length r_i of each agent's decision.
    objective_grad : callable ``(i, w) -> (r_i,)``
        Gradient of f_i with respect to w_i at the stacked point w.
    local_sets : sequence of convex sets, one per agent
        W_i; dimensions must match ``agent_dims``.
    equality : optional ``(E, e)``
        Affine shared equalities H(w) = E w + e = 0, E of shape (m, r).
    ineq_value : optional callable ``w -> (l,)``
        Shared inequality values G(w).
    ineq_jacobian : optional callable ``w -> (l, r)``
        Dense Jacobian of G at w.  Required whenever ``ineq_value`` is set.
    objective_value : optional callable ``(i, w) -> float``
        Objective values, used only for diagnostics.
    objective_grad_all : optional callable ``w -> (r,)``
        Stacked pseudo-gradient fast path.  Must agree with the per-agent
        callback; hot loops prefer it when present.
    hessian_action : optional callable ``(w, lam, mu, direction) -> (r,)``
        Directional derivative (duals held fixed) of the stacked map
        w -> (grad_{w_i} L_i)_i, used by downstream total-derivative
        assemblies.
    """

    agent_dims: Sequence[int]
    objective_grad: Callable[[int, np.ndarray], np.ndarray]
    local_sets: Sequence[object]
    equality: Optional[tuple] = None
    ineq_value: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ineq_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    objective_value: Optional[Callable[[int, np.ndarray], float]] = None
    objective_grad_all: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian_action: Optional[Callable] = None

    def __post_init__(self):
        self.agent_dims = [int(d) for d in self.agent_dims]
        if not self.agent_dims or min(self.agent_dims) < 1:
            raise ValueError("agent_dims must be positive")
        if len(self.local_sets) != len(self.agent_dims):
            raise ValueError("one local set per agent required")
        for d, s in zip(self.agent_dims, self.local_sets):
            if s.dim != d:
                raise ValueError("local set dimension mismatch")
        if self.equality is not None:
            E, e = self.equality
            E = np.asarray(E, dtype=float)
            e = np.asarray(e, dtype=float)
            if E.ndim != 2 or E.shape != (e.shape[0], self.dim):
                raise ValueError("equality shapes inconsistent")
            self.equality = (E, e)
        if (self.ineq_value is None) != (self.ineq_jacobian is None):
            raise ValueError("inequality value and Jacobian come together")

    @property
    def n_agents(self) -> int:
        return len(self.agent_dims)

    @property
    def dim(self) -> int:
        return sum(self.agent_dims)

    @property
    def n_eq(self) -> int:
        return 0 if self.equality is None else self.equality[0].shape[0]

    def slices(self) -> list:
        out, start = [], 0
        for d in self.agent_dims:
            out.append(slice(start, start + d))
            start += d
        return out

    def eq_value(self, w: np.ndarray) -> np.ndarray:
        if self.equality is None:
            return np.zeros(0)
        E, e = self.equality
        return E @ w + e

    def pseudo_gradient(self, w: np.ndarray) -> np.ndarray:
        """Stacked (grad_{w_i} f_i)_i at w."""
        if self.objective_grad_all is not None:
            return np.asarray(self.objective_grad_all(w), dtype=float)
        out = np.empty(self.dim)
        for i, s in enumerate(self.slices()):
            out[s] = self.objective_grad(i, w)
        return out


@dataclass
class PrimalDualState:
    """Stacked primal block w with one logical multiplier copy (lam, mu)."""

    w: np.ndarray
    lam: np.ndarray
    mu: np.ndarray

    def copy(self) -> "PrimalDualState":
        return PrimalDualState(self.w.copy(), self.lam.copy(), self.mu.copy())


def default_state(problem: GnepProblem) -> PrimalDualState:
    """w = Proj_W(0), lam = 0, mu = 0."""
    w = np.zeros(problem.dim)
    for s, cset in zip(problem.slices(), problem.local_sets):
        w[s] = convex.project_point(cset, w[s])
    n_ineq = 0 if problem.ineq_value is None else len(problem.ineq_value(w))
    return PrimalDualState(w, np.zeros(problem.n_eq), np.zeros(n_ineq))


def stacked_lagrangian_gradient(problem: GnepProblem,
                                w: np.ndarray,
                                lam: np.ndarray,
                                mu: np.ndarray) -> np.ndarray:
    """All blocks grad_{w_i} L_i stacked into one (r,) vector."""
    grad = problem.pseudo_gradient(w)
    if problem.equality is not None:
        grad = grad + problem.equality[0].T @ lam
    if problem.ineq_value is not None and mu.size:
        grad = grad + problem.ineq_jacobian(w).T @ mu
    return grad


def lagrangian_gradient(problem: GnepProblem,
                        state: PrimalDualState,
                        i: int) -> np.ndarray:
    """grad_{w_i} L_i(w, lam, mu) for agent i."""
    s = problem.slices()[i]
    grad = np.asarray(problem.objective_grad(i, state.w), dtype=float).copy()
    if problem.equality is not None:
        grad += problem.equality[0][:, s].T @ state.lam
    if problem.ineq_value is not None and state.mu.size:
        grad += problem.ineq_jacobian(state.w)[:, s].T @ state.mu
    return grad


def dual_step(problem: GnepProblem,
              w: np.ndarray,
              lam: np.ndarray,
              mu: np.ndarray,
              h: float,
              rate: float) -> tuple:
    """One projected Euler step of the multiplier dynamics at fixed w."""
    lam_new = lam + h * rate * problem.eq_value(w)
    if mu.size:
        mu_new = np.maximum(mu + h * rate * problem.ineq_value(w), 0.0)
    else:
        mu_new = mu.copy()
    return lam_new, mu_new


def primal_dual_step(problem: GnepProblem,
                     state: PrimalDualState,
                     h: float,
                     rate: float = 1.0) -> PrimalDualState:
    """Simultaneous projected Euler step of primal and dual dynamics.

    All right-hand sides are evaluated at the incoming state (Jacobi
    update); rate k = 1 is the plain flow, Algorithm 2 passes its k_1.
    """
    if h <= 0.0 or rate <= 0.0:
        raise ValueError("step size and rate must be positive")
    grad = stacked_lagrangian_gradient(problem, state.w, state.lam, state.mu)
    w_new = np.empty_like(state.w)
    for s, cset in zip(problem.slices(), problem.local_sets):
        w_new[s] = convex.project_point(cset, state.w[s] - h * rate * grad[s])
    lam_new, mu_new = dual_step(problem, state.w, state.lam, state.mu, h, rate)
    return PrimalDualState(w_new, lam_new, mu_new)


def kkt_residual(problem: GnepProblem, state: PrimalDualState) -> float:
    """max of projected stationarity, |H|, positive part of G, |mu' G|.

    Zero exactly at a KKT triple of the variational equilibrium.
    """
    grad = stacked_lagrangian_gradient(problem, state.w, state.lam, state.mu)
    stat = 0.0
    for s, cset in zip(problem.slices(), problem.local_sets):
        proj = convex.project_vector(cset, state.w[s], -grad[s])
        if proj.size:
            stat = max(stat, float(np.abs(proj).max()))
    res = stat
    if problem.n_eq:
        res = max(res, float(np.abs(problem.eq_value(state.w)).max()))
    if problem.ineq_value is not None:
        g = problem.ineq_value(state.w)
        if g.size:
            res = max(res, float(np.maximum(g, 0.0).max()))
            res = max(res, abs(float(state.mu @ g)))
    return res


@dataclass
class ProbeResult:
    min_ratio: float
    strictly_monotone: bool
    samples: int


def monotonicity_probe(problem: GnepProblem,
                       sample_count: int = 200,
                       region=None,
                       seed: int = 0) -> ProbeResult:
    """Sampled monotonicity ratios of the pseudo-gradient map.

    Draws random pairs (w, w') in ``region`` (default: the product of the
    local sets) and reports the minimum of

        (w - w')' (F(w) - F(w')) / ||w - w'||^2 .

    A positive minimum witnesses strict monotonicity on the sample; it is
    a sanity probe, not a proof.
    """
    if region is None:
        region = convex.Product(tuple(problem.local_sets))
    if region.dim != problem.dim:
        raise ValueError("probe region dimension mismatch")
    rng = np.random.default_rng(seed)
    min_ratio = np.inf
    for _ in range(sample_count):
        w = convex.sample(region, rng)
        for _attempt in range(100):
            w2 = convex.sample(region, rng)
            if not np.array_equal(w, w2):
                break
        else:
            raise ValueError("degenerate probe region: repeated samples coincide")
        dw = w - w2
        df = problem.pseudo_gradient(w) - problem.pseudo_gradient(w2)
        min_ratio = min(min_ratio, float(dw @ df) / float(dw @ dw))
    return ProbeResult(min_ratio, bool(min_ratio > 0.0), sample_count)


class LyapunovWatch:
    """Counts per-step increases of a distance-to-equilibrium energy.

    The continuous flow never increases V = ||xi - xi_tilde||^2 / 2; its
    forward-Euler discretization picks up an O(h^2 V) second-order term, so
    a step is flagged only when the increase exceeds

        allowance * h^2 * max(1, V_prev),

    an absolute budget of ``allowance * h^2`` near the equilibrium (V <= 1)
    that relaxes proportionally to V during large transients.  NaN values
    (no reference available) are skipped; ``count`` is None if no finite
    value was ever seen.
    """

    def __init__(self, h: float, allowance: float = 10.0):
        self.h = h
        self.allowance = allowance
        self.prev = None
        self.violations = 0
        self.seen = False
        self.steps = 0

    def update(self, v: float) -> None:
        if np.isnan(v):
            return
        self.seen = True
        if self.prev is not None:
            self.steps += 1
            slack = self.allowance * self.h * self.h * max(1.0, self.prev)
            if v - self.prev > slack:
                self.violations += 1
        self.prev = v

    @property
    def count(self) -> Optional[int]:
        return self.violations if self.seen else None


def _distance_energy(state: PrimalDualState,
                     reference: PrimalDualState) -> float:
    dw = state.w - reference.w
    dl = state.lam - reference.lam
    dm = state.mu - reference.mu
    return 0.5 * (float(dw @ dw) + float(dl @ dl) + float(dm @ dm))


def run_flow(problem: GnepProblem,
             state: Optional[PrimalDualState] = None,
             h: float = 1e-3,
             rate: float = 1.0,
             t_max: float = 500.0,
             kkt_tol: float = 1e-6,
             check_every: int = 100,
             reference: Optional[PrimalDualState] = None,
             allowance: float = 10.0) -> tuple:
    """Iterate ``primal_dual_step`` until kkt_residual <= kkt_tol or t_max.

    Returns ``(state, info)`` where info carries the elapsed flow time,
    the final residual and a convergence flag.  When ``reference`` (a known
    equilibrium triple) is supplied, every step is checked against the
    ``LyapunovWatch`` budget and info gains "violations".
    """
    if state is None:
        state = default_state(problem)
    steps = int(round(t_max / h))
    res = kkt_residual(problem, state)
    watch = LyapunovWatch(h, allowance) if reference is not None else None
    if watch is not None:
        watch.update(_distance_energy(state, reference))
    done = 0
    while done < steps and res > kkt_tol:
        burst = min(check_every, steps - done)
        for _ in range(burst):
            state = primal_dual_step(problem, state, h, rate)
            if watch is not None:
                watch.update(_distance_energy(state, reference))
        done += burst
        res = kkt_residual(problem, state)
    info = {
        "t": done * h,
        "kkt_residual": res,
        "converged": bool(res <= kkt_tol),
        "steps": done,
    }
    if watch is not None:
        info["violations"] = watch.count
    return state, info
