"""Active-set enumeration oracle for quadratic generalized Nash games.

Solves for the variational equilibrium of games whose pseudo-gradient is
affine, the shared constraints are affine and the local sets are boxes, by
enumerating candidate active sets in ascending cardinality and solving the
square KKT system of each candidate with a dense LU factorization.  The
first candidate that is primal and dual feasible wins; complementarity
holds by construction.  This is the independent reference the dynamic
flows are tested against, so it shares no integration code with them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import convex, gnep

# Reject candidate KKT systems whose reciprocal condition is below this.
RCOND_MIN = 1e-12
# Ascending-cardinality enumeration never tries more candidates than this.
ENUMERATION_BUDGET = 2 ** 24


class OracleError(RuntimeError):
    pass


@dataclass
class QuadraticGnep:
    """Quadratic game data: grad_{w_i} f_i(w) = Q_i w + b_i.

    Parameters
    ----------
    agent_dims : sequence of int
    q_blocks : list of (r_i, r) arrays
        Rows of the stacked pseudo-gradient Jacobian, one block per agent.
    b_blocks : list of (r_i,) arrays
    equality : optional ``(E, e)`` with E of shape (m, r)
    inequality : optional ``(C, d)`` with C of shape (l, r)
    bounds : optional list of ``(lower_i, upper_i)`` per agent, +-inf allowed

    The symmetric part of the stacked Jacobian must be positive definite
    on the null space of E; otherwise the variational equilibrium may not
    be unique and construction fails.
    """

    agent_dims: Sequence[int]
    q_blocks: Sequence[np.ndarray]
    b_blocks: Sequence[np.ndarray]
    equality: Optional[tuple] = None
    inequality: Optional[tuple] = None
    bounds: Optional[Sequence[tuple]] = None

    def __post_init__(self):
        self.agent_dims = [int(d) for d in self.agent_dims]
        r = self.dim
        self.q_blocks = [np.asarray(q, dtype=float) for q in self.q_blocks]
        self.b_blocks = [np.asarray(b, dtype=float) for b in self.b_blocks]
        for d, q, b in zip(self.agent_dims, self.q_blocks, self.b_blocks,
                           strict=True):
            if q.shape != (d, r) or b.shape != (d,):
                raise ValueError("pseudo-gradient block shape mismatch")
        if self.equality is not None:
            E, e = self.equality
            self.equality = (np.asarray(E, float), np.asarray(e, float))
            if self.equality[0].shape != (self.equality[1].shape[0], r):
                raise ValueError("equality shape mismatch")
        if self.inequality is not None:
            C, d = self.inequality
            self.inequality = (np.asarray(C, float), np.asarray(d, float))
            if self.inequality[0].shape != (self.inequality[1].shape[0], r):
                raise ValueError("inequality shape mismatch")
        if self.bounds is not None:
            bl = []
            for (lo, hi), d in zip(self.bounds, self.agent_dims, strict=True):
                lo = np.asarray(lo, float)
                hi = np.asarray(hi, float)
                if lo.shape != (d,) or hi.shape != (d,):
                    raise ValueError("bound shape mismatch")
                bl.append((lo, hi))
            self.bounds = bl
        self._check_definite()

    @property
    def dim(self) -> int:
        return sum(self.agent_dims)

    @property
    def jacobian(self) -> np.ndarray:
        return np.vstack(self.q_blocks)

    @property
    def b(self) -> np.ndarray:
        return np.concatenate(self.b_blocks)

    def _check_definite(self) -> None:
        J = self.jacobian
        sym = 0.5 * (J + J.T)
        if self.equality is not None and self.equality[0].size:
            # Restrict to null(E) via an orthonormal basis from the SVD.
            E = self.equality[0]
            _, s, vt = np.linalg.svd(E)
            rank = int((s > s.max() * 1e-12).sum()) if s.size else 0
            basis = vt[rank:].T
            if basis.shape[1] == 0:
                return
            sym = basis.T @ sym @ basis
        lo = float(np.linalg.eigvalsh(sym).min())
        if lo <= 1e-12:
            raise OracleError(
                "pseudo-gradient Jacobian is not positive definite on the "
                f"feasible subspace (min eig {lo:.3e}); equilibrium may not "
                "be unique")

    def local_sets(self) -> list:
        out = []
        for i, d in enumerate(self.agent_dims):
            if self.bounds is None:
                out.append(convex.AllSpace(d))
            else:
                lo, hi = self.bounds[i]
                out.append(convex.Box(lo, hi))
        return out

    def to_problem(self) -> gnep.GnepProblem:
        """Equivalent GnepProblem, used to score oracle output."""
        J = self.jacobian
        b = self.b
        slices, start = [], 0
        for d in self.agent_dims:
            slices.append(slice(start, start + d))
            start += d
        ineq_value = ineq_jac = None
        if self.inequality is not None:
            C, d = self.inequality
            ineq_value = lambda w: C @ w + d
            ineq_jac = lambda w: C
        return gnep.GnepProblem(
            agent_dims=self.agent_dims,
            objective_grad=lambda i, w: J[slices[i]] @ w + b[slices[i]],
            local_sets=self.local_sets(),
            equality=self.equality,
            ineq_value=ineq_value,
            ineq_jacobian=ineq_jac,
            objective_grad_all=lambda w: J @ w + b,
            hessian_action=lambda w, lam, mu, direction: J @ direction,
        )


@dataclass
class OracleResult:
    w: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    active: tuple
    kkt_residual: float
    candidates_tried: int

    def to_state(self) -> gnep.PrimalDualState:
        return gnep.PrimalDualState(self.w.copy(), self.lam.copy(),
                                    self.mu.copy())


def _candidate_constraints(qg: QuadraticGnep) -> list:
    """Inequality rows first, then finite box faces, in index order."""
    cands = []
    if qg.inequality is not None:
        for k in range(qg.inequality[0].shape[0]):
            cands.append(("g", k))
    if qg.bounds is not None:
        offset = 0
        for lo, hi in qg.bounds:
            for c in range(lo.shape[0]):
                if np.isfinite(lo[c]):
                    cands.append(("lo", offset + c))
                if np.isfinite(hi[c]):
                    cands.append(("hi", offset + c))
            offset += lo.shape[0]
    return cands


def solve_ve_active_set(qg: QuadraticGnep,
                        tol: float = 1e-9,
                        budget: int = ENUMERATION_BUDGET) -> OracleResult:
    """Variational equilibrium by ascending-cardinality active-set search.

    Each candidate subset S yields a square linear system: stacked
    stationarity, the shared equalities, and the active rows of S.  A
    candidate whose system is well conditioned (rcond >= 1e-12) and whose
    solution is primal feasible with nonnegative multipliers is accepted;
    subsets are tried in ascending cardinality so the equilibrium with the
    fewest active constraints wins.
    """
    r = qg.dim
    J = qg.jacobian
    b = qg.b
    if qg.equality is not None:
        E, e = qg.equality
        m = E.shape[0]
    else:
        E = np.zeros((0, r))
        e = np.zeros(0)
        m = 0
    C, d = qg.inequality if qg.inequality is not None else (np.zeros((0, r)),
                                                            np.zeros(0))
    n_ineq = C.shape[0]
    lo_all = np.full(r, -np.inf)
    hi_all = np.full(r, np.inf)
    if qg.bounds is not None:
        offset = 0
        for lo, hi in qg.bounds:
            lo_all[offset:offset + lo.shape[0]] = lo
            hi_all[offset:offset + hi.shape[0]] = hi
            offset += lo.shape[0]

    cands = _candidate_constraints(qg)
    tried = 0
    # An active set larger than the primal dimension cannot satisfy LICQ.
    max_card = min(len(cands), r)
    for card in range(max_card + 1):
        for subset in itertools.combinations(range(len(cands)), card):
            tried += 1
            if tried > budget:
                raise OracleError(
                    f"enumeration budget {budget} exceeded after trying "
                    f"{tried - 1} candidate active sets")
            labels = [cands[idx] for idx in subset]
            size = r + m + card
            M = np.zeros((size, size))
            rhs = np.zeros(size)
            M[:r, :r] = J
            rhs[:r] = -b
            if m:
                M[:r, r:r + m] = E.T
                M[r:r + m, :r] = E
                rhs[r:r + m] = -e
            for idx, (kind, k) in enumerate(labels):
                col = r + m + idx
                row = r + m + idx
                if kind == "g":
                    M[:r, col] = C[k]
                    M[row, :r] = C[k]
                    rhs[row] = -d[k]
                else:
                    sign = 1.0 if kind == "hi" else -1.0
                    M[k, col] = sign
                    M[row, k] = 1.0
                    rhs[row] = hi_all[k] if kind == "hi" else lo_all[k]
            sv = np.linalg.svd(M, compute_uv=False)
            if not np.isfinite(sv).all() or sv[0] == 0.0 \
                    or sv[-1] / sv[0] < RCOND_MIN:
                continue
            sol = np.linalg.solve(M, rhs)
            w = sol[:r]
            lam = sol[r:r + m]
            mults = sol[r + m:]
            if (w < lo_all - tol).any() or (w > hi_all + tol).any():
                continue
            if n_ineq and (C @ w + d > tol).any():
                continue
            if (mults < -tol).any():
                continue
            mu = np.zeros(n_ineq)
            for (kind, k), value in zip(labels, mults):
                if kind == "g":
                    mu[k] = value
            state = gnep.PrimalDualState(w, lam, mu)
            residual = gnep.kkt_residual(qg.to_problem(), state)
            return OracleResult(w, lam, mu, tuple(labels), residual, tried)
    raise OracleError(
        f"no feasible KKT candidate among {tried} active sets; problem may "
        "be infeasible or degenerate")


def format_result(res: OracleResult) -> str:
    """Structured text block used by the command line oracle output."""
    lines = ["variational equilibrium (active-set oracle)"]
    lines.append("w = " + np.array2string(res.w, precision=10,
                                          separator=", "))
    lines.append("lambda = " + np.array2string(res.lam, precision=10,
                                               separator=", "))
    lines.append("mu = " + np.array2string(res.mu, precision=10,
                                           separator=", "))
    if res.active:
        parts = []
        for kind, k in res.active:
            name = {"g": "G", "lo": "lower", "hi": "upper"}[kind]
            parts.append(f"{name}[{k}]")
        lines.append("active = " + ", ".join(parts))
    else:
        lines.append("active = (none)")
    lines.append(f"kkt_residual = {res.kkt_residual:.3e}")
    lines.append(f"candidates_tried = {res.candidates_tried}")
    return "\n".join(lines)
