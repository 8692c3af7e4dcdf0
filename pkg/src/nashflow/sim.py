"""Forward-Euler simulation of the closed loops, with recorded monitors.

All simulators share the same recording scheme: full rows every
``record_every`` steps (plus the initial and final instants), while the
Lyapunov monitor is evaluated at every step so per-step decrease
violations can be counted.  The decrease slack per step is
``allowance * h**2 * max(1, V)``: forward Euler's second-order term is
proportional to the current level set, so the slack must scale with V
during large transients, and the max(1, .) floor makes it the plain
absolute allowance once V is small.  A magnitude guard aborts diverging
runs and keeps the last few samples for diagnosis.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import backstep, gnep, linctrl


class SimulationBlowUp(RuntimeError):
    """State magnitude exceeded the guard; carries the last samples."""

    def __init__(self, message: str, time: float, last: list):
        super().__init__(message)
        self.time = time
        self.last = last


@dataclass
class Reference:
    """Equilibrium targets: decision triple plus plant steady state."""

    w: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    x: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None


@dataclass
class Trajectory:
    kind: str
    h: float
    record_every: int
    columns: list
    data: np.ndarray               # (instants, len(columns))
    violations: Optional[int]
    allowance: float
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def block(self, prefix: str) -> np.ndarray:
        idx = [k for k, c in enumerate(self.columns)
               if c == prefix or c.startswith(prefix + "_")]
        return self.data[:, idx]

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    @property
    def kkt(self) -> np.ndarray:
        return self.column("kkt")

    @property
    def lyapunov(self) -> np.ndarray:
        return self.column("V")

    @property
    def err_dm(self) -> np.ndarray:
        return self.column("err_dm")

    @property
    def err_phys(self) -> np.ndarray:
        return self.column("err_phys")


def _labels(prefix: str, dims) -> list:
    out = []
    for i, d in enumerate(dims):
        out.extend(f"{prefix}_{i}_{k}" for k in range(d))
    return out


class _Recorder:
    def __init__(self, columns: list):
        self.columns = columns
        self.rows = []

    def add(self, *chunks) -> None:
        row = []
        for c in chunks:
            if np.ndim(c) == 0:
                row.append(float(c))
            else:
                row.extend(np.asarray(c, dtype=float).ravel())
        if len(row) != len(self.columns):
            raise AssertionError("recorded row width mismatch")
        self.rows.append(row)

    def done(self, kind, h, record_every, violations, allowance, meta):
        return Trajectory(kind=kind, h=h, record_every=record_every,
                          columns=self.columns,
                          data=np.array(self.rows, dtype=float),
                          violations=violations, allowance=allowance,
                          meta=meta)


class _Guard:
    """Magnitude watchdog with a short ring buffer of recent samples."""

    def __init__(self, limit: float, keep: int = 10):
        self.limit = limit
        self.keep = keep
        self.samples = []

    def check(self, t: float, *arrays) -> None:
        peak = 0.0
        for a in arrays:
            if a is not None and a.size:
                peak = max(peak, float(np.abs(a).max()))
        self.samples.append((t, peak))
        if len(self.samples) > self.keep:
            self.samples.pop(0)
        if not np.isfinite(peak) or peak > self.limit:
            lines = ", ".join(f"t={ti:.6g}: {pi:.6g}"
                              for ti, pi in self.samples)
            raise SimulationBlowUp(
                f"state magnitude {peak:.3g} exceeded guard "
                f"{self.limit:.3g} at t={t:.6g} (recent peaks: {lines})",
                time=t, last=list(self.samples))


def _triple_v(w, lam, mu, reference: Optional[Reference],
              extra: float = 0.0) -> float:
    if reference is None:
        return np.nan
    return 0.5 * (float(np.sum((w - reference.w) ** 2))
                  + float(np.sum((lam - reference.lam) ** 2))
                  + float(np.sum((mu - reference.mu) ** 2))) + 0.5 * extra


def _err(vec, ref) -> float:
    if ref is None:
        return np.nan
    return float(np.linalg.norm(np.ravel(vec) - np.ravel(ref)))


def _steps(horizon: float, h: float) -> int:
    if h <= 0.0 or horizon <= 0.0:
        raise ValueError("horizon and h must be positive")
    return int(round(horizon / h))


def simulate_flow(problem: gnep.GnepProblem,
                  reference: Optional[Reference] = None,
                  state0: Optional[gnep.PrimalDualState] = None,
                  horizon: float = 500.0, h: float = 1e-3,
                  rate: float = 1.0, record_every: int = 100,
                  allowance: float = 10.0, guard: float = 1e9) -> Trajectory:
    """Decision dynamics alone: projected primal-dual Euler steps."""
    state = state0.copy() if state0 is not None else \
        gnep.default_state(problem)
    K = _steps(horizon, h)
    cols = (["t"] + _labels("wbar", problem.agent_dims)
            + [f"lambda_{j}" for j in range(problem.n_eq)]
            + [f"mu_{j}" for j in range(len(state.mu))]
            + ["kkt", "V", "err_dm"])
    rec = _Recorder(cols)
    watch = _Guard(guard)
    lwatch = gnep.LyapunovWatch(h, allowance)
    for k in range(K + 1):
        v = _triple_v(state.w, state.lam, state.mu, reference)
        lwatch.update(v)
        if k % record_every == 0 or k == K:
            rec.add(k * h, state.w, state.lam, state.mu,
                    gnep.kkt_residual(problem, state), v,
                    _err(state.w, None if reference is None
                         else reference.w))
        if k == K:
            break
        state = gnep.primal_dual_step(problem, state, h, rate)
        watch.check((k + 1) * h, state.w, state.lam, state.mu)
    return rec.done("flow", h, record_every, lwatch.count, allowance,
                    {"horizon": K * h, "rate": rate, "steps": K})


def default_aux(net: linctrl.LinearNetwork,
                problem: gnep.GnepProblem) -> Callable:
    """Unpack decisions that carry the plant targets directly.

    Agent i's decision block must be (xbar_i, ubar_i), one entry wider
    than its plant block.
    """
    for i, d in enumerate(problem.agent_dims):
        if d != net.dims[i] + 1:
            raise ValueError(
                f"agent {i}: decision width {d} does not match plant "
                f"width {net.dims[i]} + 1; pass an explicit aux_map")
    n = sum(net.dims)

    def aux(w: np.ndarray) -> tuple:
        xbar = np.empty(n)
        ubar = np.empty(len(net.dims))
        pos = xpos = 0
        for i, d in enumerate(net.dims):
            xbar[xpos:xpos + d] = w[pos:pos + d]
            ubar[i] = w[pos + d]
            pos += d + 1
            xpos += d
        return xbar, ubar

    return aux


def simulate_algorithm1(net: linctrl.LinearNetwork,
                        canon: linctrl.CanonicalData,
                        problem: gnep.GnepProblem,
                        reference: Optional[Reference] = None,
                        x0: Optional[np.ndarray] = None,
                        state0: Optional[gnep.PrimalDualState] = None,
                        horizon: float = 300.0, h: float = 1e-3,
                        rate: float = 1.0, record_every: int = 100,
                        aux_map: Optional[Callable] = None,
                        threads: int = 1, allowance: float = 10.0,
                        guard: float = 1e9) -> Trajectory:
    """Linear network under the high-gain tracking controllers, driven by
    the decision dynamics' current steady-state targets."""
    A, B = net.assemble()
    n = A.shape[0]
    n_agents = len(net.dims)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.shape != (n,):
        raise ValueError(f"x0 must have shape ({n},)")
    state = state0.copy() if state0 is not None else \
        gnep.default_state(problem)
    aux = aux_map if aux_map is not None else default_aux(net, problem)
    eps = canon.eps_per_agent if canon.eps_per_agent is not None \
        else np.full(n_agents, canon.epsilon)
    starts = np.concatenate(([0], np.cumsum(net.dims)))

    def control(x_now, xbar, ubar, u_out, pool):
        def one(i):
            sl = slice(starts[i], starts[i + 1])
            u_out[i] = linctrl.control_law_linear(
                canon.agents[i], eps[i], x_now[sl], xbar[sl], ubar[i])
        if pool is None:
            for i in range(n_agents):
                one(i)
        else:
            list(pool.map(one, range(n_agents)))

    K = _steps(horizon, h)
    cols = (["t"] + _labels("x", net.dims)
            + [f"u_{i}" for i in range(n_agents)]
            + _labels("wbar", problem.agent_dims)
            + [f"lambda_{j}" for j in range(problem.n_eq)]
            + [f"mu_{j}" for j in range(len(state.mu))]
            + ["kkt", "V", "err_phys", "err_dm"])
    rec = _Recorder(cols)
    watch = _Guard(guard)
    lwatch = gnep.LyapunovWatch(h, allowance)
    u = np.zeros(n_agents)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for k in range(K + 1):
            xbar, ubar = aux(state.w)
            control(x, xbar, ubar, u, pool)
            v = _triple_v(state.w, state.lam, state.mu, reference)
            lwatch.update(v)
            if k % record_every == 0 or k == K:
                rec.add(k * h, x, u, state.w, state.lam, state.mu,
                        gnep.kkt_residual(problem, state), v,
                        _err(x, None if reference is None
                             else reference.x),
                        _err(state.w, None if reference is None
                             else reference.w))
            if k == K:
                break
            x = x + h * (A @ x + B @ u)
            state = gnep.primal_dual_step(problem, state, h, rate)
            watch.check((k + 1) * h, x, state.w, state.lam, state.mu)
    finally:
        if pool is not None:
            pool.shutdown()
    return rec.done("alg1", h, record_every, lwatch.count, allowance,
                    {"horizon": K * h, "rate": rate, "threads": threads,
                     "epsilon": eps.copy(), "steps": K})


def simulate_algorithm2(problem: gnep.GnepProblem,
                        sys: backstep.StrictFeedbackSystem,
                        gains: backstep.BacksteppingGains,
                        reference: Optional[Reference] = None,
                        x0: Optional[np.ndarray] = None,
                        lam0: Optional[np.ndarray] = None,
                        mu0: Optional[np.ndarray] = None,
                        horizon: float = 300.0, h: float = 1e-3,
                        record_every: int = 100, mode: str = "z",
                        allowance: float = 10.0,
                        guard: float = 1e9) -> Trajectory:
    """Strict-feedback chains under the recursive tracking controller.

    mode "z" advances the transformed cascade and reconstructs the plant
    state at recorded instants; mode "x" advances the plant itself and
    applies the explicit control law every step.  Both emit identical
    column sets so trajectories can be compared table against table.
    """
    if sys.nbar != 2:
        raise NotImplementedError("only two-layer chains are simulated")
    violation = backstep.validate_gains(gains)
    if violation is not None:
        raise ValueError(violation)
    n = sys.n_agents
    if problem.dim != n:
        raise ValueError("decision dimension must match the agent count")
    x = np.full((n, 2), 0.0) if x0 is None \
        else np.asarray(x0, dtype=float).reshape(n, 2).copy()
    lam = np.zeros(problem.n_eq) if lam0 is None \
        else np.asarray(lam0, dtype=float).copy()
    n_ineq = len(problem.ineq_value(np.zeros(problem.dim))) \
        if problem.ineq_value is not None else 0
    mu = np.zeros(n_ineq) if mu0 is None \
        else np.asarray(mu0, dtype=float).copy()

    K = _steps(horizon, h)
    n_dims = [2] * n
    cols = (["t"] + _labels("x", n_dims) + [f"u_{i}" for i in range(n)]
            + _labels("z", n_dims)
            + [f"lambda_{j}" for j in range(problem.n_eq)]
            + [f"mu_{j}" for j in range(n_ineq)]
            + ["kkt", "V", "err_phys", "err_dm"])
    rec = _Recorder(cols)
    watch = _Guard(guard)
    lwatch = gnep.LyapunovWatch(h, allowance)

    if mode == "z":
        zstate = backstep.forward_transform_2(problem, sys, gains,
                                              x, lam, mu)
        for k in range(K + 1):
            z1 = zstate.z[:, 0]
            v = _triple_v(z1, zstate.lam, zstate.mu, reference,
                          extra=float(np.sum(zstate.z[:, 1:] ** 2)))
            lwatch.update(v)
            if k % record_every == 0 or k == K:
                x_now = backstep.inverse_transform_2(problem, sys, gains,
                                                     zstate)
                u_now = backstep.control_law_nonlinear_2(
                    problem, sys, gains, x_now, zstate.lam, zstate.mu)
                kkt = gnep.kkt_residual(problem, gnep.PrimalDualState(
                    z1.copy(), zstate.lam.copy(), zstate.mu.copy()))
                rec.add(k * h, x_now, u_now, zstate.z, zstate.lam,
                        zstate.mu, kkt, v,
                        _err(x_now, None if reference is None
                             else reference.x),
                        _err(z1, None if reference is None
                             else reference.w))
            if k == K:
                break
            zstate = backstep.z_step(problem, gains, zstate, h)
            watch.check((k + 1) * h, zstate.z, zstate.lam, zstate.mu)
        kind = "alg2-z"
    elif mode == "x":
        for k in range(K + 1):
            u_now = backstep.control_law_nonlinear_2(problem, sys, gains,
                                                     x, lam, mu)
            z_now = backstep.forward_transform_2(problem, sys, gains,
                                                 x, lam, mu)
            v = _triple_v(x[:, 0], lam, mu, reference,
                          extra=float(np.sum(z_now.z[:, 1:] ** 2)))
            lwatch.update(v)
            if k % record_every == 0 or k == K:
                kkt = gnep.kkt_residual(problem, gnep.PrimalDualState(
                    x[:, 0].copy(), lam.copy(), mu.copy()))
                rec.add(k * h, x, u_now, z_now.z, lam, mu, kkt, v,
                        _err(x, None if reference is None
                             else reference.x),
                        _err(x[:, 0], None if reference is None
                             else reference.w))
            if k == K:
                break
            gam1 = sys.gamma_vec(1, x)
            the1 = sys.theta_vec(1, x)
            gam2 = sys.gamma_vec(2, x)
            the2 = sys.theta_vec(2, x)
            x_new = np.empty_like(x)
            x_new[:, 0] = x[:, 0] + h * (gam1 + the1 * x[:, 1])
            x_new[:, 1] = x[:, 1] + h * (gam2 + the2 * u_now)
            lam, mu = gnep.dual_step(problem, x[:, 0], lam, mu, h,
                                     gains.k1)
            x = x_new
            watch.check((k + 1) * h, x, lam, mu)
        kind = "alg2-x"
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return rec.done(kind, h, record_every, lwatch.count, allowance,
                    {"horizon": K * h, "mode": mode, "steps": K})


def convergence_metrics(traj: Trajectory) -> dict:
    """Summary numbers for reports and gates."""
    out = {
        "kind": traj.kind,
        "instants": traj.data.shape[0],
        "horizon": traj.meta.get("horizon"),
        "kkt_final": float(traj.kkt[-1]),
        "violations": traj.violations,
    }
    steps = traj.meta.get("steps")
    if traj.violations is not None and steps:
        out["lyapunov_monotone_fraction"] = 1.0 - traj.violations / steps
    for name in ("err_dm", "err_phys"):
        try:
            series = traj.column(name)
        except ValueError:
            continue
        if np.all(np.isnan(series)):
            continue
        out[f"{name}_final"] = float(series[-1])
        out[f"{name}_peak"] = float(np.nanmax(series))
    v = traj.lyapunov
    if not np.all(np.isnan(v)):
        out["lyapunov_final"] = float(v[-1])
    return out


def write_csv(traj: Trajectory, path) -> None:
    """Delimited dump: one row per recorded instant, repr-exact floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(traj.columns) + "\n")
        for row in traj.data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path) -> tuple:
    """Inverse of write_csv: (columns, data array)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        columns = header.split(",")
        data = [[float(tok) for tok in line.strip().split(",")]
                for line in fh if line.strip()]
    return columns, np.array(data, dtype=float)
