"""Concrete case studies: frequency-regulating power generation and
networked building climate control, plus config and topology file formats.

Both scenarios bundle the plant model, the game the agents play, the
quadratic mirror of that game for the active-set oracle, and the maps
between decision variables and physical steady states.  Parameter values
default to the published case-study numbers; configuration files can
override any of them.
"""

from __future__ import annotations

import configparser
import importlib.resources
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import backstep, convex, gnep, graph as graph_mod, linctrl, oracle, sim


class ScenarioError(RuntimeError):
    """A scenario cannot be built with the given parameters."""


class ConfigError(ScenarioError):
    """A config or topology file cannot be parsed or names unknown keys."""


# ---------------------------------------------------------------------------
# power generation network

@dataclass
class OpfParams:
    """Per-bus swing/governor constants and generation game coefficients.

    Scalars broadcast across buses.  ``line_t`` and ``line_cap`` apply to
    every line unless a per-edge weight map is passed to the builder.
    """

    inertia: float = 10.0          # m
    damping: float = 1.0           # D
    droop: float = 0.05            # R
    t_ch: float = 0.3
    t_g: float = 0.2
    cost_a: float = 0.1
    cost_b: float = 10.0
    cost_c: float = 0.0
    p_load: float = 10.0
    p_m_min: float = 10.0
    p_m_max: float = 100.0
    line_t: float = 1.5
    line_cap: float = 80.0
    omega_ref: float = 60.0

    def resolve(self, n: int) -> dict:
        out = {}
        for name in ("inertia", "damping", "droop", "t_ch", "t_g", "cost_a",
                     "cost_b", "cost_c", "p_load", "p_m_min", "p_m_max"):
            out[name] = np.broadcast_to(
                np.asarray(getattr(self, name), dtype=float), (n,)).copy()
        return out


@dataclass
class OpfScenario:
    comm: graph_mod.CommGraph
    params: OpfParams
    per_bus: dict
    weights: dict                  # (i, j) with i < j -> t_ij
    net: linctrl.LinearNetwork
    transforms: list               # (T_i, a_i) in closed form
    problem: gnep.GnepProblem
    quad: oracle.QuadraticGnep
    kappa: np.ndarray              # P_load + D * omega_ref per bus
    x0: np.ndarray = field(default=None)

    name = "opf"
    algorithm = 1

    def line_sum(self, i: int) -> float:
        return sum(t for (a, b), t in self.weights.items() if i in (a, b))

    def decision_to_aux(self, w: np.ndarray) -> tuple:
        """Auxiliary plant targets (xbar, ubar) for a decision point.

        The decision block of bus i is (P_M_i, theta_i).  The remaining
        coordinates follow the steady-state pattern: zero frequency
        deviation, turbine and valve power equal to the shifted mechanical
        power, and the input balancing the current phase differences.
        """
        n_bus = self.comm.n_nodes
        xbar = np.zeros(4 * n_bus)
        ubar = np.zeros(n_bus)
        theta = w[1::2]
        for i in range(n_bus):
            p_hat = w[2 * i] - self.kappa[i]
            xbar[4 * i + 0] = theta[i]
            xbar[4 * i + 2] = p_hat
            xbar[4 * i + 3] = p_hat
            flow = 0.0
            for (a, b), t in self.weights.items():
                if a == i:
                    flow += t * (theta[i] - theta[b])
                elif b == i:
                    flow += t * (theta[i] - theta[a])
            ubar[i] = flow
        return xbar, ubar

    def equilibrium(self, res: oracle.OracleResult) -> "sim.Reference":
        xstar, ustar = self.decision_to_aux(res.w)
        return sim.Reference(w=res.w.copy(), lam=res.lam.copy(),
                             mu=res.mu.copy(), x=xstar, u=ustar)

    def steady_state_check(self, res: oracle.OracleResult,
                           tol: float = 1e-8) -> float:
        """Equilibrium targets must be a genuine plant equilibrium."""
        xstar, ustar = self.decision_to_aux(res.w)
        residual = linctrl.steady_state_residual(self.net, xstar, ustar)
        if residual >= tol:
            raise ScenarioError(
                f"steady-state residual {residual:.3e} not below {tol:.0e}; "
                "the game's equality rows do not pin a plant equilibrium")
        return residual


def _opf_blocks(per_bus: dict, line_sum: np.ndarray, i: int) -> tuple:
    m = per_bus["inertia"][i]
    d = per_bus["damping"][i]
    r = per_bus["droop"][i]
    tch = per_bus["t_ch"][i]
    tg = per_bus["t_g"][i]
    st = line_sum[i]
    A = np.array([
        [0.0, 2.0 * np.pi, 0.0, 0.0],
        [-st / m, -d / m, 1.0 / m, 0.0],
        [0.0, 0.0, -1.0 / tch, 1.0 / tch],
        [0.0, -1.0 / (tg * r), 0.0, -1.0 / tg],
    ])
    B = np.array([0.0, 0.0, 0.0, 1.0 / tg])
    # Closed-form transform to controllable canonical coordinates and the
    # coefficient row it absorbs into the input.
    Q = np.array([
        [m * tch * tg / (2.0 * np.pi), 0.0, 0.0, 0.0],
        [0.0, m * tch * tg, 0.0, 0.0],
        [-tch * tg * st, -d * tch * tg, tch * tg, 0.0],
        [d * tch * tg * st / m, tch * tg * (d ** 2 / m - 2.0 * np.pi * st),
         -tg * (d * tch / m + 1.0), tg],
    ])
    trow = np.array([
        -2.0 * np.pi * st / (m * tch * tg),
        -(d * r + 1.0 + 2.0 * np.pi * r * st * (tch + tg))
        / (m * tch * tg * r),
        -(m + d * (tch + tg) + 2.0 * np.pi * tch * tg * st)
        / (m * tch * tg),
        -1.0 / tch - 1.0 / tg - d / m,
    ])
    return A, B, Q, -trow


def build_opf(comm: graph_mod.CommGraph,
              params: Optional[OpfParams] = None,
              weights: Optional[dict] = None) -> tuple:
    """(LinearNetwork, QuadraticGnep, GnepProblem) for a generation network.

    Plant coordinates are the rotating-frame deviations
    (theta_i, omega_i - omega_ref, P_M_i - kappa_i, P_v_i - kappa_i) with
    kappa_i = P_load_i + D_i omega_ref, which makes the drift linear and
    turns the game's power-balance rows into genuine plant equilibria.
    The game itself is played in the published units (P_M_i, theta_i).
    """
    scenario = opf_scenario(comm, params, weights)
    return scenario.net, scenario.quad, scenario.problem


def opf_scenario(comm: graph_mod.CommGraph,
                 params: Optional[OpfParams] = None,
                 weights: Optional[dict] = None) -> OpfScenario:
    params = params if params is not None else OpfParams()
    n_bus = comm.n_nodes
    per_bus = params.resolve(n_bus)
    wmap = {}
    for (a, b) in comm.edges:
        wmap[(a, b)] = float(params.line_t)
    if weights:
        for (a, b), t in weights.items():
            key = (min(a, b), max(a, b))
            if key not in wmap:
                raise ConfigError(f"weight for non-edge {key}")
            wmap[key] = float(t)
    line_sum = np.zeros(n_bus)
    for (a, b), t in wmap.items():
        line_sum[a] += t
        line_sum[b] += t

    blocks = {}
    b_vecs = []
    transforms = []
    for i in range(n_bus):
        A, B, Q, a_row = _opf_blocks(per_bus, line_sum, i)
        blocks[(i, i)] = A
        b_vecs.append(B)
        transforms.append((Q, a_row))
    for (a, b), t in wmap.items():
        for i, j in ((a, b), (b, a)):
            blk = np.zeros((4, 4))
            blk[1, 0] = t / per_bus["inertia"][i]
            blocks[(i, j)] = blk
    net = linctrl.LinearNetwork([4] * n_bus, blocks, b_vecs)

    # Game data in (P_M_i, theta_i) blocks.
    r = 2 * n_bus
    omega = float(params.omega_ref)
    kappa = per_bus["p_load"] + per_bus["damping"] * omega
    E = np.zeros((n_bus, r))
    e = np.zeros(n_bus)
    for i in range(n_bus):
        E[i, 2 * i] = 1.0
        E[i, 2 * i + 1] = -line_sum[i]
        e[i] = -kappa[i]
    for (a, b), t in wmap.items():
        E[a, 2 * b + 1] = t
        E[b, 2 * a + 1] = t
    lines = sorted(wmap.items())
    C = np.zeros((2 * len(lines), r))
    d = np.zeros(2 * len(lines))
    for k, ((a, b), t) in enumerate(lines):
        C[2 * k, 2 * a + 1] = t
        C[2 * k, 2 * b + 1] = -t
        d[2 * k] = -float(params.line_cap)
        C[2 * k + 1, 2 * a + 1] = -t
        C[2 * k + 1, 2 * b + 1] = t
        d[2 * k + 1] = -float(params.line_cap)

    J = np.zeros((r, r))
    bvec = np.zeros(r)
    for i in range(n_bus):
        J[2 * i, 2 * i] = 2.0 * per_bus["cost_a"][i]
        J[2 * i + 1, 2 * i + 1] = 2.0
        bvec[2 * i] = per_bus["cost_b"][i]
    bounds = [(np.array([per_bus["p_m_min"][i], -np.inf]),
               np.array([per_bus["p_m_max"][i], np.inf]))
              for i in range(n_bus)]
    quad = oracle.QuadraticGnep(
        agent_dims=[2] * n_bus,
        q_blocks=[J[2 * i:2 * i + 2] for i in range(n_bus)],
        b_blocks=[bvec[2 * i:2 * i + 2] for i in range(n_bus)],
        equality=(E, e),
        inequality=(C, d),
        bounds=bounds,
    )
    problem = quad.to_problem()

    return OpfScenario(
        comm=comm, params=params, per_bus=per_bus, weights=wmap, net=net,
        transforms=transforms, problem=problem, quad=quad, kappa=kappa,
        x0=np.zeros(4 * n_bus))


# ---------------------------------------------------------------------------
# building climate network

@dataclass
class ThermalParams:
    """Two-mass zone models and comfort game coefficients."""

    c1: float = 9163.0             # fast (air) capacitance
    c2: float = 169400.0           # slow (mass) capacitance
    mdot: float = 0.01             # supply mass flow
    c_p: float = 1012.0
    t_oa: float = 25.0
    r_wall: float = 1.7            # mass-air resistance R_i
    r_zone: float = 2.0            # inter-zone resistance R_ji
    r_oa: float = 57.0
    p_d: float = 0.1
    t_ref: float = 21.6
    t_min: float = 20.6
    t_max: float = 21.7
    u_min: float = -30.0
    u_max: float = 8.0
    c1x: float = 10.0
    c2x: float = 10.0
    cu: float = 0.1
    k1: float = 0.1
    k_i2: float = 1.2

    @property
    def mscp(self) -> float:
        return self.mdot * self.c_p

    @property
    def cbar_x(self) -> float:
        return self.c1x + self.c2x

    @property
    def cbar_u(self) -> float:
        return self.cu / self.mscp ** 2

    @property
    def disturbance(self) -> float:
        return self.mscp * self.t_oa + self.t_oa / self.r_oa + self.p_d


@dataclass
class ThermalScenario:
    comm: graph_mod.CommGraph
    params: ThermalParams
    sys: backstep.StrictFeedbackSystem
    problem: gnep.GnepProblem
    quad: oracle.QuadraticGnep
    gains: backstep.BacksteppingGains
    p_coef: np.ndarray             # p_i = mscp + 1/R_oa + sum_j 1/R_ji
    coupling: np.ndarray           # (N, N): 1/R_ji on neighbor pairs
    x0: np.ndarray = field(default=None)

    name = "thermal"
    algorithm = 2

    def manifold_input(self, x1: np.ndarray) -> np.ndarray:
        """Closed-form steady input (1/mscp)(p x1 - coupling x1 - d)."""
        pr = self.params
        return (self.p_coef * x1 - self.coupling @ x1
                - pr.disturbance) / pr.mscp

    def equilibrium(self, res: oracle.OracleResult) -> "sim.Reference":
        xstar, ustar = backstep.steady_state_manifold(self.sys, res.w)
        return sim.Reference(w=res.w.copy(), lam=res.lam.copy(),
                             mu=res.mu.copy(), x=xstar, u=ustar)


def build_thermal(comm: Optional[graph_mod.CommGraph] = None,
                  params: Optional[ThermalParams] = None,
                  n_zones: int = 10) -> tuple:
    """(StrictFeedbackSystem, GnepProblem, QuadraticGnep) for zone climate.

    The slow mass temperature is the first chain layer, the air
    temperature the second.  The game is played in the mass temperatures
    with the steady input substituted into the comfort objective; input
    bounds appear once per (zone, bound) pair even though every neighbor
    shares them, and the temperature box enters the constraint rows since
    the chain coordinates themselves are unconstrained.
    """
    scenario = thermal_scenario(comm, params, n_zones)
    return scenario.sys, scenario.problem, scenario.quad


def thermal_scenario(comm: Optional[graph_mod.CommGraph] = None,
                     params: Optional[ThermalParams] = None,
                     n_zones: int = 10) -> ThermalScenario:
    params = params if params is not None else ThermalParams()
    if comm is None:
        comm = graph_mod.path_graph(n_zones)
    n = comm.n_nodes
    pr = params
    coupling = np.zeros((n, n))
    for (a, b) in comm.edges:
        coupling[a, b] = 1.0 / pr.r_zone
        coupling[b, a] = 1.0 / pr.r_zone
    degree_term = coupling.sum(axis=1)
    p_coef = pr.mscp + 1.0 / pr.r_oa + degree_term
    d_i = pr.disturbance

    # Sufficient condition for a strongly monotone pseudo-gradient.
    for i in range(n):
        lhs = 2.0 * (pr.cbar_x + pr.cbar_u * p_coef[i])
        rhs = 2.0 * pr.cbar_u * degree_term[i]
        if lhs <= rhs:
            raise ScenarioError(
                f"zone {i}: monotonicity condition 2(cx + cu p) > "
                f"sum (cu_i + cu_j)/R fails ({lhs:.4g} <= {rhs:.4g})")

    J = np.zeros((n, n))
    for i in range(n):
        J[i, i] = 2.0 * pr.cbar_x + 2.0 * pr.cbar_u * p_coef[i] ** 2
        for j in np.nonzero(coupling[i])[0]:
            J[i, j] = -2.0 * pr.cbar_u * p_coef[i] * coupling[i, j]
    bvec = np.full(n, -2.0 * pr.cbar_x * pr.t_ref) \
        - 2.0 * pr.cbar_u * d_i * p_coef
    m_est = float(np.linalg.eigvalsh(0.5 * (J + J.T)).min())

    # Constraint rows: input window per zone, then temperature box.
    C = np.zeros((4 * n, n))
    dvec = np.zeros(4 * n)
    u_hi = pr.mscp * pr.u_max + d_i
    u_lo = pr.mscp * pr.u_min + d_i
    for j in range(n):
        C[2 * j, :] = -coupling[j]
        C[2 * j, j] += p_coef[j]
        dvec[2 * j] = -u_hi
        C[2 * j + 1, :] = coupling[j]
        C[2 * j + 1, j] -= p_coef[j]
        dvec[2 * j + 1] = u_lo
    for i in range(n):
        C[2 * n + 2 * i, i] = 1.0
        dvec[2 * n + 2 * i] = -pr.t_max
        C[2 * n + 2 * i + 1, i] = -1.0
        dvec[2 * n + 2 * i + 1] = pr.t_min

    quad = oracle.QuadraticGnep(
        agent_dims=[1] * n,
        q_blocks=[J[i:i + 1] for i in range(n)],
        b_blocks=[bvec[i:i + 1] for i in range(n)],
        equality=None,
        inequality=(C, dvec),
        bounds=None,
    )
    problem = quad.to_problem()

    theta1 = 1.0 / (pr.c2 * pr.r_wall)
    theta2 = pr.mscp / pr.c1

    def gamma(i: int, ell: int, x: np.ndarray) -> float:
        if ell == 1:
            return -x[i, 0] * theta1
        inflow = float(coupling[i] @ x[:, 1])
        return ((x[i, 0] - x[i, 1]) / pr.r_wall
                - pr.mscp * x[i, 1] - x[i, 1] / pr.r_oa
                + inflow - degree_term[i] * x[i, 1] + d_i) / pr.c1

    def theta(i: int, ell: int, x: np.ndarray) -> float:
        return theta1 if ell == 1 else theta2

    def gamma_all(ell: int, x: np.ndarray) -> np.ndarray:
        if ell == 1:
            return -x[:, 0] * theta1
        return ((x[:, 0] - x[:, 1]) / pr.r_wall
                - pr.mscp * x[:, 1] - x[:, 1] / pr.r_oa
                + coupling @ x[:, 1] - degree_term * x[:, 1]
                + d_i) / pr.c1

    def theta_all(ell: int, x: np.ndarray) -> np.ndarray:
        return np.full(n, theta1 if ell == 1 else theta2)

    sys = backstep.StrictFeedbackSystem(
        n_agents=n, nbar=2, gamma=gamma, theta=theta,
        dgamma1=lambda i, x1: -theta1 * np.eye(n)[i],
        dtheta1=lambda i, x1: np.zeros(n),
        gamma_all=gamma_all, theta_all=theta_all,
        dgamma1_all=lambda x1: -theta1 * np.eye(n),
        dtheta1_all=lambda x1: np.zeros((n, n)),
    )
    gains = backstep.BacksteppingGains(
        k1=pr.k1, k=np.full((n, 1), pr.k_i2), m_est=m_est)
    violation = backstep.validate_gains(gains)
    if violation is not None:
        raise ScenarioError(violation)

    return ThermalScenario(
        comm=comm, params=params, sys=sys, problem=problem, quad=quad,
        gains=gains, p_coef=p_coef, coupling=coupling,
        x0=np.full((n, 2), 21.0))


# ---------------------------------------------------------------------------
# custom quadratic games from config files

@dataclass
class CustomScenario:
    agent_dims: list
    jacobian: np.ndarray
    b: np.ndarray
    equality: Optional[tuple]
    inequality: Optional[tuple]
    bounds: Optional[list]

    name = "custom"
    algorithm = None

    def local_sets(self) -> list:
        if self.bounds is None:
            return [convex.AllSpace(dim) for dim in self.agent_dims]
        return [convex.Box(lo, hi) for lo, hi in self.bounds]

    def problem(self) -> gnep.GnepProblem:
        J, b = self.jacobian, self.b
        slices, start = [], 0
        for dim in self.agent_dims:
            slices.append(slice(start, start + dim))
            start += dim
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

    def quad(self) -> oracle.QuadraticGnep:
        slices, start = [], 0
        for dim in self.agent_dims:
            slices.append(slice(start, start + dim))
            start += dim
        return oracle.QuadraticGnep(
            agent_dims=self.agent_dims,
            q_blocks=[self.jacobian[s] for s in slices],
            b_blocks=[self.b[s] for s in slices],
            equality=self.equality,
            inequality=self.inequality,
            bounds=self.bounds,
        )


# ---------------------------------------------------------------------------
# file formats

def parse_vector(text: str) -> np.ndarray:
    return np.array([float(tok) for tok in text.replace(",", " ").split()])


def parse_matrix(text: str) -> np.ndarray:
    rows = [parse_vector(part) for part in text.split(";") if part.strip()]
    return np.vstack(rows)


def load_topology(path) -> tuple:
    """Edge list file: one edge per line as ``i j [t_ij]``.

    Node labels are arbitrary integers; they are sorted and relabeled to
    0..N-1.  Returns (CommGraph, weights or None); weights are keyed by
    relabeled pairs.
    """
    raw_edges = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read topology file {path}: {exc}")
    with fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if len(parts) not in (2, 3):
                    raise ValueError("expected 'i j [t]'")
                i, j = int(parts[0]), int(parts[1])
                t = float(parts[2]) if len(parts) == 3 else None
            except ValueError as exc:
                raise ConfigError(
                    f"bad topology line {line!r}: {exc}") from exc
            raw_edges.append((i, j, t))
    labels = sorted({i for i, _, _ in raw_edges}
                    | {j for _, j, _ in raw_edges})
    index = {lab: k for k, lab in enumerate(labels)}
    edges = []
    weights = {}
    any_weights = False
    for i, j, t in raw_edges:
        a, b = index[i], index[j]
        key = (min(a, b), max(a, b))
        edges.append(key)
        if t is not None:
            weights[key] = t
            any_weights = True
    comm = graph_mod.CommGraph(len(labels), tuple(edges))
    return comm, (weights if any_weights else None)


def save_topology(path, comm: graph_mod.CommGraph,
                  weights: Optional[dict] = None,
                  header: Optional[str] = None) -> None:
    lines = []
    if header:
        lines.extend("# " + h for h in header.splitlines())
    for (a, b) in comm.edges:
        if weights and (a, b) in weights:
            lines.append(f"{a} {b} {weights[(a, b)]!r}")
        else:
            lines.append(f"{a} {b}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def ieee37_graph() -> graph_mod.CommGraph:
    """Adjacency of the IEEE 37 node test feeder, packaged as data."""
    ref = importlib.resources.files("nashflow") / "data" / "ieee37.txt"
    with importlib.resources.as_file(ref) as path:
        comm, _ = load_topology(path)
    return comm


def _graph_from_config(cfg: configparser.ConfigParser,
                       default_nodes: Optional[int] = None):
    if "graph" not in cfg:
        return None
    sec = cfg["graph"]
    if "topology" in sec:
        comm, weights = load_topology(sec["topology"])
        return comm, weights
    try:
        edges = []
        if "edges" in sec:
            for token in sec["edges"].replace(",", " ").split():
                a, _, b = token.partition("-")
                edges.append((int(a), int(b)))
        nodes = sec.getint("nodes", fallback=default_nodes)
        if nodes is None:
            nodes = max(max(e) for e in edges) + 1
        return graph_mod.CommGraph(nodes, tuple(edges)), None
    except ValueError as exc:
        raise ConfigError(f"bad [graph] section: {exc}") from exc


def load_config(path) -> dict:
    """Parse a scenario config file into {section: {key: value}} strings."""
    cfg = configparser.ConfigParser()
    try:
        read = cfg.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not read:
        raise ConfigError(f"config file {path} not found")
    return cfg


_OPF_KEYS = {f.name for f in OpfParams.__dataclass_fields__.values()}
_THERMAL_KEYS = {f.name for f in ThermalParams.__dataclass_fields__.values()}


def scenario_from_config(kind: str, cfg=None, overrides=None, graph=None):
    """Build a named scenario, applying config sections and overrides.

    ``overrides`` maps parameter names to values and wins over the config
    section; unknown keys raise.  ``graph`` is an optional
    (CommGraph, weights) pair taking precedence over any [graph] section.
    """
    overrides = dict(overrides or {})
    if kind == "opf":
        params = OpfParams()
        values = {}
        if cfg is not None and "opf" in cfg:
            values.update(dict(cfg["opf"]))
        values.update({k: v for k, v in overrides.items()})
        unknown = set(values) - _OPF_KEYS
        if unknown:
            raise ConfigError(f"unknown opf keys: {sorted(unknown)}")
        try:
            params = replace(params,
                             **{k: float(v) for k, v in values.items()})
        except ValueError as exc:
            raise ConfigError(f"bad opf value: {exc}") from exc
        pair = graph if graph is not None else \
            (_graph_from_config(cfg) if cfg is not None else None)
        if pair is None:
            comm, weights = graph_mod.path_graph(3), None
        else:
            comm, weights = pair
        return opf_scenario(comm, params, weights)
    if kind == "thermal":
        values = {}
        n_zones = 10
        if cfg is not None and "thermal" in cfg:
            values.update(dict(cfg["thermal"]))
        values.update(overrides)
        unknown = set(values) - _THERMAL_KEYS - {"zones"}
        if unknown:
            raise ConfigError(f"unknown thermal keys: {sorted(unknown)}")
        try:
            if "zones" in values:
                n_zones = int(float(values.pop("zones")))
            params = ThermalParams(
                **{k: float(v) for k, v in values.items()})
        except ValueError as exc:
            raise ConfigError(f"bad thermal value: {exc}") from exc
        pair = graph if graph is not None else \
            (_graph_from_config(cfg, default_nodes=n_zones)
             if cfg is not None else None)
        comm = pair[0] if pair is not None else None
        return thermal_scenario(comm, params, n_zones)
    raise ConfigError(f"unknown scenario kind {kind!r}")


def custom_from_config(cfg) -> CustomScenario:
    if "custom" not in cfg:
        raise ConfigError("config has no [custom] section")
    sec = cfg["custom"]
    try:
        agent_dims = [int(v) for v in parse_vector(sec["agent_dims"])]
        J = parse_matrix(sec["jacobian"])
        b = parse_vector(sec["b"])
        equality = None
        if "equality_matrix" in sec:
            equality = (parse_matrix(sec["equality_matrix"]),
                        parse_vector(sec["equality_offset"]))
        inequality = None
        if "ineq_matrix" in sec:
            inequality = (parse_matrix(sec["ineq_matrix"]),
                          parse_vector(sec["ineq_offset"]))
        bounds = None
        if "lower" in sec:
            lo = parse_vector(sec["lower"])
            hi = parse_vector(sec["upper"])
            bounds = []
            start = 0
            for dim in agent_dims:
                bounds.append((lo[start:start + dim],
                               hi[start:start + dim]))
                start += dim
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad [custom] section: {exc}") from exc
    if J.shape != (sum(agent_dims), sum(agent_dims)):
        raise ConfigError("jacobian shape does not match agent_dims")
    return CustomScenario(agent_dims, J, b, equality, inequality, bounds)


def export_config(scenario, path) -> None:
    """Write the scenario's effective configuration as an INI file."""
    cfg = configparser.ConfigParser()
    cfg["graph"] = {
        "nodes": str(scenario.comm.n_nodes),
        "edges": ", ".join(f"{a}-{b}" for a, b in scenario.comm.edges),
    }
    section = scenario.name
    fields = _OPF_KEYS if scenario.name == "opf" else _THERMAL_KEYS
    cfg[section] = {}
    for name in sorted(fields):
        cfg[section][name] = repr(getattr(scenario.params, name))
    if scenario.name == "thermal":
        cfg[section]["zones"] = str(scenario.comm.n_nodes)
    with open(path, "w", encoding="utf-8") as fh:
        cfg.write(fh)
