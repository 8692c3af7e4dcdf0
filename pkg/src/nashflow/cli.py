"""Command line front end.

Subcommands:
  run              simulate a scenario and write CSV + figures
  verify           monotonicity probe, dependency check, equilibrium check
  oracle           print the exact equilibrium triple
  export-scenario  dump the effective configuration of a scenario

Exit codes: 0 success, 1 a verification check failed, 2 bad usage or
config, 3 the scenario or its controllers cannot be built, 4 the
simulation diverged.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import (backstep, gnep, graph as graph_mod, linctrl, oracle,
               scenarios, sim)

EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_BUILD = 3
EXIT_DIVERGED = 4


class CliError(RuntimeError):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _default_threads() -> int:
    raw = os.environ.get("NASHFLOW_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_scenario_args(p: argparse.ArgumentParser,
                       allow_custom: bool) -> None:
    choices = ["opf", "thermal"] + (["custom"] if allow_custom else [])
    p.add_argument("--scenario", choices=choices, default="opf",
                   help="which case study to build")
    p.add_argument("--config", metavar="FILE",
                   help="INI file with [graph]/[opf]/[thermal]/[custom]")
    p.add_argument("--override", metavar="KEY=VALUE", action="append",
                   default=[], help="scenario parameter override, "
                   "repeatable, wins over the config file")
    p.add_argument("--graph", metavar="SPEC",
                   help="topology override: 'ieee37', 'path:N', or an "
                   "edge list file")


def _parse_overrides(pairs) -> dict:
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise CliError(f"override {item!r} is not KEY=VALUE",
                           EXIT_CONFIG)
        out[key.strip()] = value.strip()
    return out


def _parse_graph(spec):
    if spec is None:
        return None
    if spec == "ieee37":
        return scenarios.ieee37_graph(), None
    if spec.startswith("path:"):
        try:
            n = int(spec.split(":", 1)[1])
        except ValueError:
            raise CliError(f"bad graph spec {spec!r}", EXIT_CONFIG)
        return graph_mod.path_graph(n), None
    return scenarios.load_topology(spec)


def _build(args, allow_custom: bool):
    cfg = scenarios.load_config(args.config) if args.config else None
    overrides = _parse_overrides(args.override)
    if args.scenario == "custom":
        if not allow_custom:
            raise CliError("custom scenarios support only verify/oracle",
                           EXIT_CONFIG)
        if cfg is None:
            raise CliError("--scenario custom requires --config",
                           EXIT_CONFIG)
        if overrides:
            raise CliError("--override does not apply to custom games",
                           EXIT_CONFIG)
        return scenarios.custom_from_config(cfg)
    graph = _parse_graph(args.graph)
    return scenarios.scenario_from_config(args.scenario, cfg, overrides,
                                          graph)


def _reference(scenario):
    res = oracle.solve_ve_active_set(scenario.quad)
    if scenario.name == "opf":
        scenario.steady_state_check(res)
    return res, scenario.equilibrium(res)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def cmd_run(args) -> int:
    scenario = _build(args, allow_custom=False)
    algorithm = scenario.algorithm
    if args.algorithm is not None and args.algorithm != algorithm:
        raise CliError(
            f"scenario {scenario.name!r} runs algorithm {algorithm}, "
            f"not {args.algorithm}", EXIT_CONFIG)
    if args.mode != "z" and algorithm != 2:
        raise CliError("--mode applies only to strict-feedback scenarios",
                       EXIT_CONFIG)
    res, ref = _reference(scenario)
    if algorithm == 1:
        canon = linctrl.design_controllers(
            scenario.net, comm=scenario.comm,
            transforms=scenario.transforms, pole=args.pole,
            margin=args.margin)
        traj = sim.simulate_algorithm1(
            scenario.net, canon, scenario.problem, ref,
            x0=scenario.x0, horizon=args.horizon, h=args.step,
            rate=args.rate, record_every=args.record_every,
            aux_map=scenario.decision_to_aux, threads=args.threads)
    else:
        traj = sim.simulate_algorithm2(
            scenario.problem, scenario.sys, scenario.gains, ref,
            x0=scenario.x0, horizon=args.horizon, h=args.step,
            record_every=args.record_every, mode=args.mode)
    os.makedirs(args.out, exist_ok=True)
    stem = args.stem or scenario.name
    csv_path = os.path.join(args.out, f"{stem}.csv")
    sim.write_csv(traj, csv_path)
    written = [csv_path]
    if not args.no_figures:
        from . import report
        written.extend(report.render_report(traj, args.out, stem))
    metrics = sim.convergence_metrics(traj)
    print("summary: " + " ".join(f"{k}={_fmt(v)}"
                                 for k, v in metrics.items()))
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    scenario = _build(args, allow_custom=True)
    failed = False
    if scenario.name == "custom":
        problem = scenario.problem()
        comm = None
    else:
        problem = scenario.problem
        comm = scenario.comm
    probe = gnep.monotonicity_probe(problem, sample_count=args.samples,
                                    seed=args.seed)
    ok = probe.strictly_monotone
    print(f"monotonicity probe: {'PASS' if ok else 'FAIL'} "
          f"(min ratio {probe.min_ratio:.6g} over "
          f"{probe.samples} pairs)")
    failed |= not ok
    if comm is not None:
        ok = graph_mod.dependency_check(comm, problem)
        print(f"dependency coverage: {'PASS' if ok else 'FAIL'} "
              f"(objective couplings and shared rows against the graph)")
        failed |= not ok
    try:
        quad = scenario.quad() if scenario.name == "custom" \
            else scenario.quad
        res = oracle.solve_ve_active_set(quad)
    except oracle.OracleError as exc:
        print(f"equilibrium: FAIL ({exc})")
        failed = True
    else:
        ok = res.kkt_residual < args.kkt_tol
        print(f"equilibrium: {'PASS' if ok else 'FAIL'} "
              f"(stationarity residual {res.kkt_residual:.3e}, "
              f"{res.candidates_tried} candidate sets)")
        failed |= not ok
        state, info = gnep.run_flow(problem, reference=res.to_state())
        gap = float(np.abs(state.w - res.w).max())
        ok = gap < 1e-3
        print(f"flow vs oracle: {'PASS' if ok else 'FAIL'} "
              f"(gap {gap:.3e}, kkt {info['kkt_residual']:.3e} "
              f"at t={info['t']:g})")
        failed |= not ok
        frac = 1.0 - info["violations"] / max(info["steps"], 1)
        ok = info["violations"] == 0
        print(f"lyapunov monotone fraction: {'PASS' if ok else 'FAIL'} "
              f"({frac:.6f})")
        failed |= not ok
        if scenario.name == "opf":
            residual = scenario.steady_state_check(res)
            print(f"steady-state targets: PASS "
                  f"(plant residual {residual:.3e})")
        elif scenario.name == "thermal":
            violation = backstep.validate_gains(scenario.gains)
            ok = violation is None
            print(f"gain conditions: {'PASS' if ok else 'FAIL'}"
                  + ("" if ok else f" ({violation})"))
            failed |= not ok
            if scenario.comm.n_nodes == 1 and res.active == ():
                pr = scenario.params
                p = float(scenario.p_coef[0])
                closed = (pr.cbar_x * pr.t_ref
                          + pr.cbar_u * pr.disturbance * p) \
                    / (pr.cbar_x + pr.cbar_u * p * p)
                gap = abs(float(res.w[0]) - closed)
                ok = gap < 1e-9
                print(f"single-zone closed form: {'PASS' if ok else 'FAIL'} "
                      f"(|w - closed| = {gap:.3e})")
                failed |= not ok
    print("verify: " + ("FAIL" if failed else "PASS"))
    return EXIT_CHECK_FAILED if failed else 0


def cmd_oracle(args) -> int:
    scenario = _build(args, allow_custom=True)
    quad = scenario.quad() if scenario.name == "custom" else scenario.quad
    res = oracle.solve_ve_active_set(quad)
    print(oracle.format_result(res))
    if scenario.name != "custom":
        ref = scenario.equilibrium(res)
        with np.printoptions(precision=6, suppress=False):
            print(f"plant steady state: {np.ravel(ref.x)}")
            print(f"steady input: {np.ravel(ref.u)}")
    return 0


def cmd_export(args) -> int:
    scenario = _build(args, allow_custom=False)
    scenarios.export_config(scenario, args.out)
    print(f"wrote {args.out}")
    if args.topology_out:
        weights = scenario.weights if scenario.name == "opf" else None
        scenarios.save_topology(args.topology_out, scenario.comm, weights,
                                header=f"{scenario.name} topology, "
                                f"{scenario.comm.n_nodes} nodes")
        print(f"wrote {args.topology_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nashflow",
        description="Equilibrium-tracking controllers for networked "
                    "agents: simulate, verify, and inspect the bundled "
                    "case studies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate and write CSV + figures")
    _add_scenario_args(p, allow_custom=False)
    p.add_argument("--algorithm", type=int, choices=(1, 2),
                   help="must match the scenario's algorithm")
    p.add_argument("--horizon", type=float, default=300.0)
    p.add_argument("--step", type=float, default=1e-3,
                   help="integration step")
    p.add_argument("--rate", type=float, default=1.0,
                   help="decision dynamics gain (linear scenarios)")
    p.add_argument("--record-every", type=int, default=100)
    p.add_argument("--mode", choices=("z", "x"), default="z",
                   help="strict-feedback scenarios: advance the "
                   "transformed cascade or the plant itself")
    p.add_argument("--pole", type=float, default=-1.0,
                   help="closed-loop pole for the linear designs")
    p.add_argument("--margin", type=float, default=1.0,
                   help="additive slack in the gain scale choice")
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help="parallel control evaluations "
                   "(default NASHFLOW_THREADS or 1)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--stem", help="output basename (default: scenario)")
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify",
                       help="probe monotonicity, dependencies, gains, "
                            "and the equilibrium")
    _add_scenario_args(p, allow_custom=True)
    p.add_argument("--samples", type=int, default=200,
                   help="random pairs for the monotonicity probe")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kkt-tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle",
                       help="print the exact equilibrium triple")
    _add_scenario_args(p, allow_custom=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("export-scenario",
                       help="write the effective configuration")
    _add_scenario_args(p, allow_custom=False)
    p.add_argument("--out", required=True, metavar="FILE",
                   help="INI file to write")
    p.add_argument("--topology-out", metavar="FILE",
                   help="also write the edge list")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except scenarios.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (scenarios.ScenarioError, oracle.OracleError,
            linctrl.NotControllableError, linctrl.LyapunovError,
            linctrl.SigmaCertificationError) as exc:
        print(f"build error: {exc}", file=sys.stderr)
        return EXIT_BUILD
    except sim.SimulationBlowUp as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
