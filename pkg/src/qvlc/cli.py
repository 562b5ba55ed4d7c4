"""``qvlc`` command-line front end.

Exit codes: 0 success, 1 validation error, 2 infeasible budget, 3 failed check.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .fbl_power import concavity_violations, per_packet_violations
from .lp_tradeoff import InfeasibleError, min_feasible_power, solve_tradeoff, tradeoff_curve
from .oracle import MAX_POLICIES, InstanceTooLarge, brute_force_tradeoff
from .queue_model import (
    PolicyError,
    average_delay,
    average_power,
    classify_states,
    policy_to_degenerate,
    stationary_distribution,
    transition_matrix,
)
from .simulator import SimulationSpec, batch_simulate

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_FAILED = 0, 1, 2, 3
VERIFY_TOL = 1e-9


def fmt(x) -> str:
    return "" if x is None else f"{x:.12g}"


def _echo_conversions(cfg: RunConfig) -> None:
    for path, raw, si in cfg.conversions:
        print(f"# {path}: {raw!r} -> {si:.12g} (SI)")


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def cmd_power_table(cfg: RunConfig, args) -> int:
    if cfg.coding is None:
        raise ConfigError("coding", "power-table needs a 'coding' block")
    table = cfg.power_table
    print(f"{'s':>3} {'gamma':>16} {'P_watts':>20} {'P_per_packet':>20}")
    rows = []
    for s, (p, g) in enumerate(zip(table.powers, table.gammas)):
        per = p / s if s else None
        print(f"{s:>3} {fmt(g if s else None):>16} {fmt(p):>20} {fmt(per):>20}")
        rows.append({"s": s, "gamma": g if s else None, "power_watts": p, "power_per_packet": per})
    concave = not concavity_violations(table.powers)
    per_packet = not per_packet_violations(table.powers)
    print(f"# concave: {'yes' if concave else 'NO'}; per-packet power decreasing: {'yes' if per_packet else 'NO'}")
    if args.out:
        _write_json(args.out, {"rows": rows, "concave": concave, "per_packet_decreasing": per_packet})
    return EXIT_OK


def policy_report(cfg: RunConfig, policy, p_th=None) -> dict:
    system = cfg.system
    tm = transition_matrix(policy, system)
    classes = classify_states(tm)
    pi = stationary_distribution(tm)
    delay = average_delay(pi, system)
    report = {
        "p_th_watts": p_th,
        "delay_slots": delay,
        "delay_ms": cfg.delay_ms(delay),
        "power_watts": average_power(policy, pi, system),
        "policy": np.asarray(policy).tolist(),
        "stationary": pi.tolist(),
        "recurrent_classes": classes.recurrent,
        "transient_states": classes.transient,
    }
    try:
        report["degenerate"] = policy_to_degenerate(policy, system).tolist()
    except PolicyError:
        report["degenerate"] = None
    return report


def cmd_solve(cfg: RunConfig, args) -> int:
    p_th = args.p_th if args.p_th is not None else cfg.p_th
    if p_th is None:
        raise ConfigError("solve.p_th", "no budget given (use --p-th or solve.p_th)")
    try:
        point = solve_tradeoff(cfg.system, p_th)
    except InfeasibleError as exc:
        print(f"infeasible: p_th={p_th:.12g} W < p_min={exc.p_min:.12g} W", file=sys.stderr)
        return EXIT_INFEASIBLE
    report = policy_report(cfg, point.policy, p_th)
    report["lp_delay_slots"] = point.avg_delay
    report["threshold"] = None if point.threshold is None else vars(point.threshold)
    report["p_min_watts"] = min_feasible_power(cfg.system)

    print(f"p_th           {fmt(p_th)} W  (p_min {fmt(report['p_min_watts'])} W)")
    print(f"optimal delay  {fmt(report['delay_slots'])} slots" +
          ("" if report["delay_ms"] is None else f"  = {fmt(report['delay_ms'])} ms"))
    print(f"average power  {fmt(report['power_watts'])} W")
    if point.threshold is not None:
        print(f"threshold      q* = {point.threshold.q_star}, weight on s_min at q* = {fmt(point.threshold.mix_min)}")
    else:
        print("threshold      none (policy is not of threshold form)")
    print(f"recurrent      {report['recurrent_classes']}  transient {report['transient_states']}")
    print("policy f[q, s] (rows q, columns s):")
    for q, row in enumerate(point.policy):
        print(f"  q={q:<3} " + " ".join(f"{v:8.4f}" for v in row) + f"   pi={report['stationary'][q]:.6f}")
    if report["degenerate"] is not None:
        print("degenerate (f_max, f_min): " + ", ".join(f"({a:.4g}, {b:.4g})" for a, b in report["degenerate"]))
    if args.out:
        _write_json(args.out, report)
    return EXIT_OK


def cmd_curve(cfg: RunConfig, args) -> int:
    grid = cfg.sweep.get("grid_points", 50)
    curve = tradeoff_curve(cfg.system, grid_points=grid, p_min=cfg.sweep.get("p_min"), p_max=cfg.sweep.get("p_max"))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p_th_watts", "delay_slots", "delay_ms", "q_star", "mix_min"])
        for pt in curve.samples:
            th = pt.threshold
            w.writerow([fmt(pt.p_th), fmt(pt.avg_delay), fmt(cfg.delay_ms(pt.avg_delay)),
                        "" if th is None else th.q_star, "" if th is None else fmt(th.mix_min)])
    print(f"p_min {fmt(curve.p_min)} W, d_min {fmt(curve.d_min)} slots, {len(curve.vertices)} vertices")
    for v in curve.vertices:
        th = "" if v.threshold is None else f"  q*={v.threshold.q_star} mix={fmt(v.threshold.mix_min)}"
        print(f"  P={fmt(v.avg_power)} W  D={fmt(v.avg_delay)} slots{th}")
    if args.vertices:
        _write_json(args.vertices, {
            "p_min_watts": curve.p_min,
            "d_min_slots": curve.d_min,
            "vertices": [{
                "power_watts": v.avg_power,
                "delay_slots": v.avg_delay,
                "delay_ms": cfg.delay_ms(v.avg_delay),
                "threshold": None if v.threshold is None else vars(v.threshold),
                "policy": v.policy.tolist(),
            } for v in curve.vertices],
        })
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args) -> int:
    if args.policy:
        doc = json.loads(Path(args.policy).read_text())
        policy = np.asarray(doc["policy"], dtype=float)
    elif cfg.p_th is not None:
        try:
            policy = solve_tradeoff(cfg.system, cfg.p_th).policy
        except InfeasibleError as exc:
            print(f"infeasible: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
    else:
        raise ConfigError("solve.p_th", "simulate needs --policy or solve.p_th")
    sim = cfg.sim
    spec = SimulationSpec(
        n_slots=sim.get("n_slots", 1_000_000),
        seed=sim.get("seed", 0),
        warmup_slots=sim.get("warmup", -1),
        initial_q=sim.get("initial_q", 0),
    )
    res = batch_simulate(policy, cfg.system, spec, sim.get("replicas", 16))
    ana = policy_report(cfg, policy)
    ok_d = abs(res.little_delay - ana["delay_slots"]) <= 3 * res.stderr_delay
    ok_p = abs(res.mean_power - ana["power_watts"]) <= 3 * res.stderr_power
    print(f"{'':14}{'analytical':>20}{'simulated':>20}{'stderr':>14}  verdict")
    print(f"{'delay_slots':14}{fmt(ana['delay_slots']):>20}{fmt(res.little_delay):>20}{res.stderr_delay:>14.3g}  "
          f"{'PASS' if ok_d else 'FAIL'}")
    print(f"{'power_watts':14}{fmt(ana['power_watts']):>20}{fmt(res.mean_power):>20}{res.stderr_power:>14.3g}  "
          f"{'PASS' if ok_p else 'FAIL'}")
    print(f"# FIFO sojourn delay {fmt(res.sojourn_delay)} +- {res.stderr_sojourn:.3g} slots; "
          f"{res.n_replicas} replicas x {spec.n_slots} slots, seed {spec.seed}")
    return EXIT_OK if ok_d and ok_p else EXIT_FAILED


def cmd_verify(cfg: RunConfig, args) -> int:
    try:
        _, envelope = brute_force_tradeoff(cfg.system, max_policies=args.max_policies)
    except InstanceTooLarge as exc:
        print(f"too large: {exc}", file=sys.stderr)
        return EXIT_INVALID
    curve = tradeoff_curve(cfg.system)
    verts = [(v.avg_power, v.avg_delay) for v in curve.vertices]
    if len(verts) != len(envelope):
        print(f"FAIL: {len(verts)} curve vertices vs {len(envelope)} envelope vertices")
        return EXIT_FAILED
    dev = max(max(abs(a[0] - b[0]), abs(a[1] - b[1])) for a, b in zip(verts, envelope))
    verdict = dev <= VERIFY_TOL
    print(f"{len(verts)} vertices, max deviation {dev:.3g} -> {'PASS' if verdict else 'FAIL'}")
    return EXIT_OK if verdict else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qvlc", description="Queue-aware variable-length coding tradeoffs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("power-table", help="finite-blocklength power per batch size")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_power_table)

    p = sub.add_parser("solve", help="delay-optimal policy at one power budget")
    p.add_argument("--config", required=True)
    p.add_argument("--p-th", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("curve", help="optimal delay-power tradeoff curve")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vertices")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("simulate", help="Monte-Carlo check of a policy")
    p.add_argument("--config", required=True)
    p.add_argument("--policy")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="compare the curve to brute-force enumeration")
    p.add_argument("--config", required=True)
    p.add_argument("--max-policies", type=int, default=MAX_POLICIES)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            cfg = load_config(args.config, need_system=args.command != "power-table")
        _echo_conversions(cfg)
        return args.func(cfg, args)
    except (ConfigError, PolicyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
