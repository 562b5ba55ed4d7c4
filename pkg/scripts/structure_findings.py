"""Count random instances where the extreme-action or threshold structure loses optimality.

For each instance the full LP (exact optimum, checked against brute force)
is compared with the LP restricted to s_min/s_max, and every optimal
policy on a budget grid is tested for threshold form on its recurrent states.
"""
import argparse

import numpy as np

from qvlc import PowerTable, SystemConfig, tradeoff_curve
from qvlc.lp_tradeoff import build_degenerate_lp, build_full_lp, solve_lp, solve_tradeoff
from qvlc.oracle import brute_force_tradeoff


def concave_powers(rng, S):
    incs = np.sort(rng.uniform(0.2, 2.0, size=S))[::-1] + np.linspace(0.01 * S, 0.0, S)
    return tuple(np.concatenate([[0.0], np.cumsum(incs)]))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--grid", type=int, default=25)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    stats = {1: [0, 0, 0], 2: [0, 0, 0]}  # A -> [instances, extreme-action gap, non-threshold optimum]
    oracle_mismatch = 0
    for _ in range(args.n):
        A = int(rng.integers(1, 3))
        S = int(rng.integers(A, 4))
        Q = int(rng.integers(max(A, 2), 6))
        alpha = float(rng.uniform(0.2, 0.8))
        c = SystemConfig(A=A, alpha=alpha, Q=Q, power_table=PowerTable.explicit(concave_powers(rng, S)))
        curve = tradeoff_curve(c)
        _, env = brute_force_tradeoff(c)
        verts = [(v.avg_power, v.avg_delay) for v in curve.vertices]
        if len(verts) != len(env) or np.abs(np.subtract(verts, env)).max() > 1e-9:
            oracle_mismatch += 1
        grid = np.linspace(curve.p_min * (1 + 1e-12), curve.vertices[-1].avg_power, args.grid)
        gap = max(solve_lp(build_degenerate_lp(c, p)).avg_delay - solve_lp(build_full_lp(c, p)).avg_delay for p in grid)
        non_thr = any(solve_tradeoff(c, p).threshold is None for p in grid)
        st = stats[A]
        st[0] += 1
        st[1] += gap > 1e-9
        st[2] += non_thr
    print(f"full-LP curve vs brute force: {oracle_mismatch} mismatches in {args.n} instances")
    for A, (n, gap, thr) in stats.items():
        print(f"A={A}: {n} instances, {gap} with an extreme-action gap, {thr} with a non-threshold optimum")


if __name__ == "__main__":
    main()
