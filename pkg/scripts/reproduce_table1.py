"""Find the budget at which the optimal policy randomises 50/50 at q=2 and print it.

Usage: python scripts/reproduce_table1.py [--alpha 0.5]
"""
import argparse

from qvlc import PowerTable, SystemConfig, tradeoff_curve
from qvlc.lp_tradeoff import bisect_budget_for_mix
from qvlc.queue_model import action_bounds, policy_to_degenerate

TABLE1_POWERS = (0.0, 2.59e-7, 4.355e-7, 6.038e-7)
SLOT_MS = 0.125


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--Q", type=int, default=7)
    args = ap.parse_args()

    config = SystemConfig(A=1, alpha=args.alpha, Q=args.Q, power_table=PowerTable.explicit(TABLE1_POWERS))
    verts = tradeoff_curve(config).vertices
    print("curve vertices:")
    for v in verts:
        print(f"  P={v.avg_power:.6e} W  D={v.avg_delay:.6f} slots  q*={v.threshold.q_star}")
    # the q*=2 mix lives on the segment between the q*=3 and q*=2 deterministic vertices
    left = next(v for v in verts if v.threshold.q_star == 3)
    right = next(v for v in verts if v.threshold.q_star == 2)
    pt = bisect_budget_for_mix(config, 2, 0.5, left.avg_power, right.avg_power)

    print(f"\np_th = {pt.p_th:.10e} W, delay = {pt.avg_delay:.6f} slots = {pt.avg_delay * SLOT_MS:.6f} ms")
    print(f"{'q':>3} {'s_min':>6} {'s_max':>6} {'f_min':>8} {'f_max':>8}")
    pairs = policy_to_degenerate(pt.policy, config)
    for q, (fmax, fmin) in enumerate(pairs):
        lo, hi = action_bounds(q, config)
        if lo == hi:  # single action; report it as s_min like the published table
            fmin, fmax = 1.0, 0.0
        print(f"{q:>3} {lo:>6} {hi:>6} {fmin:>8.4f} {fmax:>8.4f}")
    print(f"threshold q* = {pt.threshold.q_star}, mix_min = {pt.threshold.mix_min:.6f}")


if __name__ == "__main__":
    main()
