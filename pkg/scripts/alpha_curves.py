"""Delay-power curves of the Table 1 system for several arrival probabilities.

Writes one CSV per alpha (budget, delay in slots and ms) plus a vertex CSV,
and reports the power ratio between the last two alphas at a fixed delay.
"""
import argparse
import csv
from pathlib import Path

from qvlc import PowerTable, SystemConfig, tradeoff_curve

TABLE1_POWERS = (0.0, 2.59e-7, 4.355e-7, 6.038e-7)
SLOT_MS = 0.125


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.5, 0.6])
    ap.add_argument("--Q", type=int, default=7)
    ap.add_argument("--grid", type=int, default=200)
    ap.add_argument("--delay-ms", type=float, default=0.25, help="delay level for the power ratio")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    curves = {}
    for alpha in args.alphas:
        config = SystemConfig(A=1, alpha=alpha, Q=args.Q, power_table=PowerTable.explicit(TABLE1_POWERS))
        curve = tradeoff_curve(config, grid_points=args.grid)
        curves[alpha] = curve
        with open(out / f"curve_alpha{alpha:g}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p_th_watts", "delay_slots", "delay_ms"])
            for pt in curve.samples:
                w.writerow([f"{pt.p_th:.12g}", f"{pt.avg_delay:.12g}", f"{pt.avg_delay * SLOT_MS:.12g}"])
        with open(out / f"vertices_alpha{alpha:g}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["power_watts", "delay_slots", "delay_ms", "q_star"])
            for v in curve.vertices:
                w.writerow([f"{v.avg_power:.12g}", f"{v.avg_delay:.12g}", f"{v.avg_delay * SLOT_MS:.12g}",
                            v.threshold.q_star if v.threshold else ""])
        print(f"alpha={alpha:g}: p_min={curve.p_min:.6e} W, d_min={curve.d_min:.4f} slots, "
              f"{len(curve.vertices)} vertices")

    if len(args.alphas) >= 2:
        a0, a1 = args.alphas[-2], args.alphas[-1]
        d = args.delay_ms / SLOT_MS
        ratio = curves[a1].power_at(d) / curves[a0].power_at(d)
        print(f"power ratio alpha={a1:g} / alpha={a0:g} at {args.delay_ms:g} ms: {ratio:.4f}")
    print(f"CSV written to {out}/")


if __name__ == "__main__":
    main()
