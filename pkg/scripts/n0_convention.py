"""Compare the analytic power table with the published watt values.

Tries several readings of the -150 dBm noise figure and shows that none
reproduces the published shape: the ratios P(2)/P(1) and P(3)/P(1) do not
depend on N0 at all, so no scale convention can close the gap.
"""
import math

import numpy as np
from scipy.optimize import least_squares

from qvlc import CodingParams, build_power_table, inverse_q

PUBLISHED = np.array([2.59e-7, 4.355e-7, 6.038e-7])
BASE = dict(slot_duration_T=0.125e-3, bandwidth_B=1440e3, packet_bits_L=256, error_prob_eps=1e-7, max_batch_S=3)


def table(n0):
    return np.array(build_power_table(CodingParams(noise_density_N0=n0, **BASE)).powers[1:])


def main():
    B, T = BASE["bandwidth_B"], BASE["slot_duration_T"]
    readings = {
        "-150 dBm/Hz density": 1e-18,
        "-150 dBm per RB (divide by B)": 1e-18 / B,
        "-150 dBm per RB per slot (divide by BT)": 1e-18 / (B * T),
        "-150 dBW/Hz density": 1e-15,
    }
    print(f"published     : {PUBLISHED}  ratios {PUBLISHED[1] / PUBLISHED[0]:.4f} {PUBLISHED[2] / PUBLISHED[0]:.4f}")
    for name, n0 in readings.items():
        p = table(n0)
        print(f"{name:40s}: {p}  ratios {p[1] / p[0]:.4f} {p[2] / p[0]:.4f}")
    best = PUBLISHED[0] / table(1.0)[0]
    print(f"N0 that matches P(1) alone: {best:.4e} W/Hz ({10 * math.log10(best) + 30:.2f} dBm/Hz)")

    # which (L ln2 / BT, Q^-1(eps)^2 / BT) pair would reproduce all three values?
    def model(theta, s):
        rate, disp = theta

        def s_of(g):
            return g * (g + 2) / ((math.log1p(g) - rate) ** 2 * (1 + g) ** 2) * disp

        lo, hi = math.expm1(rate) * (1 + 1e-12), 50.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if s_of(mid) > s else (lo, mid)
        return s * 0.5 * (lo + hi)

    def resid(x):
        rate, disp, scale = x
        return [model((rate, disp), s) * scale / PUBLISHED[s - 1] - 1 for s in (1, 2, 3)]

    rate0 = BASE["packet_bits_L"] * math.log(2) / (B * T)
    disp0 = inverse_q(BASE["error_prob_eps"]) ** 2 / (B * T)
    fit = least_squares(resid, [rate0, disp0, PUBLISHED[0] / model((rate0, disp0), 1)],
                        bounds=([1e-3, 1e-4, 0], [5, 5, np.inf]))
    print(f"nominal L ln2/BT = {rate0:.4f}, Q^-1^2/BT = {disp0:.4f}")
    print(f"fitted  L ln2/BT = {fit.x[0]:.4f}, Q^-1^2/BT = {fit.x[1]:.4f}, max rel residual {np.abs(fit.fun).max():.2e}")


if __name__ == "__main__":
    main()
