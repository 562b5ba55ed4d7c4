"""Finite-blocklength transmit power for a batch of ``s`` packets.

The normal approximation ties the number of packets ``s`` that fit in one
slot (blocklength ``T*B*s``) to the per-RB SNR ``gamma``.  Inverting that
relation gives the minimum power ``P(s) = N0 * B * s * gamma*(s)``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc, log_ndtr

LN2 = math.log(2.0)


class PowerModelError(ValueError):
    """Raised when a power table breaks one of its structural invariants."""


@dataclass(frozen=True)
class CodingParams:
    slot_duration_T: float
    bandwidth_B: float
    packet_bits_L: float
    error_prob_eps: float
    noise_density_N0: float
    max_batch_S: int

    def __post_init__(self):
        for name in ("slot_duration_T", "bandwidth_B", "packet_bits_L", "noise_density_N0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0.0 < self.error_prob_eps < 0.5:
            raise ValueError(f"error_prob_eps must lie in (0, 0.5), got {self.error_prob_eps!r}")
        if int(self.max_batch_S) != self.max_batch_S or self.max_batch_S < 0:
            raise ValueError(f"max_batch_S must be a nonnegative integer, got {self.max_batch_S!r}")

    @property
    def BT(self) -> float:
        return self.bandwidth_B * self.slot_duration_T

    @property
    def snr_floor(self) -> float:
        """Smallest admissible SNR, ``2**(L/BT) - 1``."""
        return math.expm1(self.packet_bits_L / self.BT * LN2)


class PowerSource(enum.Enum):
    ANALYTIC = "analytic"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class PowerTable:
    powers: tuple
    gammas: tuple = field(default=())
    source: PowerSource = PowerSource.EXPLICIT

    def __post_init__(self):
        powers = tuple(float(p) for p in self.powers)
        object.__setattr__(self, "powers", powers)
        if not self.gammas:
            object.__setattr__(self, "gammas", (0.0,) * len(powers))
        else:
            object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if len(powers) == 0:
            raise PowerModelError("power table must contain at least P(0)")
        if len(self.gammas) != len(powers):
            raise PowerModelError("gammas and powers must have the same length")
        if powers[0] != 0.0:
            raise PowerModelError(f"P(0) must be exactly 0, got {powers[0]!r}")
        for s in range(1, len(powers)):
            if not powers[s] > powers[s - 1]:
                raise PowerModelError(f"powers must be strictly increasing; fails at s={s}")
        bad = per_packet_violations(powers)
        if bad:
            msg = f"per-packet power P(s)/s is not strictly decreasing at s={bad}"
            if self.source is PowerSource.ANALYTIC:
                raise PowerModelError(msg)
            warnings.warn(msg, stacklevel=3)

    @property
    def S(self) -> int:
        return len(self.powers) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.powers, dtype=float)

    @classmethod
    def explicit(cls, powers) -> "PowerTable":
        return cls(tuple(powers), source=PowerSource.EXPLICIT)


def gaussian_q(x: float) -> float:
    """Gaussian tail probability ``Q(x) = P(Z > x)``."""
    return 0.5 * float(erfc(x / math.sqrt(2.0)))


def inverse_q(p: float) -> float:
    """Solve ``Q(x) = p`` by bracketed root finding on ``log Q``.

    Working in log space keeps the relative accuracy in the deep tail
    (``p = 1e-7`` and below) where ``Q`` itself underflows toward 0.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"inverse_q needs 0 < p < 1, got {p!r}")
    if p == 0.5:
        return 0.0
    target = math.log(p)
    return brentq(lambda x: float(log_ndtr(-x)) - target, -40.0, 40.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def achievable_packets(s: int, gamma: float, params: CodingParams) -> float:
    """Packets deliverable in one slot with ``s`` RBs at per-RB SNR ``gamma``.

    Can be negative for small ``gamma``; the dispersion penalty dominates there.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    n = params.BT * s
    dispersion = math.sqrt(gamma * (2.0 + gamma) / (n * (1.0 + gamma) ** 2))
    return n / (params.packet_bits_L * LN2) * (math.log1p(gamma) - dispersion * inverse_q(params.error_prob_eps))


def batch_size_for_snr(gamma: float, params: CodingParams) -> float:
    """Batch size ``s(gamma)`` from the parametric form; decreasing in gamma."""
    rate_gap = math.log1p(gamma) - params.packet_bits_L / params.BT * LN2
    qinv = inverse_q(params.error_prob_eps)
    return gamma * (gamma + 2.0) / (rate_gap**2 * (1.0 + gamma) ** 2) * qinv**2 / params.BT


def solve_gamma_for_batch(s: int, params: CodingParams, rtol: float = 1e-9) -> float:
    if s < 1:
        raise ValueError("s must be >= 1")
    floor = params.snr_floor
    lo = floor * (1.0 + 1e-12)
    hi = max(10.0, 2.0 * floor + 1.0)
    while batch_size_for_snr(hi, params) >= s:
        hi *= 2.0
    if hi <= lo:
        raise RuntimeError("could not bracket the SNR root")
    # s(gamma) is decreasing: s(lo) > s > s(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if batch_size_for_snr(mid, params) > s:
            lo = mid
        else:
            hi = mid
    gamma = 0.5 * (lo + hi)
    resid = abs(batch_size_for_snr(gamma, params) - s)
    if resid > rtol * s:
        raise RuntimeError(f"SNR root residual {resid:g} exceeds tolerance for s={s}")
    return gamma


def power_for_batch(s: int, params: CodingParams) -> float:
    if s < 0:
        raise ValueError("s must be >= 0")
    if s == 0:
        return 0.0
    return params.noise_density_N0 * params.bandwidth_B * s * solve_gamma_for_batch(s, params)


def per_packet_violations(powers) -> list:
    """Batch sizes where ``P(s)/s`` fails to drop below ``P(s-1)/(s-1)``."""
    return [s for s in range(2, len(powers)) if not powers[s] / s < powers[s - 1] / (s - 1)]


def concavity_violations(powers, rtol: float = 1e-12) -> list:
    """Interior points where ``P(s+1) - P(s) > P(s) - P(s-1)``."""
    scale = max(abs(p) for p in powers) if len(powers) else 0.0
    return [
        s
        for s in range(1, len(powers) - 1)
        if powers[s + 1] - powers[s] > powers[s] - powers[s - 1] + rtol * scale
    ]


def build_power_table(params: CodingParams) -> PowerTable:
    S = int(params.max_batch_S)
    gammas = [0.0] + [solve_gamma_for_batch(s, params) for s in range(1, S + 1)]
    powers = [0.0] + [params.noise_density_N0 * params.bandwidth_B * s * gammas[s] for s in range(1, S + 1)]
    table = PowerTable(tuple(powers), tuple(gammas), PowerSource.ANALYTIC)
    bad = concavity_violations(table.powers)
    if bad:
        warnings.warn(f"analytic power table is not concave at s={bad}", stacklevel=2)
    return table
