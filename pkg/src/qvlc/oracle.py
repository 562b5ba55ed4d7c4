"""Brute-force tradeoff oracle: enumerate every deterministic policy.

Deliberately shares nothing with the LP path beyond the action bounds.
Transitions are built by stepping the queue recursion directly and
stationary laws come from the GTH elimination, not a linear solve.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .lp_tradeoff import TradeoffPoint
from .queue_model import SystemConfig, all_action_bounds, classify_states, deterministic_policy, queue_step

MAX_POLICIES = 10**7


class InstanceTooLarge(ValueError):
    pass


def count_policies(config: SystemConfig) -> int:
    return math.prod(hi - lo + 1 for lo, hi in all_action_bounds(config))


def gth_stationary(P: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman stationary vector of an irreducible row-stochastic matrix."""
    P = np.array(P, dtype=float)
    n = P.shape[0]
    for k in range(n - 1, 0, -1):
        s = P[k, :k].sum()
        P[:k, k] /= s
        P[:k, :k] += np.outer(P[:k, k], P[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ P[:k, k]
    return pi / pi.sum()


def _row_matrix(actions, config: SystemConfig) -> np.ndarray:
    n = config.Q + 1
    P = np.zeros((n, n))
    for q, s in enumerate(actions):
        P[q, queue_step(q, s, config.A, config.Q)] += config.alpha
        P[q, queue_step(q, s, 0, config.Q)] += 1.0 - config.alpha
    return P


def policy_points(actions, config: SystemConfig) -> list:
    """One ``(power, delay, recurrent_class)`` per recurrent class of a deterministic policy."""
    P = _row_matrix(actions, config)
    powers = config.powers
    out = []
    for cls in classify_states(P.T).recurrent:
        pi = gth_stationary(P[np.ix_(cls, cls)])
        cls_arr = np.asarray(cls)
        power = float(pi @ powers[np.asarray(actions)[cls_arr]])
        delay = float(pi @ cls_arr) / (config.A * config.alpha)
        out.append((power, delay, tuple(cls)))
    return out


def lower_envelope(points, atol: float = 1e-12) -> list:
    """Vertices of the decreasing, convex lower-left boundary of a point cloud.

    Starts at the lowest-delay point among the minimum-power ones and ends at
    the lowest-power point among the minimum-delay ones.
    """
    pts = sorted(set((float(p), float(d)) for p, d in points))
    p_lo = pts[0][0]
    d_lo = min(d for _, d in pts)
    scale_p = max(abs(p) for p, _ in pts) or 1.0
    scale_d = max(abs(d) for _, d in pts) or 1.0
    start = min((p for p in pts if p[0] <= p_lo + atol * scale_p), key=lambda t: t[1])
    end = min((p for p in pts if p[1] <= d_lo + atol * scale_d), key=lambda t: t[0])
    cand = [p for p in pts if start[0] <= p[0] <= end[0]]
    hull = []
    for p in cand:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            cross = ((x2 - x1) / scale_p) * ((p[1] - y1) / scale_d) - ((y2 - y1) / scale_d) * ((p[0] - x1) / scale_p)
            if cross <= atol:
                hull.pop()
            else:
                break
        hull.append(p)
    # drop anything left of start or past end that slipped through
    i0 = hull.index(start) if start in hull else 0
    i1 = hull.index(end) if end in hull else len(hull) - 1
    return hull[i0 : i1 + 1]


def brute_force_tradeoff(config: SystemConfig, max_policies: int = MAX_POLICIES):
    """All achievable deterministic points plus their lower convex envelope.

    Returns ``(points, envelope)`` where ``points`` is a list of
    :class:`TradeoffPoint` (one per policy and recurrent class) and
    ``envelope`` a list of ``(power, delay)`` vertices.
    """
    n = count_policies(config)
    if n > max_policies:
        raise InstanceTooLarge(f"{n} deterministic policies exceed the limit of {max_policies}")
    ranges = [range(lo, hi + 1) for lo, hi in all_action_bounds(config)]
    points = []
    for actions in itertools.product(*ranges):
        for power, delay, _ in policy_points(actions, config):
            points.append(TradeoffPoint(power, delay, deterministic_policy(actions, config)))
    envelope = lower_envelope([(p.avg_power, p.avg_delay) for p in points])
    return points, envelope
