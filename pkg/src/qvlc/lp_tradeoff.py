"""Delay-power tradeoff via occupation-measure linear programs.

Variables are stationary frequencies ``x[q, s] = f[q, s] * pi[q]``.  The full
LP carries one variable per feasible ``(q, s)``; the degenerate LP keeps only
the two extreme actions ``s_min(q)``, ``s_max(q)`` per state.

Power enters every LP rescaled by ``max(P)`` so that solver tolerances are
meaningful when powers are of order 1e-7 W.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .queue_model import (
    NotUnichain,
    SystemConfig,
    action_bounds,
    all_action_bounds,
    classify_states,
    evaluate_policy,
    feasible_pairs,
    policy_to_degenerate,
    transition_matrix,
)

log = logging.getLogger(__name__)

_HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
_PI_TOL = 1e-12


class InfeasibleError(RuntimeError):
    def __init__(self, p_th: float, p_min: Optional[float] = None):
        self.p_th, self.p_min = p_th, p_min
        msg = f"power budget {p_th:.6g} W is infeasible"
        if p_min is not None:
            msg += f" (minimum stabilising power {p_min:.12g} W)"
        super().__init__(msg)


class NotThresholdForm(ValueError):
    def __init__(self, states):
        self.states = list(states)
        super().__init__(f"policy is not of threshold form; offending states {self.states}")


@dataclass
class LPInstance:
    """A small dense LP ``min c.x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, x >= 0``."""

    config: SystemConfig
    kind: str
    variables: list
    delay_coef: np.ndarray
    power_coef: np.ndarray  # in units of power_scale
    power_scale: float
    A_eq: np.ndarray
    b_eq: np.ndarray
    p_th: Optional[float] = None
    c: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.c is None:
            self.c = self.delay_coef.copy()

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return self.A_eq.shape[0] + (0 if self.p_th is None else 1)

    def with_objective(self, delay_weight: float = 1.0, power_weight: float = 0.0) -> "LPInstance":
        """Same feasible set, objective ``delay_weight*D + power_weight*P/power_scale``."""
        c = delay_weight * self.delay_coef + power_weight * self.power_coef
        return LPInstance(self.config, self.kind, self.variables, self.delay_coef, self.power_coef,
                          self.power_scale, self.A_eq, self.b_eq, self.p_th, c)

    def with_budget(self, p_th: Optional[float]) -> "LPInstance":
        return LPInstance(self.config, self.kind, self.variables, self.delay_coef, self.power_coef,
                          self.power_scale, self.A_eq, self.b_eq, p_th, self.c)


@dataclass
class LPSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    occupation: Optional[np.ndarray] = None
    avg_power: Optional[float] = None
    avg_delay: Optional[float] = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class ThresholdDescriptor:
    q_star: int
    mix_min: float


@dataclass
class TradeoffPoint:
    avg_power: float
    avg_delay: float
    policy: Optional[np.ndarray] = None
    threshold: Optional[ThresholdDescriptor] = None
    p_th: Optional[float] = None


@dataclass
class TradeoffCurve:
    vertices: list
    p_min: float
    d_min: float
    samples: list = field(default_factory=list)

    def delay_at(self, p: float) -> float:
        """Optimal delay at budget ``p`` by interpolating the vertices."""
        ps = [v.avg_power for v in self.vertices]
        ds = [v.avg_delay for v in self.vertices]
        if p < ps[0] * (1 - 1e-12) - 1e-300:
            raise InfeasibleError(p, ps[0])
        return float(np.interp(p, ps, ds))

    def power_at(self, d: float) -> float:
        """Smallest budget achieving delay ``d`` (inverse of :meth:`delay_at`)."""
        ps = [v.avg_power for v in self.vertices][::-1]
        ds = [v.avg_delay for v in self.vertices][::-1]
        if d < ds[0] - 1e-12:
            raise ValueError(f"delay {d} below d_min {ds[0]}")
        return float(np.interp(d, ds, ps))

    def slopes(self) -> np.ndarray:
        p = np.array([v.avg_power for v in self.vertices])
        d = np.array([v.avg_delay for v in self.vertices])
        return np.diff(d) / np.diff(p)


def _power_scale(config: SystemConfig) -> float:
    pmax = float(config.powers.max())
    return pmax if pmax > 0 else 1.0


def _balance_rows(config: SystemConfig, variables) -> np.ndarray:
    """Node balance: inflow to q minus occupation of q, one row per q."""
    A, a = config.A, config.alpha
    rows = np.zeros((config.Q + 1, len(variables)))
    for k, (i, s) in enumerate(variables):
        rows[i - s + A, k] += a
        rows[i - s, k] += 1.0 - a
        rows[i, k] -= 1.0
    return rows


def _finish(config, kind, variables, A_eq, b_eq, p_th) -> LPInstance:
    scale = _power_scale(config)
    q = np.array([v[0] for v in variables], dtype=float)
    s = np.array([v[1] for v in variables], dtype=int)
    delay = q / config.arrival_rate
    power = config.powers[s] / scale
    return LPInstance(config, kind, list(variables), delay, power, scale, A_eq, b_eq, p_th)


def build_full_lp(config: SystemConfig, p_th: Optional[float] = None) -> LPInstance:
    """Occupation-measure LP over every feasible ``(q, s)``; ``p_th=None`` drops the budget."""
    if p_th is not None and p_th < 0:
        raise ValueError("p_th must be nonnegative")
    variables = feasible_pairs(config)
    A_eq = np.vstack([_balance_rows(config, variables), np.ones((1, len(variables)))])
    b_eq = np.zeros(A_eq.shape[0])
    b_eq[-1] = 1.0
    return _finish(config, "full", variables, A_eq, b_eq, p_th)


def degenerate_variables(config: SystemConfig) -> list:
    """``(q, s_max)`` then ``(q, s_min)`` per state, merged when they coincide."""
    out = []
    for q, (lo, hi) in enumerate(all_action_bounds(config)):
        out.append((q, hi))
        if lo != hi:
            out.append((q, lo))
    return out


def _cut_rows(config: SystemConfig, variables) -> np.ndarray:
    """Flow balance across each cut ``{0..q} | {q+1..Q}`` for ``q = 0..Q-1``.

    Row ``q`` is (upward flow) - (downward flow) = 0.  Split by region this
    gives three families: for ``q < A`` every arrival below the cut crosses
    upward; for ``A <= q < Q-A`` only ``s_min`` moves mass up; for
    ``q >= Q-A`` idle-arrival ``s_min`` moves also cross downward.
    """
    A, a = config.A, config.alpha
    rows = np.zeros((config.Q, len(variables)))
    for k, (i, s) in enumerate(variables):
        for prob, dest in ((a, i - s + A), (1.0 - a, i - s)):
            if dest > i:
                rows[i:dest, k] += prob
            elif dest < i:
                rows[dest:i, k] -= prob
    return rows


def build_degenerate_lp(config: SystemConfig, p_th: Optional[float] = None) -> LPInstance:
    if p_th is not None and p_th < 0:
        raise ValueError("p_th must be nonnegative")
    variables = degenerate_variables(config)
    A_eq = np.vstack([_cut_rows(config, variables), np.ones((1, len(variables)))])
    b_eq = np.zeros(A_eq.shape[0])
    b_eq[-1] = 1.0
    return _finish(config, "degenerate", variables, A_eq, b_eq, p_th)


def solve_lp(lp: LPInstance, extra_ub=None) -> LPSolution:
    """Solve with HiGHS dual simplex, which returns basic (vertex) solutions.

    ``extra_ub`` is an optional ``(row, rhs)`` pair appended to the
    inequality block, in the LP's scaled units.
    """
    rows, rhs = [], []
    if lp.p_th is not None:
        rows.append(lp.power_coef)
        rhs.append(lp.p_th / lp.power_scale)
    if extra_ub is not None:
        rows.append(extra_ub[0])
        rhs.append(extra_ub[1])
    A_ub = np.vstack(rows) if rows else None
    b_ub = np.array(rhs) if rows else None
    res = linprog(lp.c, A_ub=A_ub, b_ub=b_ub, A_eq=lp.A_eq, b_eq=lp.b_eq,
                  bounds=(0, None), method="highs-ds", options=_HIGHS_OPTIONS)
    if res.status == 2:
        return LPSolution("infeasible")
    if res.status == 3:
        raise RuntimeError("LP reported unbounded; the occupation polytope is bounded, so this is a bug")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    x = np.clip(res.x, 0.0, None)
    occ = np.zeros((lp.config.Q + 1, lp.config.S + 1))
    for k, (q, s) in enumerate(lp.variables):
        occ[q, s] += x[k]
    return LPSolution(
        "optimal",
        x,
        float(lp.c @ x),
        occ,
        avg_power=float(lp.power_coef @ x) * lp.power_scale,
        avg_delay=float(lp.delay_coef @ x),
    )


def recover_policy(occupation, config: SystemConfig, tol: float = _PI_TOL) -> np.ndarray:
    x = np.clip(np.asarray(occupation, dtype=float), 0.0, None)
    f = np.zeros_like(x)
    for q, (lo, hi) in enumerate(all_action_bounds(config)):
        pi_q = x[q].sum()
        if pi_q > tol:
            f[q] = x[q] / pi_q
        else:
            f[q, hi] = 1.0
    return f


def recover_degenerate_policy(x_pairs, config: SystemConfig, tol: float = _PI_TOL) -> np.ndarray:
    """``(f_max, f_min)`` per state from ``(x_max, x_min)`` pairs."""
    xp = np.clip(np.asarray(x_pairs, dtype=float), 0.0, None)
    out = np.zeros_like(xp)
    for q in range(config.Q + 1):
        pi_q = xp[q].sum()
        out[q] = xp[q] / pi_q if pi_q > tol else (1.0, 0.0)
    return out


def occupation_pairs(occupation, config: SystemConfig) -> np.ndarray:
    """Collapse a degenerate-support occupation matrix into ``(x_max, x_min)`` pairs."""
    x = np.asarray(occupation, dtype=float)
    pairs = np.zeros((config.Q + 1, 2))
    for q, (lo, hi) in enumerate(all_action_bounds(config)):
        pairs[q] = (x[q].sum(), 0.0) if lo == hi else (x[q, hi], x[q, lo])
    return pairs


def extract_threshold(pairs, config: SystemConfig, states=None, tol: float = 1e-9) -> ThresholdDescriptor:
    """Match ``(f_max, f_min)`` pairs against the threshold form.

    Only ``states`` (default: all) are inspected; states with a single
    feasible action fit either side of the threshold.
    """
    pairs = np.asarray(pairs, dtype=float)
    states = range(config.Q + 1) if states is None else sorted(states)
    labels = []
    for q in states:
        lo, hi = action_bounds(q, config)
        if lo == hi:
            continue
        fmax, fmin = pairs[q]
        if fmin >= 1 - tol:
            labels.append((q, "min"))
        elif fmax >= 1 - tol:
            labels.append((q, "max"))
        else:
            labels.append((q, "mix"))

    bad, mix = [], None
    seen_upper = False
    for q, lab in labels:
        if lab == "min":
            if seen_upper:
                bad.append(q)
        elif lab == "mix":
            if seen_upper:
                bad.append(q)
            else:
                mix = q
            seen_upper = True
        else:
            seen_upper = True
    if bad:
        raise NotThresholdForm(bad)

    if mix is not None:
        return ThresholdDescriptor(mix, float(pairs[mix][1]))
    mins = [q for q, lab in labels if lab == "min"]
    maxs = [q for q, lab in labels if lab == "max"]
    if not mins:
        return ThresholdDescriptor(0, 0.0)
    if not maxs:
        return ThresholdDescriptor(mins[-1], 1.0)
    return ThresholdDescriptor(mins[-1] + 1, 0.0)


def policy_threshold(policy, config: SystemConfig) -> Optional[ThresholdDescriptor]:
    """Threshold of a policy on its recurrent states, or None when it has no such form."""
    try:
        pairs = policy_to_degenerate(policy, config)
        classes = classify_states(transition_matrix(policy, config))
        states = [s for c in classes.recurrent for s in c]
        return extract_threshold(pairs, config, states=states)
    except (NotThresholdForm, ValueError):
        return None


def min_feasible_power(config: SystemConfig, lp_kind: str = "full") -> float:
    lp = _builder(lp_kind)(config).with_objective(0.0, 1.0)
    sol = solve_lp(lp)
    if not sol.optimal:
        raise RuntimeError("no stabilising policy exists")
    return sol.avg_power


def min_delay(config: SystemConfig, lp_kind: str = "full") -> float:
    sol = solve_lp(_builder(lp_kind)(config))
    return sol.avg_delay


def _builder(kind: str):
    return {"full": build_full_lp, "degenerate": build_degenerate_lp}[kind]


def solve_tradeoff(config: SystemConfig, p_th: float, lp_kind: str = "full") -> TradeoffPoint:
    """Optimal delay and recovered policy at power budget ``p_th``."""
    sol = solve_lp(_builder(lp_kind)(config, p_th))
    if not sol.optimal:
        raise InfeasibleError(p_th, min_feasible_power(config))
    policy = recover_policy(sol.occupation, config)
    return TradeoffPoint(sol.avg_power, sol.objective, policy, policy_threshold(policy, config), p_th)


def _round_policy(policy, tol: float = 1e-6) -> np.ndarray:
    r = np.round(policy)
    if np.abs(policy - r).max() < tol and np.allclose(r.sum(axis=1), 1.0):
        return r
    return policy


def _vertex_point(sol: LPSolution, config: SystemConfig) -> TradeoffPoint:
    """Turn a basic LP solution into an exactly evaluated curve point."""
    policy = _round_policy(recover_policy(sol.occupation, config))
    try:
        p, d, _ = evaluate_policy(policy, config)
    except NotUnichain:
        log.warning("vertex policy is multichain; using LP values")
        p, d = sol.avg_power, sol.avg_delay
    return TradeoffPoint(p, d, policy, policy_threshold(policy, config))


def _lexicographic(lp: LPInstance, first: str) -> LPSolution:
    """Minimise one functional, then the other on (a hair above) the optimal face."""
    if first == "power":
        coef, w_first, w_second = lp.power_coef, (0.0, 1.0), (1.0, 0.0)
    else:
        coef, w_first, w_second = lp.delay_coef, (1.0, 0.0), (0.0, 1.0)
    best = solve_lp(lp.with_objective(*w_first))
    slack = 1e-12 * max(1.0, abs(best.objective))
    second = solve_lp(lp.with_objective(*w_second), extra_ub=(coef, best.objective + slack))
    return second if second.optimal else best


def curve_vertices(config: SystemConfig, lp_kind: str = "full", rtol: float = 1e-10) -> list:
    """Breakpoints of the tradeoff curve, ordered by increasing power.

    The two end vertices come from lexicographic solves; interior vertices
    are found by repeatedly minimising ``D + w P`` with ``w`` set to the
    slope of the chord between two known vertices.  A strictly better
    weighted value means a new vertex lies under that chord.
    """
    lp = _builder(lp_kind)(config)
    left = _vertex_point(_lexicographic(lp, "power"), config)
    right = _vertex_point(_lexicographic(lp, "delay"), config)
    scale = lp.power_scale
    if right.avg_power - left.avg_power <= rtol * scale or left.avg_delay - right.avg_delay <= rtol:
        return [left]

    def refine(a: TradeoffPoint, b: TradeoffPoint, depth: int = 0) -> list:
        if depth > 64:
            raise RuntimeError("vertex refinement did not terminate")
        w = (a.avg_delay - b.avg_delay) / ((b.avg_power - a.avg_power) / scale)
        m = _vertex_point(solve_lp(lp.with_objective(1.0, w)), config)
        chord = a.avg_delay + w * a.avg_power / scale
        val = m.avg_delay + w * m.avg_power / scale
        inside = a.avg_power + rtol * scale < m.avg_power < b.avg_power - rtol * scale
        if inside and val < chord - rtol * max(1.0, abs(chord)):
            return refine(a, m, depth + 1) + [m] + refine(m, b, depth + 1)
        return []

    return [left] + refine(left, right) + [right]


def tradeoff_curve(
    config: SystemConfig,
    grid_points: int = 0,
    p_min: Optional[float] = None,
    p_max: Optional[float] = None,
    lp_kind: str = "full",
) -> TradeoffCurve:
    """Trace the optimal delay-power curve.

    The full LP is the default because restricting to ``s_min``/``s_max``
    can lose optimality when ``A > 1`` (see ``test_degenerate_gap_batch_arrivals``).

    ``grid_points > 0`` additionally solves the LP on a uniform budget grid
    over ``[p_min, p_max]`` (defaults: the end vertices) and stores the
    results in ``samples``.
    """
    vertices = curve_vertices(config, lp_kind)
    d_min = vertices[-1].avg_delay
    p_lo = vertices[0].avg_power
    curve = TradeoffCurve(vertices, p_lo, d_min)
    if grid_points > 0:
        lo = p_lo if p_min is None else max(p_min, p_lo)
        hi = vertices[-1].avg_power if p_max is None else p_max
        if hi <= lo:
            grid = [lo]
        else:
            grid = np.linspace(lo, hi, grid_points)
            # keep the left end feasible under solver rounding
            grid[0] = lo * (1 + 1e-12)
        for p in grid:
            try:
                curve.samples.append(solve_tradeoff(config, float(p), lp_kind))
            except InfeasibleError:
                continue
    return curve


def bisect_budget_for_mix(
    config: SystemConfig,
    q: int,
    target_min: float,
    p_lo: float,
    p_hi: float,
    tol: float = 1e-10,
    lp_kind: str = "degenerate",
) -> TradeoffPoint:
    """Find a budget at which the optimal policy plays ``s_min(q)`` with probability ``target_min``.

    Assumes the weight on ``s_min(q)`` falls as the budget grows, which is
    the case along a threshold-form curve.
    """
    lo_s, hi_s = action_bounds(q, config)

    def weight(p):
        pt = solve_tradeoff(config, p, lp_kind)
        return pt.policy[q, lo_s], pt

    w_lo, _ = weight(p_lo)
    w_hi, _ = weight(p_hi)
    if not (w_lo >= target_min >= w_hi):
        raise ValueError(f"target weight {target_min} not bracketed: {w_lo} .. {w_hi}")
    pt = None
    for _ in range(200):
        mid = 0.5 * (p_lo + p_hi)
        w, pt = weight(mid)
        if abs(w - target_min) <= tol:
            return pt
        if w > target_min:
            p_lo = mid
        else:
            p_hi = mid
        if p_hi - p_lo <= 4 * np.finfo(float).eps * abs(p_hi):
            break
    return pt
