"""Queue-length Markov chain induced by a variable-length coding policy.

Policies are plain ``(Q+1, S+1)`` arrays ``f[q, s] = Pr{s | q}``.  Transition
matrices are column-stochastic: ``tm[j, i] = Pr{q' = j | q = i}``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .fbl_power import PowerTable

PROB_TOL = 1e-12


class PolicyError(ValueError):
    """A policy matrix breaks feasibility or normalisation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid policy: " + "; ".join(str(v) for v in self.violations))


class NotUnichain(RuntimeError):
    """The chain has several recurrent classes, so the stationary law is not unique."""

    def __init__(self, classes: "StateClasses"):
        self.classes = classes
        super().__init__(f"chain has {len(classes.recurrent)} recurrent classes: {classes.recurrent}")


@dataclass(frozen=True)
class SystemConfig:
    A: int
    alpha: float
    Q: int
    power_table: PowerTable

    def __post_init__(self):
        if int(self.A) != self.A or self.A < 1:
            raise ValueError(f"A must be a positive integer, got {self.A!r}")
        if int(self.Q) != self.Q or self.Q < 1:
            raise ValueError(f"Q must be a positive integer, got {self.Q!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.A > self.S:
            raise ValueError(f"need A <= S, got A={self.A}, S={self.S}")
        if self.A > self.Q:
            raise ValueError(f"need A <= Q, got A={self.A}, Q={self.Q}")

    @property
    def S(self) -> int:
        return self.power_table.S

    @property
    def powers(self) -> np.ndarray:
        return self.power_table.as_array()

    @property
    def arrival_rate(self) -> float:
        return self.A * self.alpha

    def with_alpha(self, alpha: float) -> "SystemConfig":
        return SystemConfig(self.A, alpha, self.Q, self.power_table)


@dataclass(frozen=True)
class StateClasses:
    recurrent: list
    transient: list

    @property
    def is_unichain(self) -> bool:
        return len(self.recurrent) == 1


def action_bounds(q: int, config: SystemConfig) -> tuple:
    """Batch sizes ``s`` that keep ``0 <= q - s <= Q - A``."""
    if not 0 <= q <= config.Q:
        raise ValueError(f"queue length {q} outside 0..{config.Q}")
    return max(0, q - (config.Q - config.A)), min(config.S, q)


def all_action_bounds(config: SystemConfig) -> list:
    return [action_bounds(q, config) for q in range(config.Q + 1)]


def feasible_pairs(config: SystemConfig) -> list:
    return [(q, s) for q, (lo, hi) in enumerate(all_action_bounds(config)) for s in range(lo, hi + 1)]


def queue_step(q: int, s: int, a: int, Q: int) -> int:
    return min(max(q - s, 0) + a, Q)


def validate_policy(policy, config: SystemConfig, tol: float = PROB_TOL) -> list:
    """Every violated policy invariant as ``(q, s, message)``; ``s`` is None for row errors."""
    f = np.asarray(policy, dtype=float)
    if f.shape != (config.Q + 1, config.S + 1):
        raise ValueError(f"policy shape {f.shape} does not match (Q+1, S+1) = {(config.Q + 1, config.S + 1)}")
    out = []
    for q, (lo, hi) in enumerate(all_action_bounds(config)):
        for s in range(config.S + 1):
            v = f[q, s]
            if not (-tol <= v <= 1 + tol):
                out.append((q, s, f"probability {v!r} outside [0, 1]"))
            elif (s < lo or s > hi) and abs(v) > tol:
                out.append((q, s, f"infeasible action carries mass {v!r}"))
        total = f[q].sum()
        if abs(total - 1.0) > tol * (config.S + 1):
            out.append((q, None, f"row sums to {total!r}"))
    return out


def check_policy(policy, config: SystemConfig) -> np.ndarray:
    violations = validate_policy(policy, config)
    if violations:
        raise PolicyError(violations)
    return np.asarray(policy, dtype=float)


def transition_matrix(policy, config: SystemConfig) -> np.ndarray:
    f = check_policy(policy, config)
    n = config.Q + 1
    tm = np.zeros((n, n))
    for i, (lo, hi) in enumerate(all_action_bounds(config)):
        for s in range(lo, hi + 1):
            if f[i, s] == 0.0:
                continue
            tm[i - s + config.A, i] += config.alpha * f[i, s]
            tm[i - s, i] += (1.0 - config.alpha) * f[i, s]
    return tm


def classify_states(tm, tol: float = PROB_TOL) -> StateClasses:
    """Communicating-class decomposition; closed classes are the recurrent ones."""
    adj = np.asarray(tm).T > tol  # adj[i, j]: edge i -> j
    _, labels = connected_components(adj, directed=True, connection="strong")
    recurrent, transient = [], []
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        leaves = adj[members][:, labels != lab].any()
        (transient if leaves else recurrent).append([int(m) for m in members])
    recurrent.sort()
    return StateClasses(recurrent, sorted(s for c in transient for s in c))


def stationary_distribution(tm, tol: float = PROB_TOL) -> np.ndarray:
    tm = np.asarray(tm, dtype=float)
    classes = classify_states(tm, tol)
    if not classes.is_unichain:
        raise NotUnichain(classes)
    states = classes.recurrent[0]
    sub = tm[np.ix_(states, states)]
    k = len(states)
    lhs = sub - np.eye(k)
    lhs[-1, :] = 1.0
    rhs = np.zeros(k)
    rhs[-1] = 1.0
    pi = np.zeros(tm.shape[0])
    pi[states] = np.linalg.solve(lhs, rhs)
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def average_delay(pi, config: SystemConfig) -> float:
    """Mean delay in slots via Little's law."""
    pi = np.asarray(pi, dtype=float)
    return float(np.arange(len(pi)) @ pi) / config.arrival_rate


def average_power(policy, pi, config: SystemConfig) -> float:
    f = np.asarray(policy, dtype=float)
    return float(np.asarray(pi, dtype=float) @ f @ config.powers)


def evaluate_policy(policy, config: SystemConfig) -> tuple:
    """``(avg_power, avg_delay_slots, pi)`` for a unichain policy."""
    pi = stationary_distribution(transition_matrix(policy, config))
    return average_power(policy, pi, config), average_delay(pi, config), pi


def deterministic_policy(actions, config: SystemConfig) -> np.ndarray:
    """Policy matrix that plays ``actions[q]`` with probability one."""
    f = np.zeros((config.Q + 1, config.S + 1))
    f[np.arange(config.Q + 1), np.asarray(actions, dtype=int)] = 1.0
    return f


def greedy_policy(config: SystemConfig) -> np.ndarray:
    return deterministic_policy([hi for _, hi in all_action_bounds(config)], config)


def lazy_policy(config: SystemConfig) -> np.ndarray:
    return deterministic_policy([lo for lo, _ in all_action_bounds(config)], config)


def degenerate_to_policy(pairs, config: SystemConfig) -> np.ndarray:
    """Expand ``(f_max, f_min)`` pairs into a full policy matrix."""
    f = np.zeros((config.Q + 1, config.S + 1))
    for q, (lo, hi) in enumerate(all_action_bounds(config)):
        fmax, fmin = pairs[q]
        f[q, hi] += fmax
        f[q, lo] += fmin
    return f


def policy_to_degenerate(policy, config: SystemConfig, tol: float = 1e-9) -> np.ndarray:
    """``(Q+1, 2)`` array of ``(f_max, f_min)``; raises if mass sits on interior actions."""
    f = np.asarray(policy, dtype=float)
    pairs = np.zeros((config.Q + 1, 2))
    bad = []
    for q, (lo, hi) in enumerate(all_action_bounds(config)):
        interior = f[q, lo + 1 : hi].sum() if hi - lo > 1 else 0.0
        if interior > tol:
            bad.append((q, None, f"interior actions carry mass {interior!r}"))
        if lo == hi:
            pairs[q] = (1.0, 0.0)
        else:
            pairs[q] = (f[q, hi], f[q, lo])
    if bad:
        raise PolicyError(bad)
    return pairs
