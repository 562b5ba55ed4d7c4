"""Monte-Carlo simulation of the slotted queue under a coding policy.

Slot order follows the queue recursion: in slot ``n`` an action is drawn from
``f[q[n], :]`` and served, then the next arrival joins to form ``q[n+1]``.
Packets leave in FIFO order; a packet that arrives in slot ``n`` and is served
in slot ``m`` has sojourn ``m + 1 - n`` slots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numba
import numpy as np

from .queue_model import SystemConfig, check_policy

N_BATCHES = 32


@dataclass(frozen=True)
class SimulationSpec:
    n_slots: int
    seed: int = 0
    warmup_slots: int = -1  # -1: 1% of n_slots
    initial_q: int = 0

    def __post_init__(self):
        if self.n_slots < 1:
            raise ValueError("n_slots must be positive")
        if self.warmup_slots == -1:
            object.__setattr__(self, "warmup_slots", self.n_slots // 100)
        if not 0 <= self.warmup_slots < self.n_slots:
            raise ValueError(f"warmup_slots must lie in [0, n_slots), got {self.warmup_slots}")


@dataclass(frozen=True)
class SimulationResult:
    mean_queue: float
    little_delay: float
    sojourn_delay: float
    mean_power: float
    stderr_delay: float
    stderr_power: float
    stderr_sojourn: float
    packets_arrived: int
    packets_served: int
    packets_dropped: int
    initial_q: int
    final_q: int
    n_replicas: int = 1


@numba.njit(cache=True)
def _run(cdf, support_lo, powers, A, Q, arrives, action_u, q0, warmup, n_batches):
    n = arrives.shape[0]
    fifo = np.zeros(Q + 1, dtype=np.int64)  # arrival slot of each queued packet
    head = 0
    size = q0
    for k in range(q0):
        fifo[k] = -1  # present before slot 0; excluded from sojourn stats
    q = q0
    window = n - warmup
    batch_len = window // n_batches
    batch_q = np.zeros(n_batches)
    batch_p = np.zeros(n_batches)
    batch_soj = np.zeros(n_batches)
    batch_cnt = np.zeros(n_batches)
    sum_q = 0.0
    sum_p = 0.0
    sum_soj = 0.0
    n_soj = 0
    arrived = 0
    served = 0
    dropped = 0
    for t in range(n):
        row = cdf[q]
        u = action_u[t]
        s = support_lo[q]
        while s < row.shape[0] - 1 and u >= row[s]:
            s += 1
        if s > q:
            raise ValueError("action exceeds queue length")
        rec = t >= warmup
        b = -1
        if rec:
            b = (t - warmup) // batch_len if batch_len > 0 else 0
            if b >= n_batches:
                b = -1
            sum_q += q
            sum_p += powers[s]
            if b >= 0:
                batch_q[b] += q
                batch_p[b] += powers[s]
        for _ in range(s):
            arr_t = fifo[head]
            head = (head + 1) % (Q + 1)
            size -= 1
            served += 1
            if rec and arr_t >= warmup and arr_t >= 0:
                soj = t + 1 - arr_t
                sum_soj += soj
                n_soj += 1
                if b >= 0:
                    batch_soj[b] += soj
                    batch_cnt[b] += 1
        q -= s
        a = A if arrives[t] else 0
        for _ in range(a):
            if size < Q:
                fifo[(head + size) % (Q + 1)] = t + 1
                size += 1
                q += 1
                arrived += 1
            else:
                dropped += 1
    return (sum_q / window, sum_p / window, sum_soj / max(n_soj, 1), batch_q, batch_p, batch_soj,
            batch_cnt, batch_len, arrived, served, dropped, q)


def _batch_stderr(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


def simulate(policy, config: SystemConfig, spec: SimulationSpec) -> SimulationResult:
    """Single run; standard errors come from non-overlapping batch means."""
    f = check_policy(policy, config)
    if not 0 <= spec.initial_q <= config.Q:
        raise ValueError(f"initial_q must lie in 0..{config.Q}")
    cdf = np.cumsum(np.clip(f, 0.0, None), axis=1)
    cdf /= cdf[:, -1:]
    # first action with positive mass; avoids drawing a zero-mass action on u == 0
    support_lo = np.array([int(np.flatnonzero(row > 0)[0]) for row in f], dtype=np.int64)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.n_slots
    arrives = rng.random(n) < config.alpha
    action_u = rng.random(n)
    n_batches = min(N_BATCHES, max(1, (n - spec.warmup_slots)))
    (mean_q, mean_p, soj, bq, bp, bs, bc, blen, arrived, served, dropped, final_q) = _run(
        cdf, support_lo, config.powers, config.A, config.Q, arrives, action_u,
        spec.initial_q, spec.warmup_slots, n_batches,
    )
    rate = config.arrival_rate
    if blen > 0:
        bmeans_q = bq / blen
        bmeans_p = bp / blen
    else:
        bmeans_q = bmeans_p = np.zeros(0)
    ok = bc > 0
    return SimulationResult(
        mean_queue=mean_q,
        little_delay=mean_q / rate,
        sojourn_delay=soj,
        mean_power=mean_p,
        stderr_delay=_batch_stderr(bmeans_q) / rate,
        stderr_power=_batch_stderr(bmeans_p),
        stderr_sojourn=_batch_stderr(bs[ok] / bc[ok]),
        packets_arrived=int(arrived),
        packets_served=int(served),
        packets_dropped=int(dropped),
        initial_q=spec.initial_q,
        final_q=int(final_q),
    )


def replica_seed(seed: int, index: int) -> int:
    """Seed of replica ``index``; replica 0 reuses ``seed`` itself."""
    if index == 0:
        return seed
    return int(np.random.SeedSequence([seed & (2**64 - 1), index]).generate_state(1, np.uint64)[0])


def batch_simulate(policy, config: SystemConfig, spec: SimulationSpec, n_replicas: int) -> SimulationResult:
    """Independent replicas aggregated by their mean and across-replica standard error."""
    if n_replicas < 1:
        raise ValueError("n_replicas must be >= 1")
    runs = [simulate(policy, config, replace(spec, seed=replica_seed(spec.seed, i))) for i in range(n_replicas)]
    if n_replicas == 1:
        return runs[0]

    def agg(attr):
        vals = np.array([getattr(r, attr) for r in runs], dtype=float)
        return float(vals.mean()), _batch_stderr(vals)

    mean_q, _ = agg("mean_queue")
    little, se_d = agg("little_delay")
    soj, se_s = agg("sojourn_delay")
    power, se_p = agg("mean_power")
    return SimulationResult(
        mean_queue=mean_q,
        little_delay=little,
        sojourn_delay=soj,
        mean_power=power,
        stderr_delay=se_d,
        stderr_power=se_p,
        stderr_sojourn=se_s,
        packets_arrived=sum(r.packets_arrived for r in runs),
        packets_served=sum(r.packets_served for r in runs),
        packets_dropped=sum(r.packets_dropped for r in runs),
        initial_q=spec.initial_q,
        final_q=runs[-1].final_q,
        n_replicas=n_replicas,
    )
