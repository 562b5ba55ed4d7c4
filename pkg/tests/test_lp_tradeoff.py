import numpy as np
import pytest

from instances import table1_config, random_instances, small_config
from qvlc.fbl_power import PowerTable
from qvlc.lp_tradeoff import (
    InfeasibleError,
    NotThresholdForm,
    _cut_rows,
    bisect_budget_for_mix,
    build_degenerate_lp,
    build_full_lp,
    degenerate_variables,
    extract_threshold,
    min_delay,
    min_feasible_power,
    policy_threshold,
    occupation_pairs,
    recover_degenerate_policy,
    recover_policy,
    solve_lp,
    solve_tradeoff,
    tradeoff_curve,
)
from qvlc.queue_model import (
    SystemConfig,
    action_bounds,
    all_action_bounds,
    classify_states,
    evaluate_policy,
    policy_to_degenerate,
    transition_matrix,
)


def table_cfg(A, S, Q, alpha=0.5):
    return SystemConfig(A=A, alpha=alpha, Q=Q, power_table=PowerTable.explicit(np.arange(S + 1) ** 0.7))


def test_full_lp_dimensions():
    lp = build_full_lp(table_cfg(1, 1, 2), p_th=1.0)
    assert sorted(lp.variables) == [(0, 0), (1, 0), (1, 1), (2, 1)]
    assert lp.n_constraints == 3 + 1 + 1


def test_full_lp_structural_zeros():
    c = table_cfg(2, 3, 6)
    lp = build_full_lp(c)
    feasible = {(q, s) for q, (lo, hi) in enumerate(all_action_bounds(c)) for s in range(lo, hi + 1)}
    assert set(lp.variables) == feasible
    everything = {(q, s) for q in range(c.Q + 1) for s in range(c.S + 1)}
    assert everything - set(lp.variables) == {(q, s) for q, s in everything if q - s < 0 or q - s > c.Q - c.A}


def test_forced_instance_feasibility():
    c = table_cfg(1, 1, 1, alpha=0.3)
    p1 = c.powers[1]
    assert len(build_full_lp(c).variables) == 2
    assert solve_lp(build_full_lp(c, 0.3 * p1 * (1 + 1e-9))).optimal
    assert not solve_lp(build_full_lp(c, 0.3 * p1 * 0.99)).optimal
    assert min_feasible_power(c) == pytest.approx(0.3 * p1, rel=1e-12)


@pytest.mark.parametrize("p_th,expected", [(0.5, 1.0), (0.375, 2.0), (0.4375, 1.5)])
def test_solve_small_instance(p_th, expected):
    for build in (build_full_lp, build_degenerate_lp):
        sol = solve_lp(build(small_config(), p_th))
        assert sol.optimal
        assert sol.objective == pytest.approx(expected, abs=1e-9)


def test_solve_small_instance_infeasible():
    assert solve_lp(build_full_lp(small_config(), 0.37)).status == "infeasible"
    assert solve_lp(build_degenerate_lp(small_config(), 0.37)).status == "infeasible"
    with pytest.raises(InfeasibleError) as err:
        solve_tradeoff(small_config(), 0.37)
    assert err.value.p_min == pytest.approx(0.375)


def test_degenerate_variable_merging():
    c = SystemConfig(A=1, alpha=0.5, Q=7, power_table=PowerTable.explicit((0, 1, 1.8, 2.4)))
    vars_ = degenerate_variables(c)
    assert len(vars_) == 15  # 16 pairs, merged at q=0
    assert vars_[0] == (0, 0)


def _case_rows(c):
    """Cut equations written region by region, as LHS - RHS."""
    A, Q, S, a = c.A, c.Q, c.S, c.alpha
    vars_ = degenerate_variables(c)
    idx = {}
    for k, (q, s) in enumerate(vars_):
        lo, hi = action_bounds(q, c)
        idx[(q, "max" if s == hi else "min")] = k
    rows = np.zeros((Q, len(vars_)))

    def add(r, q, kind, coef):
        if (q, kind) in idx:
            rows[r, idx[(q, kind)]] += coef

    for q in range(Q):
        if q <= A - 1:
            for i in range(0, q + 1):
                add(q, i, "max", a)
                add(q, i, "min", a)
            for i in range(q + 1, min(Q, q + S) + 1):
                add(q, i, "max", -(1 - a))
        elif q <= Q - A - 1:
            for i in range(q - A + 1, q + 1):
                add(q, i, "min", a)
            for i in range(q + 1, min(Q, q + S) + 1):
                add(q, i, "max", -(1 - a))
            for i in range(q + 1, min(Q, q + S - A) + 1):
                add(q, i, "max", -a)
        else:
            for i in range(q - A + 1, q + 1):
                add(q, i, "min", a)
            for i in range(q + 1, Q + 1):
                add(q, i, "max", -(1 - a))
                add(q, i, "min", -(1 - a))
            for i in range(q + 1, min(Q, q + S - A) + 1):
                add(q, i, "max", -a)
    return rows


@pytest.mark.parametrize("A,S,Q", [(1, 3, 7), (2, 3, 7), (1, 2, 5), (2, 2, 6)])
def test_cut_rows_match_region_cases(A, S, Q):
    c = table_cfg(A, S, Q, alpha=0.37)
    np.testing.assert_allclose(_cut_rows(c, degenerate_variables(c)), _case_rows(c), atol=1e-15)


def test_recover_policy_conventions():
    c = small_config()
    x = np.zeros((3, 3))
    x[0, 0] = 0.25
    x[1, 0] = 0.5
    x[2, 2] = 0.25
    f = recover_policy(x, c)
    np.testing.assert_array_equal(f, [[1, 0, 0], [1, 0, 0], [0, 0, 1]])
    x = np.zeros((3, 3))
    x[0, 0], x[1, 1] = 0.5, 0.5
    f = recover_policy(x, c)
    assert f[2, 2] == 1.0  # unvisited -> s_max


def test_recover_policy_on_segment():
    c = small_config()
    sol = solve_lp(build_full_lp(c, 0.4375))
    f = recover_policy(sol.occupation, c)
    assert f[1, 0] > 0 and f[1, 1] > 0
    assert f[1, 0] + f[1, 1] == pytest.approx(1.0)
    p, d, _ = evaluate_policy(f, c)
    assert (p, d) == pytest.approx((0.4375, 1.5), abs=1e-9)


def test_recover_degenerate_policy():
    c = table1_config()
    pairs = np.zeros((8, 2))
    pairs[:, 0] = 1 / 8
    np.testing.assert_array_equal(recover_degenerate_policy(pairs, c)[:, 0], 1.0)
    pairs = np.zeros((8, 2))
    pairs[0, 0] = 1.0
    rec = recover_degenerate_policy(pairs, c)
    np.testing.assert_array_equal(rec[5], (1.0, 0.0))


def test_extract_threshold_examples():
    c = table1_config()
    table1 = np.array([[1, 0], [0, 1], [0.5, 0.5], [1, 0], [1, 0], [1, 0], [1, 0], [1, 0]], dtype=float)
    th = extract_threshold(table1, c)
    assert (th.q_star, th.mix_min) == (2, 0.5)
    th = extract_threshold(np.tile([1.0, 0.0], (8, 1)), c)
    assert (th.q_star, th.mix_min) == (0, 0.0)
    broken = np.tile([1.0, 0.0], (8, 1))
    broken[1] = broken[3] = (0.0, 1.0)
    with pytest.raises(NotThresholdForm) as err:
        extract_threshold(broken, c)
    assert err.value.states == [3]
    two_mix = np.tile([1.0, 0.0], (8, 1))
    two_mix[2] = two_mix[4] = (0.5, 0.5)
    with pytest.raises(NotThresholdForm):
        extract_threshold(two_mix, c)


def test_min_feasible_power_examples():
    assert min_feasible_power(small_config()) == pytest.approx(0.375, abs=1e-12)
    for alpha in (0.01, 0.05):
        c = SystemConfig(A=1, alpha=alpha, Q=3, power_table=PowerTable.explicit((0.0, 2.0)))
        assert min_feasible_power(c) == pytest.approx(alpha * 2.0, rel=1e-10)


def test_min_feasible_power_monotone_in_alpha():
    for base in [table1_config()] + random_instances(6, seed=3):
        vals = [min_feasible_power(base.with_alpha(a)) for a in np.linspace(0.05, 0.95, 19)]
        assert all(b >= a - 1e-12 * max(abs(a), 1e-30) for a, b in zip(vals, vals[1:]))


def test_curve_small_instance():
    curve = tradeoff_curve(small_config(), grid_points=11)
    pts = [(v.avg_power, v.avg_delay) for v in curve.vertices]
    np.testing.assert_allclose(pts, [(0.375, 2.0), (0.5, 1.0)], atol=1e-12)
    assert curve.d_min == pytest.approx(1.0)
    assert curve.delay_at(10.0) == pytest.approx(1.0)
    for s in curve.samples:
        assert s.avg_delay == pytest.approx(curve.delay_at(s.p_th), abs=1e-9)


def test_single_point_curve():
    c = table_cfg(1, 1, 1)
    curve = tradeoff_curve(c)
    assert len(curve.vertices) == 1
    assert curve.vertices[0].avg_delay == pytest.approx(1.0)


@pytest.mark.parametrize("c", random_instances(12, seed=11) + [table1_config(0.5), table1_config(0.6)])
def test_lp_matches_chain_evaluation(c):
    p_lo = min_feasible_power(c)
    p_hi = tradeoff_curve(c).vertices[-1].avg_power
    for p in np.linspace(p_lo * (1 + 1e-9), p_hi * 1.05, 15):
        for build in (build_full_lp, build_degenerate_lp):
            sol = solve_lp(build(c, p))
            f = recover_policy(sol.occupation, c)
            tm = transition_matrix(f, c)
            assert classify_states(tm).is_unichain
            power, delay, _ = evaluate_policy(f, c)
            assert delay == pytest.approx(sol.objective, abs=1e-8)
            assert power <= p * (1 + 1e-9)


@pytest.mark.parametrize("c", random_instances(12, seed=5) + [table1_config(0.5)])
def test_full_vertex_support_is_extreme(c):
    """Full-LP vertex optima only use s_min or s_max on recurrent states."""
    curve = tradeoff_curve(c, lp_kind="full")
    for v in curve.vertices:
        rec = classify_states(transition_matrix(v.policy, c)).recurrent[0]
        for q in rec:
            lo, hi = action_bounds(q, c)
            support = set(np.flatnonzero(v.policy[q] > 1e-9))
            assert support <= {lo, hi}


def test_full_and_degenerate_curves_agree():
    for c in random_instances(10, seed=8):
        a = tradeoff_curve(c, lp_kind="full").vertices
        b = tradeoff_curve(c, lp_kind="degenerate").vertices
        np.testing.assert_allclose([(v.avg_power, v.avg_delay) for v in a],
                                   [(v.avg_power, v.avg_delay) for v in b], atol=1e-9)


def test_min_delay_is_greedy():
    c = table1_config()
    assert min_delay(c) == pytest.approx(1.0)


def test_bisect_budget_for_mix_table1():
    c = table1_config(0.5)
    curve = tradeoff_curve(c)
    pt = bisect_budget_for_mix(c, 2, 0.5, curve.p_min, curve.vertices[-1].avg_power)
    assert pt.policy[2, 0] == pytest.approx(0.5, abs=1e-9)
    assert pt.threshold.q_star == 2


def test_occupation_pairs_round_trip():
    c = table1_config()
    sol = solve_lp(build_degenerate_lp(c, 1.1e-7))
    pairs = occupation_pairs(sol.occupation, c)
    assert pairs.sum() == pytest.approx(1.0)
    rec = recover_degenerate_policy(pairs, c)
    np.testing.assert_allclose(rec.sum(axis=1), 1.0)


def test_degenerate_gap_batch_arrivals():
    # A=2: serving one packet at q=2 (an interior action) beats every s_min/s_max mix.
    # Exact chain values for actions (0, 0, 1, 3, 3): pi = (7, 7, 3, 3, 0)/20, P = 9/10, D = 11/6.
    c = SystemConfig(A=2, alpha=0.3, Q=4, power_table=PowerTable.explicit((0.0, 2.0, 3.5, 4.0)))
    full = tradeoff_curve(c, lp_kind="full").vertices
    deg = tradeoff_curve(c, lp_kind="degenerate").vertices
    np.testing.assert_allclose([(v.avg_power, v.avg_delay) for v in full],
                               [(0.8, 8 / 3), (0.9, 11 / 6), (1.05, 1.0)], atol=1e-12)
    np.testing.assert_allclose([(v.avg_power, v.avg_delay) for v in deg], [(0.8, 8 / 3), (1.05, 1.0)], atol=1e-12)
    assert solve_tradeoff(c, 0.9, lp_kind="degenerate").avg_delay == pytest.approx(2.0, abs=1e-9)
    assert solve_tradeoff(c, 0.9).avg_delay == pytest.approx(11 / 6, abs=1e-9)
    assert full[1].threshold is None


def test_optimum_off_threshold_form():
    # A=1 with concave powers: between the end vertices (23/120, 5) and (1/4, 1)
    # the only optimum randomises at q=1 while q=2 still plays s_min.  The
    # threshold path passes through (0, 0, 2, 3) at (9/40, 3), which sits 2/7
    # above the chord, so at P = 53/240 it reaches 13/4 against an optimum of 3.
    c = SystemConfig(A=1, alpha=0.25, Q=3, power_table=PowerTable.explicit((0.0, 1.0, 1.8, 2.3)))
    verts = tradeoff_curve(c).vertices
    np.testing.assert_allclose([(v.avg_power, v.avg_delay) for v in verts], [(23 / 120, 5.0), (0.25, 1.0)], atol=1e-12)
    p, d, _ = evaluate_policy(np.eye(4)[[0, 0, 2, 3]], c)
    assert (p, d) == pytest.approx((9 / 40, 3.0), abs=1e-12)
    assert d - (5 - 480 / 7 * (p - 23 / 120)) == pytest.approx(2 / 7, abs=1e-12)
    for kind in ("full", "degenerate"):
        pt = solve_tradeoff(c, 53 / 240, lp_kind=kind)
        assert pt.avg_delay == pytest.approx(3.0, abs=1e-9)
        np.testing.assert_allclose(pt.policy[1], [4 / 7, 3 / 7, 0, 0], atol=1e-9)
        assert pt.policy[2, 0] == pytest.approx(1.0) and pt.policy[3, 3] == pytest.approx(1.0)
        assert pt.threshold is None and policy_threshold(pt.policy, c) is None
        with pytest.raises(NotThresholdForm) as err:
            extract_threshold(policy_to_degenerate(pt.policy, c), c)
        assert err.value.states == [2]
