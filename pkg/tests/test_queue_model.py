import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import concave_powers, small_config
from qvlc.fbl_power import PowerTable
from qvlc.queue_model import (
    NotUnichain,
    PolicyError,
    SystemConfig,
    action_bounds,
    average_delay,
    average_power,
    classify_states,
    deterministic_policy,
    evaluate_policy,
    greedy_policy,
    lazy_policy,
    queue_step,
    stationary_distribution,
    transition_matrix,
    validate_policy,
)


def cfg(A, S, Q, alpha=0.5):
    return SystemConfig(A=A, alpha=alpha, Q=Q, power_table=PowerTable.explicit(np.arange(S + 1) ** 0.8))


def test_action_bounds_batch2_config():
    c = cfg(2, 3, 7)
    assert action_bounds(0, c) == (0, 0)
    assert action_bounds(6, c) == (1, 3)
    assert action_bounds(7, c) == (2, 3)
    for q in range(8):
        lo, hi = action_bounds(q, c)
        assert lo <= hi
        for s in range(lo, hi + 1):
            assert 0 <= q - s <= 7 - 2


@pytest.mark.parametrize("args,expected", [((5, 3, 2, 7), 4), ((7, 0, 2, 7), 7), ((2, 3, 0, 7), 0)])
def test_queue_step(args, expected):
    assert queue_step(*args) == expected


def test_config_invariants():
    with pytest.raises(ValueError):
        cfg(3, 2, 7)  # A > S
    with pytest.raises(ValueError):
        cfg(2, 3, 1)  # A > Q
    with pytest.raises(ValueError):
        cfg(1, 1, 1, alpha=1.0)


def test_validate_policy():
    c = cfg(1, 1, 1)
    assert validate_policy(np.array([[1.0, 0.0], [0.0, 1.0]]), c) == []
    bad = validate_policy(np.array([[0.0, 1.0], [0.0, 1.0]]), c)
    assert (0, 1) in [(q, s) for q, s, _ in bad]
    short = validate_policy(np.array([[0.9, 0.0], [0.0, 1.0]]), c)
    assert [(q, s) for q, s, _ in short] == [(0, None)]
    with pytest.raises(ValueError):
        validate_policy(np.ones((3, 2)), c)


def test_two_state_chain():
    a = 0.3
    c = cfg(1, 1, 1, alpha=a)
    f = np.array([[1.0, 0.0], [0.0, 1.0]])
    tm = transition_matrix(f, c)
    # tm[j, i] = lambda_{i,j}
    np.testing.assert_allclose(tm, [[1 - a, 1 - a], [a, a]])
    classes = classify_states(tm)
    assert classes.recurrent == [[0, 1]] and classes.transient == []
    pi = stationary_distribution(tm)
    np.testing.assert_allclose(pi, [1 - a, a], atol=1e-15)
    assert average_delay(pi, c) == pytest.approx(1.0)
    assert average_power(f, pi, c) == pytest.approx(a * c.powers[1])


def test_never_transmit_moves_up_only():
    c = cfg(1, 2, 3, alpha=0.4)
    f = deterministic_policy([0, 0, 0, 1], c)  # s=0 wherever feasible; q=3 forces s>=1
    tm = transition_matrix(f, c)
    for i in range(3):
        assert tm[i, i] == pytest.approx(0.6)
        assert tm[i + 1, i] == pytest.approx(0.4)


def test_lazy_policy_transient_state():
    c = cfg(1, 1, 2, alpha=0.5)
    f = deterministic_policy([0, 0, 1], c)
    tm = transition_matrix(f, c)
    classes = classify_states(tm)
    assert classes.recurrent == [[1, 2]] and classes.transient == [0]
    pi = stationary_distribution(tm)
    np.testing.assert_allclose(pi, [0.0, 0.5, 0.5], atol=1e-15)
    assert average_delay(pi, c) == pytest.approx(3.0)


def test_identity_is_not_unichain():
    classes = classify_states(np.eye(3))
    assert classes.recurrent == [[0], [1], [2]]
    with pytest.raises(NotUnichain) as err:
        stationary_distribution(np.eye(3))
    assert len(err.value.classes.recurrent) == 3


def test_delay_of_empty_queue():
    c = cfg(1, 1, 3)
    assert average_delay(np.array([1.0, 0, 0, 0]), c) == 0.0


def test_delay_scales_inverse_alpha():
    pi = np.array([0.2, 0.3, 0.5])
    c1, c2 = cfg(1, 1, 2, alpha=0.3), cfg(1, 1, 2, alpha=0.6)
    assert average_delay(pi, c1) == pytest.approx(2 * average_delay(pi, c2))


def test_invalid_policy_rejected_by_transition_matrix():
    c = cfg(1, 1, 1)
    with pytest.raises(PolicyError):
        transition_matrix(np.array([[0.0, 1.0], [0.0, 1.0]]), c)


def test_small_config_lazy_and_greedy():
    c = small_config()
    # wait at q=1, serve both packets at q=2
    p, d, pi = evaluate_policy(deterministic_policy([0, 0, 2], c), c)
    np.testing.assert_allclose(pi, [0.25, 0.5, 0.25])
    assert (p, d) == pytest.approx((0.375, 2.0))
    p, d, pi = evaluate_policy(lazy_policy(c), c)
    np.testing.assert_allclose(pi, [0.0, 0.5, 0.5])
    assert (p, d) == pytest.approx((0.5, 3.0))
    p, d, _ = evaluate_policy(greedy_policy(c), c)
    assert (p, d) == pytest.approx((0.5, 1.0))


@st.composite
def random_policy(draw):
    A = draw(st.integers(1, 2))
    S = draw(st.integers(A, 3))
    Q = draw(st.integers(A, 6))
    alpha = draw(st.floats(0.05, 0.95))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    c = SystemConfig(A=A, alpha=alpha, Q=Q, power_table=PowerTable.explicit(concave_powers(rng, S)))
    f = np.zeros((Q + 1, S + 1))
    for q in range(Q + 1):
        lo, hi = action_bounds(q, c)
        w = rng.dirichlet(np.ones(hi - lo + 1)) if draw(st.booleans()) else np.eye(hi - lo + 1)[rng.integers(hi - lo + 1)]
        f[q, lo : hi + 1] = w
        f[q] /= f[q].sum()
    return c, f


@settings(max_examples=150, deadline=None)
@given(random_policy())
def test_chain_properties(case):
    c, f = case
    tm = transition_matrix(f, c)
    assert (tm >= 0).all()
    np.testing.assert_allclose(tm.sum(axis=0), 1.0, atol=1e-12)
    # band structure: only i-s or i-s+A reachable
    for i in range(c.Q + 1):
        lo, hi = action_bounds(i, c)
        allowed = {i - s for s in range(lo, hi + 1)} | {i - s + c.A for s in range(lo, hi + 1)}
        assert set(np.flatnonzero(tm[:, i] > 0)) <= allowed
    try:
        pi = stationary_distribution(tm)
    except NotUnichain:
        return
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(tm @ pi, pi, atol=1e-10)
    classes = classify_states(tm)
    assert all(pi[s] == 0 for s in classes.transient)
    # flow conservation: mean service equals arrival rate
    served = sum(pi[q] * f[q] @ np.arange(c.S + 1) for q in range(c.Q + 1))
    assert served == pytest.approx(c.A * c.alpha, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
def test_single_batch_power_is_rate_times_p1(alpha, seed):
    rng = np.random.default_rng(seed)
    c = SystemConfig(A=1, alpha=alpha, Q=4, power_table=PowerTable.explicit((0.0, 1.7)))
    f = np.zeros((5, 2))
    for q in range(5):
        lo, hi = action_bounds(q, c)
        f[q, lo : hi + 1] = rng.dirichlet(np.ones(hi - lo + 1))
    try:
        p, _, _ = evaluate_policy(f, c)
    except NotUnichain:
        return
    assert p == pytest.approx(alpha * 1.7, rel=1e-10)
