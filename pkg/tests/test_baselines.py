import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maibl.baselines import (
    Q_HYSTERETIC,
    Q_LENIENT,
    Q_PLAIN,
    hysteretic_q_update,
    lenient_q_update,
    make_tabular_agent,
    new_table,
    q_update,
    q_value,
)

vals = st.floats(-10, 10, allow_nan=False)


def test_unseen_read_does_not_insert():
    t = new_table()
    assert q_value(t, 3, 1) == 0.0
    assert len(t) == 0


def test_q_update_examples():
    t = new_table()
    q_update(t, 1, 0, 1.0, 2, True, 0.5, 0.99)
    assert q_value(t, 1, 0) == 0.5

    t = new_table()
    t[1 * 5 + 0] = 0.5
    t[2 * 5 + 3] = 0.5
    q_update(t, 1, 0, 0.0, 2, False, 0.5, 0.99)
    assert q_value(t, 1, 0) == pytest.approx(0.4975, abs=1e-15)

    t = new_table()
    t[5] = 0.3
    q_update(t, 1, 0, 7.0, 2, False, 0.0, 0.99)
    assert q_value(t, 1, 0) == 0.3


def test_hysteretic_q_examples():
    t = new_table()
    hysteretic_q_update(t, 1, 0, 1.0, 2, True, 0.5, 0.01, 0.99)
    assert q_value(t, 1, 0) == 0.5  # positive branch uses alpha

    t = new_table()
    t[5] = 0.5
    t[13] = 0.5
    hysteretic_q_update(t, 1, 0, 0.0, 2, False, 0.5, 0.01, 0.99)
    # 0.5 + 0.01 * (0.495 - 0.5)
    assert q_value(t, 1, 0) == pytest.approx(0.49995, abs=1e-15)

    t = new_table()
    t[5] = 0.3
    hysteretic_q_update(t, 1, 0, -7.0, 2, False, 0.0, 0.0, 0.99)
    assert q_value(t, 1, 0) == 0.3


@given(vals, vals, vals, st.booleans(), st.floats(0.01, 1.0), st.floats(0, 1))
def test_hysteretic_beta_alpha_equals_q(q0, qn, r, term, alpha, gamma):
    a, b = new_table(), new_table()
    for t in (a, b):
        t[5] = q0
        t[12] = qn
    q_update(a, 1, 0, r, 2, term, alpha, gamma)
    hysteretic_q_update(b, 1, 0, r, 2, term, alpha, alpha, gamma)
    assert a[5] == b[5]


def test_lenient_q_positive_always_applied():
    rng = np.random.default_rng(0)
    t, temps = new_table(), new_table()
    lenient_q_update(t, temps, 1, 0, 1.0, 2, True, 0.5, 0.99, 1.0, 0.995, 0.1, 2.0, rng)
    assert t[5] == 0.5
    assert temps[5] == pytest.approx(2.0 * 0.995)


def test_lenient_q_zero_temperature_always_applied():
    rng = np.random.default_rng(1)
    for _ in range(2000):
        t, temps = new_table(), new_table()
        t[5] = 1.0
        temps[5] = 0.0
        lenient_q_update(t, temps, 1, 0, 0.0, 2, True, 0.5, 0.99, 1.0, 0.995, 0.1, 2.0, rng)
        assert t[5] == 0.5


def test_lenient_q_negative_rate():
    rng = np.random.default_rng(2)
    n = 100_000
    applied = 0
    for _ in range(n):
        t, temps = new_table(), new_table()
        t[5] = 1.0
        lenient_q_update(t, temps, 1, 0, 0.0, 2, True, 0.5, 0.99, 1.0, 0.995, 0.1, 2.0, rng)
        applied += t[5] != 1.0
    assert applied / n == pytest.approx(math.exp(-2), abs=0.005)


def test_lenient_q_temperature_fold():
    rng = np.random.default_rng(3)
    t, temps = new_table(), new_table()
    for a in range(5):
        temps[2 * 5 + a] = 1.0
    lenient_q_update(t, temps, 1, 0, 0.0, 2, False, 0.5, 0.99, 1.0, 0.9, 0.1, 2.0, rng)
    assert temps[5] == pytest.approx(0.9 * (0.9 * 2.0 + 0.1 * 1.0))


def test_q_values_bounded():
    """Random transitions with |r| <= 1 keep |Q| <= 1 / (1 - gamma)."""
    rng = np.random.default_rng(4)
    t = new_table()
    gamma = 0.9
    for _ in range(20_000):
        o, a, o2 = rng.integers(0, 6), rng.integers(0, 5), rng.integers(0, 6)
        q_update(t, o, a, rng.uniform(-1, 1), o2, rng.random() < 0.1, 0.5, gamma)
    assert max(abs(v) for v in t.values()) <= 1 / (1 - gamma)


def test_tabular_agent_surface():
    for name, vid in (("q", Q_PLAIN), ("hysteretic-q", Q_HYSTERETIC), ("lenient-q", Q_LENIENT)):
        ag = make_tabular_agent(name)
        assert ag.variant == vid
        rng = np.random.default_rng(0)
        a = ag.choose(3, 1.0, rng)
        assert 0 <= a < 5
        ag.learn(3, a, 1.0, 4, True, rng)
        assert ag.q[3 * 5 + a] == 0.5


def test_temp_decay_parameter():
    assert make_tabular_agent("lenient-q").temp_decay == 0.995
    assert make_tabular_agent("lenient-q", temp_decay=0.9).temp_decay == 0.9
