"""Tabular independent learners: Q-learning, hysteretic Q-learning and lenient Q-learning.

Q-tables are ``{option key: value}`` maps (a numba typed dict under JIT) keyed
like the IBL memory, ``observation * n_actions + action``. Unseen entries read
as 0 and reads never insert.
"""

import math

import numpy as np

from ._jit import FLOAT_DICT, float_dict, jitclass, njit
from .agents import (
    ExplorationSchedule,
    LeniencyParams,
    TDParams,
    select_action,
    update_leniency,
)

Q_PLAIN, Q_HYSTERETIC, Q_LENIENT = 0, 1, 2
Q_VARIANTS = {"q": Q_PLAIN, "hysteretic-q": Q_HYSTERETIC, "lenient-q": Q_LENIENT}


def new_table():
    return float_dict()


@njit
def q_value(table, obs, action, n_actions=5):
    key = obs * n_actions + action
    return table[key] if key in table else 0.0


@njit
def _q_delta(table, obs, action, reward, next_obs, terminal, gamma, n_actions):
    bootstrap = 0.0
    if not terminal:
        base = next_obs * n_actions
        for a in range(n_actions):
            k = base + a
            v = table[k] if k in table else 0.0
            if a == 0 or v > bootstrap:
                bootstrap = v
    return reward + gamma * bootstrap - q_value(table, obs, action, n_actions)


@njit
def q_update(table, obs, action, reward, next_obs, terminal, alpha, gamma, n_actions=5):
    delta = _q_delta(table, obs, action, reward, next_obs, terminal, gamma, n_actions)
    key = obs * n_actions + action
    table[key] = q_value(table, obs, action, n_actions) + alpha * delta
    return delta


@njit
def hysteretic_q_update(table, obs, action, reward, next_obs, terminal, alpha, beta, gamma, n_actions=5):
    delta = _q_delta(table, obs, action, reward, next_obs, terminal, gamma, n_actions)
    rate = alpha if delta > 0.0 else beta
    key = obs * n_actions + action
    table[key] = q_value(table, obs, action, n_actions) + rate * delta
    return delta


@njit
def lenient_q_update(
    table, temps, obs, action, reward, next_obs, terminal, alpha, gamma, k, temp_decay, nu, max_temperature, rng,
    n_actions=5,
):
    """Leniency-gated update followed by the temperature fold toward the next observation's mean."""
    delta = _q_delta(table, obs, action, reward, next_obs, terminal, gamma, n_actions)
    key = obs * n_actions + action
    temp = temps[key] if key in temps else max_temperature
    if delta > 0.0 or rng.random() > 1.0 - math.exp(-k * temp):
        table[key] = q_value(table, obs, action, n_actions) + alpha * delta
    update_leniency(temps, key, next_obs, terminal, temp_decay, nu, max_temperature, n_actions)
    return delta


def _tabular_spec():
    from numba import types

    f8, i8 = types.float64, types.int64
    return [
        ("q", FLOAT_DICT),
        ("temps", FLOAT_DICT),
        ("variant", i8),
        ("n_actions", i8),
        ("alpha", f8),
        ("beta", f8),
        ("gamma", f8),
        ("temperature", f8),
        ("max_temperature", f8),
        ("k", f8),
        ("temp_decay", f8),
        ("nu", f8),
        ("values", types.float64[::1]),
    ]


@jitclass(_tabular_spec)
class TabularAgent:
    """Same choose/learn surface as ``MAIBLAgent``, over a Q-table."""

    def __init__(self, variant, n_actions, alpha, beta, gamma, temperature, max_temperature, k, temp_decay, nu):
        self.q = float_dict()
        self.temps = float_dict()
        self.variant = variant
        self.n_actions = n_actions
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.temperature = temperature
        self.max_temperature = max_temperature
        self.k = k
        self.temp_decay = temp_decay
        self.nu = nu
        self.values = np.zeros(n_actions)

    def choose(self, obs, epsilon, rng):
        base = obs * self.n_actions
        for a in range(self.n_actions):
            key = base + a
            self.values[a] = self.q[key] if key in self.q else 0.0
        return select_action(self.values, epsilon, self.temperature, rng)

    def learn(self, obs, action, reward, next_obs, terminal, rng):
        n = self.n_actions
        if self.variant == Q_PLAIN:
            q_update(self.q, obs, action, reward, next_obs, terminal, self.alpha, self.gamma, n)
        elif self.variant == Q_HYSTERETIC:
            hysteretic_q_update(self.q, obs, action, reward, next_obs, terminal, self.alpha, self.beta, self.gamma, n)
        else:
            lenient_q_update(
                self.q, self.temps, obs, action, reward, next_obs, terminal, self.alpha, self.gamma, self.k,
                self.temp_decay, self.nu, self.max_temperature, rng, n,
            )


def make_tabular_agent(variant, td=None, leniency=None, schedule=None, temp_decay=None, n_actions=5):
    if isinstance(variant, str):
        variant = Q_VARIANTS[variant]
    td = td or TDParams()
    leniency = leniency or LeniencyParams()
    schedule = schedule or ExplorationSchedule()
    decay = leniency.theta if temp_decay is None else temp_decay
    return TabularAgent(
        variant,
        n_actions,
        float(td.alpha),
        float(td.beta),
        float(td.gamma),
        float(schedule.temperature),
        float(leniency.max_temperature),
        float(leniency.k),
        float(decay),
        float(leniency.nu),
    )
