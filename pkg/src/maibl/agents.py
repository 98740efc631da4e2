"""Multi-agent IBL agents: greedy, hysteretic and lenient outcome estimation over IBL memory."""

import math
from dataclasses import dataclass

import numpy as np

from ._jit import FLOAT_DICT, float_dict, instance_type, jitclass, njit
from .memory import IBLMemory, MemoryParams, new_memory

GREEDY, HYSTERETIC, LENIENT = 0, 1, 2
VARIANTS = {"greedy": GREEDY, "hysteretic": HYSTERETIC, "lenient": LENIENT}


@dataclass
class ExplorationSchedule:
    """Decreasing epsilon-greedy Boltzmann exploration.

    ``epsilon`` is ``epsilon0 * eta ** episodes`` where ``episodes`` counts calls
    to :meth:`start_episode`; the decay is applied at the start of every episode,
    including the first.
    """

    epsilon0: float = 1.0
    eta: float = 0.999
    temperature: float = 0.8
    episodes: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon0 <= 1.0:
            raise ValueError(f"epsilon0 must lie in [0, 1], got {self.epsilon0}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if not self.temperature > 0.0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")

    @property
    def epsilon(self):
        return self.epsilon0 * self.eta**self.episodes

    def start_episode(self):
        self.episodes += 1
        return self.epsilon


@dataclass(frozen=True)
class TDParams:
    gamma: float = 0.99
    alpha: float = 0.5
    beta: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0.0 <= self.beta <= self.alpha:
            raise ValueError(f"beta must lie in [0, alpha], got {self.beta}")


@dataclass(frozen=True)
class LeniencyParams:
    max_temperature: float = 2.0
    k: float = 1.0
    theta: float = 0.995
    nu: float = 0.1

    def __post_init__(self):
        if self.max_temperature < 0 or not self.k > 0:
            raise ValueError("max_temperature must be >= 0 and k > 0")
        if not (0.0 <= self.theta <= 1.0 and 0.0 <= self.nu <= 1.0):
            raise ValueError("theta and nu must lie in [0, 1]")


# -- decision and update rules ----------------------------------------------


@njit
def boltzmann_probabilities(values, temperature):
    top = values.max()
    w = np.exp((values - top) / temperature)
    return w / w.sum()


@njit
def select_action(values, epsilon, temperature, rng):
    """Boltzmann sample with probability ``epsilon``, else argmax with uniform tie-breaking.

    Draw order: one uniform for the explore test, then one more either for the
    Boltzmann sample or, only when several actions tie, for the tie-break.
    """
    n = values.shape[0]
    if rng.random() < epsilon:
        p = boltzmann_probabilities(values, temperature)
        u = rng.random()
        acc = 0.0
        for a in range(n):
            acc += p[a]
            if u < acc:
                return a
        return n - 1
    best = values[0]
    ties = 1
    for a in range(1, n):
        if values[a] > best:
            best = values[a]
            ties = 1
        elif values[a] == best:
            ties += 1
    if ties == 1:
        for a in range(n):
            if values[a] == best:
                return a
    k = int(rng.random() * ties)
    for a in range(n):
        if values[a] == best:
            if k == 0:
                return a
            k -= 1
    return n - 1


@njit
def td_error(reward, next_values, current_value, gamma, terminal):
    bootstrap = 0.0 if terminal else next_values.max()
    return reward + gamma * bootstrap - current_value


@njit
def greedy_outcome(value, delta, alpha):
    return value + alpha * delta


@njit
def hysteretic_outcome(value, delta, alpha, beta):
    if delta > 0.0:
        return value + alpha * delta
    return value + beta * delta


@njit
def lenient_outcome(value, delta, alpha, temperature, k, rng):
    """Positive errors always apply; a negative one applies with probability exp(-k * temperature)."""
    if delta > 0.0:
        return value + alpha * delta
    if rng.random() > 1.0 - math.exp(-k * temperature):
        return value + alpha * delta
    return value


@njit
def update_leniency(temps, key, next_obs, terminal, theta, nu, max_temperature, n_actions):
    cur = temps[key] if key in temps else max_temperature
    if terminal:
        temps[key] = theta * cur
        return
    base = next_obs * n_actions
    total = 0.0
    for a in range(n_actions):
        k = base + a
        total += temps[k] if k in temps else max_temperature
    temps[key] = theta * ((1.0 - nu) * cur + nu * total / n_actions)


def _maibl_spec():
    from numba import types

    f8, i8 = types.float64, types.int64
    return [
        ("memory", instance_type(IBLMemory)),
        ("variant", i8),
        ("n_actions", i8),
        ("alpha", f8),
        ("beta", f8),
        ("gamma", f8),
        ("temperature", f8),
        ("max_temperature", f8),
        ("k", f8),
        ("theta", f8),
        ("nu", f8),
        ("temps", FLOAT_DICT),
        ("t", i8),
        ("values", types.float64[::1]),
        ("next_values", types.float64[::1]),
        ("cached_key", i8),
        ("cached_value", f8),
    ]


@jitclass(_maibl_spec)
class MAIBLAgent:
    """Independent learner: blended values drive choice, TD estimates become stored outcomes.

    ``t`` is the agent's global clock; it starts at 1 and advances once per
    environment step, in :meth:`learn`.
    """

    def __init__(self, memory, variant, n_actions, alpha, beta, gamma, temperature, max_temperature, k, theta, nu):
        self.memory = memory
        self.variant = variant
        self.n_actions = n_actions
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.temperature = temperature
        self.max_temperature = max_temperature
        self.k = k
        self.theta = theta
        self.nu = nu
        self.temps = float_dict()
        self.t = 1
        self.values = np.zeros(n_actions)
        self.next_values = np.zeros(n_actions)
        self.cached_key = -1
        self.cached_value = 0.0

    def choose(self, obs, epsilon, rng):
        base = obs * self.n_actions
        for a in range(self.n_actions):
            self.values[a] = self.memory.blend(base + a, self.t, rng)
        a = select_action(self.values, epsilon, self.temperature, rng)
        self.cached_key = base + a
        self.cached_value = self.values[a]
        return a

    def learn(self, obs, action, reward, next_obs, terminal, rng):
        key = obs * self.n_actions + action
        if key != self.cached_key:
            raise ValueError("learn() must follow choose() for the same observation and action")
        if not terminal:
            base = next_obs * self.n_actions
            for a in range(self.n_actions):
                self.next_values[a] = self.memory.blend(base + a, self.t, rng)
        value = self.cached_value
        delta = td_error(reward, self.next_values, value, self.gamma, terminal)
        if self.variant == GREEDY:
            outcome = greedy_outcome(value, delta, self.alpha)
        elif self.variant == HYSTERETIC:
            outcome = hysteretic_outcome(value, delta, self.alpha, self.beta)
        else:
            temp = self.temps[key] if key in self.temps else self.max_temperature
            outcome = lenient_outcome(value, delta, self.alpha, temp, self.k, rng)
        self.memory.record(key, outcome, self.t)
        if self.variant == LENIENT:
            update_leniency(
                self.temps, key, next_obs, terminal, self.theta, self.nu, self.max_temperature, self.n_actions
            )
        self.cached_key = -1
        self.t += 1


def make_maibl_agent(variant, memory=None, td=None, leniency=None, schedule=None, n_actions=5):
    if isinstance(variant, str):
        variant = VARIANTS[variant]
    td = td or TDParams()
    leniency = leniency or LeniencyParams()
    schedule = schedule or ExplorationSchedule()
    mem = new_memory(memory or MemoryParams())
    return MAIBLAgent(
        mem,
        variant,
        n_actions,
        float(td.alpha),
        float(td.beta),
        float(td.gamma),
        float(schedule.temperature),
        float(leniency.max_temperature),
        float(leniency.k),
        float(leniency.theta),
        float(leniency.nu),
    )


def _scripted_spec():
    from numba import types

    return [("actions", types.int64[::1]), ("pos", types.int64)]


@jitclass(_scripted_spec)
class ScriptedAgent:
    """Replays a fixed action list (then stays); never learns."""

    def __init__(self, actions):
        self.actions = actions
        self.pos = 0

    def choose(self, obs, epsilon, rng):
        if self.pos < self.actions.shape[0]:
            a = self.actions[self.pos]
        else:
            a = 0
        self.pos += 1
        return a

    def learn(self, obs, action, reward, next_obs, terminal, rng):
        pass

    def rewind(self):
        self.pos = 0
