"""Lock-step episode loop: both agents choose, the joint action is applied, both learn."""

import numpy as np

from ._jit import njit
from .env import (
    ARR0,
    ARR1,
    DELIVERED,
    EV_CARRYING,
    EV_JOINT_MOVE,
    EV_MOVED0,
    EV_MOVED1,
    EV_PICKUP,
    PHASE,
    env_step,
    initial_state,
    observation_code,
)
from .metrics import EpisodeTrace

# per-step log columns (float64 so one array holds everything)
LOG_COLUMNS = ("a0", "a1", "flags", "zone", "reward", "penalty0", "penalty1")


@njit
def episode_kernel(grid, st, agent0, agent1, rng0, rng1, env_rng, values, cum, sizes, step_limit, epsilon, log, hold=True):
    """Run one episode in place on ``st``.

    Returns (steps, zone, reward, arrival0, arrival1, joint_moves, carry_steps).
    ``log`` is either empty or has ``step_limit`` rows for per-step records.
    """
    full = log.shape[0] > 0
    h = grid.shape[0]
    w = grid.shape[1]
    n_cells = h * w
    steps = 0
    zone = 0
    reward = 0.0
    joint = 0
    carry = 0
    while steps < step_limit:
        o0 = observation_code(n_cells, w, st, 0)
        o1 = observation_code(n_cells, w, st, 1)
        a0 = agent0.choose(o0, epsilon, rng0)
        a1 = agent1.choose(o1, epsilon, rng1)
        r, p0, p1, flags, z = env_step(grid, st, a0, a1, values, cum, sizes, env_rng, hold)
        terminal = st[PHASE] == DELIVERED
        n0 = observation_code(n_cells, w, st, 0)
        n1 = observation_code(n_cells, w, st, 1)
        agent0.learn(o0, a0, r + p0, n0, terminal, rng0)
        agent1.learn(o1, a1, r + p1, n1, terminal, rng1)
        if full:
            log[steps, 0] = a0
            log[steps, 1] = a1
            log[steps, 2] = flags
            log[steps, 3] = z
            log[steps, 4] = r
            log[steps, 5] = p0
            log[steps, 6] = p1
        steps += 1
        if flags & EV_CARRYING:
            carry += 1
            if flags & EV_JOINT_MOVE:
                joint += 1
        if terminal:
            zone = z
            reward = r
            break
    return steps, zone, reward, st[ARR0], st[ARR1], joint, carry


def events_from_log(log):
    """Per-step event dicts (as consumed by ``metrics.trace_from_events``) from a kernel log."""
    events = []
    for row in log:
        flags = int(row[2])
        events.append(
            {
                "actions": [int(row[0]), int(row[1])],
                "carrying": bool(flags & EV_CARRYING),
                "joint_move": bool(flags & EV_JOINT_MOVE),
                "pickup": bool(flags & EV_PICKUP),
                "moved": [bool(flags & EV_MOVED0), bool(flags & EV_MOVED1)],
                "zone": int(row[3]),
                "reward": float(row[4]),
                "penalties": [float(row[5]), float(row[6])],
            }
        )
    return events


def run_episode(env, agents, step_limit, epsilon, rngs, env_rng, episode=0, full_trace=False):
    """Play one episode from the map's start state.

    ``agents`` and ``rngs`` are pairs (one generator per agent). Returns
    ``(EpisodeTrace, events)``; ``events`` is a list of per-step dicts when
    ``full_trace`` is set, else None.
    """
    if step_limit < 0:
        raise ValueError("step_limit must be >= 0")
    st = initial_state(env.map)
    values, cum, sizes = env._arrays
    log = np.zeros((step_limit if full_trace else 0, len(LOG_COLUMNS)))
    steps, zone, reward, arr0, arr1, joint, carry = episode_kernel(
        env.map.grid, st, agents[0], agents[1], rngs[0], rngs[1], env_rng, values, cum, sizes,
        int(step_limit), float(epsilon), log, getattr(env, "hold", True),
    )
    trace = EpisodeTrace(episode, int(steps), int(zone), float(reward), (int(arr0), int(arr1)), int(joint), int(carry))
    events = events_from_log(log[:steps]) if full_trace else None
    return trace, events
