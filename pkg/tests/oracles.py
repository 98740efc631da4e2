"""Independent brute-force re-implementations used as test oracles.

Nothing here imports the package's math; only plain Python floats and lists.
"""

import math


def ibl_activation(timestamps, t, d, sigma, xi):
    s = 0.0
    for tp in timestamps:
        s += (t - tp) ** (-d)
    a = math.log(s)
    if sigma > 0:
        a += sigma * math.log((1 - xi) / xi)
    return a


def ibl_blend(instances, t, d, sigma, tau, xis):
    """instances: list of (outcome, [timestamps]); xis: one noise draw per instance."""
    acts = [ibl_activation(ts, t, d, sigma, xi) for (x, ts), xi in zip(instances, xis)]
    m = max(acts)
    ws = [math.exp((a - m) / tau) for a in acts]
    z = sum(ws)
    probs = [w / z for w in ws]
    return sum(p * x for p, (x, _) in zip(probs, instances)), probs


def naive_metrics(episodes, optimal_zone, gamma, R):
    """Six metrics straight from raw per-step event logs.

    ``episodes`` is a list of event lists; each event is a dict with keys
    carrying, joint_move, pickup, moved (pair), zone, reward.
    """
    n = len(episodes)
    opt = 0
    coord = 0.0
    eff = 0.0
    steps, msteps, dsteps = [], [], []
    for events in episodes:
        zone = 0
        reward = 0.0
        for ev in events:
            if ev["zone"]:
                zone = ev["zone"]
                reward = ev["reward"]
        if zone != optimal_zone:
            continue
        opt += 1
        carry = sum(1 for ev in events if ev["carrying"])
        joint = sum(1 for ev in events if ev["carrying"] and ev["joint_move"])
        coord += joint / carry
        eff += gamma ** len(events) * reward / R
        # last seeking-phase move of each agent, at or before the pickup step
        arr = [0, 0]
        for i, ev in enumerate(events):
            if ev["carrying"]:
                break
            for a in range(2):
                if ev["moved"][a]:
                    arr[a] = i + 1
        steps.append(len(events))
        msteps.append(max(arr))
        dsteps.append(abs(arr[0] - arr[1]))
    out = {"pmax": opt / n, "pcoordinate": coord / n, "efficiency": eff / n}
    for name, vals in (("step", steps), ("mstep", msteps), ("dstep", dsteps)):
        out[name] = sum(vals) / len(vals) if vals else float("nan")
    return out
