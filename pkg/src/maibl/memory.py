"""Instance-based memory for one agent.

An option is an integer key (``observation * n_actions + action``). Each option
owns a block of instances (distinct outcomes) and a block of references
(timestamp, instance) in two shared pools. Blocks grow by relocation to the end
of the pool with doubled capacity, so an option's data stays contiguous and the
blending kernel reads it as plain array slices.

An option that has never been recorded behaves as if it holds exactly the
default instance ``(default_utility, {0})``; the instance is materialized the
first time the option is recorded.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from ._jit import INT_DICT, USING_NUMBA, int_dict, jitclass, njit

XI_FLOOR = 2.0 ** -53  # replaces a 0.0 uniform draw; ln((1-xi)/xi) would be inf


def default_temperature(noise):
    return noise * math.sqrt(2.0) if noise > 0.0 else 1e-6


@dataclass(frozen=True)
class MemoryParams:
    decay: float = 0.5
    noise: float = 0.25
    temperature: float | None = None
    default_utility: float = 0.1

    def __post_init__(self):
        if self.decay < 0:
            raise ValueError(f"decay must be >= 0, got {self.decay}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        if self.temperature is not None and not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")

    @property
    def tau(self):
        if self.temperature is not None:
            return float(self.temperature)
        return default_temperature(self.noise)


@dataclass(frozen=True)
class Instance:
    outcome: float
    timestamps: tuple


# -- scalar reference forms ------------------------------------------------


def activation(timestamps, t, decay, noise, xi=0.5):
    """Activation of one instance at time ``t`` given its noise draw ``xi``."""
    if len(timestamps) == 0:
        raise ValueError("instance has no timestamps")
    if t <= max(timestamps):
        raise ValueError(f"activation time {t} must exceed every timestamp")
    base = math.log(sum((t - tp) ** -decay for tp in timestamps))
    if noise == 0.0:
        return base
    if not 0.0 < xi < 1.0:
        raise ValueError(f"noise draw must lie in (0, 1), got {xi}")
    return base + noise * math.log((1.0 - xi) / xi)


def retrieval_probabilities(activations, tau):
    a = np.asarray(activations, dtype=np.float64)
    if tau <= 0:
        raise ValueError("tau must be > 0")
    w = np.exp((a - a.max()) / tau)
    return w / w.sum()


def blended_value(outcomes, probabilities):
    return float(np.dot(np.asarray(outcomes, dtype=np.float64), probabilities))


# -- kernels ---------------------------------------------------------------


@njit
def activations_loop(ref_time, ref_inst, n, t, decay, noise, rng, out):
    for j in range(n):
        out[j] = 0.0
    for k in range(ref_time.shape[0]):
        dt = t - ref_time[k]
        if dt <= 0:
            raise ValueError("activation time must exceed every stored timestamp")
        if decay == 0.5:
            out[ref_inst[k]] += 1.0 / math.sqrt(dt)
        else:
            out[ref_inst[k]] += float(dt) ** -decay
    for j in range(n):
        out[j] = math.log(out[j])
        if noise > 0.0:
            xi = rng.random()
            if xi == 0.0:
                xi = XI_FLOOR
            out[j] += noise * math.log((1.0 - xi) / xi)


def activations_numpy(ref_time, ref_inst, n, t, decay, noise, rng, out):
    dt = t - ref_time
    if dt.size and dt.min() <= 0:
        raise ValueError("activation time must exceed every stored timestamp")
    act = np.log(np.bincount(ref_inst, weights=dt.astype(np.float64) ** -decay, minlength=n))
    if noise > 0.0:
        xi = rng.random(n)
        xi[xi == 0.0] = XI_FLOOR
        act += noise * np.log((1.0 - xi) / xi)
    out[:n] = act


@njit
def blend_loop(acts, outcomes, n, tau):
    top = acts[0]
    for j in range(1, n):
        if acts[j] > top:
            top = acts[j]
    num = 0.0
    den = 0.0
    for j in range(n):
        w = math.exp((acts[j] - top) / tau)
        num += w * outcomes[j]
        den += w
    return num / den


def blend_numpy(acts, outcomes, n, tau):
    a = acts[:n]
    w = np.exp((a - a.max()) / tau)
    return float(np.dot(w, outcomes[:n]) / w.sum())


if USING_NUMBA:
    _activations = activations_loop
    _blend = blend_loop
else:
    _activations = activations_numpy
    _blend = blend_numpy


@njit
def _grow_float(arr, used, need):
    cap = arr.shape[0]
    if need <= cap:
        return arr
    while cap < need:
        cap *= 2
    out = np.empty(cap, dtype=np.float64)
    out[:used] = arr[:used]
    return out


@njit
def _grow_int(arr, used, need):
    cap = arr.shape[0]
    if need <= cap:
        return arr
    while cap < need:
        cap *= 2
    out = np.empty(cap, dtype=np.int64)
    out[:used] = arr[:used]
    return out


def _memory_spec():
    from numba import types

    f8, i8, ai8, af8 = types.float64, types.int64, types.int64[::1], types.float64[::1]
    return [
        ("decay", f8),
        ("noise", f8),
        ("tau", f8),
        ("default_utility", f8),
        ("index", INT_DICT),
        ("n_options", i8),
        ("option_keys", ai8),
        ("inst_start", ai8),
        ("inst_n", ai8),
        ("inst_cap", ai8),
        ("ref_start", ai8),
        ("ref_n", ai8),
        ("ref_cap", ai8),
        ("outcomes", af8),
        ("n_outcomes", i8),
        ("ref_time", ai8),
        ("ref_inst", ai8),
        ("n_refs", i8),
        ("scratch", af8),
    ]


@jitclass(_memory_spec)
class IBLMemory:
    def __init__(self, decay, noise, tau, default_utility):
        if not tau > 0.0:
            raise ValueError("tau must be > 0")
        self.decay = decay
        self.noise = noise
        self.tau = tau
        self.default_utility = default_utility
        self.index = int_dict()
        self.n_options = 0
        self.option_keys = np.empty(64, dtype=np.int64)
        self.inst_start = np.empty(64, dtype=np.int64)
        self.inst_n = np.empty(64, dtype=np.int64)
        self.inst_cap = np.empty(64, dtype=np.int64)
        self.ref_start = np.empty(64, dtype=np.int64)
        self.ref_n = np.empty(64, dtype=np.int64)
        self.ref_cap = np.empty(64, dtype=np.int64)
        self.outcomes = np.empty(1024, dtype=np.float64)
        self.n_outcomes = 0
        self.ref_time = np.empty(4096, dtype=np.int64)
        self.ref_inst = np.empty(4096, dtype=np.int64)
        self.n_refs = 0
        self.scratch = np.empty(64, dtype=np.float64)

    def _alloc_outcomes(self, k):
        start = self.n_outcomes
        self.outcomes = _grow_float(self.outcomes, start, start + k)
        self.n_outcomes = start + k
        return start

    def _alloc_refs(self, k):
        start = self.n_refs
        self.ref_time = _grow_int(self.ref_time, start, start + k)
        self.ref_inst = _grow_int(self.ref_inst, start, start + k)
        self.n_refs = start + k
        return start

    def _add_option(self, key):
        s = self.n_options
        if s == self.option_keys.shape[0]:
            need = 2 * s
            self.option_keys = _grow_int(self.option_keys, s, need)
            self.inst_start = _grow_int(self.inst_start, s, need)
            self.inst_n = _grow_int(self.inst_n, s, need)
            self.inst_cap = _grow_int(self.inst_cap, s, need)
            self.ref_start = _grow_int(self.ref_start, s, need)
            self.ref_n = _grow_int(self.ref_n, s, need)
            self.ref_cap = _grow_int(self.ref_cap, s, need)
        self.option_keys[s] = key
        ist = self._alloc_outcomes(2)
        self.inst_start[s] = ist
        self.inst_n[s] = 1
        self.inst_cap[s] = 2
        self.outcomes[ist] = self.default_utility
        rst = self._alloc_refs(4)
        self.ref_start[s] = rst
        self.ref_n[s] = 1
        self.ref_cap[s] = 4
        self.ref_time[rst] = 0
        self.ref_inst[rst] = 0
        self.index[key] = s
        self.n_options = s + 1
        return s

    def slot(self, key):
        if key in self.index:
            return self.index[key]
        return -1

    def record(self, key, outcome, t):
        if not math.isfinite(outcome):
            raise ValueError("outcome must be finite")
        outcome = outcome + 0.0  # -0.0 -> 0.0
        s = self.slot(key)
        if s < 0:
            s = self._add_option(key)
        rst = self.ref_start[s]
        rn = self.ref_n[s]
        if t <= self.ref_time[rst + rn - 1]:
            raise ValueError("record time must exceed every timestamp stored for the option")
        ist = self.inst_start[s]
        n = self.inst_n[s]
        j = -1
        for k in range(n):
            if self.outcomes[ist + k] == outcome:
                j = k
                break
        if j < 0:
            if n == self.inst_cap[s]:
                new = self._alloc_outcomes(2 * n)
                self.outcomes[new : new + n] = self.outcomes[ist : ist + n]
                self.inst_start[s] = new
                self.inst_cap[s] = 2 * n
                ist = new
            self.outcomes[ist + n] = outcome
            self.inst_n[s] = n + 1
            j = n
        if rn == self.ref_cap[s]:
            new = self._alloc_refs(2 * rn)
            self.ref_time[new : new + rn] = self.ref_time[rst : rst + rn]
            self.ref_inst[new : new + rn] = self.ref_inst[rst : rst + rn]
            self.ref_start[s] = new
            self.ref_cap[s] = 2 * rn
            rst = new
        self.ref_time[rst + rn] = t
        self.ref_inst[rst + rn] = j
        self.ref_n[s] = rn + 1

    def _fill_activations(self, s, t, rng):
        n = self.inst_n[s]
        if self.scratch.shape[0] < n:
            self.scratch = np.empty(2 * n, dtype=np.float64)
        rst = self.ref_start[s]
        rn = self.ref_n[s]
        _activations(
            self.ref_time[rst : rst + rn],
            self.ref_inst[rst : rst + rn],
            n,
            t,
            self.decay,
            self.noise,
            rng,
            self.scratch,
        )
        return n

    def blend(self, key, t, rng):
        s = self.slot(key)
        if s < 0:
            if t <= 0:
                raise ValueError("activation time must exceed every stored timestamp")
            if self.noise > 0.0:
                rng.random()
            return self.default_utility
        n = self._fill_activations(s, t, rng)
        ist = self.inst_start[s]
        return _blend(self.scratch, self.outcomes[ist : ist + n], n, self.tau)

    def activations(self, key, t, rng):
        s = self.slot(key)
        if s < 0:
            s = self._add_option(key)
        n = self._fill_activations(s, t, rng)
        return self.scratch[:n].copy()

    def probabilities(self, key, t, rng):
        acts = self.activations(key, t, rng)
        top = acts.max()
        w = np.exp((acts - top) / self.tau)
        return w / w.sum()

    def n_instances(self, key):
        s = self.slot(key)
        if s < 0:
            return 1
        return self.inst_n[s]

    def instance_outcomes(self, key):
        s = self.slot(key)
        if s < 0:
            out = np.empty(1, dtype=np.float64)
            out[0] = self.default_utility
            return out
        ist = self.inst_start[s]
        return self.outcomes[ist : ist + self.inst_n[s]].copy()

    def references(self, key):
        """(timestamps, instance indices) in recording order."""
        s = self.slot(key)
        if s < 0:
            return np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64)
        rst = self.ref_start[s]
        rn = self.ref_n[s]
        return self.ref_time[rst : rst + rn].copy(), self.ref_inst[rst : rst + rn].copy()

    def keys(self):
        return self.option_keys[: self.n_options].copy()


def new_memory(params=None):
    params = params or MemoryParams()
    return IBLMemory(float(params.decay), float(params.noise), float(params.tau), float(params.default_utility))


def instances(memory, key):
    """The option's instances as ``Instance`` records, default instance first."""
    outcomes = memory.instance_outcomes(key)
    times, owners = memory.references(key)
    return [
        Instance(float(x), tuple(int(v) for v in times[owners == j])) for j, x in enumerate(outcomes)
    ]


def dump_memory(memory, fh, n_actions=5):
    """Write one JSON line per instance: option key, observation, action, outcome, timestamps."""
    for key in memory.keys():
        key = int(key)
        obs, action = divmod(key, n_actions)
        for inst in instances(memory, key):
            rec = {
                "option": key,
                "observation": obs,
                "action": action,
                "outcome": inst.outcome,
                "timestamps": list(inst.timestamps),
            }
            fh.write(json.dumps(rec) + "\n")
