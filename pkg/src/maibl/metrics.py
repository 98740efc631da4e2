"""Episode traces and the six team metrics (PMax, PCoordinate, Efficiency, Step, MStep, DStep)."""

import math
from dataclasses import asdict, dataclass

import numpy as np

METRICS = ("pmax", "pcoordinate", "efficiency", "step", "mstep", "dstep")
STEP_METRICS = ("step", "mstep", "dstep")


@dataclass(frozen=True)
class EpisodeTrace:
    episode: int
    steps: int
    zone: int  # dropzone the item was delivered to; 0 when the step limit was hit
    reward: float
    arrivals: tuple  # per-agent step of arrival at the grasp cell (0 if never moved)
    joint_moves: int
    carry_steps: int

    def __post_init__(self):
        if not 0 <= self.joint_moves <= self.carry_steps <= self.steps:
            raise ValueError(
                f"episode {self.episode}: need joint_moves <= carry_steps <= steps, "
                f"got {self.joint_moves}, {self.carry_steps}, {self.steps}"
            )
        if self.zone and self.carry_steps < 1:
            raise ValueError(f"episode {self.episode}: delivery without a carrying step")

    @property
    def delivered(self):
        return self.zone != 0

    def to_record(self):
        rec = asdict(self)
        rec["arrivals"] = list(self.arrivals)
        return rec

    @classmethod
    def from_record(cls, rec):
        return cls(
            int(rec["episode"]),
            int(rec["steps"]),
            int(rec["zone"]),
            float(rec["reward"]),
            tuple(int(v) for v in rec["arrivals"]),
            int(rec["joint_moves"]),
            int(rec["carry_steps"]),
        )


def trace_from_events(episode, events):
    """Summarize per-step event records (dicts with ``carrying``, ``joint_move``,
    ``pickup``, ``moved`` pair, ``zone`` and ``reward``) into an ``EpisodeTrace``."""
    arrivals = [0, 0]
    picked = False
    carry = joint = zone = 0
    reward = 0.0
    for i, ev in enumerate(events, 1):
        if ev["carrying"]:
            carry += 1
            joint += bool(ev["joint_move"])
        elif not picked:
            for a in (0, 1):
                if ev["moved"][a]:
                    arrivals[a] = i
        picked = picked or bool(ev["pickup"])
        if ev["zone"]:
            zone = int(ev["zone"])
            reward = float(ev["reward"])
    return EpisodeTrace(episode, len(events), zone, reward, tuple(arrivals), joint, carry)


def _optimal(traces, optimal_zone):
    return [tr for tr in traces if tr.zone == optimal_zone]


def pmax(traces, optimal_zone):
    if not traces:
        raise ValueError("no traces")
    return len(_optimal(traces, optimal_zone)) / len(traces)


def pcoordinate(traces, optimal_zone):
    if not traces:
        raise ValueError("no traces")
    return sum(tr.joint_moves / tr.carry_steps for tr in _optimal(traces, optimal_zone)) / len(traces)


def efficiency(traces, optimal_zone, gamma, R):
    if not traces:
        raise ValueError("no traces")
    if not R > 0:
        raise ValueError("R must be > 0")
    return sum(gamma**tr.steps * tr.reward / R for tr in _optimal(traces, optimal_zone)) / len(traces)


def step_metrics(traces, optimal_zone):
    """(Step, MStep, DStep) means over optimal episodes; NaNs when there are none."""
    opt = _optimal(traces, optimal_zone)
    if not opt:
        return math.nan, math.nan, math.nan
    n = len(opt)
    return (
        sum(tr.steps for tr in opt) / n,
        sum(max(tr.arrivals) for tr in opt) / n,
        sum(abs(tr.arrivals[0] - tr.arrivals[1]) for tr in opt) / n,
    )


@dataclass(frozen=True)
class RunSummary:
    pmax: float
    pcoordinate: float
    efficiency: float
    step: float
    mstep: float
    dstep: float

    def as_dict(self):
        return asdict(self)


def summarize_run(traces, optimal_zone, gamma, R):
    step, mstep, dstep = step_metrics(traces, optimal_zone)
    return RunSummary(
        pmax(traces, optimal_zone),
        pcoordinate(traces, optimal_zone),
        efficiency(traces, optimal_zone, gamma, R),
        step,
        mstep,
        dstep,
    )


@dataclass(frozen=True)
class Aggregate:
    metric: str
    mean: float
    std: float  # population standard deviation across runs
    runs: int  # runs that contributed
    excluded: int  # runs with no optimal episode (step metrics only)


def aggregate(summaries):
    """Per-metric mean and population std across runs."""
    summaries = list(summaries)
    if not summaries:
        raise ValueError("cannot aggregate zero runs")
    rows = []
    for m in METRICS:
        vals = np.array([getattr(s, m) for s in summaries], dtype=np.float64)
        ok = vals[~np.isnan(vals)]
        excluded = len(vals) - len(ok)
        if len(ok):
            rows.append(Aggregate(m, float(ok.mean()), float(ok.std()), len(ok), excluded))
        else:
            rows.append(Aggregate(m, math.nan, math.nan, 0, excluded))
    return rows


def episode_series(traces, optimal_zone, gamma, R):
    """Per-episode contributions whose run means are PMax, PCoordinate and Efficiency.

    Returns a dict of float arrays: ``pmax`` (0/1), ``pcoordinate`` (joint-move
    ratio or 0), ``efficiency`` (discounted reward over R or 0), and ``step``,
    ``mstep``, ``dstep`` (NaN on non-optimal episodes).
    """
    n = len(traces)
    out = {m: np.zeros(n) for m in ("pmax", "pcoordinate", "efficiency")}
    for m in STEP_METRICS:
        out[m] = np.full(n, np.nan)
    for i, tr in enumerate(traces):
        if tr.zone != optimal_zone:
            continue
        out["pmax"][i] = 1.0
        out["pcoordinate"][i] = tr.joint_moves / tr.carry_steps
        out["efficiency"][i] = gamma**tr.steps * tr.reward / R
        out["step"][i] = tr.steps
        out["mstep"][i] = max(tr.arrivals)
        out["dstep"][i] = abs(tr.arrivals[0] - tr.arrivals[1])
    return out


def moving_average(x, window=50):
    """Trailing mean over up to ``window`` episodes, ignoring NaNs."""
    x = np.asarray(x, dtype=np.float64)
    out = np.full(len(x), np.nan)
    for i in range(len(x)):
        w = x[max(0, i - window + 1) : i + 1]
        w = w[~np.isnan(w)]
        if len(w):
            out[i] = w.mean()
    return out


def running_mean(x):
    x = np.asarray(x, dtype=np.float64)
    return np.cumsum(x) / np.arange(1, len(x) + 1)
