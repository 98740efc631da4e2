"""Experiment runner: configuration, seeding, run execution, persistence and aggregation."""

import csv
import dataclasses
import io
import json
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .agents import ExplorationSchedule, LeniencyParams, TDParams, make_maibl_agent
from .baselines import Q_VARIANTS, make_tabular_agent
from .engine import run_episode
from .env import CMOTPEnv, MapError, ScenarioError, default_map, read_map, scenario
from .memory import MemoryParams
from .metrics import METRICS, EpisodeTrace, aggregate, episode_series, moving_average, running_mean, summarize_run

log = logging.getLogger(__name__)

MODELS = ("greedy-maibl", "hysteretic-maibl", "lenient-maibl", "q", "hysteretic-q", "lenient-q")
CURVE_METRICS = ("pmax", "pcoordinate", "efficiency")
CURVE_WINDOW = 50
OUTPUT_ENV = "MAIBL_OUTPUT_DIR"

# stream labels for sub-seeding; values are part of the seed derivation, never renumber
STREAMS = {"env": 0, "agent0": 1, "agent1": 2}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: str = "greedy-maibl"
    scenario: int = 1
    runs: int = 30
    episodes: int = 1000
    step_limit: int = 5000
    seed: int = 0
    map: str = ""  # empty means the shipped default map
    output: str = "results"
    workers: int = 1
    full_trace: bool = False
    grasp_hold: bool = True
    # memory
    decay: float = 0.5
    noise: float = 0.25
    blend_temperature: float = math.nan  # nan means noise * sqrt(2)
    default_utility: float = 0.1
    # exploration
    epsilon0: float = 1.0
    eta: float = 0.999
    temperature: float = 0.8
    # TD
    gamma: float = 0.99
    alpha: float = 0.5
    beta: float = 0.01
    # leniency
    max_temperature: float = 2.0
    k: float = 1.0
    theta: float = 0.995
    nu: float = 0.1
    temp_decay: float = 0.995  # lenient-q temperature fold multiplier

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.scenario not in (1, 2, 3, 4):
            raise ConfigError(f"scenario must be 1-4, got {self.scenario}")
        for name in ("runs", "episodes", "step_limit", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        try:
            self.memory_params()
            self.td_params()
            self.leniency_params()
            self.schedule()
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if not 0.0 <= self.temp_decay <= 1.0:
            raise ConfigError("temp_decay must lie in [0, 1]")

    def memory_params(self):
        tau = None if math.isnan(self.blend_temperature) else self.blend_temperature
        return MemoryParams(self.decay, self.noise, tau, self.default_utility)

    def td_params(self):
        return TDParams(self.gamma, self.alpha, self.beta)

    def leniency_params(self):
        return LeniencyParams(self.max_temperature, self.k, self.theta, self.nu)

    def schedule(self):
        return ExplorationSchedule(self.epsilon0, self.eta, self.temperature)

    def to_text(self):
        return "".join(f"{f.name} = {_fmt(getattr(self, f.name))}\n" for f in fields(self))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _coerce(f, raw):
    typ = f.type if isinstance(f.type, type) else {"int": int, "float": float, "bool": bool, "str": str}[f.type]
    raw = str(raw).strip()
    if typ is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{f.name}: expected a boolean, got {raw!r}")
    try:
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{f.name}: expected {typ.__name__}, got {raw!r}") from None


FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def parse_config_text(text):
    """``key = value`` lines (``#`` comments, blank lines ignored) to a dict of typed values."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in FIELDS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _coerce(FIELDS[key], value)
    return out


def make_config(file_values=None, overrides=None):
    """Merge defaults, config-file values and overrides (later wins)."""
    values = {}
    for src in (file_values or {}, overrides or {}):
        for key, v in src.items():
            if v is None:
                continue
            if key not in FIELDS:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(FIELDS[key], v) if isinstance(v, str) else v
    return ExperimentConfig(**values)


# -- seeding -----------------------------------------------------------------


def stream_seed(master, run, label):
    return np.random.SeedSequence(entropy=master, spawn_key=(run, STREAMS[label]))


def run_rngs(master, run):
    """(agent0 rng, agent1 rng, env rng) for a run."""
    return tuple(np.random.default_rng(stream_seed(master, run, k)) for k in ("agent0", "agent1", "env"))


# -- single run ----------------------------------------------------------------


def load_map_for(config):
    if not config.map:
        return default_map()
    try:
        return read_map(config.map)
    except OSError as e:
        raise ConfigError(f"cannot read map {config.map}: {e}") from None
    except MapError as e:
        raise ConfigError(f"{config.map}: {e}") from None


def default_agents(config, run):
    """Two fresh independent learners for ``config.model``."""
    model = config.model
    if model.endswith("-maibl"):
        variant = model[: -len("-maibl")]
        return [
            make_maibl_agent(variant, config.memory_params(), config.td_params(), config.leniency_params(),
                             config.schedule())
            for _ in range(2)
        ]
    return [
        make_tabular_agent(Q_VARIANTS[model], config.td_params(), config.leniency_params(), config.schedule(),
                           config.temp_decay)
        for _ in range(2)
    ]


def run_once(config, run, agent_factory=None):
    """Play all episodes of one run; returns (traces, per-episode event lists or None)."""
    agent_factory = agent_factory or default_agents
    env = CMOTPEnv(load_map_for(config), scenario(config.scenario), hold=config.grasp_hold)
    agents = agent_factory(config, run)
    rng0, rng1, env_rng = run_rngs(config.seed, run)
    sched = config.schedule()
    traces, events = [], [] if config.full_trace else None
    for ep in range(config.episodes):
        eps = sched.start_episode()
        for ag in agents:
            rewind = getattr(ag, "rewind", None)
            if rewind is not None:
                rewind()
        tr, ev = run_episode(env, agents, config.step_limit, eps, (rng0, rng1), env_rng, ep + 1, config.full_trace)
        traces.append(tr)
        if events is not None:
            events.append(ev)
    return traces, events


def _run_path(out, run, kind):
    sub, ext = {"trace": ("traces", ".jsonl"), "summary": ("runs", ".csv")}[kind]
    return Path(out) / sub / f"run-{run:03d}{ext}"


def write_trace(path, traces, events=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, tr in enumerate(traces):
            rec = tr.to_record()
            if events is not None:
                rec["events"] = events[i]
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_trace(path):
    traces = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                traces.append(EpisodeTrace.from_record(json.loads(line)))
    return traces


def write_run_summary(path, summary):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for m in METRICS:
            w.writerow([m, repr(float(getattr(summary, m)))])


def _execute(config, run, agent_factory):
    """Worker body: run, persist, return a small result record. Never raises."""
    try:
        traces, events = run_once(config, run, agent_factory)
        sc = scenario(config.scenario)
        summary = summarize_run(traces, sc.optimal_zone, config.gamma, float(sc.R))
        write_trace(_run_path(config.output, run, "trace"), traces, events)
        write_run_summary(_run_path(config.output, run, "summary"), summary)
        series = episode_series(traces, sc.optimal_zone, config.gamma, float(sc.R))
        return {"run": run, "ok": True, "summary": summary, "series": {m: series[m] for m in CURVE_METRICS}}
    except Exception:  # crash isolation: report, never propagate
        return {"run": run, "ok": False, "error": traceback.format_exc()}


# -- experiment --------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summaries: dict  # run index -> RunSummary
    failures: dict  # run index -> error text
    rows: list  # aggregate rows (metrics.Aggregate)


def run_experiment(config, agent_factory=None, executor=None):
    """Execute every run of ``config`` and write all artifacts under ``config.output``.

    Layout: ``config.txt``, ``traces/run-NNN.jsonl``, ``runs/run-NNN.csv``,
    ``runs.csv`` (all run summaries), ``summary.csv`` (aggregate), ``curves.csv``
    and, when runs failed, ``failures.txt``.
    """
    out = Path(config.output)
    try:
        for sub in ("traces", "runs"):
            (out / sub).mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(config.to_text(), encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"output directory {out} is not writable: {e}") from None
    load_map_for(config)  # fail early on a bad map

    results = []
    if config.workers == 1 and executor is None:
        results = [_execute(config, r, agent_factory) for r in range(config.runs)]
    else:
        pool = executor or ProcessPoolExecutor(max_workers=config.workers)
        try:
            futures = [pool.submit(_execute, config, r, agent_factory) for r in range(config.runs)]
            for r, fut in enumerate(futures):
                try:
                    results.append(fut.result())
                except Exception as e:  # worker process died
                    results.append({"run": r, "ok": False, "error": f"{type(e).__name__}: {e}"})
        finally:
            if executor is None:
                pool.shutdown()

    results.sort(key=lambda res: res["run"])
    good = [res for res in results if res["ok"]]
    failures = {res["run"]: res["error"] for res in results if not res["ok"]}
    for run, err in failures.items():
        log.warning("run %d failed and is excluded:\n%s", run, err)
    fail_path = out / "failures.txt"
    if failures:
        fail_path.write_text("".join(f"run {r}\n{e}\n" for r, e in failures.items()), encoding="utf-8")
    elif fail_path.exists():
        fail_path.unlink()
    if not good:
        raise RuntimeError(f"all {config.runs} runs failed")

    summaries = {res["run"]: res["summary"] for res in good}
    rows = aggregate(summaries[r] for r in sorted(summaries))
    write_runs_table(out / "runs.csv", config, summaries)
    write_summary(out / "summary.csv", config.model, config.scenario, rows)
    write_curves(out / "curves.csv", [res["series"] for res in good])
    return ExperimentResult(config, summaries, failures, rows)


def write_runs_table(path, config, summaries):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "scenario", "run", *METRICS])
        for r in sorted(summaries):
            s = summaries[r]
            w.writerow([config.model, config.scenario, r, *(repr(float(getattr(s, m))) for m in METRICS)])


def write_summary(path, model, scenario_id, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(summary_text(model, scenario_id, rows))


def summary_text(model, scenario_id, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "scenario", "metric", "mean", "std", "runs", "excluded"])
    for row in rows:
        w.writerow([model, scenario_id, row.metric, repr(row.mean), repr(row.std), row.runs, row.excluded])
    return buf.getvalue()


def curve_rows(series_list, window=CURVE_WINDOW):
    """Across-run mean/std/stderr of raw per-episode values, running means and trailing windows."""
    n_runs = len(series_list)
    rows = []
    for m in CURVE_METRICS:
        raw = np.array([s[m] for s in series_list], dtype=np.float64)
        run_cum = np.array([running_mean(s[m]) for s in series_list])
        run_win = np.array([moving_average(s[m], window) for s in series_list])
        stats = []
        for arr in (raw, run_cum, run_win):
            mean = arr.mean(axis=0)
            std = arr.std(axis=0)
            stats.append((mean, std, std / math.sqrt(n_runs)))
        for ep in range(run_cum.shape[1]):
            vals = [float(a[ep]) for trio in stats for a in trio]
            rows.append([ep + 1, m, *vals])
    return rows


CURVE_HEADER = ["episode", "metric", "raw_mean", "raw_std", "raw_stderr", "running_mean", "running_std", "running_stderr",
                "window_mean", "window_std", "window_stderr"]


def write_curves(path, series_list, window=CURVE_WINDOW):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for row in curve_rows(series_list, window):
            w.writerow([row[0], row[1], *(repr(v) for v in row[2:])])


# -- post-processing ----------------------------------------------------------------


def read_config(out_dir):
    path = Path(out_dir) / "config.txt"
    try:
        values = parse_config_text(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    return ExperimentConfig(**values)


def recompute(out_dir):
    """Recompute run summaries and aggregate rows from the trace files in ``out_dir``."""
    config = read_config(out_dir)
    sc = scenario(config.scenario)
    paths = sorted((Path(out_dir) / "traces").glob("run-*.jsonl"))
    if not paths:
        raise ConfigError(f"no trace files under {out_dir}/traces")
    summaries = [summarize_run(read_trace(p), sc.optimal_zone, config.gamma, float(sc.R)) for p in paths]
    return config, summaries, aggregate(summaries)


def read_summary(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return [
            {"model": r["model"], "scenario": int(r["scenario"]), "metric": r["metric"], "mean": float(r["mean"]),
             "std": float(r["std"]), "runs": int(r["runs"]), "excluded": int(r["excluded"])}
            for r in csv.DictReader(fh)
        ]


def render_table(records, fmt="text"):
    """Render aggregate records as a metric-by-(model, scenario) table."""
    if fmt == "json":
        return json.dumps(records, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["model", "scenario", "metric", "mean", "std", "runs", "excluded"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(records)
        return buf.getvalue()
    cols = []
    for r in records:
        key = (r["scenario"], r["model"])
        if key not in cols:
            cols.append(key)
    cell = {(r["scenario"], r["model"], r["metric"]): r for r in records}
    header = ["metric"] + [f"S{s} {m}" for s, m in cols]
    body = []
    for metric in METRICS:
        line = [metric]
        for s, m in cols:
            r = cell.get((s, m, metric))
            if r is None or math.isnan(r["mean"]):
                line.append("-")
            elif metric in ("step", "mstep", "dstep"):
                line.append(f"{r['mean']:.1f} ({r['std']:.1f})")
            else:
                line.append(f"{r['mean']:.3f} ({r['std']:.3f})")
        body.append(line)
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = ["  ".join(c.ljust(wd) for c, wd in zip(row, widths)).rstrip() for row in [header] + body]
    return "\n".join(lines) + "\n"


def replace(config, **changes):
    return dataclasses.replace(config, **changes)


__all__ = [
    "ConfigError", "ExperimentConfig", "ExperimentResult", "MODELS", "OUTPUT_ENV", "ScenarioError",
    "make_config", "parse_config_text", "read_config", "read_summary", "read_trace", "recompute",
    "render_table", "run_experiment", "run_once", "run_rngs", "stream_seed", "summary_text",
]
