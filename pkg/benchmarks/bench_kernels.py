"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because the switch is read at import
time. Reports memory-blend calls per second and environment steps per second
for a short learning run, and checks both backends produced the same traces.

    python benchmarks/bench_kernels.py --episodes 20 --model greedy-maibl
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import tempfile

WORKER = r"""
import json, sys, time
import numpy as np
from maibl import _jit
from maibl.harness import make_config, run_once, write_trace
from maibl import memory

args = json.loads(sys.argv[1])
out = {"numba": _jit.USING_NUMBA}

# activation + blend kernels on one option with many references
rng = np.random.default_rng(0)
k = args["instances"]
ref_time = np.arange(1, args["refs"] + 1, dtype=np.int64)
ref_inst = rng.integers(0, k, args["refs"]).astype(np.int64)
ref_inst[:k] = np.arange(k)
outcomes = rng.random(k)
acts = np.empty(k)
t = args["refs"] + 1


def blend_once():
    memory._activations(ref_time, ref_inst, k, t, 0.5, 0.25, rng, acts)
    return memory._blend(acts, outcomes, k, 0.25 * 2**0.5)


blend_once()  # compile
n = args["blends"]
t0 = time.perf_counter()
for _ in range(n):
    blend_once()
out["blends_per_s"] = n / (time.perf_counter() - t0)

# end-to-end learning run
cfg = make_config(overrides=dict(model=args["model"], scenario=1, runs=1, episodes=1, step_limit=50, seed=1))
run_once(cfg, 0)  # compile
cfg = make_config(overrides=dict(model=args["model"], scenario=1, runs=1, episodes=args["episodes"], seed=1))
t0 = time.perf_counter()
traces, _ = run_once(cfg, 0)
dt = time.perf_counter() - t0
steps = sum(tr.steps for tr in traces)
out["steps"] = steps
out["steps_per_s"] = steps / dt
write_trace(args["trace"], traces)
print(json.dumps(out))
"""


def run_backend(pure, opts, trace):
    env = dict(os.environ)
    env.pop("MAIBL_PURE_NUMPY", None)
    if pure:
        env["MAIBL_PURE_NUMPY"] = "1"
    payload = json.dumps(dict(vars(opts), trace=trace))
    res = subprocess.run([sys.executable, "-c", WORKER, payload], env=env, check=True, capture_output=True, text=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:16]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default="greedy-maibl")
    ap.add_argument("--episodes", type=int, default=20)
    ap.add_argument("--refs", type=int, default=50000, help="stored references in the blend benchmark")
    ap.add_argument("--instances", type=int, default=50, help="distinct outcomes in the blend benchmark")
    ap.add_argument("--blends", type=int, default=2000)
    opts = ap.parse_args(argv)

    with tempfile.TemporaryDirectory() as tmp:
        rows = {}
        for name, pure in (("numba", False), ("numpy", True)):
            trace = os.path.join(tmp, f"{name}.jsonl")
            rows[name] = run_backend(pure, opts, trace)
            rows[name]["trace"] = digest(trace)

    print(f"{'backend':8} {'blends/s':>12} {'env steps/s':>12} {'steps':>8}  trace")
    for name, r in rows.items():
        print(f"{name:8} {r['blends_per_s']:12.0f} {r['steps_per_s']:12.0f} {r['steps']:8d}  {r['trace']}")
    nb, np_ = rows["numba"], rows["numpy"]
    print(f"speedup: blend x{nb['blends_per_s'] / np_['blends_per_s']:.1f}, "
          f"episode loop x{nb['steps_per_s'] / np_['steps_per_s']:.1f}")
    print("traces identical" if nb["trace"] == np_["trace"] else "TRACES DIFFER")
    return 0 if nb["trace"] == np_["trace"] else 1


if __name__ == "__main__":
    sys.exit(main())
