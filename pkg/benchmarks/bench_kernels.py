"""Compare the compiled and pure-Python kernel backends on pipeline-shaped workloads.

    python benchmarks/bench_kernels.py [--repeat 3] [--episodes 100] [--json out.json]

Each workload is timed as the best of ``--repeat`` runs, and outputs are checked
for agreement between backends before any timing is reported.
"""
import argparse
import json
import time

import numpy as np

from gcbatch import kernels
from gcbatch.augment import augment_dataset
from gcbatch.collect import collect_onpolicy
from gcbatch.env import KINDS, EnvConfig
from gcbatch.evaluate import TestConfig, evaluate
from gcbatch.learn import EquivModel
from gcbatch.nnmath import mlp_init


def _step_inputs(cfg, n):
    rng = np.random.default_rng(0)
    pos = rng.uniform(-10, 10, (n, 2))
    h = rng.uniform(0, 2 * np.pi, n)
    m = rng.uniform(0, cfg.v_max, (n, 2)) * (0.5 if cfg.kind == "THRUSTSHIP" else 1.0)
    if cfg.kind == "UNICYCLE":
        m[:, 1] = 0.0
    return pos, h, m, rng.uniform(-1, 1, (n, 2))


def _model(cfg):
    # untrained default-sized network with a forward bias, so episodes run to max_steps
    m = EquivModel(mlp_init([cfg.obs_dim + 2, 64, 64, 10], 1), mlp_init([10, 50, 50, 2], 2), cfg)
    m.policy.biases[-1][0] = 0.8
    return m


def workloads(kind, episodes):
    cfg = EnvConfig(kind=kind)
    step_in = _step_inputs(cfg, 100_000)
    base = collect_onpolicy(cfg, episodes, 200)
    test = TestConfig(episodes_per_seed=10, seeds=(0, 1), max_steps=1000)
    model = _model(cfg)
    return {
        "step_batch x100k": lambda: kernels.step_batch(cfg.kind_code, cfg.params(), *step_in),
        f"collect {episodes}x200 (expert_rollout+replay)": lambda: collect_onpolicy(cfg, episodes, 200),
        f"augment {episodes} twins (replay)": lambda: augment_dataset(cfg, base, 1),
        "evaluate 20 eps x1000 (policy_rollout)": lambda: evaluate(model, test),
    }


def _fingerprint(out):
    if isinstance(out, tuple):
        return [np.asarray(a) for a in out]
    if hasattr(out, "twins"):
        return [t.obs for t, _ in out.twins]
    if hasattr(out, "trajectories"):
        return [t.obs for t in out.trajectories]
    return [np.array([r["closest_distance"] for r in out.episode_records])]


def _best(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--episodes", type=int, default=100)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)

    backends = kernels.available()
    if "cython" not in backends:
        print("compiled backend not built; timing the Python fallback only")
    start = kernels.BACKEND
    rows = []
    try:
        for kind in KINDS:
            for name, fn in workloads(kind, args.episodes).items():
                res = {}
                for b in backends:
                    kernels.use(b)
                    res[b] = _best(fn, args.repeat)
                outs = [_fingerprint(o) for _, o in res.values()]
                gap = max((float(np.max(np.abs(x - y))) if x.size else 0.0)
                          for o in outs[1:] for x, y in zip(outs[0], o)) if len(outs) > 1 else 0.0
                rows.append({"env": kind, "workload": name, "max_abs_diff": gap,
                             **{f"{b}_s": t for b, (t, _) in res.items()}})
    finally:
        kernels.use(start)

    print(f"{'env':<11} {'workload':<44} " + " ".join(f"{b + ' s':>10}" for b in backends)
          + ("   speedup  max|diff|" if len(backends) > 1 else ""))
    for r in rows:
        line = f"{r['env']:<11} {r['workload']:<44} " + " ".join(f"{r[b + '_s']:>10.4f}" for b in backends)
        if len(backends) > 1:
            line += f"  {r['python_s'] / r['cython_s']:>7.1f}x  {r['max_abs_diff']:.1e}"
        print(line)
    if args.json:
        with open(args.json, "w") as f:
            json.dump(rows, f, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
