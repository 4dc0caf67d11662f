"""Compare SMO wall time between the numba and pure-numpy backends.

Each backend runs in its own interpreter because the backend is fixed at
import time by ``TRACKDIAG_DISABLE_NUMBA``::

    python3 benchmarks/bench_smo.py --sizes 500 1000 2000 --repeat 3
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from trackdiag._accel import backend_name
from trackdiag.dataset import build_training_corpus
from trackdiag.svm.kernels import KernelSpec, gram
from trackdiag.svm.smo import SmoSettings, solve_dual

sizes, repeat, seed = json.loads(sys.argv[1])
spec = KernelSpec("rbf", 0.1)
per_class = max(sizes) // 2
ds = build_training_corpus(per_class=per_class, seed=seed)
# the hardest pair: traction noise vs contact interrupted, full-scale inputs
idx = np.flatnonzero(ds.labels > 0)
X_all = ds.X[idx] / 40.0
y_all = np.where(ds.labels[idx] == 2, 1.0, -1.0)

# compile outside the timed region
solve_dual(X_all[:20:2].copy(), np.tile([1.0, -1.0], 5), 10.0, spec)
solve_dual(X_all[:20:2].copy(), np.tile([1.0, -1.0], 5), 10.0, spec, SmoSettings(cache_budget=4 * 10 * 8))

rows = []
for n in sizes:
    take = np.concatenate([np.arange(n // 2), per_class + np.arange(n - n // 2)])
    X, y = X_all[take], y_all[take]
    K = gram(spec, X)
    for mode in ("full", "cached"):
        settings = SmoSettings() if mode == "full" else SmoSettings(cache_budget=(n // 10) * n * 8)
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            res = solve_dual(X, y, 10.0, spec, settings, K=K if mode == "full" else None)
            best = min(best, time.perf_counter() - t0)
        rows.append({"n": n, "mode": mode, "seconds": best, "iterations": res.iterations,
                     "objective": res.objective})
print(json.dumps({"backend": backend_name(), "rows": rows}))
"""


def run(disable, sizes, repeat, seed):
    env = dict(os.environ)
    env.pop("TRACKDIAG_DISABLE_NUMBA", None)
    if disable:
        env["TRACKDIAG_DISABLE_NUMBA"] = "1"
    out = subprocess.run(
        [sys.executable, "-c", WORKER, json.dumps([sizes, repeat, seed])],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    jit = run(False, args.sizes, args.repeat, args.seed)
    ref = run(True, args.sizes, args.repeat, args.seed)
    print(f"{'n':>6} {'mode':>7} {'iters':>7} {jit['backend']:>10} {ref['backend']:>10} {'speedup':>8}  objective match")
    for a, b in zip(jit["rows"], ref["rows"]):
        same = abs(a["objective"] - b["objective"]) <= 1e-9 * max(1.0, abs(b["objective"]))
        print(f"{a['n']:>6} {a['mode']:>7} {a['iterations']:>7} {a['seconds']:>9.3f}s {b['seconds']:>9.3f}s "
              f"{b['seconds'] / a['seconds']:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
