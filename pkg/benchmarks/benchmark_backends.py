"""Compare the compiled and pure-numpy kernel backends on the hot paths.

Run without arguments to benchmark both backends and print a table:

    python3 benchmarks/benchmark_backends.py

The driver re-runs itself in a subprocess per backend (the backend is
frozen at import time, so the two candidates cannot share a process)
and reports the best wall time per workload.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def build_inputs(samples, members, classes, seed=7):
    rng = np.random.default_rng(seed)
    probs = rng.random((members, samples, classes)) + 0.05
    probs /= probs.sum(axis=2, keepdims=True)
    labels = rng.integers(0, classes, size=samples)
    return probs, labels


def workloads(samples, members, classes):
    from calibdis import calibration as cal
    from calibdis import core, formats, info, rejection

    probs, labels = build_inputs(samples, members, classes)
    ds = core.EnsembleDataset(probs, labels)
    marg = core.marginal(ds)
    small = core.EnsembleDataset(probs[:, : samples // 4], labels[: samples // 4])

    return [
        ("marginal", lambda: core.marginal(ds)),
        ("pred-acc rows", lambda: core.per_sample_pred_acc(marg)),
        ("disagreement pairs", lambda: core.expected_disagreement(ds, mode="ordered-pairs")),
        ("ece 15 bins", lambda: cal.ece(marg, labels)),
        ("cace 15 bins", lambda: cal.cace(marg, labels)),
        ("cace level sets", lambda: cal.cace_levelset(marg, labels)),
        ("bald", lambda: info.bald(ds)),
        ("approx bald", lambda: info.approx_bald(ds)),
        ("dump serialize", lambda: formats.write_dump_bytes(ds)),
        ("rejection grid 20", lambda: rejection.rejection_curve(
            small, rejection.SweepSpec(kind="quantile", grid_count=20))),
    ]


def run_child(args):
    from calibdis import _kernels

    _kernels.warmup()
    rows = []
    for name, fn in workloads(args.samples, args.members, args.classes):
        fn()  # extra warm call with the real shapes
        best = min(
            _timed(fn) for _ in range(args.repeat)
        )
        rows.append({"name": name, "best_ms": best * 1e3})
    print(json.dumps({"backend": _kernels.ACTIVE_BACKEND, "rows": rows}))


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def run_driver(args):
    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, CALIBDIS_BACKEND=backend)
        cmd = [sys.executable, __file__, "--child",
               "--samples", str(args.samples),
               "--members", str(args.members),
               "--classes", str(args.classes),
               "--repeat", str(args.repeat)]
        proc = subprocess.run(cmd, capture_output=True, text=True, env=env)
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            raise SystemExit("benchmark child failed for backend %s" % backend)
        payload = json.loads(proc.stdout.strip().splitlines()[-1])
        results[payload["backend"]] = payload["rows"]

    print("samples=%d members=%d classes=%d (best of %d)"
          % (args.samples, args.members, args.classes, args.repeat))
    header = "%-22s %12s %12s %8s" % ("workload", "numba ms", "numpy ms", "ratio")
    print(header)
    print("-" * len(header))
    for nb, np_ in zip(results["numba"], results["numpy"]):
        ratio = np_["best_ms"] / nb["best_ms"] if nb["best_ms"] > 0 else float("inf")
        print("%-22s %12.3f %12.3f %7.2fx"
              % (nb["name"], nb["best_ms"], np_["best_ms"], ratio))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=200_000)
    parser.add_argument("--members", type=int, default=8)
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--child", action="store_true",
                        help="internal: time the already-selected backend")
    args = parser.parse_args()
    if args.child:
        run_child(args)
    else:
        run_driver(args)


if __name__ == "__main__":
    main()
