"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--rows 4000] [--repeat 3]

Each workload runs once untimed (JIT compile), then ``--repeat`` times; the
best wall time is reported.
"""
from __future__ import annotations

import argparse
import time

from parensemble import kernels
from parensemble.classifiers import DTree, Knn, RForest, Svm, fit, predict
from parensemble.dataio import make_dataset, train_test_split
from parensemble.synth import synthetic_arrays


def workloads(rows: int):
    x, y = synthetic_arrays(rows, 8, 2, 1.0, 0)
    train, test = train_test_split(make_dataset(x, y), 0.7, 0)
    for params in (Knn(5), DTree(10), RForest(16, 0), Svm("linear", max_train=min(rows, 2000))):
        yield params.label, lambda p=params: predict(fit(p, train), test.features)


def best_of(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    names = ["numpy"] + (["numba"] if kernels.numba_available() else [])
    results: dict[str, dict[str, float]] = {}
    for name in names:
        prev = kernels.set_backend(name)
        try:
            kernels.warmup()
            results[name] = {label: best_of(fn, args.repeat) for label, fn in workloads(args.rows)}
        finally:
            kernels.set_backend(prev)

    labels = list(results["numpy"])
    print(f"{'workload':<16}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label in labels:
        row = f"{label:<16}" + "".join(f"{results[n][label]:>11.3f}s" for n in names)
        if len(names) > 1:
            row += f"{results['numpy'][label] / results['numba'][label]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
