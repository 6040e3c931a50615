"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel is called on inputs shaped like one simulation step (tens of
candidates, ten features) and on a larger batch; the table reports the
median time per call and the speedup of the compiled backend.
"""

import argparse
import statistics
import time

import numpy as np

from durable_recourse.kernels import _fallback

try:
    from durable_recourse.kernels import _core
except ImportError:
    _core = None


def cases(n, z, rng):
    x_f = rng.random((n, z))
    x_cf = np.clip(x_f + rng.uniform(0, 0.3, (n, z)), 0, 1)
    d = rng.uniform(0.1, 0.9, z)
    mask = rng.random((n, z)) < 0.3
    uni = rng.random((n, z))
    b = rng.random(n)
    q = rng.integers(0, 5, n).astype(float)
    scores = rng.random(n)
    ids = np.arange(n, dtype=np.int64)
    w = rng.uniform(-3, 3, z)
    return {
        "attainability": lambda k: k.attainability(x_f, x_cf),
        "success_probability": lambda k: k.success_probability(x_f, x_cf, d, 0.05),
        "dropout_probability": lambda k: k.dropout_probability(b, q, 2.0, 0.1, 0.5),
        "reapply_probability": lambda k: k.reapply_probability(b, b, 3.0),
        "attempt_features": lambda k: k.attempt_features(x_f, x_cf, mask, d, 0.05, uni),
        "gini_pairwise": lambda k: k.gini_pairwise(scores + 0.01),
        "topk": lambda k: k.topk(scores, ids, max(1, n // 2)),
        "greedy_l1": lambda k: k.greedy_l1(x_f[0], w, 2.0),
    }


def timeit(fn, repeat):
    fn()
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(50):
            fn()
        samples.append((time.perf_counter() - t0) / 50)
    return statistics.median(samples)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled kernels are not built; only the fallback is available")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'n':>6}{'python (us)':>14}{'compiled (us)':>16}{'speedup':>10}")
    for n in (20, 2000):
        for name, call in cases(n, 10, rng).items():
            t_py = timeit(lambda: call(_fallback), args.repeat)
            t_c = timeit(lambda: call(_core), args.repeat)
            print(f"{name:<22}{n:>6}{t_py * 1e6:>14.1f}{t_c * 1e6:>16.1f}{t_py / t_c:>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
