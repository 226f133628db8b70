"""Timing comparison of the two MLP kernel backends.

Runs forward and forward+backward passes on the two network shapes the
package actually trains (the small toy net and the deeper control net)
and prints per-call microseconds for the compiled extension against the
numpy reference, after checking both produce identical outputs.

Usage: python3 benchmarks/bench_kernels.py [repeats]
"""

import sys
import time

import numpy as np

from tdlab import _kernels_py
from tdlab import backend

try:
    from tdlab import _kernels
except ImportError:
    _kernels = None


SHAPES = (
    ("toy 2-10-1, batch 32", 32, (2, 10, 1)),
    ("control 4-64-64-64-2, batch 64", 64, (4, 64, 64, 64, 2)),
    ("control 4-64-64-64-2, batch 512", 512, (4, 64, 64, 64, 2)),
)


def _make_net(sizes, rng):
    weights = [rng.normal(scale=0.3, size=(a, b)) for a, b in zip(sizes, sizes[1:])]
    biases = [rng.normal(scale=0.1, size=b) for b in sizes[1:]]
    return weights, biases


def _time(fn, repeats):
    fn()  # warm cache
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1e6


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    rng = np.random.default_rng(0)
    print(f"selected backend: {backend.backend_name}")
    if _kernels is None:
        print("compiled extension not importable; timing numpy only")
    impls = [("numpy", _kernels_py)] + ([("cython", _kernels)] if _kernels else [])

    header = f"{'case':36s}" + "".join(
        f"{name + ' fwd':>14s}{name + ' fwd+bwd':>18s}" for name, _ in impls
    )
    print(header)
    for label, batch, sizes in SHAPES:
        x = rng.normal(size=(batch, sizes[0]))
        weights, biases = _make_net(sizes, rng)
        delta = rng.normal(size=(batch, sizes[-1]))

        outputs = []
        row = f"{label:36s}"
        for _, impl in impls:
            out, cache = impl.forward(x, weights, biases)
            outputs.append(out)
            fwd = _time(lambda impl=impl: impl.forward(x, weights, biases), repeats)

            def step(impl=impl):
                out, cache = impl.forward(x, weights, biases)
                impl.backward(delta, weights, cache)

            both = _time(step, repeats)
            row += f"{fwd:12.1f}us{both:16.1f}us"
        print(row)
        if len(outputs) == 2 and not np.array_equal(outputs[0], outputs[1]):
            worst = float(np.max(np.abs(outputs[0] - outputs[1])))
            print(f"  WARNING: backends disagree, max abs diff {worst:.3e}")


if __name__ == "__main__":
    main()
