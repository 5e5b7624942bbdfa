"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--trains 30 100 300] [--vars 10 14 18]
"""
import argparse
import timeit

import numpy as np

from railguard import _kernels_py
from railguard.generate import MIXED, base_network, train_sequence
from railguard.maxsum import FactorGraph, FactorNode, _flatten
from railguard.world import World

try:
    from railguard import _kernels
except ImportError:
    _kernels = None


def gap_inputs(m, seed=0):
    net = base_network()
    w = World(net, tuple(train_sequence(seed, m, net, MIXED)))
    track, lo, hi = w.layout[:3]
    return track, lo, hi, net.track_u, net.track_v, net.track_len, net.dist


def chain_graph(n, seed=0):
    rng = np.random.default_rng(seed)
    names = [f"v{i}" for i in range(n)]
    factors = []
    for i, v in enumerate(names):
        scope = tuple(names[max(0, i - 1):i + 2])
        beta = tuple(float(x) for x in rng.choice([-1.0, 1.0], size=2))
        factors.append(FactorNode(f"U{i}", v, scope, beta))
    g = FactorGraph(names, factors)
    return (n,) + _flatten(g)


def best_time(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--trains", type=int, nargs="+", default=[10, 30, 100])
    ap.add_argument("--vars", type=int, nargs="+", default=[8, 12, 16])
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; only the Python backend is available")
    print(f"{'kernel':<20}{'size':>8}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    cases = [("pair_gaps", m, "pair_gaps", gap_inputs(m)) for m in args.trains]
    cases += [("enumerate_optimum", n, "enumerate_optimum", chain_graph(n)) for n in args.vars]
    for label, size, name, inputs in cases:
        slow = best_time(getattr(_kernels_py, name), inputs, args.repeat)
        if _kernels is not None:
            fast_fn = getattr(_kernels, name)
            same = np.array_equal(*(np.asarray(f(*inputs), dtype=float)
                                    for f in (fast_fn, getattr(_kernels_py, name))))
            assert same, f"backends disagree on {label} size {size}"
            fast = best_time(fast_fn, inputs, args.repeat)
            print(f"{label:<20}{size:>8}{slow * 1e3:>14.3f}{fast * 1e3:>14.3f}{slow / fast:>9.1f}x")
        else:
            print(f"{label:<20}{size:>8}{slow * 1e3:>14.3f}{'-':>14}{'-':>10}")


if __name__ == "__main__":
    main()
