"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--notes 2000]

Each workload runs once per backend to warm up (JIT compilation is
excluded), then the best of ``--repeat`` runs is reported. Outputs of the
two backends are compared before timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from symenc._backend import HAS_NUMBA, use_backend
from symenc.graph import GraphConfig, build_graph
from symenc.matrix import MatrixConfig, build_roll
from symenc.sequence import bpe_apply, bpe_train, build_vocabulary, tokenize
from symenc.testing import random_performance


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(n_notes, seed):
    rng = np.random.default_rng(seed)
    doc = random_performance(rng, n_notes, span=n_notes * 0.05)
    graph_cfg = GraphConfig(include_silence_edges=True, inverse_edges=True)
    roll_cfg = MatrixConfig(window_length=doc.end_time, include_pedal_rows=True)
    vocab = build_vocabulary("REMI", "performance")
    corpus = [tokenize(random_performance(rng, 150, span=20.0), vocab) for _ in range(40)]
    model = bpe_train(corpus, len(vocab), multiplier=2)

    def graph():
        return build_graph(doc, None, graph_cfg).edges

    def roll():
        return build_roll(doc, 0.0, roll_cfg).values

    def train():
        return bpe_train(corpus, len(vocab), multiplier=2).merges

    def apply():
        return [bpe_apply(s, model).ids for s in corpus]

    return {"graph edges": graph, "piano roll": roll, "bpe train": train, "bpe apply": apply}


def same(a, b):
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--notes", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if not HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    jobs = workloads(args.notes, args.seed)
    print(f"{'workload':<14}{'numpy s':>11}{'numba s':>11}{'speedup':>10}")
    for name, fn in jobs.items():
        with use_backend("numpy"):
            ref = fn()
            t_np = best_of(fn, args.repeat)
        with use_backend("numba"):
            out = fn()
            t_nb = best_of(fn, args.repeat)
        if not same(ref, out):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<14}{t_np:>11.4f}{t_nb:>11.4f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
