#!/usr/bin/env python3
"""Benchmark the numba and numpy edit-distance kernels.

Times the single-pair distance, full-table, and all-pairs matrix kernels
on random token-id sequences at corpus-like sizes. The numba kernels are
exercised only when numba imported (run with APIO_NUMBA=0 to confirm the
fallback wiring; the numpy timings here are measured directly either way).
"""

from __future__ import annotations

import time

import numpy as np

from apio.metrics import _kernels
from apio.metrics.levenshtein import pairwise_word_levenshtein


def _sequences(rng, count, max_len, vocab=2000):
    lengths = rng.integers(1, max_len + 1, size=count)
    return [rng.integers(0, vocab, size=n).astype(np.int64) for n in lengths]


def _time(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_pairs(impl_name, distance, pairs):
    def run():
        for a, b in pairs:
            distance(a, b)

    elapsed = _time(run)
    rate = len(pairs) / elapsed
    print(f"  {impl_name:>6}  distance x{len(pairs):>6}: {elapsed * 1e3:8.1f} ms  ({rate:,.0f} pairs/s)")
    return elapsed


def bench_tables(impl_name, table, pairs):
    def run():
        for a, b in pairs:
            table(a, b)

    elapsed = _time(run)
    print(f"  {impl_name:>6}  table    x{len(pairs):>6}: {elapsed * 1e3:8.1f} ms")
    return elapsed


def bench_matrix(impl_name, matrix, packed, lengths):
    def run():
        matrix(packed, lengths, packed, lengths)

    elapsed = _time(run)
    n = len(lengths) ** 2
    print(f"  {impl_name:>6}  matrix {len(lengths)}x{len(lengths)}: {elapsed * 1e3:8.1f} ms  ({n / elapsed:,.0f} cells/s)")
    return elapsed


def main():
    rng = np.random.default_rng(0)
    seqs = _sequences(rng, 2000, 30)
    pairs = [(seqs[i], seqs[(i * 7 + 1) % len(seqs)]) for i in range(2000)]

    batch = _sequences(rng, 400, 30)
    max_len = max(s.size for s in batch)
    packed = np.full((len(batch), max_len), -1, dtype=np.int64)
    lengths = np.empty(len(batch), dtype=np.int64)
    for i, s in enumerate(batch):
        packed[i, : s.size] = s
        lengths[i] = s.size

    impls = [("numpy", _kernels._distance_np, _kernels._table_np, _kernels._matrix_np)]
    if _kernels.HAS_NUMBA:
        # warm the JIT outside the timed region
        _kernels._distance_nb(seqs[0], seqs[1])
        _kernels._table_nb(seqs[0], seqs[1])
        _kernels._matrix_nb(packed[:2], lengths[:2], packed[:2], lengths[:2])
        impls.append(("numba", _kernels._distance_nb, _kernels._table_nb, _kernels._matrix_nb))
    else:
        print("numba unavailable or disabled; timing the numpy path only\n")

    print(f"sequences: up to 30 tokens, active kernel: {'numba' if _kernels.HAS_NUMBA else 'numpy'}\n")
    results = {}
    for name, distance, table, matrix in impls:
        d = bench_pairs(name, distance, pairs)
        t = bench_tables(name, table, pairs[:500])
        m = bench_matrix(name, matrix, packed, lengths)
        results[name] = (d, t, m)
        print()

    if len(results) == 2:
        for metric_idx, metric in enumerate(("distance", "table", "matrix")):
            speedup = results["numpy"][metric_idx] / results["numba"][metric_idx]
            print(f"numba speedup on {metric}: {speedup:.1f}x")

    # sanity: both paths agree through the public API
    texts = [" ".join(map(str, s[:10])) for s in batch[:50]]
    reference = pairwise_word_levenshtein(texts, texts)
    print(f"\npairwise sanity check: {reference.shape} matrix, max distance {reference.max()}")


if __name__ == "__main__":
    main()
