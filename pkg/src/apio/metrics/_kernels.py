"""Token-level edit distance DP kernels.

Two interchangeable implementations of the same recurrence: a
numba-compiled kernel (used by default when numba imports) and a
vectorized numpy fallback. Set ``APIO_NUMBA=0`` to force the numpy path;
``benchmarks/bench_levenshtein.py`` compares the two.

All kernels operate on integer token-id arrays. Callers are responsible
for interning tokens to ids (see :mod:`apio.metrics.levenshtein`).
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("APIO_NUMBA", "1").strip().lower()

try:
    if _FLAG in ("0", "false", "off", "no"):
        raise ImportError("numba disabled via APIO_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


# ---------------------------------------------------------------------------
# numpy implementations
#
# The row update uses the standard scan trick for the left-to-right insertion
# dependency: with row[j] = min over k <= j of (partial[k] + (j - k)), the
# true row equals running_min(partial - j) + j, which np.minimum.accumulate
# computes in one pass.
# ---------------------------------------------------------------------------


def _distance_np(a: np.ndarray, b: np.ndarray) -> int:
    m = b.size
    idx = np.arange(m + 1, dtype=np.int64)
    cur = idx.copy()
    for i in range(a.size):
        prev = cur
        cur = np.empty(m + 1, dtype=np.int64)
        cur[0] = i + 1
        if m:
            cur[1:] = np.minimum(prev[1:] + 1, prev[:-1] + (b != a[i]))
            cur = np.minimum.accumulate(cur - idx) + idx
    return int(cur[m])


def _table_np(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, m = a.size, b.size
    idx = np.arange(m + 1, dtype=np.int64)
    table = np.empty((n + 1, m + 1), dtype=np.int64)
    table[0] = idx
    for i in range(n):
        prev = table[i]
        cur = np.empty(m + 1, dtype=np.int64)
        cur[0] = i + 1
        if m:
            cur[1:] = np.minimum(prev[1:] + 1, prev[:-1] + (b != a[i]))
            cur = np.minimum.accumulate(cur - idx) + idx
        table[i + 1] = cur
    return table


def _matrix_np(pa: np.ndarray, la: np.ndarray, pb: np.ndarray, lb: np.ndarray) -> np.ndarray:
    """All-pairs distances between two packed sequence batches.

    ``pa``/``pb`` are (count, max_len) id arrays padded with -1, ``la``/``lb``
    the true lengths. Runs the DP over the full padded grid for every pair at
    once, capturing each pair's answer at its own (la, lb) boundary; padded
    cells never feed a captured cell because dp[i][j] only reads tokens
    a[:i], b[:j].
    """
    na, ca = pa.shape[0], pa.shape[1]
    nb, cb = pb.shape[0], pb.shape[1]
    out = np.empty((na, nb), dtype=np.int64)
    # dp slab for the current source row: shape (cb + 1, na, nb)
    dp = np.empty((cb + 1, na, nb), dtype=np.int64)
    for j in range(cb + 1):
        dp[j] = j
    col = np.arange(nb)
    for i in range(ca + 1):
        if i > 0:
            nxt = np.empty_like(dp)
            nxt[0] = i
            ai = pa[:, i - 1][:, None]  # (na, 1)
            for j in range(1, cb + 1):
                sub = dp[j - 1] + (pb[:, j - 1][None, :] != ai)
                nxt[j] = np.minimum(np.minimum(dp[j] + 1, nxt[j - 1] + 1), sub)
            dp = nxt
        done = np.nonzero(la == i)[0]
        for x in done:
            out[x] = dp[lb, x, col]
    return out


# ---------------------------------------------------------------------------
# numba implementations (plain nested-loop DP)
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _distance_nb(a: np.ndarray, b: np.ndarray) -> int:  # pragma: no cover - thin
        n, m = a.size, b.size
        prev = np.arange(m + 1, dtype=np.int64)
        cur = np.empty(m + 1, dtype=np.int64)
        for i in range(n):
            cur[0] = i + 1
            ai = a[i]
            for j in range(1, m + 1):
                c = prev[j - 1]
                if b[j - 1] != ai:
                    c += 1
                d = prev[j] + 1
                if d < c:
                    c = d
                e = cur[j - 1] + 1
                if e < c:
                    c = e
                cur[j] = c
            prev, cur = cur, prev
        return prev[m]

    @njit(cache=True)
    def _table_nb(a: np.ndarray, b: np.ndarray) -> np.ndarray:  # pragma: no cover - thin
        n, m = a.size, b.size
        table = np.empty((n + 1, m + 1), dtype=np.int64)
        for j in range(m + 1):
            table[0, j] = j
        for i in range(1, n + 1):
            table[i, 0] = i
            ai = a[i - 1]
            for j in range(1, m + 1):
                c = table[i - 1, j - 1]
                if b[j - 1] != ai:
                    c += 1
                d = table[i - 1, j] + 1
                if d < c:
                    c = d
                e = table[i, j - 1] + 1
                if e < c:
                    c = e
                table[i, j] = c
        return table

    @njit(cache=True)
    def _matrix_nb(pa: np.ndarray, la: np.ndarray, pb: np.ndarray, lb: np.ndarray) -> np.ndarray:  # pragma: no cover - thin
        na = pa.shape[0]
        nb = pb.shape[0]
        cb = pb.shape[1]
        out = np.empty((na, nb), dtype=np.int64)
        prev = np.empty(cb + 1, dtype=np.int64)
        cur = np.empty(cb + 1, dtype=np.int64)
        for x in range(na):
            n = la[x]
            for y in range(nb):
                m = lb[y]
                for j in range(m + 1):
                    prev[j] = j
                for i in range(1, n + 1):
                    cur[0] = i
                    ai = pa[x, i - 1]
                    for j in range(1, m + 1):
                        c = prev[j - 1]
                        if pb[y, j - 1] != ai:
                            c += 1
                        d = prev[j] + 1
                        if d < c:
                            c = d
                        e = cur[j - 1] + 1
                        if e < c:
                            c = e
                        cur[j] = c
                    prev, cur = cur, prev
                out[x, y] = prev[m]
        return out

    distance = _distance_nb
    table = _table_nb
    matrix = _matrix_nb
else:
    distance = _distance_np
    table = _table_np
    matrix = _matrix_np
