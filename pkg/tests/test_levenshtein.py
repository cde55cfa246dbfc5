from __future__ import annotations

import functools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apio.metrics import _kernels
from apio.metrics.levenshtein import (
    alignment_table,
    min_ref_levenshtein,
    pairwise_word_levenshtein,
    word_levenshtein,
)

TOKENS = st.lists(st.sampled_from(["a", "b", "c"]), max_size=6)


@functools.lru_cache(maxsize=None)
def brute_force(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    """Naive recursive edit distance, the independent oracle."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(
        brute_force(a[1:], b[1:]) + (a[0] != b[0]),
        brute_force(a[1:], b) + 1,
        brute_force(a, b[1:]) + 1,
    )


def test_identity():
    assert word_levenshtein("the cat sat", "the cat sat") == 0


def test_mixed_edit():
    # sub b->x plus delete d, checked against a hand DP table
    assert word_levenshtein("a b c d", "a x c") == 2


def test_empty_side():
    assert word_levenshtein("", "a b") == 2
    assert word_levenshtein("a b", "") == 2
    assert word_levenshtein("", "") == 0


@given(TOKENS, TOKENS)
def test_matches_brute_force(a, b):
    assert word_levenshtein(" ".join(a), " ".join(b)) == brute_force(tuple(a), tuple(b))


@given(TOKENS, TOKENS)
def test_symmetry(a, b):
    assert word_levenshtein(" ".join(a), " ".join(b)) == word_levenshtein(" ".join(b), " ".join(a))


@given(TOKENS, TOKENS, TOKENS)
@settings(max_examples=200)
def test_triangle_inequality(a, b, c):
    sa, sb, sc = " ".join(a), " ".join(b), " ".join(c)
    assert word_levenshtein(sa, sc) <= word_levenshtein(sa, sb) + word_levenshtein(sb, sc)


@given(TOKENS, TOKENS)
def test_identity_of_indiscernibles(a, b):
    d = word_levenshtein(" ".join(a), " ".join(b))
    assert (d == 0) == (a == b)


def test_min_ref_examples():
    assert min_ref_levenshtein("a b c", ["x y", "a b c", "q"]) == 0
    # two hand DP tables: d(output, "a b") = 2, d(output, "a b c") = 1
    assert min_ref_levenshtein("a b c d", ["a b", "a b c"]) == 1
    assert min_ref_levenshtein("a b", ["x y"]) == word_levenshtein("a b", "x y")


def test_min_ref_rejects_empty():
    with pytest.raises(ValueError):
        min_ref_levenshtein("a", [])


def test_pairwise_matches_scalar():
    rng = random.Random(0)
    texts_a = [" ".join(rng.choices("abcde", k=rng.randint(0, 7))) for _ in range(12)]
    texts_b = [" ".join(rng.choices("abcde", k=rng.randint(0, 7))) for _ in range(9)]
    matrix = pairwise_word_levenshtein(texts_a, texts_b)
    for i, ta in enumerate(texts_a):
        for j, tb in enumerate(texts_b):
            assert matrix[i, j] == word_levenshtein(ta, tb)


def test_alignment_table_boundaries():
    table = alignment_table(["a", "b"], ["a", "x", "b"])
    assert table[0, 0] == 0
    assert table[2, 3] == 1
    assert list(table[0]) == [0, 1, 2, 3]


@pytest.mark.parametrize("impl", ["numpy", "numba"])
def test_kernel_parity(impl):
    if impl == "numba" and not _kernels.HAS_NUMBA:
        pytest.skip("numba unavailable")
    dist = _kernels._distance_nb if impl == "numba" else _kernels._distance_np
    table = _kernels._table_nb if impl == "numba" else _kernels._table_np
    rng = np.random.default_rng(42)
    for _ in range(60):
        a = rng.integers(0, 4, size=rng.integers(0, 8)).astype(np.int64)
        b = rng.integers(0, 4, size=rng.integers(0, 8)).astype(np.int64)
        expected = brute_force(tuple(a.tolist()), tuple(b.tolist()))
        assert dist(a, b) == expected
        assert table(a, b)[a.size, b.size] == expected


def test_env_flag_selects_numpy_fallback():
    import subprocess
    import sys

    probe = (
        "from apio.metrics import _kernels;"
        "assert not _kernels.HAS_NUMBA;"
        "assert _kernels.distance is _kernels._distance_np;"
        "import numpy as np;"
        "assert _kernels.distance(np.array([1,2,3]), np.array([1,3])) == 1"
    )
    env = dict(**__import__("os").environ, APIO_NUMBA="0")
    subprocess.run([sys.executable, "-c", probe], check=True, env=env)


@pytest.mark.parametrize("impl", ["numpy", "numba"])
def test_matrix_kernel_parity(impl):
    if impl == "numba" and not _kernels.HAS_NUMBA:
        pytest.skip("numba unavailable")
    matrix = _kernels._matrix_nb if impl == "numba" else _kernels._matrix_np
    rng = np.random.default_rng(7)
    ca, cb = 6, 5
    na, nb = 10, 8
    la = rng.integers(0, ca + 1, size=na).astype(np.int64)
    lb = rng.integers(0, cb + 1, size=nb).astype(np.int64)
    pa = rng.integers(0, 3, size=(na, ca)).astype(np.int64)
    pb = rng.integers(0, 3, size=(nb, cb)).astype(np.int64)
    out = matrix(pa, la, pb, lb)
    for x in range(na):
        for y in range(nb):
            a = tuple(pa[x, : la[x]].tolist())
            b = tuple(pb[y, : lb[y]].tolist())
            assert out[x, y] == brute_force(a, b)
