"""Word-level Levenshtein edit distance.

Tokenization is whitespace splitting; tokens are interned to integer ids
before hitting the DP kernels in :mod:`apio.metrics._kernels`.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from . import _kernels


def tokenize(text: str) -> list[str]:
    return text.split()


def _encode(seqs: Sequence[Sequence[str]]) -> list[np.ndarray]:
    vocab: dict[str, int] = {}
    out = []
    for seq in seqs:
        ids = np.empty(len(seq), dtype=np.int64)
        for i, tok in enumerate(seq):
            ids[i] = vocab.setdefault(tok, len(vocab))
        out.append(ids)
    return out


def word_levenshtein(a: str, b: str) -> int:
    """Minimal number of token insertions/deletions/substitutions turning
    the tokens of ``a`` into the tokens of ``b``."""
    ea, eb = _encode([tokenize(a), tokenize(b)])
    return int(_kernels.distance(ea, eb))


def min_ref_levenshtein(output: str, references: Sequence[str]) -> int:
    """Distance from ``output`` to the closest reference."""
    if not references:
        raise ValueError("references must be non-empty")
    seqs = _encode([tokenize(output)] + [tokenize(r) for r in references])
    out = seqs[0]
    return int(min(_kernels.distance(out, ref) for ref in seqs[1:]))


def alignment_table(src_tokens: Sequence[str], hyp_tokens: Sequence[str]) -> np.ndarray:
    """Full (len(src)+1) x (len(hyp)+1) DP table for alignment backtraces."""
    ea, eb = _encode([src_tokens, hyp_tokens])
    return _kernels.table(ea, eb)


def pairwise_word_levenshtein(texts_a: Sequence[str], texts_b: Sequence[str]) -> np.ndarray:
    """All-pairs distance matrix, shape (len(texts_a), len(texts_b))."""
    tok_a = [tokenize(t) for t in texts_a]
    tok_b = [tokenize(t) for t in texts_b]
    seqs = _encode(tok_a + tok_b)
    ids_a, ids_b = seqs[: len(tok_a)], seqs[len(tok_a):]
    ca = max((s.size for s in ids_a), default=0)
    cb = max((s.size for s in ids_b), default=0)
    pa = np.full((len(ids_a), ca), -1, dtype=np.int64)
    pb = np.full((len(ids_b), cb), -1, dtype=np.int64)
    la = np.empty(len(ids_a), dtype=np.int64)
    lb = np.empty(len(ids_b), dtype=np.int64)
    for i, s in enumerate(ids_a):
        pa[i, : s.size] = s
        la[i] = s.size
    for i, s in enumerate(ids_b):
        pb[i, : s.size] = s
        lb[i] = s.size
    return _kernels.matrix(pa, la, pb, lb)
