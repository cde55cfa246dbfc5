"""SARI scoring for sentence simplification.

The score averages three component scores over n-gram orders 1..4, each
comparing the system output against the source and one or more
references:

* keep  - F1 of fractional precision/recall over n-grams present in both
          source and output, with source/output counts scaled by the
          number of references so multiplicity against the combined
          reference counter is weighted fairly;
* delete - precision only, over n-grams removed from the source;
* add   - F1 over distinct n-grams introduced by the output.

Any component whose denominator is empty contributes 0 (no smoothing).
Tokens are lowercased and split on whitespace. Scores are scaled to
[0, 100].
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Sequence


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i: i + n]) for i in range(len(tokens) - n + 1))


def _scale(counter: Counter, k: int) -> Counter:
    return Counter({g: c * k for g, c in counter.items()})


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _order_score(src: Counter, out: Counter, ref: Counter) -> float:
    keep = src & out
    keep_good = keep & ref
    keep_all = src & ref
    kp = sum(keep_good[g] / keep[g] for g in keep_good) / len(keep) if keep else 0.0
    kr = sum(keep_good[g] / keep_all[g] for g in keep_good) / len(keep_all) if keep_all else 0.0

    deleted = src - out
    del_good = deleted - ref
    dp = sum(del_good[g] / deleted[g] for g in del_good) / len(deleted) if deleted else 0.0

    added = set(out) - set(src)
    add_good = added & set(ref)
    add_all = set(ref) - set(src)
    ap = len(add_good) / len(added) if added else 0.0
    ar = len(add_good) / len(add_all) if add_all else 0.0

    return (_f1(kp, kr) + dp + _f1(ap, ar)) / 3


def sari(source: str, output: str, references: Sequence[str]) -> float:
    """Sentence-level SARI in [0, 100]."""
    if not references:
        raise ValueError("references must be non-empty")
    src_tok = source.lower().split()
    out_tok = output.lower().split()
    ref_toks = [r.lower().split() for r in references]
    k = len(references)

    total = 0.0
    for n in range(1, 5):
        ref_counter = Counter()
        for toks in ref_toks:
            ref_counter.update(_ngrams(toks, n))
        total += _order_score(
            _scale(_ngrams(src_tok, n), k),
            _scale(_ngrams(out_tok, n), k),
            ref_counter,
        )
    return 100.0 * total / 4
