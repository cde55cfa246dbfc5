"""Deterministic seed derivation.

Every stochastic decision in the engine draws from a seed derived purely
from the run seed and a structural path (epoch, candidate id, operator,
...). Parallel and sequential execution therefore see identical streams,
and resuming a run needs no RNG state serialization.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(*parts: object) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derived_rng(*parts: object) -> random.Random:
    return random.Random(derive_seed(*parts))
