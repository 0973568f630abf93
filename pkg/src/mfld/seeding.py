"""Deterministic seed derivation.

Seeds are nonnegative ints or lists of them; children are derived by
appending path components, so any worker can rebuild its stream without
coordination and results do not depend on scheduling order.
"""

from __future__ import annotations

import numpy as np

from .errors import MfldError


def seed_list(seed, *parts) -> list[int]:
    if isinstance(seed, (list, tuple)):
        base = [int(s) for s in seed]
    else:
        base = [int(seed)]
    out = base + [int(p) for p in parts]
    if any(s < 0 for s in out):
        raise MfldError("seeds must be nonnegative integers")
    return out


def rng_for(seed, *parts) -> np.random.Generator:
    return np.random.default_rng(seed_list(seed, *parts))
