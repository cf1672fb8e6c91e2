"""Reproducible random streams.

Every stochastic routine in the package draws from a Philox (counter-based)
generator keyed by an explicit stream id such as (seed, epoch, layer, node).
Distinct ids give statistically independent streams, so table construction
can run per-anchor in any order, or in parallel, without changing results.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _as_entropy(part: int | str) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(*key: int | str) -> np.random.Generator:
    """Generator for the given stream id; same key, same stream, always."""
    if not key:
        raise ValueError("stream key must not be empty")
    seq = np.random.SeedSequence([_as_entropy(part) for part in key])
    return np.random.Generator(np.random.Philox(seq))
