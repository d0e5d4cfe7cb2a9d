"""Deterministic random substreams.

Every draw site derives an independent counter-based generator from an
integer path such as (seed, replicate, purpose). Adding a new draw site
never perturbs existing ones, and parallel execution cannot reorder
results because no generator is shared.
"""

from __future__ import annotations

import numpy as np

# Draw purposes; fixed codes keep streams stable across versions.
COVARIATES = 0
INSTRUMENT = 1
COMPLIANCE = 2
NOISE = 3
RESAMPLE = 4


def substream(*path: int) -> np.random.Generator:
    """Return a Philox generator keyed by the given integer path."""
    if any(p < 0 for p in path):
        raise ValueError("stream path entries must be non-negative integers")
    seq = np.random.SeedSequence(tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))
