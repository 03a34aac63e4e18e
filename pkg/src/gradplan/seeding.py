"""Named random substreams derived from one root seed.

Every stage of a run (dataset collection, weight init, planning, eval)
pulls its generator from here, so stages are reproducible independently
of each other.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(name) -> int:
    if isinstance(name, int):
        return name
    return zlib.crc32(str(name).encode())


def substream(root_seed: int, *names) -> np.random.Generator:
    """Generator for the substream identified by (root_seed, *names)."""
    entropy = [int(root_seed)] + [_key(n) for n in names]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def child_seed(root_seed: int, *names) -> int:
    """Stable 63-bit seed for handing to nested components."""
    entropy = [int(root_seed)] + [_key(n) for n in names]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0] >> 1)
