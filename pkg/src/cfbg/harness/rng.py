"""Counter-based RNG streams: disjoint, reproducible, scheduling-independent."""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["rng_stream", "tag_key"]

_U64 = 2**64


def tag_key(tag: str) -> int:
    """Stable 64-bit key for a module tag."""
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "big")


def rng_stream(master_seed: int, trial_index: int, module_tag: str) -> np.random.Generator:
    """Independent generator for one (seed, trial, module) combination.

    Streams are derived by keying a counter-based generator with the master
    seed and a hash of the module tag and positioning its counter at the
    trial index, so identical inputs replay the identical draw sequence no
    matter how trials are scheduled across workers.
    """
    if not 0 <= master_seed < _U64:
        raise ValueError("master seed must fit in 64 bits")
    if not 0 <= trial_index < _U64:
        raise ValueError("trial index must fit in 64 bits")
    bitgen = np.random.Philox(
        key=[np.uint64(master_seed), np.uint64(tag_key(module_tag))],
        counter=[np.uint64(trial_index), 0, 0, 0],
    )
    return np.random.Generator(bitgen)
