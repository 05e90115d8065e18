"""Reproducible random-number streams.

All stochastic code in the toolkit draws from Philox, a counter-based
64-bit generator, so that independent substreams can be derived from a
global seed plus a structured key (e.g. ``(subject_id, slice_index)``).
Substreams are statistically independent and their draws do not depend
on scheduling, which is what makes worker-count-independent determinism
possible.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key64(part) -> int:
    """Map an arbitrary key component onto a stable 64-bit integer."""
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"unsupported rng key component: {part!r}")


def derive_rng(seed: int, *key_parts) -> np.random.Generator:
    """Philox generator for the substream identified by (seed, *key_parts).

    Identical arguments always produce an identical draw sequence,
    independently of process, thread, or call order.
    """
    entropy = [int(seed) & _MASK64] + [_key64(p) for p in key_parts]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *key_parts) -> int:
    """64-bit child seed for handing to code that wants a seed, not a Generator."""
    entropy = [int(seed) & _MASK64] + [_key64(p) for p in key_parts]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
