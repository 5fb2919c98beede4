"""Deterministic sub-seed derivation.

Every stochastic operation takes a single master seed and derives its own
sub-seed from (seed, scope tokens) with a keyed hash, so adding or removing
one consumer never perturbs the randomness of another. Python's builtin
``hash`` is salted per process and must not be used here.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *scope: object) -> int:
    """Derive a stable 63-bit sub-seed from a master seed and scope tokens."""
    key = "|".join([str(int(master)), *(str(part) for part in scope)])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1
