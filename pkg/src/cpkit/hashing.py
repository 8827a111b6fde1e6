"""Stable 64-bit token hashing shared by the fingerprinter and the classifier.

Both the fingerprint index format and trained classifier files depend on
these hashes, so the function identity (seeded FNV-1a) and the default
seeds are part of the on-disk contract and must never change.
"""

from __future__ import annotations

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

SIMHASH_SEED = 0x5350_4B31  # fingerprinting
FEATURE_SEED = 0x4350_4B43  # classifier feature buckets


def fnv1a64(data: bytes, seed: int = 0) -> int:
    """Seeded FNV-1a over ``data``, reduced to 64 bits."""
    h = (_FNV_OFFSET ^ (seed & _MASK64)) & _MASK64
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def hash_token(token: str, seed: int) -> int:
    return fnv1a64(token.encode("utf-8"), seed)
