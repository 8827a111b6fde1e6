"""Near-duplicate detection with 64-bit simhash fingerprints.

A document's fingerprint hashes each distinct token to 64 bits, adds the
token's term frequency to every bit position set in its hash (subtracting
where unset), and keeps the sign of each column. Near duplicates land
within a small Hamming distance of each other; the corpus-level pass is a
greedy first-wins scan that drops any document within distance ``k`` of an
already-kept one.
"""

from __future__ import annotations

import struct
from collections import Counter
from typing import Iterable, Sequence

import numpy as np

from .hashing import SIMHASH_SEED, hash_token
from .textseg import tokenize

INDEX_MAGIC = b"SHX1"


def simhash(text: str, seed: int = SIMHASH_SEED) -> int:
    """64-bit fingerprint of ``text``. Empty input hashes to 0 (ties round down)."""
    counts = Counter(tokenize(text))
    if not counts:
        return 0
    hashes = np.array(
        [hash_token(token, seed) for token in counts], dtype=np.uint64
    )
    weights = np.array(list(counts.values()), dtype=np.int64)
    bits = ((hashes[:, None] >> np.arange(64, dtype=np.uint64)) & np.uint64(1)).astype(
        np.int64
    )
    sums = (weights[:, None] * (2 * bits - 1)).sum(axis=0)
    fingerprint = 0
    for position in np.nonzero(sums > 0)[0]:
        fingerprint |= 1 << int(position)
    return fingerprint


def hamming(a: int, b: int) -> int:
    return (a ^ b).bit_count()


def dedup_corpus(
    docs: Sequence, k: int = 3
) -> tuple[list, list[tuple[str, str]]]:
    """Greedy scan in input order; returns (kept docs, [(dropped_id, kept_id)]).

    A document is dropped iff an earlier kept document's fingerprint is
    within Hamming distance ``k``.
    """
    kept: list = []
    kept_fps: list[int] = []
    dropped: list[tuple[str, str]] = []
    for doc in docs:
        fp = simhash(doc.clean_text)
        match = None
        for kept_doc, kept_fp in zip(kept, kept_fps):
            if hamming(fp, kept_fp) <= k:
                match = kept_doc
                break
        if match is None:
            kept.append(doc)
            kept_fps.append(fp)
        else:
            dropped.append((doc.id, match.id))
    return kept, dropped


def write_index(path, entries: Iterable[tuple[int, str]]) -> int:
    """Write a fingerprint index: magic, then (u64 LE fp, u32 LE len, id bytes)."""
    count = 0
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        for fingerprint, doc_id in entries:
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<QI", fingerprint, len(raw)))
            fh.write(raw)
            count += 1
    return count


def read_index(path) -> list[tuple[int, str]]:
    entries: list[tuple[int, str]] = []
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != INDEX_MAGIC:
            raise ValueError(f"not a fingerprint index: bad magic {magic!r}")
        while True:
            header = fh.read(12)
            if not header:
                break
            if len(header) < 12:
                raise ValueError("truncated fingerprint index")
            fingerprint, length = struct.unpack("<QI", header)
            raw = fh.read(length)
            if len(raw) < length:
                raise ValueError("truncated fingerprint index")
            entries.append((fingerprint, raw.decode("utf-8")))
    return entries
