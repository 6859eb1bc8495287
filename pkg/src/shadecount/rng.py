"""Seeded stream derivation for every stochastic component.

A single master seed drives the whole pipeline. Each consumer (fold
shuffle, per-tree bootstrap, weight init, ...) gets its own independent
stream derived from ``(master_seed, purpose_tag, index)``, backed by the
Philox 64-bit counter-based generator. Derivation uses a keyed BLAKE2s
digest of the tag, so streams are stable across platforms and Python
versions (no reliance on ``hash()``), and fitting in parallel reproduces
the sequential result bit for bit.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_entropy(tag: str) -> int:
    """Map a purpose tag to a stable 64-bit integer."""
    digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def stream(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Return the independent Philox stream for (seed, tag, index)."""
    if seed < 0:
        raise ValueError("master seed must be non-negative")
    if index < 0:
        raise ValueError("stream index must be non-negative")
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(_tag_entropy(tag), index))
    return np.random.Generator(np.random.Philox(seq))


def child_seed(seed: int, tag: str, index: int = 0) -> int:
    """Derive a master seed for a nested component (e.g. one sweep cell).

    The child is itself a valid ``stream()`` master seed, so nested
    components can derive their own tagged streams without colliding
    with the parent's.
    """
    payload = f"{seed}:{tag}:{index}".encode("utf-8")
    digest = hashlib.blake2s(payload, digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1  # keep it in the non-negative int64 range
