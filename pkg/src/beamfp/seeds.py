"""Deterministic seed derivation for parallel-safe random streams.

Every random quantity in the package flows from a single root seed through
``derive_rng``.  Sub-streams are identified by a textual label plus integer
indices, so independently generated artifacts (channel snapshots, folds,
noise draws) are reproducible one by one without sharing generator state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, label: str, *indices: int) -> int:
    """Derive a 64-bit child seed from ``root`` and a stream identity.

    The rule is fixed: SHA-256 over ``"{root}/{label}/{i0}/{i1}/..."``,
    truncated to 8 bytes.  Stable across platforms and releases.
    """
    key = "/".join([str(int(root)), label, *[str(int(i)) for i in indices]])
    digest = hashlib.sha256(key.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(root: int, label: str, *indices: int) -> np.random.Generator:
    """A fresh PCG64 generator for the sub-stream named by label/indices."""
    return np.random.Generator(np.random.PCG64(derive_seed(root, label, *indices)))
