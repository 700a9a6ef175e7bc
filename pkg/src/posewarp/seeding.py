"""Order-independent seed derivation for per-item randomness."""

from __future__ import annotations

import hashlib


def derive_seed(global_seed: int, key: str) -> int:
    """Stable 64-bit seed for (global seed, item key), independent of processing order."""
    digest = hashlib.sha256(f"{global_seed}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
