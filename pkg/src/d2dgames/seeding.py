"""Stable seed derivation for reproducible, schedule-independent Monte Carlo."""

from __future__ import annotations

import hashlib


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from integer parts (independent of process hashing)."""
    text = "|".join(str(int(p)) for p in parts)
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little")
