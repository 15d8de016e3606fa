"""Small shared helpers: deterministic seed derivation and rounding."""

from __future__ import annotations

import hashlib
import math


def derive_seed(seed: int, *parts: str) -> int:
    """Stable 64-bit sub-seed from a base seed and string labels.

    Hash-based so results do not depend on process hash randomization.
    """
    digest = hashlib.sha256(("%d|%s" % (seed, "|".join(parts))).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def round_half_up(value: float) -> int:
    """Round to the nearest integer with .5 going up (non-negative inputs)."""
    return math.floor(value + 0.5)
