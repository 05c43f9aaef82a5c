"""Shared text primitives: token counting, normalization, stable hashing.

A token is a whitespace-delimited word throughout the package; window,
chunking and cost contracts are all stated in these tokens.
"""

from __future__ import annotations

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF


def tokens(text: str) -> list[str]:
    return text.split()


def count_tokens(text: str) -> int:
    return len(text.split())


def normalize_text(text: str) -> str:
    """Trim, casefold and collapse internal whitespace."""
    return " ".join(text.split()).casefold()


def fnv1a64(data: str | bytes) -> int:
    """64-bit FNV-1a fold; the documented bucket hash of the wire format."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _FNV_MASK
    return h


def stable_seed(key: str) -> int:
    """Deterministic non-negative 31-bit seed for a string key."""
    return fnv1a64(key) % (2 ** 31)
