"""Emoji detection backed by a fixed codepoint range table.

The table ships as package data so that counts do not drift with the
host's unicodedata version.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=1)
def emoji_ranges() -> tuple[tuple[int, int], ...]:
    """Sorted, non-overlapping (first, last) codepoint ranges, inclusive."""
    raw = resources.files("adgraph.data").joinpath("emoji_ranges.json").read_text("utf-8")
    ranges = sorted((int(r["first"], 16), int(r["last"], 16)) for r in json.loads(raw))
    for (af, al), (bf, _) in zip(ranges, ranges[1:]):
        if bf <= al:
            raise ValueError(f"overlapping emoji ranges near U+{bf:04X}")
        if af > al:
            raise ValueError(f"inverted emoji range U+{af:04X}..U+{al:04X}")
    return tuple(ranges)


def is_emoji(ch: str) -> bool:
    """True if the single character falls in an emoji range."""
    cp = ord(ch)
    ranges = emoji_ranges()
    lo, hi = 0, len(ranges) - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        first, last = ranges[mid]
        if cp < first:
            hi = mid - 1
        elif cp > last:
            lo = mid + 1
        else:
            return True
    return False


def count_emoji(text: str) -> int:
    """Number of emoji codepoints in text (sequences count per codepoint)."""
    return sum(1 for ch in text if is_emoji(ch))
