"""Window-based least-significant-bit (W-LSB) encoding.

A value ``v`` is sent as its ``k`` low bits. The receiver decodes against a
reference ``ref`` by picking the unique value congruent to the bits inside
the interpretation interval ``[ref - p, ref - p + 2**k - 1]`` (modulo the
field width). The sender picks the smallest ``k`` for which ``v`` falls in
the interval of every reference the receiver might still hold.
"""

from collections import deque

__all__ = ["WlsbWindow", "in_interval", "min_k", "wlsb_encode", "wlsb_decode"]


def in_interval(v, ref, k, p, width=16):
    mod = 1 << width
    return (v - (ref - p)) % mod < (1 << k)


def min_k(v, ref, p, width=16):
    """Smallest k for a single reference, or None if even k == width fails."""
    for k in range(1, width + 1):
        if in_interval(v, ref, k, p, width):
            return k
    return None


def wlsb_encode(v, window, p, width=16):
    """Return ``(k, lsb)`` or ``None`` when no k <= width covers the window.

    ``None`` means the full value has to travel (the compressor falls back
    to an IR packet).
    """
    if not window:
        raise ValueError("W-LSB window is empty")
    k = 1
    for ref in window:
        kr = min_k(v, ref, p, width)
        if kr is None:
            return None
        k = max(k, kr)
    return k, v & ((1 << k) - 1)


def wlsb_decode(lsb, k, ref, p, width=16):
    if not 1 <= k <= width:
        raise ValueError(f"k={k} outside 1..{width}")
    mod = 1 << width
    span = 1 << k
    lower = (ref - p) % mod
    # Offset of the first value >= lower whose low k bits equal lsb.
    return (lower + ((lsb - lower) % span)) % mod


class WlsbWindow:
    """Sliding window of the last ``size`` references sent."""

    def __init__(self, size=4, p=1, width=16):
        self.size = size
        self.p = p
        self.width = width
        self.refs = deque(maxlen=size)

    def reset(self, v):
        self.refs.clear()
        self.refs.append(v)

    def add(self, v):
        self.refs.append(v)

    def encode(self, v):
        return wlsb_encode(v, self.refs, self.p, self.width)

    def __len__(self):
        return len(self.refs)
