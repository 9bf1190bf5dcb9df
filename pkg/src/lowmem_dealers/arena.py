"""Flat int64 storage for the compiled structures.

Numba reference-counts every array reachable from a kernel argument, so a
state made of nested tuples of arrays pays for each array on every call.
Instead, each structure lives in named segments of one int64 buffer and its
kernels receive that buffer plus a tuple of integer offsets (a layout).
Bit words are stored as int64 and reinterpreted as uint64 when used.
"""
import numpy as np

from .wordops import hot, kernel  # noqa: F401  (re-exported for the structures)


class Arena:
    """Hands out segments of a buffer; names map to (offset, length)."""

    def __init__(self):
        self.size = 0
        self.segments = {}

    def alloc(self, name: str, length: int) -> int:
        if name in self.segments:
            raise ValueError(f"segment {name!r} allocated twice")
        off = self.size
        self.segments[name] = (off, length)
        self.size += length
        return off

    def new_buffer(self) -> np.ndarray:
        return np.zeros(max(1, self.size), dtype=np.int64)

    def view(self, buf: np.ndarray, name: str) -> np.ndarray:
        """Segment ``name``; ``name#i`` selects its single element i."""
        base, _, idx = name.partition("#")
        off, length = self.segments[base]
        if idx:
            i = int(idx)
            if not 0 <= i < length:
                raise IndexError(f"{name} outside segment")
            return buf[off + i:off + i + 1]
        return buf[off:off + length]


@kernel
def word_k(buf, i):
    return np.uint64(buf[i])


@kernel
def set_word_k(buf, i, x):
    buf[i] = np.int64(x)
