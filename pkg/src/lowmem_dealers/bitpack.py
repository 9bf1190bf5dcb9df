"""Fixed-width packing of integer arrays into one bit string (little-endian)."""
import numpy as np


def _bits_of(arr, width):
    a = np.asarray(arr, dtype=np.uint64).reshape(-1)
    if width == 0:
        if a.size and a.max() != 0:
            raise ValueError("non-zero value in a zero-width field")
        return np.zeros(0, dtype=np.uint8)
    if width < 64 and a.size and int(a.max()) >> width:
        raise ValueError(f"value {int(a.max())} does not fit in {width} bits")
    shifts = np.arange(width, dtype=np.uint64)
    return ((a[:, None] >> shifts) & np.uint64(1)).astype(np.uint8).reshape(-1)


def pack(fields) -> tuple:
    """Pack ``[(array, width), ...]``; returns (value, total_bits)."""
    parts = [_bits_of(a, w) for a, w in fields]
    bits = np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)
    raw = np.packbits(bits, bitorder="little").tobytes()
    return int.from_bytes(raw, "little"), int(bits.size)


def unpack(value: int, layout) -> list:
    """Inverse of :func:`pack`; ``layout`` is ``[(shape, width), ...]``."""
    total = sum(int(np.prod(shape)) * w for shape, w in layout)
    if value >> total:
        raise ValueError("bit string longer than the layout")
    raw = value.to_bytes((total + 7) // 8 or 1, "little")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    out, at = [], 0
    for shape, w in layout:
        count = int(np.prod(shape))
        chunk = bits[at:at + count * w].reshape(count, w).astype(np.uint64) if w else None
        at += count * w
        if w:
            vals = (chunk << np.arange(w, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)
        else:
            vals = np.zeros(count, dtype=np.uint64)
        out.append(vals.reshape(shape))
    return out
