"""Dense float64 tensors, small matrix kernels, and the WCT1 binary format.

Arrays are plain numpy ndarrays in row-major (batch, channel, row, col)
layout, rank capped at 4.  The WCT1 file layout is: 4-byte magic ``WCT1``,
one u8 rank, ``rank`` little-endian u32 extents, then the payload as
little-endian IEEE-754 float64 values.  No padding, no checksum.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError, ShapeError

MAGIC = b"WCT1"
MAX_RANK = 4


def as_tensor(data) -> np.ndarray:
    """Coerce to a float64 array of rank 1..4 with finite entries."""
    arr = np.asarray(data, dtype=np.float64)
    if not 1 <= arr.ndim <= MAX_RANK:
        raise ShapeError(f"rank {arr.ndim} unsupported, expected 1..{MAX_RANK}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor entries must be finite")
    return arr


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def frobenius_inner(a, b) -> float:
    """Sum of the elementwise product of two equal-shape matrices."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    return float(np.sum(a * b))


def hadamard(a, b) -> np.ndarray:
    """Elementwise product of two equal-shape matrices."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    return a * b


def neighborhood(image, i: int, j: int, k: int) -> np.ndarray:
    """K x K window of a 2-D image centred at (i, j).

    Entries that fall outside the image are exactly zero.  ``k`` must be
    odd; the centre must lie inside the image.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeError(f"expected a 2-D image, got rank {img.ndim}")
    if k < 1 or k % 2 == 0:
        raise ValueError(f"window extent must be odd and positive, got {k}")
    rows, cols = img.shape
    if not (0 <= i < rows and 0 <= j < cols):
        raise IndexError(f"centre ({i}, {j}) outside {rows}x{cols} image")
    half = k // 2
    patch = np.zeros((k, k))
    r0, r1 = max(0, i - half), min(rows, i + half + 1)
    c0, c1 = max(0, j - half), min(cols, j + half + 1)
    patch[r0 - i + half:r1 - i + half, c0 - j + half:c1 - j + half] = img[r0:r1, c0:c1]
    return patch


def tensor_write(tensor, path) -> None:
    """Write a tensor to ``path`` in the WCT1 format."""
    arr = as_tensor(tensor)
    header = MAGIC + struct.pack("<B", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def tensor_read(path) -> np.ndarray:
    """Read a WCT1 file back into a float64 array; round-trips bit-exactly."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 5 or blob[:4] != MAGIC:
        raise FormatError("bad magic, not a WCT1 file")
    rank = blob[4]
    if not 1 <= rank <= MAX_RANK:
        raise FormatError(f"rank {rank} outside supported range 1..{MAX_RANK}")
    header_len = 5 + 4 * rank
    if len(blob) < header_len:
        raise FormatError("truncated header")
    dims = struct.unpack(f"<{rank}I", blob[5:header_len])
    count = 1
    for d in dims:
        count *= d
    if len(blob) != header_len + 8 * count:
        raise FormatError(
            f"payload size mismatch: header declares {count} values, "
            f"file holds {(len(blob) - header_len) // 8}"
        )
    data = np.frombuffer(blob, dtype="<f8", offset=header_len)
    data = data.astype(np.float64).reshape(dims)
    if not np.all(np.isfinite(data)):
        raise FormatError("payload contains non-finite values")
    return data
