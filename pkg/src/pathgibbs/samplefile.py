"""Fixed-width binary stream of thinned path configurations.

Little-endian layout:

    magic   4 bytes  b"PGS1"
    d       uint32
    N       uint32
    eps     float64
    frames  each 2N*d float64: free-site rows -N..-1, 1..N in order,
            coordinates fastest; the pinned site is omitted (always 0)

The frame count is implied by the file length, so streams can be
truncated safely at frame boundaries and appended while sampling.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"PGS1"
_HEADER = struct.Struct("<4sIId")


class SampleStreamError(ValueError):
    pass


def write_stream(path, eps, N, d, frames) -> int:
    """Write frames (n, 2N, d) or (n, 2N*d); returns the frame count."""
    a = np.asarray(frames, dtype="<f8")
    n = a.shape[0] if a.ndim > 1 else 0
    a = a.reshape(n, -1)
    if a.shape[1] != 2 * N * d:
        raise SampleStreamError(f"frames must carry {2 * N * d} values, got {a.shape[1]}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, d, N, float(eps)))
        fh.write(a.tobytes())
    return n


def append_frame(fh, x_full, N, d) -> None:
    """Append one frame from a full (2N+1, d) configuration (drops row N)."""
    free = np.concatenate([x_full[:N], x_full[N + 1 :]], axis=0)
    fh.write(np.ascontiguousarray(free, dtype="<f8").tobytes())


def read_stream(path):
    """-> (eps, N, d, frames (n, 2N, d))."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SampleStreamError(f"{path}: truncated header")
    magic, d, N, eps = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SampleStreamError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size :]
    frame_bytes = 2 * N * d * 8
    if frame_bytes == 0:
        raise SampleStreamError(f"{path}: degenerate header (N={N}, d={d})")
    n = len(body) // frame_bytes
    if len(body) != n * frame_bytes:
        raise SampleStreamError(f"{path}: trailing partial frame")
    frames = np.frombuffer(body[: n * frame_bytes], dtype="<f8").reshape(n, 2 * N, d)
    return float(eps), int(N), int(d), frames.astype(np.float64)


def frames_to_paths(frames, N, d) -> np.ndarray:
    """Reinsert the pinned row: (n, 2N, d) -> (n, 2N+1, d)."""
    n = frames.shape[0]
    out = np.zeros((n, 2 * N + 1, d))
    out[:, :N] = frames[:, :N]
    out[:, N + 1 :] = frames[:, N:]
    return out
