"""Binary frame files and portable-graymap image export.

A frame file is a concatenation of per-frame records, all little-endian:

    magic "KWF1" | u32 version=1 | u32 n | u32 dims[n]
    | f64 xi_min per axis | f64 dxi | f64 tau
    | payload of f64 values, row-major

The writer emits one record per stored level, so files round-trip the
in-memory history bit-exactly.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import InvalidSpec
from .kelvin import GridSpec
from .solver import FrameSet

MAGIC = b"KWF1"
VERSION = 1


def write_record(fh, n: int, dims, mins, dx: float, tau: float, values: np.ndarray) -> None:
    fh.write(MAGIC)
    fh.write(struct.pack("<II", VERSION, n))
    fh.write(struct.pack(f"<{n}I", *dims))
    fh.write(struct.pack(f"<{n}d", *mins))
    fh.write(struct.pack("<dd", dx, float(tau)))
    fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def write_frameset(path, frames: FrameSet) -> None:
    gs = frames.grid
    with open(path, "wb") as fh:
        for tau, frame in zip(frames.taus, frames.frames):
            write_record(fh, gs.n, gs.shape, [-gs.xi_extent] * gs.n, gs.dxi, tau, frame)


def write_physical_frame(path, values: np.ndarray, window, t: float) -> None:
    """Single physical-space frame in the same record layout (time in the
    tau slot, axis-0 spacing in the dxi slot)."""
    values = np.asarray(values, dtype=float)
    window = np.asarray(window, dtype=float).reshape(values.ndim, 2)
    dx = (window[0, 1] - window[0, 0]) / max(1, values.shape[0] - 1)
    with open(path, "wb") as fh:
        write_record(fh, values.ndim, values.shape, window[:, 0], dx, t, values)


def read_frameset(path) -> FrameSet:
    """Re-read a frame file into a queryable FrameSet.

    The grid is reconstructed from the record headers; stride and flat-init
    clamp metadata are not part of the format and reset to their defaults.
    """
    taus = []
    arrays = []
    n = dims = dxi = xi_min = None
    with open(path, "rb") as fh:
        while True:
            magic = fh.read(4)
            if not magic:
                break
            if magic != MAGIC:
                raise InvalidSpec(f"bad frame magic {magic!r}")
            version, rec_n = struct.unpack("<II", fh.read(8))
            if version != VERSION:
                raise InvalidSpec(f"unsupported frame version {version}")
            rec_dims = struct.unpack(f"<{rec_n}I", fh.read(4 * rec_n))
            rec_xi_min = struct.unpack(f"<{rec_n}d", fh.read(8 * rec_n))
            rec_dxi, tau = struct.unpack("<dd", fh.read(16))
            if n is None:
                n, dims, dxi, xi_min = rec_n, rec_dims, rec_dxi, rec_xi_min
            elif (rec_n, rec_dims, rec_dxi) != (n, dims, dxi):
                raise InvalidSpec("inconsistent frame records in file")
            count = int(np.prod(rec_dims))
            payload = fh.read(8 * count)
            if len(payload) != 8 * count:
                raise InvalidSpec("truncated frame payload")
            arrays.append(np.frombuffer(payload, dtype="<f8").reshape(rec_dims).copy())
            taus.append(tau)
    if not arrays:
        raise InvalidSpec("frame file contains no records")
    if len(set(dims)) != 1:
        raise InvalidSpec("frame grids must be square")
    m = dims[0]
    taus = np.asarray(taus)
    dtau = float(taus[1] - taus[0]) if taus.size > 1 else 1.0
    gs = GridSpec(n=n, requested_dxi=dxi, requested_dtau=dtau, dxi=dxi, dtau=dtau,
                  xi_extent=-xi_min[0], tau_start=float(taus[0]), tau_end=float(taus[-1]),
                  points_per_axis=m, M=m**n, N=max(1, taus.size - 1))
    return FrameSet(gs, taus, np.stack(arrays, axis=0))


def write_pgm(path, values: np.ndarray, comment: str = "") -> None:
    """8-bit binary PGM, linearly normalized per frame; (min, max) recorded
    in a header comment for recovery."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    if values.ndim != 2:
        raise InvalidSpec("PGM export needs a 1-D or 2-D array")
    vmin, vmax = float(values.min()), float(values.max())
    if vmax > vmin:
        scaled = np.round((values - vmin) / (vmax - vmin) * 255.0).astype(np.uint8)
    else:
        scaled = np.zeros(values.shape, dtype=np.uint8)
    header = f"P5\n# min={vmin!r} max={vmax!r}"
    if comment:
        header += f" {comment}"
    header += f"\n{values.shape[1]} {values.shape[0]}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(scaled.tobytes())
