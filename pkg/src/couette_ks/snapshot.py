"""Binary snapshots of a simulation state.

Layout (little endian)::

    offset  size  field
    0       4     magic b"CKS1"
    4       4     u32 format version
    8       12    u32 x 3 grid sizes
    20      24    f64 x 3 box lengths
    44      8     f64 t
    52      8     f64 alpha
    60      8     f64 A
    68      8     f64 frame reference time t_ref
    76      8 N   f64 real-space samples, C order (z fastest)

The samples are those of the frame coefficients (lab-frame values at the
sheared grid points); together with ``t_ref`` they determine the state.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .propagator import ShearFrame, SimState, nyquist_mask
from .spectral import GridSpec, SpectralField, fft_coeffs, ifft_real
from .symbol import FlowParams

__all__ = ["MAGIC", "VERSION", "Snapshot", "write_snapshot", "read_snapshot", "load_snapshot"]

MAGIC = b"CKS1"
VERSION = 1
_HEADER = struct.Struct("<4sI3I3d4d")


@dataclass(frozen=True, eq=False)
class Snapshot:
    grid: GridSpec
    t: float
    alpha: float
    A: float
    t_ref: float
    samples: np.ndarray

    def to_state(self) -> SimState:
        """State with coefficients obtained by one forward transform of the samples."""
        flow = FlowParams.for_symbol(self.A, self.alpha)
        coeffs = fft_coeffs(self.samples)
        coeffs[nyquist_mask(self.grid)] = 0.0
        return SimState(ShearFrame(self.t_ref, flow), SpectralField(self.grid, coeffs), self.t)


def write_snapshot(state: SimState, path) -> None:
    """Write ``state`` atomically (temporary file, then rename)."""
    grid = state.grid
    samples = np.ascontiguousarray(ifft_real(state.n_hat.coeffs), dtype="<f8")
    header = _HEADER.pack(MAGIC, VERSION, *grid.n, *grid.box, float(state.t), float(state.flow.alpha),
                          float(state.flow.A), float(state.frame.t_ref))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(samples.tobytes(order="C"))
    os.replace(tmp, path)


def load_snapshot(path) -> Snapshot:
    """Parse a snapshot file without building a state.

    Raises
    ------
    FormatError
        On a bad magic, an unknown version or a payload whose length does not
        match the header.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: file is {len(data)} bytes, shorter than the {_HEADER.size}-byte header")
    magic, version, nx, ny, nz, bx, by, bz, t, alpha, A, t_ref = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: format version {version}, expected {VERSION}")
    expected = _HEADER.size + 8 * nx * ny * nz
    if len(data) != expected:
        raise FormatError(f"{path}: {len(data)} bytes, header implies {expected}")
    try:
        grid = GridSpec((nx, ny, nz), (bx, by, bz))
    except ValueError as exc:
        raise FormatError(f"{path}: invalid grid in header: {exc}") from None
    samples = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(grid.shape).astype(float)
    return Snapshot(grid, t, alpha, A, t_ref, samples)


def read_snapshot(path) -> SimState:
    return load_snapshot(path).to_state()
