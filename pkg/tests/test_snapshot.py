import struct

import numpy as np
import pytest

from couette_ks.errors import FormatError
from couette_ks.propagator import ShearFrame, SimState
from couette_ks.snapshot import MAGIC, VERSION, load_snapshot, read_snapshot, write_snapshot
from couette_ks.spectral import Field, GridSpec, ifft_real
from couette_ks.symbol import FlowParams
from couette_ks.timestepper import initial_state


@pytest.fixture
def state(rng):
    g = GridSpec((8, 10, 12), (1.0, 2.0, 3.5))
    s = initial_state(Field(g, rng.standard_normal(g.shape)), FlowParams(7.0, 1.25))
    return SimState(ShearFrame(0.125, s.flow), s.n_hat, 0.3)


def test_round_trip_bit_exact(state, tmp_path):
    path = tmp_path / "s.cks"
    write_snapshot(state, path)
    snap = load_snapshot(path)
    assert snap.grid == state.grid
    assert (snap.t, snap.alpha, snap.A, snap.t_ref) == (0.3, 1.25, 7.0, 0.125)
    samples = ifft_real(state.n_hat.coeffs)
    assert np.array_equal(snap.samples, samples)
    back = read_snapshot(path)
    # the file holds the synthesis bit for bit; re-analysis is exact to round-off
    c0, c1 = state.n_hat.coeffs, back.n_hat.coeffs
    assert np.abs(c1 - c0).max() <= 1e-15 * np.abs(c0).max()
    assert back.t == state.t and back.frame.t_ref == state.frame.t_ref
    assert path.stat().st_size == 76 + 8 * state.grid.size
    assert not list(tmp_path.glob("*.tmp"))


def test_header_layout(state, tmp_path):
    path = tmp_path / "s.cks"
    write_snapshot(state, path)
    data = path.read_bytes()
    assert data[:4] == MAGIC
    assert struct.unpack_from("<I", data, 4)[0] == VERSION
    assert struct.unpack_from("<3I", data, 8) == (8, 10, 12)
    assert struct.unpack_from("<3d", data, 20) == (1.0, 2.0, 3.5)
    first = struct.unpack_from("<d", data, 76)[0]
    assert first == ifft_real(state.n_hat.coeffs)[0, 0, 0]


def test_truncated_file(state, tmp_path):
    path = tmp_path / "s.cks"
    write_snapshot(state, path)
    data = path.read_bytes()
    for cut in (10, len(data) - 8):
        path.write_bytes(data[:cut])
        with pytest.raises(FormatError):
            read_snapshot(path)


def test_version_and_magic(state, tmp_path):
    path = tmp_path / "s.cks"
    write_snapshot(state, path)
    data = bytearray(path.read_bytes())
    data[4:8] = struct.pack("<I", VERSION + 1)
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError, match=f"format version {VERSION + 1}, expected {VERSION}"):
        load_snapshot(path)
    data[4:8] = struct.pack("<I", VERSION)
    data[:4] = b"XXXX"
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="magic"):
        load_snapshot(path)
