import numpy as np
import pytest

from couette_ks.interaction import attractive_field, kernel_symbol, nonlinear_rhs
from couette_ks.propagator import ShearFrame, SimState, effective_wavenumbers, remap, remap_period
from couette_ks.spectral import Field, GridSpec, SpectralField, to_physical, to_spectral
from couette_ks.symbol import FlowParams

LAB = ShearFrame(0.0, FlowParams(1.0, 1.5))


def _cos_x(grid, k=1):
    x, _, _ = grid.coordinates()
    return to_spectral(Field(grid, np.broadcast_to(np.cos(k * x), grid.shape)))


def _curl_max(B, frame, t):
    """Max of the lab-frame curl; derivatives use the lab wavenumbers of the frame modes."""
    g = B.grid
    kx, ky, kz = effective_wavenumbers(g, frame, t)
    d = [to_spectral(c).coeffs for c in B.components()]
    curl = [1j * ky * d[2] - 1j * kz * d[1], 1j * kz * d[0] - 1j * kx * d[2], 1j * kx * d[1] - 1j * ky * d[0]]
    return max(np.abs(np.fft.ifftn(c) * c.size).max() for c in curl)


def test_constant_gives_zero(cube16):
    s = to_spectral(Field(cube16, np.full(cube16.shape, 2.0)))
    B = attractive_field(s, LAB, 0.0)
    assert all(np.abs(c.values).max() < 1e-15 for c in B.components())
    assert np.abs(nonlinear_rhs(s, LAB, 0.0).coeffs).max() < 1e-15


def test_cosine_field(cube16):
    B = attractive_field(_cos_x(cube16), LAB, 0.0)
    x, _, _ = cube16.coordinates()
    np.testing.assert_allclose(B.x.values, np.broadcast_to(-np.sin(x), cube16.shape), atol=1e-14)
    assert np.abs(B.y.values).max() < 1e-15 and np.abs(B.z.values).max() < 1e-15


def test_sheared_multiplier():
    g = GridSpec((8, 8, 8), (2 * np.pi,) * 3)
    frame = ShearFrame(0.0, FlowParams(3.0, 1.5))
    mx, my, mz = kernel_symbol(g, frame, 1.0)
    got = np.array([np.broadcast_to(m, g.shape)[1, 0, 0] for m in (mx, my, mz)])
    np.testing.assert_allclose(got, 1j * np.array([1.0, -3.0, 0.0]) / 10, rtol=1e-15)


def test_nonlinear_cosine(cube16):
    N = to_physical(nonlinear_rhs(_cos_x(cube16), LAB, 0.0))
    x, _, _ = cube16.coordinates()
    np.testing.assert_allclose(N.values, np.broadcast_to(np.cos(2 * x), cube16.shape), atol=1e-13)


def test_zero_mode_and_dealias(cube16, rng):
    s = to_spectral(Field(cube16, rng.standard_normal(cube16.shape)))
    frame = ShearFrame(0.0, FlowParams(5.0, 1.5))
    N = nonlinear_rhs(s, frame, 0.37).coeffs
    assert N.flat[0] == 0.0
    kx, ky, kz = cube16.mode_indices()
    assert not N[(3 * np.abs(kx) > 16) | (3 * np.abs(ky) > 16) | (3 * np.abs(kz) > 16)].any()


def test_linearity_curl_free_and_degree(cube16, rng):
    frame = ShearFrame(0.0, FlowParams(2.0, 1.5))
    s = to_spectral(Field(cube16, rng.standard_normal(cube16.shape)))
    B1, B2 = attractive_field(s, frame, 0.4), attractive_field(s * 2.5, frame, 0.4)
    for a, b in zip(B1.components(), B2.components()):
        np.testing.assert_allclose(b.values, 2.5 * a.values, rtol=1e-12, atol=1e-14)
    assert _curl_max(B1, frame, 0.4) < 1e-10
    # degree -1 symbol: |B_hat| = |n_hat| / |K| for a single lab mode
    c = np.zeros(cube16.shape, complex)
    c[2, 1, 3] = c[-2, -1, -3] = 0.5
    B = attractive_field(SpectralField(cube16, c), LAB, 0.0)
    bh = np.sqrt(sum(abs(to_spectral(comp).coeffs[2, 1, 3]) ** 2 for comp in B.components()))
    assert bh == pytest.approx(0.5 / np.sqrt(14), rel=1e-13)


def test_frame_covariance_at_remap(rng):
    g = GridSpec((16, 32, 16), (2 * np.pi,) * 3)
    flow = FlowParams(1.0, 1.5)
    t = remap_period(g, flow)
    kx, ky, kz = g.mode_indices()
    band = (np.abs(kx) <= 2) & (np.abs(ky) <= 2) & (np.abs(kz) <= 2)
    c = np.where(band, np.fft.fftn(np.fft.ifftn(np.where(band, rng.standard_normal(g.shape), 0)).real) / g.size, 0)
    frame = ShearFrame(0.0, flow)
    in_frame = nonlinear_rhs(SpectralField(g, c), frame, t)
    mapped = remap(SimState(frame, in_frame, t))
    lab_state = remap(SimState(frame, SpectralField(g, c), t))
    direct = nonlinear_rhs(lab_state.n_hat, lab_state.frame, t)
    assert mapped.remap_loss == 0.0
    np.testing.assert_allclose(mapped.n_hat.coeffs, direct.coeffs, atol=1e-13)
