"""Attractive kernel ``B(n) = grad (-Lap)^-1 n`` and the chemotactic term.

Both act in laboratory wavenumbers ``K`` of the frame modes: ``B`` has the
symbol ``i K / |K|^2`` and the nonlinearity ``N(n) = -div(n B(n))`` is
formed pseudo-spectrally (products on the grid, derivatives in Fourier
space) and projected with the two-thirds rule.

The potential is taken mean-free: the zero mode of ``(-Lap)^-1`` is set to
zero, the only consistent choice on the torus.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .propagator import ShearFrame, effective_wavenumbers, nyquist_mask
from .spectral import Field, GridSpec, SpectralField, dealias_mask, fft_coeffs, ifft_real

__all__ = ["VectorField", "attractive_field", "nonlinear_rhs", "kernel_symbol", "NonlinearTerm"]


@dataclass(frozen=True, eq=False)
class VectorField:
    x: Field
    y: Field
    z: Field

    def __post_init__(self):
        if not (self.x.grid == self.y.grid == self.z.grid):
            raise ValueError("vector components must share one grid")

    @property
    def grid(self):
        return self.x.grid

    def components(self):
        return self.x, self.y, self.z

    def magnitude(self):
        return np.sqrt(self.x.values**2 + self.y.values**2 + self.z.values**2)


def kernel_symbol(grid: GridSpec, frame: ShearFrame, t: float):
    """Per-component multipliers ``i K_j / |K|^2`` (zero mode and Nyquist planes zeroed)."""
    K = effective_wavenumbers(grid, frame, t)
    k2 = np.broadcast_to(K.xi * K.xi + K.eta * K.eta + K.zeta * K.zeta, grid.shape)
    inv = np.zeros(grid.shape)
    np.divide(1.0, k2, out=inv, where=k2 > 0)
    inv[nyquist_mask(grid)] = 0.0
    return tuple(1j * Kj * inv for Kj in K)


def attractive_field(n_hat: SpectralField, frame: ShearFrame, t: float) -> VectorField:
    grid = n_hat.grid
    comps = [Field(grid, ifft_real(m * n_hat.coeffs)) for m in kernel_symbol(grid, frame, t)]
    return VectorField(*comps)


class NonlinearTerm:
    """Evaluator of ``-div(n B(n))`` for one grid, caching the dealias mask.

    Calling it returns the spectral coefficients together with the grid
    samples of ``n`` and ``max |B|``, which the time stepper reuses for its
    step-size and blow-up checks.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.mask = dealias_mask(grid)

    def __call__(self, coeffs, frame: ShearFrame, t: float):
        grid = self.grid
        K = effective_wavenumbers(grid, frame, t)
        n_phys = ifft_real(coeffs)
        k2 = np.broadcast_to(K.xi * K.xi + K.eta * K.eta + K.zeta * K.zeta, grid.shape)
        inv = np.zeros(grid.shape)
        np.divide(1.0, k2, out=inv, where=k2 > 0)
        inv[nyquist_mask(grid)] = 0.0
        scaled = coeffs * inv
        div = np.zeros(grid.shape, dtype=complex)
        b2 = np.zeros(grid.shape)
        for Kj in K:
            b = ifft_real(1j * Kj * scaled)
            b2 += b * b
            div += 1j * Kj * fft_coeffs(n_phys * b)
        out = np.where(self.mask, -div, 0.0)
        out.flat[0] = 0.0
        return out, n_phys, float(np.sqrt(b2.max()))


def nonlinear_rhs(n_hat: SpectralField, frame: ShearFrame, t: float) -> SpectralField:
    """Spectral coefficients of ``N(n) = -div(n B(n))``, dealiased, zero mode 0."""
    out, _, _ = NonlinearTerm(n_hat.grid)(n_hat.coeffs, frame, t)
    return SpectralField(n_hat.grid, out)
