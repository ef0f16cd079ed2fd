"""Periodic-box discretisation, Fourier transforms and grid functionals.

Coefficients are Fourier-series coefficients: ``f(x) = sum_k c_k exp(i k.x)``
with ``c_k = mean(f exp(-i k.x))``.  The inverse carries no prefactor.  A
continuum transform with a ``(2 pi)^-3`` forward prefactor is recovered as
``c_k * V / (2 pi)^3``; in particular ``mass = V * c_0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft

from .errors import DomainError, NotConjugateSymmetric

__all__ = [
    "GridSpec",
    "Field",
    "SpectralField",
    "to_spectral",
    "to_physical",
    "apply_multiplier",
    "dealias",
    "dealias_mask",
    "lp_norm",
    "mass",
    "fractional_norm",
]


@dataclass(frozen=True)
class GridSpec:
    """Points per axis ``n`` and side lengths ``box`` of the periodic box."""

    n: tuple
    box: tuple

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        box = tuple(float(v) for v in self.box)
        if len(n) != 3 or len(box) != 3:
            raise DomainError("grid needs three sizes and three box lengths")
        for v in n:
            if v < 8 or v % 2:
                raise DomainError(f"grid sizes must be even and >= 8, got {n}")
        for b in box:
            if not (np.isfinite(b) and b > 0):
                raise DomainError(f"box lengths must be positive, got {box}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "box", box)

    @property
    def shape(self):
        return self.n

    @property
    def size(self):
        return self.n[0] * self.n[1] * self.n[2]

    @property
    def volume(self):
        return self.box[0] * self.box[1] * self.box[2]

    @property
    def dvol(self):
        return self.volume / self.size

    @property
    def spacing(self):
        return tuple(b / n for b, n in zip(self.box, self.n))

    @property
    def fundamental(self):
        return tuple(2 * np.pi / b for b in self.box)

    def mode_indices(self):
        """Signed integer mode indices per axis, broadcast-ready (FFT order)."""
        kx, ky, kz = (np.fft.fftfreq(n, 1.0 / n).astype(int) for n in self.n)
        return kx[:, None, None], ky[None, :, None], kz[None, None, :]

    def wavenumbers(self):
        """Physical wavenumbers ``2 pi k / L`` per axis, broadcast-ready."""
        return tuple(k * f for k, f in zip(self.mode_indices(), self.fundamental))

    def coordinates(self):
        """Grid point coordinates in ``[0, L)`` per axis, broadcast-ready."""
        x, y, z = (np.arange(n) * b / n for n, b in zip(self.n, self.box))
        return x[:, None, None], y[None, :, None], z[None, None, :]


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples on the grid, C order (z fastest)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, order="C", copy=True)  # own the samples; the caller's array stays writable
        if v.shape != self.grid.shape:
            raise DomainError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __mul__(self, other):
        return Field(self.grid, self.values * other)

    __rmul__ = __mul__

    def __add__(self, other):
        return Field(self.grid, self.values + other.values)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex Fourier coefficients indexed in FFT order."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise DomainError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    def __mul__(self, other):
        return SpectralField(self.grid, self.coeffs * other)

    __rmul__ = __mul__

    def __add__(self, other):
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SpectralField(self.grid, self.coeffs - other.coeffs)


def fft_coeffs(values):
    """Raw forward transform of real samples (no validation)."""
    return sfft.fftn(values, norm="forward")


def ifft_real(coeffs):
    """Raw inverse transform keeping only the real part (no validation)."""
    return sfft.ifftn(coeffs, norm="forward").real


def conjugate_reflection(coeffs):
    """Array whose entry at ``k`` is ``conj(coeffs[-k])``."""
    return np.conj(np.roll(coeffs[::-1, ::-1, ::-1], 1, axis=(0, 1, 2)))


def to_spectral(f: Field) -> SpectralField:
    return SpectralField(f.grid, fft_coeffs(f.values))


def to_physical(s: SpectralField, rtol: float = 1e-10) -> Field:
    """Inverse transform; the coefficients must be conjugate symmetric.

    Raises
    ------
    NotConjugateSymmetric
        If ``|c(k) - conj(c(-k))|`` exceeds ``rtol`` times the largest coefficient.
    """
    c = s.coeffs
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale > 0:
        asym = np.max(np.abs(c - conjugate_reflection(c)))
        if asym > rtol * scale:
            raise NotConjugateSymmetric(
                f"conjugate-symmetry defect {asym:.3e} exceeds {rtol:g} x {scale:.3e}"
            )
    full = sfft.ifftn(c, norm="forward")
    residue = np.max(np.abs(full.imag)) if full.size else 0.0
    magnitude = np.max(np.abs(full.real)) if full.size else 0.0
    assert residue <= max(rtol * magnitude, 1e-300), "imaginary residue above tolerance"
    return Field(s.grid, full.real)


Multiplier = Union[Callable, np.ndarray, complex, float]


def apply_multiplier(s: SpectralField, m: Multiplier) -> SpectralField:
    """Coefficient-wise product with ``m``.

    ``m`` is either an array/scalar broadcastable to the grid or a callable
    ``m(kx, ky, kz)`` receiving broadcast-ready physical wavenumbers.  The
    caller guarantees ``m(-k) = conj(m(k))``.
    """
    if callable(m):
        m = m(*s.grid.wavenumbers())
    return SpectralField(s.grid, s.coeffs * m)


def dealias_mask(grid: GridSpec):
    """Boolean mask of modes kept by the two-thirds rule (``|k_i| <= n_i / 3``)."""
    kx, ky, kz = grid.mode_indices()
    nx, ny, nz = grid.n
    return (3 * np.abs(kx) <= nx) & (3 * np.abs(ky) <= ny) & (3 * np.abs(kz) <= nz)


def dealias(s: SpectralField) -> SpectralField:
    return SpectralField(s.grid, np.where(dealias_mask(s.grid), s.coeffs, 0.0))


def lp_norm(f: Field, p: float) -> float:
    """Riemann-sum ``L^p`` norm; ``p = inf`` gives the max modulus."""
    if p == np.inf:
        return float(np.max(np.abs(f.values)))
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    a = np.abs(f.values)
    if p == 1:
        return float(a.sum() * f.grid.dvol)
    if p == 2:
        return float(np.sqrt(np.vdot(a, a).real * f.grid.dvol))
    scale = a.max()
    if scale == 0:
        return 0.0
    # Factor out the max so high powers do not overflow.
    return float(scale * (np.sum((a / scale) ** p) * f.grid.dvol) ** (1.0 / p))


def mass(f: Field) -> float:
    return float(f.values.sum() * f.grid.dvol)


def fractional_multiplier(grid: GridSpec, s: float):
    kx, ky, kz = grid.wavenumbers()
    return (kx * kx + ky * ky + kz * kz) ** (0.5 * s)


def fractional_norm(f: Field, s: float, p: float) -> float:
    """``L^p`` norm of ``Lambda^s f`` where ``Lambda`` has symbol ``|k|``."""
    if s < 0:
        raise DomainError(f"s must be >= 0, got {s}")
    if s == 0:
        return lp_norm(f, p)
    g = ifft_real(fft_coeffs(f.values) * fractional_multiplier(f.grid, s))
    return lp_norm(Field(f.grid, g), p)
