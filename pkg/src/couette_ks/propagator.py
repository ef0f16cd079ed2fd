"""Exact linear evolution in a shear-following frame.

A frame mode with wavenumber ``(xi, eta, zeta)`` represents the laboratory
wave ``exp(i(xi x + (eta - A (t - t_ref) xi) y + zeta z))``.  In these
coordinates the advection ``A y d/dx`` disappears and each mode is only
damped, by ``exp(-H)`` with the accumulated symbol taken along the drifting
wavenumber (``shear_sign = -1``).

Lab-frame periodicity in ``y`` is restored at the instants
``t_ref + j L_x / (A L_y)``, when every drifted wavenumber is again a grid
wavenumber; :func:`remap` re-indexes the coefficients there.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, RemapOffSchedule
from .spectral import GridSpec, SpectralField
from .symbol import FlowParams, FreqPoint, QuadratureConfig, accumulated_symbol

FRAME_SIGN = -1

__all__ = [
    "ShearFrame",
    "SimState",
    "effective_wavenumbers",
    "propagator_factor",
    "apply_propagator",
    "remap",
    "remap_period",
    "nyquist_mask",
]


@dataclass(frozen=True)
class ShearFrame:
    t_ref: float
    flow: FlowParams

    def shift(self, t):
        """Accumulated shear ``A (t - t_ref)``."""
        return self.flow.A * (t - self.t_ref)


@dataclass(frozen=True, eq=False)
class SimState:
    """Frame-relative coefficients of the density at time ``t``.

    ``remap_loss`` accumulates the ``L^2``-squared energy dropped by remaps.
    """

    frame: ShearFrame
    n_hat: SpectralField
    t: float
    remap_loss: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.t) or self.t < self.frame.t_ref:
            raise DomainError(f"state time {self.t} precedes frame reference {self.frame.t_ref}")

    @property
    def grid(self) -> GridSpec:
        return self.n_hat.grid

    @property
    def flow(self) -> FlowParams:
        return self.frame.flow


def remap_period(grid: GridSpec, flow: FlowParams) -> float:
    """Time between consecutive exact remap instants (``inf`` without shear)."""
    if flow.A == 0:
        return np.inf
    return grid.box[0] / (flow.A * grid.box[1])


def effective_wavenumbers(grid: GridSpec, frame: ShearFrame, t: float) -> FreqPoint:
    """Laboratory wavenumbers of every frame mode at time ``t``."""
    if t < frame.t_ref:
        raise DomainError("t must not precede the frame reference time")
    kx, ky, kz = grid.wavenumbers()
    shift = frame.shift(t)
    if shift == 0:
        return FreqPoint(kx, ky, kz)
    return FreqPoint(kx, ky + FRAME_SIGN * shift * kx, kz)


def nyquist_mask(grid: GridSpec):
    """True on modes carrying a Nyquist index along any axis."""
    kx, ky, kz = grid.mode_indices()
    nx, ny, nz = grid.n
    return (kx == -(nx // 2)) | (ky == -(ny // 2)) | (kz == -(nz // 2))


def propagator_factor(grid: GridSpec, frame: ShearFrame, t0: float, t1: float,
                      quad: QuadratureConfig | None = None):
    """Per-mode damping ``exp(-H)`` over ``[t0, t1]``, real array on the grid.

    The symbol is even in ``zeta``, so only the ``zeta >= 0`` half is evaluated.
    """
    if t1 < t0:
        raise DomainError("propagation window must have t0 <= t1")
    kx, ky, kz = grid.wavenumbers()
    nz = grid.n[2]
    half = kz[:, :, : nz // 2 + 1]
    h = accumulated_symbol(
        FreqPoint(kx, ky, half),
        t0 - frame.t_ref,
        t1 - frame.t_ref,
        frame.flow,
        FRAME_SIGN,
        quad,
    )
    h = np.broadcast_to(h, (grid.n[0], grid.n[1], nz // 2 + 1))
    out = np.empty(grid.shape)
    out[:, :, : nz // 2 + 1] = np.exp(-h)
    out[:, :, nz // 2 + 1:] = out[:, :, nz // 2 - 1: 0: -1]
    return out


def apply_propagator(state: SimState, t1: float, quad: QuadratureConfig | None = None) -> SimState:
    """Evolve the linear part exactly from ``state.t`` to ``t1``."""
    if t1 < state.t:
        raise DomainError(f"cannot propagate backwards from {state.t} to {t1}")
    if t1 == state.t:
        return state
    factor = propagator_factor(state.grid, state.frame, state.t, t1, quad)
    return replace(state, n_hat=state.n_hat * factor, t=t1)


def remap(state: SimState, atol: float = 1e-12) -> SimState:
    """Re-index frame modes so that the frame reference becomes ``state.t``.

    Modes whose new ``y`` index leaves the resolved band (or that sit on a
    Nyquist plane, which has no conjugate partner after the shift) are
    zero-filled; their energy is added to ``remap_loss``.

    Raises
    ------
    RemapOffSchedule
        If the accumulated shift is not an integer number of ``y`` modes per
        ``x`` mode.
    """
    grid = state.grid
    j_real = state.frame.shift(state.t) * grid.box[1] / grid.box[0]
    j = int(round(j_real))
    if abs(j_real - j) > atol * max(1.0, abs(j_real)):
        raise RemapOffSchedule(
            f"shift {j_real!r} y-modes per x-mode is not an integer (t={state.t}, "
            f"t_ref={state.frame.t_ref})"
        )
    new_frame = ShearFrame(state.t, state.frame.flow)
    if j == 0:
        return replace(state, frame=new_frame)

    nx, ny, nz = grid.n
    c = state.n_hat.coeffs
    kx, ky, _ = grid.mode_indices()
    kx, ky = kx[:, :, 0], ky[:, :, 0]
    new_ky = np.broadcast_to(ky - j * kx, (nx, ny))  # lab y-index at the remap instant
    keep = (np.abs(new_ky) < ny // 2) & (kx != -(nx // 2)) & (ky != -(ny // 2))
    src_x, src_y = np.nonzero(keep)
    out = np.zeros_like(c)
    out[src_x, new_ky[src_x, src_y] % ny, :] = c[src_x, src_y, :]
    out[:, :, nz // 2] = 0.0
    dropped = c[~keep]
    lost = float((np.vdot(dropped, dropped).real + np.vdot(c[keep][:, nz // 2], c[keep][:, nz // 2]).real)
                 * grid.volume)
    return replace(
        state,
        frame=new_frame,
        n_hat=SpectralField(grid, out),
        remap_loss=state.remap_loss + lost,
    )
