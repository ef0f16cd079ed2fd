"""Exponential-integrator time stepping for the full equation.

Writing ``P`` for the exact linear propagator over one step and ``N`` for
the chemotactic term, the exponential Heun scheme is::

    a     = P[n + dt N(n, t)]
    n_new = a + dt/2 (N(a, t + dt) - P[N(n, t)])

which is the trapezoidal discretisation of the Duhamel integral.  The
linear part imposes no step restriction; ``dt`` is limited by advection in
``B(n)``, by ``dt_max`` and by the remap and output schedules, on which
steps land exactly.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .diagnostics import NormsConfig, TimeSeries, record_field
from .errors import DomainError, NonFinite, StepUnderflow
from .interaction import NonlinearTerm
from .propagator import (
    ShearFrame,
    SimState,
    nyquist_mask,
    propagator_factor,
    remap,
    remap_period,
)
from .spectral import Field, GridSpec, SpectralField, fft_coeffs, ifft_real, lp_norm
from .symbol import FlowParams, QuadratureConfig

log = logging.getLogger(__name__)

__all__ = [
    "StepConfig",
    "StepStatus",
    "select_dt",
    "step",
    "detect_blowup",
    "run",
    "initial_state",
    "monitor_column",
]

OUTCOMES = ("ok", "blowup_detected", "step_underflow", "nonfinite")
_MONITOR_COLUMNS = {1.0: "L1", 2.0: "L2", 4.0: "L4", math.inf: "Linf"}


@dataclass(frozen=True)
class StepConfig:
    dt_max: float = 0.05
    cfl: float = 0.5
    dt_min: float = 1e-7
    blowup_factor: float = 10.0
    lp_monitor: float = 4.0

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_max):
            raise DomainError("need 0 < dt_min <= dt_max")
        if not (0 < self.cfl <= 1):
            raise DomainError("cfl must lie in (0, 1]")
        if not self.blowup_factor > 1:
            raise DomainError("blowup_factor must exceed 1")
        monitor_column(self.lp_monitor)


def monitor_column(p):
    try:
        return _MONITOR_COLUMNS[float(p)]
    except KeyError:
        raise DomainError(f"lp_monitor must be one of 1, 2, 4, inf; got {p}") from None


@dataclass(frozen=True)
class StepStatus:
    outcome: str = "ok"
    detail: str = ""
    t: float = math.nan
    value: float = math.nan

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")

    @property
    def ok(self):
        return self.outcome == "ok"


def select_dt(state: SimState, cfg: StepConfig, max_b: Optional[float] = None,
              next_event: float = math.inf) -> float:
    """Step size ``min(dt_max, cfl dx_min / max|B|, time to next remap/event)``.

    Raises
    ------
    StepUnderflow
        If the advective limit falls below ``cfg.dt_min``.
    """
    if max_b is None:
        _, _, max_b = NonlinearTerm(state.grid)(state.n_hat.coeffs, state.frame, state.t)
    dx = min(state.grid.spacing)
    dt_adv = cfg.cfl * dx / max(max_b, 1e-300)
    if dt_adv < cfg.dt_min:
        raise StepUnderflow(f"advective step {dt_adv:.3e} below dt_min={cfg.dt_min:g} at t={state.t}")
    period = remap_period(state.grid, state.flow)
    to_remap = state.frame.t_ref + period - state.t
    return min(cfg.dt_max, dt_adv, to_remap, next_event - state.t)


class _Integrator:
    """Holds the per-grid caches for repeated steps."""

    def __init__(self, grid: GridSpec, quad: Optional[QuadratureConfig], linear_only: bool):
        self.grid = grid
        self.quad = quad
        self.linear_only = linear_only
        self.N = NonlinearTerm(grid)


    def advance(self, state: SimState, t1: float, n0=None) -> SimState:
        c = state.n_hat.coeffs
        E = propagator_factor(self.grid, state.frame, state.t, t1, self.quad)
        if self.linear_only:
            new = E * c
        else:
            dt = t1 - state.t
            if n0 is None:
                n0 = self.N(c, state.frame, state.t)[0]
            a = E * (c + dt * n0)
            n1 = self.N(a, state.frame, t1)[0]
            new = a + 0.5 * dt * (n1 - E * n0)
            new.flat[0] = c.flat[0]  # zero mode: E = 1 and N = 0 there
        if not np.all(np.isfinite(new)):
            raise NonFinite(f"non-finite coefficients after step to t={t1}")
        return replace(state, n_hat=SpectralField(self.grid, new), t=t1)


def step(state: SimState, dt: float, quad: Optional[QuadratureConfig] = None,
         linear_only: bool = False) -> SimState:
    """One exponential-Heun step of size ``dt``.

    ``(t, t + dt)`` must not contain a remap instant in its interior.
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    period = remap_period(state.grid, state.flow)
    if state.t + dt > state.frame.t_ref + period * (1 + 1e-12):
        raise DomainError("step crosses a remap instant; clip dt to the schedule")
    return _Integrator(state.grid, quad, linear_only).advance(state, state.t + dt)


def detect_blowup(series: TimeSeries, cfg: StepConfig) -> StepStatus:
    """Verdict on a norm series: first non-finite row or threshold crossing."""
    if len(series) == 0:
        raise DomainError("empty series")
    name = monitor_column(cfg.lp_monitor)
    t = series.column("t")
    v = series.column(name)
    flags = series.column("flag") if "flag" in series.columns else np.zeros_like(t)
    ref = v[0]
    for k in range(len(v)):
        if not np.isfinite(v[k]) or int(flags[k]) & 1:
            return StepStatus("nonfinite", f"non-finite {name} at t={t[k]:.6g}", t[k], v[k])
        if v[k] > cfg.blowup_factor * ref:
            return StepStatus(
                "blowup_detected",
                f"{name} = {v[k]:.6g} exceeds {cfg.blowup_factor:g} x initial {ref:.6g} at t={t[k]:.6g}",
                t[k],
                v[k],
            )
    return StepStatus("ok", f"{name} stayed below {cfg.blowup_factor:g} x initial", t[-1], v[-1])


def initial_state(initial: Field, flow: FlowParams, t0: float = 0.0, t_ref: Optional[float] = None) -> SimState:
    """State from lab-frame samples; Nyquist planes are cleared.

    Nyquist modes have no conjugate partner once the shear tilts them, so a
    sheared run cannot carry them.
    """
    coeffs = fft_coeffs(initial.values)
    coeffs[nyquist_mask(initial.grid)] = 0.0
    frame = ShearFrame(t0 if t_ref is None else t_ref, flow)
    return SimState(frame, SpectralField(initial.grid, coeffs), t0)


def _next_record(t, record_every):
    k = math.floor(t / record_every + 1e-9) + 1
    return k * record_every


def run(
    initial,
    flow: FlowParams,
    cfg: StepConfig,
    grid: GridSpec,
    T: float,
    record_every: float,
    *,
    linear_only: bool = False,
    quad: Optional[QuadratureConfig] = None,
    norms: NormsConfig = NormsConfig(),
    series: Optional[TimeSeries] = None,
    on_record: Optional[Callable] = None,
):
    """Advance ``initial`` to time ``T`` and return ``(series, state, status)``.

    ``initial`` is a lab-frame :class:`Field` at ``t = 0`` or a
    :class:`SimState` to resume from (pass the series recorded so far in
    ``series`` so the blow-up threshold keeps its original reference).
    ``on_record(state, series)`` is called after every recorded row.
    Numerical blow-up never raises; it is reported in the status.
    """
    if not T > 0:
        raise DomainError("T must be positive")
    if isinstance(initial, SimState):
        state = initial
        if state.grid != grid:
            raise DomainError("resume state grid differs from the configured grid")
    else:
        if initial.grid != grid:
            raise DomainError("initial field grid differs from the configured grid")
        lo = float(initial.values.min())
        if lo < -1e-12:
            warnings.warn(f"initial density has negative values (min {lo:.3e})", stacklevel=2)
        state = initial_state(initial, flow)
    integ = _Integrator(grid, quad, linear_only)
    monitor_p = float(cfg.lp_monitor)
    period = remap_period(grid, flow)

    def row(st, n_phys, max_b):
        return record_field(n_phys, grid, st.t, norms, shear_shift=st.frame.shift(st.t),
                            remap_loss=st.remap_loss, max_b=max_b)

    n0, n_phys, max_b = _evaluate(integ, state)
    if series is None:
        series = TimeSeries.for_norms(norms)
    if len(series) == 0 or series.column("t")[-1] < state.t:
        series.append(row(state, n_phys, max_b))
        if on_record:
            on_record(state, series)
    ref = series.column(monitor_column(monitor_p))[0]
    threshold = cfg.blowup_factor * ref
    next_rec = _next_record(state.t, record_every)

    status = StepStatus("ok", "", state.t)
    while state.t < T * (1 - 1e-12):
        try:
            target = min(next_rec, T)
            dt = select_dt(state, cfg, max_b, next_event=target)
        except StepUnderflow as exc:
            status = StepStatus("step_underflow", str(exc), state.t)
            break
        t1 = state.t + dt
        if abs(t1 - target) <= 1e-12 * max(1.0, target):
            t1 = target
        remap_due = state.frame.t_ref + period
        if period < math.inf and abs(t1 - remap_due) <= 1e-12 * max(1.0, remap_due):
            t1 = remap_due
        try:
            state = integ.advance(state, t1, n0)
        except NonFinite as exc:
            status = StepStatus("nonfinite", str(exc), t1)
            break
        if t1 == remap_due:
            state = remap(state)
        n0, n_phys, max_b = _evaluate(integ, state)
        if not np.all(np.isfinite(n_phys)):
            series.append(row(state, n_phys, max_b))
            status = StepStatus("nonfinite", f"non-finite density at t={state.t}", state.t)
            break
        value = lp_norm(Field(grid, n_phys), monitor_p)
        crossed = value > threshold
        if state.t >= next_rec * (1 - 1e-12) or crossed or state.t >= T * (1 - 1e-12):
            series.append(row(state, n_phys, max_b))
            if on_record:
                on_record(state, series)
            next_rec = _next_record(state.t, record_every)
        if crossed:
            status = detect_blowup(series, cfg)
            break
    else:
        status = detect_blowup(series, cfg)
    log.info("run finished at t=%.6g: %s %s", state.t, status.outcome, status.detail)
    return series, state, status


def _evaluate(integ: _Integrator, state: SimState):
    if integ.linear_only:
        return None, ifft_real(state.n_hat.coeffs), 0.0
    return integ.N(state.n_hat.coeffs, state.frame, state.t)
