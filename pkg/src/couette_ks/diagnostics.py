"""Run diagnostics: norm time series, power-law fits and verdicts."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import DomainError, MismatchedExperiments, NonPositiveData
from .spectral import Field, fft_coeffs, fractional_multiplier, ifft_real, lp_norm, mass

__all__ = [
    "NormsConfig",
    "TimeSeries",
    "DecayFit",
    "record",
    "record_field",
    "theoretical_rate",
    "fit_decay",
    "fit_power_law",
    "pre_boundary_window",
    "RunRecord",
    "SuppressionVerdict",
    "suppression_verdict",
]

FLAG_NONFINITE = 1
FLAG_UNDERSHOOT = 2
UNDERSHOOT_FRACTION = 1e-3


@dataclass(frozen=True)
class NormsConfig:
    """Which fractional norms ``||Lambda^s n||_{L^p}`` to record, as ``(s, p)`` pairs."""

    fractional: tuple = ((0.4, 2.0),)

    def columns(self):
        return tuple(f"frac_s{s:g}_p{p:g}" for s, p in self.fractional)


BASE_COLUMNS = ("t", "mass", "min", "L1", "L2", "L4", "Linf")
TAIL_COLUMNS = ("remap_loss", "maxB", "rad_x", "rad_y", "rad_z", "flag")


class TimeSeries:
    """Rows of diagnostics with strictly increasing ``t``.

    Stored column-wise as lists; :meth:`column` returns numpy arrays.
    """

    def __init__(self, columns):
        self.columns = tuple(columns)
        self._rows = []

    @classmethod
    def for_norms(cls, norms: NormsConfig):
        return cls(BASE_COLUMNS + norms.columns() + TAIL_COLUMNS)

    def __len__(self):
        return len(self._rows)

    def append(self, row: dict):
        if self._rows and not row["t"] > self._rows[-1][0]:
            raise DomainError(f"time must increase: {row['t']} after {self._rows[-1][0]}")
        values = [row[c] for c in self.columns]
        if "flag" in self.columns and not all(math.isfinite(v) for v in values):
            values[self.columns.index("flag")] = int(values[self.columns.index("flag")]) | FLAG_NONFINITE
        self._rows.append(tuple(values))

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self._rows], dtype=float)

    def row(self, k):
        return dict(zip(self.columns, self._rows[k]))

    @property
    def rows(self):
        return list(self._rows)

    def truncate_after(self, t):
        """Drop rows later than ``t`` (used when resuming from a checkpoint)."""
        self._rows = [r for r in self._rows if r[0] <= t]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self._rows:
            w.writerow(_fmt(v) for v in r)
        return buf.getvalue()

    @classmethod
    def read_csv(cls, path):
        return cls.from_csv(Path(path).read_text())

    @classmethod
    def from_csv(cls, text):
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        ts = cls(header)
        for line in reader:
            if line:
                ts._rows.append(tuple(int(v) if c == "flag" else float(v) for c, v in zip(header, line)))
        return ts


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _circular_radius(weights, coords, length):
    # Circular spread (L / 2 pi) sqrt(-2 ln R); grows without bound as the mass spreads out.
    total = weights.sum()
    if total <= 0:
        return 0.0
    phase = np.exp(2j * np.pi * coords / length)
    R = abs(np.sum(weights * phase)) / total
    if R <= 0:
        return math.inf
    return length / (2 * np.pi) * math.sqrt(max(-2.0 * math.log(min(R, 1.0)), 0.0))


def record_field(values, grid, t, norms: NormsConfig = NormsConfig(), *, shear_shift=0.0,
                 remap_loss=0.0, max_b=0.0):
    """Diagnostics row for grid samples ``values`` of the density.

    ``shear_shift`` is the frame shift ``A (t - t_ref)``; it is only needed
    for the lab-frame ``x`` radius, every norm being shear invariant.
    """
    f = Field(grid, values) if np.all(np.isfinite(values)) else None
    row = {"t": float(t)}
    if f is None:
        nan = math.nan
        row.update({c: nan for c in BASE_COLUMNS[1:] + norms.columns() + TAIL_COLUMNS[:-1]})
        row["flag"] = FLAG_NONFINITE
        return row
    row["mass"] = mass(f)
    row["min"] = float(values.min())
    row["L1"] = lp_norm(f, 1)
    row["L2"] = lp_norm(f, 2)
    row["L4"] = lp_norm(f, 4)
    row["Linf"] = lp_norm(f, np.inf)
    if norms.fractional:
        c = fft_coeffs(values)
        for (s, p), name in zip(norms.fractional, norms.columns()):
            g = values if s == 0 else ifft_real(c * fractional_multiplier(grid, s))
            row[name] = lp_norm(Field(grid, g), p)
    row["remap_loss"] = float(remap_loss)
    row["maxB"] = float(max_b)
    w = np.abs(values)
    x, y, z = grid.coordinates()
    lab_x = x + shear_shift * y
    row["rad_x"] = _circular_radius(w, np.broadcast_to(lab_x, grid.shape), grid.box[0])
    row["rad_y"] = _circular_radius(w, np.broadcast_to(y, grid.shape), grid.box[1])
    row["rad_z"] = _circular_radius(w, np.broadcast_to(z, grid.shape), grid.box[2])
    flag = 0
    if row["min"] < -UNDERSHOOT_FRACTION * row["Linf"]:
        flag |= FLAG_UNDERSHOOT
    row["flag"] = flag
    return row


def record(state, norms: NormsConfig = NormsConfig(), max_b=0.0):
    """Diagnostics row of a :class:`~couette_ks.propagator.SimState`.

    The samples of the frame coefficients are lab-frame values at sheared
    grid points; the shear map preserves volume, so every ``L^p`` norm and
    the mass are those of the laboratory field.
    """
    values = ifft_real(state.n_hat.coeffs)
    return record_field(values, state.grid, state.t, norms,
                        shear_shift=state.frame.shift(state.t),
                        remap_loss=state.remap_loss, max_b=max_b)


def theoretical_rate(p, alpha, deriv_order=0.0):
    """Decay exponent ``-(3/alpha + 1)(1 - 1/p) - deriv_order/alpha``."""
    if not (2 <= p < math.inf):
        raise DomainError(f"p must lie in [2, inf), got {p}")
    if not (1 < alpha <= 2):
        raise DomainError(f"alpha must lie in (1, 2], got {alpha}")
    if deriv_order < 0:
        raise DomainError(f"derivative order must be >= 0, got {deriv_order}")
    return -(3.0 / alpha + 1.0) * (1.0 - 1.0 / p) - deriv_order / alpha


@dataclass(frozen=True)
class DecayFit:
    window: tuple
    slope: float
    intercept: float
    r2: float
    n_samples: int = 0
    abscissa: str = "1+t"


def fit_power_law(x, y, window=None, min_samples=5, abscissa="x") -> DecayFit:
    """Least-squares slope of ``log y`` against ``log x`` inside ``window``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        sel = (x >= window[0]) & (x <= window[1])
        x, y = x[sel], y[sel]
    if x.size < min_samples:
        raise DomainError(f"fit needs >= {min_samples} samples, got {x.size}")
    if np.any(y <= 0) or np.any(x <= 0) or not np.all(np.isfinite(y)):
        raise NonPositiveData("power-law fit needs positive finite data")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(ly) == 0:
        return DecayFit((float(x[0]), float(x[-1])), 0.0, float(ly[0]), 1.0, x.size, abscissa)
    res = stats.linregress(lx, ly)
    return DecayFit((float(x[0]), float(x[-1])), float(res.slope), float(res.intercept),
                    float(res.rvalue**2), x.size, abscissa)


def fit_decay(series: TimeSeries, column: str, window, abscissa: str = "1+t",
              min_samples: int = 5) -> DecayFit:
    """Log-log slope of ``column`` against ``1 + t`` (default) or ``t``.

    Raises
    ------
    NonPositiveData
        If a value inside the window is not strictly positive.
    """
    t = series.column("t")
    y = series.column(column)
    lo, hi = window
    if not lo < hi:
        raise DomainError("fit window needs t_lo < t_hi")
    sel = (t >= lo) & (t <= hi)
    t, y = t[sel], y[sel]
    if abscissa == "1+t":
        x = 1.0 + t
    elif abscissa == "t":
        x = t
    else:
        raise ValueError(f"unknown abscissa {abscissa!r}")
    fit = fit_power_law(x, y, min_samples=min_samples, abscissa=abscissa)
    return DecayFit((float(t[0]), float(t[-1])), fit.slope, fit.intercept, fit.r2, fit.n_samples,
                    abscissa)


def pre_boundary_window(series: TimeSeries, box, t_start=0.0, fraction=0.5):
    """Fit window ``(t_start, t_box)`` before the density feels the periodic images.

    ``t_box`` is the first recorded time at which the ``L^1``-weighted
    circular radius along any axis reaches ``fraction`` of that axis'
    half-width; the series end is used if that never happens.
    """
    t = series.column("t")
    hit = np.zeros(t.shape, dtype=bool)
    for name, length in zip(("rad_x", "rad_y", "rad_z"), box):
        hit |= series.column(name) >= fraction * 0.5 * length
    hit &= t > t_start
    t_box = float(t[np.argmax(hit)]) if hit.any() else float(t[-1])
    return (t_start, t_box)


@dataclass
class RunRecord:
    """A finished run: its series, final status and the experiment identity."""

    series: TimeSeries
    status: object
    grid: object
    alpha: float
    A: float
    init_id: str
    monitor: str = "L4"


@dataclass(frozen=True)
class SuppressionVerdict:
    verdict: str
    reasons: tuple = field(default_factory=tuple)
    final_ratio: float = math.nan

    @property
    def suppressed(self):
        return self.verdict == "suppressed"


def suppression_verdict(run_a0: RunRecord, run_abig: RunRecord, decay_ratio=0.5) -> SuppressionVerdict:
    """Compare an unsheared run with a strongly sheared one from the same data.

    "suppressed" requires the unsheared run to blow up and the sheared run to
    finish cleanly with its monitored norm at most ``decay_ratio`` times the
    initial value.
    """
    mismatch = [
        name for name in ("grid", "alpha", "init_id", "monitor")
        if getattr(run_a0, name) != getattr(run_abig, name)
    ]
    if mismatch:
        raise MismatchedExperiments(f"runs differ in {', '.join(mismatch)}")
    reasons = []
    if run_a0.status.outcome != "blowup_detected":
        reasons.append(f"A={run_a0.A} run ended '{run_a0.status.outcome}', no blow-up to suppress")
    if run_abig.status.outcome != "ok":
        reasons.append(f"A={run_abig.A} run ended '{run_abig.status.outcome}'")
    mon = run_abig.series.column(run_abig.monitor)
    ratio = float(mon[-1] / mon[0]) if mon.size and mon[0] > 0 else math.nan
    if not ratio <= decay_ratio:
        reasons.append(f"final/initial {run_abig.monitor} = {ratio:.4g} > {decay_ratio}")
    verdict = "not demonstrated" if reasons else "suppressed"
    return SuppressionVerdict(verdict, tuple(reasons), ratio)
