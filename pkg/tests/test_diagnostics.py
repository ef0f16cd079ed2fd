import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from couette_ks.diagnostics import (
    NormsConfig,
    RunRecord,
    TimeSeries,
    fit_decay,
    fit_power_law,
    pre_boundary_window,
    record,
    record_field,
    suppression_verdict,
    theoretical_rate,
)
from couette_ks.errors import DomainError, MismatchedExperiments, NonPositiveData
from couette_ks.experiments import gaussian_density
from couette_ks.propagator import ShearFrame, SimState
from couette_ks.spectral import GridSpec, SpectralField
from couette_ks.symbol import FlowParams
from couette_ks.timestepper import StepStatus


def test_record_zero_and_constant(cube16):
    s = SimState(ShearFrame(0.0, FlowParams(1.0, 1.5)), SpectralField(cube16, np.zeros(cube16.shape)), 0.0)
    row = record(s)
    for k in ("mass", "L1", "L2", "L4", "Linf", "frac_s0.4_p2"):
        assert row[k] == 0.0
    row = record_field(np.full(cube16.shape, 3.0), cube16, 0.0)
    assert row["mass"] == pytest.approx(3.0 * cube16.volume)
    assert row["Linf"] == 3.0
    assert row["flag"] == 0


def test_record_gaussian_l1_equals_mass():
    g = GridSpec((32, 32, 32), (8 * np.pi,) * 3)
    v = gaussian_density(g, 7.0, 1.5).values
    row = record_field(v, g, 0.0)
    assert row["L1"] == pytest.approx(row["mass"], rel=1e-10)
    assert row["mass"] == pytest.approx(7.0, rel=1e-10)


def test_record_flags():
    g = GridSpec((8, 8, 8), (1.0, 1.0, 1.0))
    v = np.ones(g.shape)
    v[0, 0, 0] = -0.5
    assert record_field(v, g, 0.0)["flag"] & 2
    v[0, 0, 0] = np.inf
    row = record_field(v, g, 0.0)
    assert row["flag"] & 1 and math.isnan(row["L2"])


@pytest.mark.parametrize("p, alpha, d, expected", [(2, 2, 0, -1.25), (4, 1.5, 0, -2.25), (2, 2, 1, -1.75)])
def test_theoretical_rate(p, alpha, d, expected):
    assert theoretical_rate(p, alpha, d) == pytest.approx(expected, abs=1e-15)


def test_theoretical_rate_domain():
    for args in [(1.5, 2, 0), (math.inf, 2, 0), (2, 1.0, 0), (2, 2.1, 0), (2, 2, -1)]:
        with pytest.raises(DomainError):
            theoretical_rate(*args)


@settings(max_examples=50, deadline=None)
@given(st.floats(2, 100), st.floats(2, 100), st.floats(1.01, 2), st.floats(0, 3), st.floats(0, 3))
def test_theoretical_rate_monotone(p1, p2, alpha, d1, d2):
    lo, hi = sorted((p1, p2))
    assert theoretical_rate(hi, alpha) <= theoretical_rate(lo, alpha)
    assert theoretical_rate(hi, alpha) > -(3 / alpha + 1)
    a, b = sorted((d1, d2))
    assert theoretical_rate(2, alpha, b) <= theoretical_rate(2, alpha, a)


def _series(t, y, col="L2"):
    ts = TimeSeries(("t", col))
    for a, b in zip(t, y):
        ts.append({"t": a, col: b})
    return ts


def test_fit_examples(rng):
    fit = fit_power_law([1, 10, 100], [1, 0.1, 0.01], min_samples=3)
    assert fit.slope == pytest.approx(-1, abs=1e-12) and fit.r2 == pytest.approx(1)
    fit = fit_decay(_series(np.arange(6.0), np.full(6, 2.0)), "L2", (0, 5))
    assert fit.slope == 0.0
    t = np.geomspace(1, 1000, 20)
    y = 3.0 * t**-1.25 * (1 + 1e-3 * rng.uniform(-1, 1, t.size))
    fit = fit_decay(_series(t, y), "L2", (1, 1000), abscissa="t")
    assert fit.slope == pytest.approx(-1.25, abs=0.01)


def test_fit_closure():
    t = np.linspace(0, 50, 40)
    rate = theoretical_rate(4, 1.5, 0.4)
    fit = fit_decay(_series(t, 2.0 * (1 + t) ** rate), "L2", (0, 50))
    assert fit.slope == pytest.approx(rate, abs=1e-6)
    assert fit.window == (0.0, 50.0)


def test_fit_errors():
    with pytest.raises(NonPositiveData):
        fit_decay(_series(np.arange(6.0), [1, 1, 0, 1, 1, 1]), "L2", (0, 5))
    with pytest.raises(DomainError):
        fit_decay(_series(np.arange(6.0), np.ones(6)), "L2", (0, 2))  # 3 samples < 5
    with pytest.raises(DomainError):
        fit_decay(_series(np.arange(6.0), np.ones(6)), "L2", (3, 3))


def test_series_order_and_csv(tmp_path):
    norms = NormsConfig(((0.4, 2.0), (1.0, 4.0)))
    ts = TimeSeries.for_norms(norms)
    g = GridSpec((8, 8, 8), (1.0, 1.0, 1.0))
    ts.append(record_field(np.ones(g.shape), g, 0.0, norms))
    ts.append(record_field(np.full(g.shape, 0.1 / 3), g, 0.1, norms))
    with pytest.raises(DomainError):
        ts.append(record_field(np.ones(g.shape), g, 0.1, norms))
    path = tmp_path / "s.csv"
    ts.write_csv(path)
    back = TimeSeries.read_csv(path)
    assert back.columns == ts.columns
    assert back.rows == ts.rows  # repr round-trips floats exactly
    assert path.read_text().splitlines()[0].startswith("t,mass,min,L1")


def test_pre_boundary_window():
    t = np.arange(10.0)
    ts = TimeSeries(("t", "rad_x", "rad_y", "rad_z"))
    for a in t:
        ts.append({"t": a, "rad_x": a, "rad_y": 0.5 * a, "rad_z": 1.0})
    # half of the x half-width 10 is 5 -> first reached at t = 5
    assert pre_boundary_window(ts, (20.0, 20.0, 20.0), t_start=1.0) == (1.0, 5.0)
    assert pre_boundary_window(ts, (100.0, 100.0, 100.0)) == (0.0, 9.0)


def _rec(outcome, monitor_values, A, grid=None, alpha=1.5, init="g"):
    ts = TimeSeries(("t", "L4"))
    for k, v in enumerate(monitor_values):
        ts.append({"t": float(k), "L4": v})
    grid = grid or GridSpec((8, 8, 8), (1.0, 1.0, 1.0))
    return RunRecord(ts, StepStatus(outcome), grid, alpha, A, init)


def test_suppression_verdicts():
    v = suppression_verdict(_rec("blowup_detected", [1, 20], 0), _rec("ok", [1, 0.1], 100))
    assert v.suppressed and v.final_ratio == pytest.approx(0.1)
    v = suppression_verdict(_rec("ok", [1, 0.5], 0), _rec("ok", [1, 0.1], 100))
    assert v.verdict == "not demonstrated" and "no blow-up" in v.reasons[0]
    v = suppression_verdict(_rec("blowup_detected", [1, 20], 0), _rec("blowup_detected", [1, 20], 100))
    assert v.verdict == "not demonstrated"
    v = suppression_verdict(_rec("blowup_detected", [1, 20], 0), _rec("ok", [1, 0.7], 100))
    assert not v.suppressed


def test_suppression_mismatch():
    with pytest.raises(MismatchedExperiments):
        suppression_verdict(_rec("blowup_detected", [1, 20], 0), _rec("ok", [1, 0.1], 100, alpha=2.0))
    with pytest.raises(MismatchedExperiments):
        suppression_verdict(_rec("blowup_detected", [1, 20], 0), _rec("ok", [1, 0.1], 100, init="h"))
