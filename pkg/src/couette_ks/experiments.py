"""Experiment drivers shared by the command line and the acceptance tests.

* :func:`build_initial` -- initial density from a config;
* :func:`simulate` -- one run with CSV output, checkpoints and resume;
* :func:`calibrate_mass` -- bisection for a Gaussian mass that blows up
  without shear;
* :func:`suppression_sweep` -- runs over a list of shear rates and the
  suppression verdict between the unsheared and the strongest run.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .diagnostics import RunRecord, SuppressionVerdict, TimeSeries, suppression_verdict
from .errors import DomainError
from .snapshot import load_snapshot, read_snapshot, write_snapshot
from .spectral import Field, GridSpec
from .timestepper import monitor_column, run

log = logging.getLogger(__name__)

__all__ = [
    "gaussian_density",
    "modes_density",
    "build_initial",
    "init_id",
    "SimulationResult",
    "simulate",
    "calibrate_mass",
    "suppression_sweep",
]

SERIES_NAME = "series.csv"


def gaussian_density(grid: GridSpec, mass: float, sigma: float, offset=(0.0, 0.0, 0.0)):
    """Periodised Gaussian of total mass ``mass`` centred at box centre + ``offset``.

    Distances are minimum-image, so the bump is smooth across the box edge.
    """
    x, y, z = grid.coordinates()
    r2 = 0.0
    for c, L, o in zip((x, y, z), grid.box, offset):
        d = c - (0.5 * L + o)
        d = d - L * np.round(d / L)
        r2 = r2 + d * d
    v = mass / (2 * np.pi * sigma**2) ** 1.5 * np.exp(-r2 / (2 * sigma**2))
    return Field(grid, np.broadcast_to(v, grid.shape))


def modes_density(grid: GridSpec, mass: float, modes: int, amplitude: float, seed: int):
    """Positive band-limited density: the mean ``mass / V`` times ``1 + amplitude p``.

    ``p`` is a random real combination of modes with ``|k_i| <= modes``,
    scaled to ``max |p| = 1``; the density is therefore at least
    ``(1 - amplitude)`` times the mean.
    """
    rng = np.random.default_rng(seed)
    kx, ky, kz = grid.mode_indices()
    band = (np.abs(kx) <= modes) & (np.abs(ky) <= modes) & (np.abs(kz) <= modes)
    c = np.where(band, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape), 0.0)
    c.flat[0] = 0.0
    p = np.fft.ifftn(c).real  # real part = Hermitian-symmetrised, same band
    p = p / np.abs(p).max()
    return Field(grid, mass / grid.volume * (1.0 + amplitude * p))


def build_initial(cfg: ExperimentConfig) -> Field:
    grid = cfg.grid()
    kind = cfg["init.kind"]
    if kind == "gaussian":
        return gaussian_density(grid, cfg["init.mass"], cfg["init.sigma"], cfg["init.center"])
    if kind == "modes":
        return modes_density(grid, cfg["init.mass"], cfg["init.modes"], cfg["init.amplitude"],
                             cfg["init.seed"])
    snap = load_snapshot(cfg["init.file"])
    if snap.grid != grid:
        raise DomainError(f"snapshot grid {snap.grid} differs from configured {grid}")
    return Field(grid, snap.samples)


def init_id(cfg: ExperimentConfig) -> str:
    """Identity of the initial data (everything that determines ``n0``)."""
    keys = ["grid.n", "grid.box", "init.kind", "init.mass"]
    kind = cfg["init.kind"]
    if kind == "gaussian":
        keys += ["init.sigma", "init.center"]
    elif kind == "modes":
        keys += ["init.modes", "init.amplitude", "init.seed"]
    else:
        keys += ["init.file"]
    return ";".join(f"{k}={cfg[k]}" for k in keys)


@dataclass
class SimulationResult:
    series: TimeSeries
    state: object
    status: object
    out_dir: Optional[Path] = None
    snapshots: list = field(default_factory=list)


def simulate(cfg: ExperimentConfig, out_dir=None, *, linear_only: Optional[bool] = None,
             resume=None) -> SimulationResult:
    """Run the configured experiment.

    With ``out_dir`` the series is written to ``series.csv`` after every
    recorded row and snapshots ``snap_<t>.cks`` every
    ``output.snapshot_every`` (plus ``final.cks``).  ``resume`` is a
    snapshot path; the series already in ``out_dir`` is truncated at the
    snapshot time and continued, and the accumulated remap loss is taken
    from its last row.
    """
    grid = cfg.grid()
    flow = cfg.flow()
    linear = cfg["time.linear_only"] if linear_only is None else linear_only
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    series = None
    if resume is not None:
        state = read_snapshot(resume)
        if state.grid != grid:
            raise DomainError(f"snapshot grid {state.grid} differs from configured {grid}")
        if (state.flow.A, state.flow.alpha) != (flow.A, flow.alpha):
            raise DomainError("snapshot flow parameters differ from the configuration")
        csv_path = out / SERIES_NAME if out is not None else None
        if csv_path is not None and csv_path.exists():
            series = TimeSeries.read_csv(csv_path)
            series.truncate_after(state.t)
            if len(series) and series.column("t")[-1] == state.t:
                state = replace(state, remap_loss=float(series.column("remap_loss")[-1]))
        initial = state
    else:
        initial = build_initial(cfg)

    snaps = []
    every = cfg["output.snapshot_every"]
    next_snap = [every if every > 0 else math.inf]
    if resume is not None and every > 0:
        next_snap[0] = (math.floor(initial.t / every + 1e-9) + 1) * every

    def on_record(state, ser):
        if out is None:
            return
        ser.write_csv(out / SERIES_NAME)
        if state.t >= next_snap[0] * (1 - 1e-12):
            path = out / f"snap_{state.t:.6f}.cks"
            write_snapshot(state, path)
            snaps.append(path)
            next_snap[0] = (math.floor(state.t / every + 1e-9) + 1) * every

    series, state, status = run(
        initial, flow, cfg.step_config(), grid, cfg["time.T"], cfg["time.record_every"],
        linear_only=linear, norms=cfg.norms(), series=series, on_record=on_record,
    )
    if out is not None:
        series.write_csv(out / SERIES_NAME)
        write_snapshot(state, out / "final.cks")
        (out / "status.txt").write_text(f"{status.outcome}\n{status.detail}\n")
        (out / "config.txt").write_text(cfg.echo())
    return SimulationResult(series, state, status, out, snaps)


def _record(cfg, res) -> RunRecord:
    return RunRecord(res.series, res.status, cfg.grid(), cfg["flow.alpha"], cfg["flow.A"], init_id(cfg),
                     monitor_column(cfg["detect.lp_monitor"]))


def calibrate_mass(cfg: ExperimentConfig, lo: float, hi: float, iterations: int = 3):
    """Bisect the Gaussian mass for blow-up of the unsheared run before ``time.T``.

    ``hi`` must blow up and ``lo`` must not; after ``iterations`` halvings
    the smallest mass known to blow up is returned with the history
    ``[(mass, outcome, t_end), ...]``.  Runs stop at the first detection, so
    blowing-up trials are cheap.
    """
    base = cfg.replace(flow__A=0.0, init__kind="gaussian")
    history = []

    def blows(mass):
        res = simulate(base.replace(init__mass=float(mass)))
        history.append((float(mass), res.status.outcome, float(res.status.t)))
        log.info("calibration mass=%g: %s at t=%g", mass, res.status.outcome, res.status.t)
        return res.status.outcome == "blowup_detected"

    if not blows(hi):
        raise DomainError(f"mass {hi} does not blow up before T={cfg['time.T']}; raise the upper bracket")
    if blows(lo):
        raise DomainError(f"mass {lo} already blows up; lower the bracket")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if blows(mid):
            hi = mid
        else:
            lo = mid
    return hi, history


def suppression_sweep(cfg: ExperimentConfig, out_dir=None):
    """Run every ``sweep.A`` on identical initial data.

    Returns ``(records, verdict)`` where the verdict compares the ``A = 0``
    run with the run at the largest ``A``.
    """
    As = sorted(set(cfg["sweep.A"]))
    if 0.0 not in As or len(As) < 2:
        raise DomainError("sweep.A must contain 0 and at least one positive shear rate")
    records = {}
    for A in As:
        sub = None if out_dir is None else Path(out_dir) / f"A_{A:g}"
        c = cfg.replace(flow__A=float(A))
        records[A] = _record(c, simulate(c, sub))
    verdict: SuppressionVerdict = suppression_verdict(records[0.0], records[As[-1]], cfg["sweep.decay_ratio"])
    return records, verdict
