"""Command line: ``couette-ks {simulate,estimates,kernel,sweep,report}``.

Exit status: 0 on completion with every check passing, 1 when a check or
verdict fails (the failures are listed in ``failures.txt`` in the output
directory), 2 for invalid arguments or configuration, 3 when the
underlying computation raised.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import default_config, load_config
from .diagnostics import TimeSeries, fit_decay, pre_boundary_window, theoretical_rate
from .errors import CouetteKSError, ParseError, ValidationError
from .estimates import EstimateReport, SuiteConfig, kernel_norms, run_estimate_suite
from .experiments import simulate, suppression_sweep
from .symbol import FlowParams

log = logging.getLogger("couette_ks")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3


def _load(args):
    overrides = {}
    if args.seed is not None:
        overrides = {"init.seed": args.seed, "suite.seed": args.seed}
    if args.config:
        return load_config(args.config, overrides)
    cfg = default_config()
    return cfg.replace(**{k.replace(".", "__"): v for k, v in overrides.items()}) if overrides else cfg


def _out_dir(args, cfg):
    out = Path(args.out or cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_failures(out: Path, failures):
    path = out / "failures.txt"
    path.write_text("".join(f"{line}\n" for line in failures))
    return path


def cmd_simulate(args, cfg):
    out = _out_dir(args, cfg)
    res = simulate(cfg, out, linear_only=True if args.linear_only else None, resume=args.resume)
    print(f"{res.status.outcome}: {res.status.detail}")
    print(f"series: {out / 'series.csv'} ({len(res.series)} rows)")
    failed = res.status.outcome in ("nonfinite", "step_underflow")
    _write_failures(out, [f"simulate\t{res.status.outcome}\t{res.status.detail}"] if failed else [])
    return EXIT_FAILED if failed else EXIT_OK


def _emit_report(out: Path, report: EstimateReport, stem: str):
    (out / f"{stem}.csv").write_text(report.to_csv())
    (out / f"{stem}.txt").write_text(report.to_text())
    print(report.to_text(), end="")
    _write_failures(out, [f"{r.lemma}\t{r.check}\t{r.params}\t{r.note}" for r in report.failures()])
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_estimates(args, cfg):
    out = _out_dir(args, cfg)
    return _emit_report(out, run_estimate_suite(cfg.suite()), "estimates")


def cmd_kernel(args, cfg):
    """Kernel ``L^p`` norms over the configured ``(alpha, A, t)`` sweeps plus their fits."""
    out = _out_dir(args, cfg)
    suite = cfg.suite()
    rows = ["alpha,A,t,deriv,p,value"]
    sweeps = [(a, 0.0, np.geomspace(*suite.kernel_t_sweep, suite.sweep_points), suite.kernel_derivs)
              for a in suite.kernel_alphas]
    sweeps += [(a, A, [suite.shear_t], suite.shear_derivs)
               for a in suite.shear_alphas for A in np.geomspace(*suite.shear_A_sweep, suite.sweep_points)]
    for alpha, A, ts, derivs in sweeps:
        for t in ts:
            vals = kernel_norms(derivs, float(t), FlowParams(float(A), alpha), ps=(1, 2, math.inf))
            for (d, p), v in sorted(vals.items(), key=lambda kv: (kv[0][1], kv[0][0])):
                rows.append(f"{alpha!r},{float(A)!r},{float(t)!r},{':'.join(map(str, d))},{p:g},{v!r}")
    (out / "kernel_norms.csv").write_text("\n".join(rows) + "\n")
    checks = tuple(c for c in ("oracles", "kernel", "kernel_shear") if c in suite.checks)
    kw = {f: getattr(suite, f) for f in SuiteConfig.__dataclass_fields__}
    kw["checks"] = checks
    report = run_estimate_suite(SuiteConfig(**kw))
    report.records = [r for r in report.records if r.lemma != "weighted_norm"]
    return _emit_report(out, report, "kernel")


def cmd_sweep(args, cfg):
    out = _out_dir(args, cfg)
    records, verdict = suppression_sweep(cfg, out)
    lines = [f"verdict: {verdict.verdict}", f"final/initial monitor at largest A: {verdict.final_ratio:.6g}"]
    for A, rec in records.items():
        lines.append(f"A={A:g}: {rec.status.outcome} ({rec.status.detail})")
    lines += [f"reason: {r}" for r in verdict.reasons]
    text = "\n".join(lines) + "\n"
    (out / "verdict.txt").write_text(text)
    print(text, end="")
    _write_failures(out, [f"sweep\t{r}" for r in verdict.reasons])
    return EXIT_OK if verdict.suppressed else EXIT_FAILED


def decay_table(series: TimeSeries, box, alpha, fractional=()):
    """Fitted ``(1+t)``-slopes over the pre-boundary window next to their theoretical rates."""
    window = pre_boundary_window(series, box, t_start=min(1.0, float(series.column("t")[-1]) / 2))
    rows = []
    for col, p, k in [("L2", 2, 0.0), ("L4", 4, 0.0)] + [(f"frac_s{s:g}_p{p:g}", p, s) for s, p in fractional]:
        if col not in series.columns:
            continue
        try:
            fit = fit_decay(series, col, window)
            rows.append((col, fit.slope, theoretical_rate(p, alpha, k), fit.window, fit.r2))
        except CouetteKSError as exc:
            rows.append((col, math.nan, theoretical_rate(p, alpha, k), window, math.nan, str(exc)))
    return rows


def cmd_report(args, cfg):
    out = _out_dir(args, cfg)
    lines, failures = [], []
    for name in ("estimates.csv", "kernel.csv"):
        path = out / name
        if path.exists():
            report = EstimateReport.from_csv(path.read_text())
            lines.append(f"== {name}")
            lines.append(report.to_text().rstrip())
            failures += [f"{name}\t{r.lemma}\t{r.check}\t{r.params}" for r in report.failures()]
    fractional = tuple(cfg["norms.fractional"])
    for path in sorted(out.rglob("series.csv")):
        series = TimeSeries.read_csv(path)
        conf = path.parent / "config.txt"
        run_cfg = load_config(conf) if conf.exists() else cfg
        lines.append(f"== {path.relative_to(out)} (alpha={run_cfg['flow.alpha']:g}, A={run_cfg['flow.A']:g})")
        if len(series) < 5:
            lines.append("   too few rows to fit")
            continue
        lines.append(f"   {'column':<16} {'fitted':>10} {'theory':>10} {'window':>22} {'r2':>8}")
        for row in decay_table(series, run_cfg["grid.box"], run_cfg["flow.alpha"], fractional):
            col, slope, theory, window, r2 = row[:5]
            lines.append(f"   {col:<16} {slope:>10.4g} {theory:>10.4g} "
                         f"{f'[{window[0]:.3g}, {window[1]:.3g}]':>22} {r2:>8.4f}")
    if not lines:
        lines.append(f"no estimates.csv, kernel.csv or series.csv under {out}")
        failures.append("report\tnothing to report")
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    print(text, end="")
    _write_failures(out, failures)
    return EXIT_OK if not failures else EXIT_FAILED


COMMANDS = {
    "simulate": cmd_simulate,
    "estimates": cmd_estimates,
    "kernel": cmd_kernel,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="couette-ks", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "run the configured experiment, writing series.csv and snapshots",
        "estimates": "run the estimate suite and write estimates.csv/.txt",
        "kernel": "kernel norm sweeps (kernel_norms.csv) and their fitted exponents",
        "sweep": "suppression sweep over sweep.A with a verdict",
        "report": "render stored CSVs into fitted-vs-theoretical tables",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", metavar="PATH", help="key=value configuration file")
        p.add_argument("--out", metavar="DIR", help="output directory (default: output.dir)")
        p.add_argument("--seed", type=int, metavar="U64", help="overrides init.seed and suite.seed")
        if name == "simulate":
            p.add_argument("--linear-only", action="store_true", help="drop the chemotactic term")
            p.add_argument("--resume", metavar="SNAPSHOT", help="continue from a snapshot")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _load(args)
    except (ParseError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, cfg)
    except (CouetteKSError, OSError) as exc:
        print(f"error: {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        out = Path(args.out or cfg["output.dir"])
        if out.is_dir():
            _write_failures(out, [f"{args.command}\t{type(exc).__name__}\t{exc}"])
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
