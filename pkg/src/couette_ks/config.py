"""Plain-text experiment configuration.

The format is one ``section.key = value`` per line; ``#`` starts a comment.
Lists are comma separated.  ``grid.n`` and ``grid.box`` accept one value
(used for all three axes) or three; box lengths may be written as a
multiple of pi, e.g. ``8pi``.  Every key not given takes the default
listed in :data:`SCHEMA`; unknown keys are rejected.

Example::

    grid.n = 32
    flow.A = 10
    flow.alpha = 1.5
    time.T = 1

:meth:`ExperimentConfig.echo` writes the complete configuration back out in
the same format, so that ``parse_config(cfg.echo()) == cfg``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable, Optional

from .diagnostics import NormsConfig
from .errors import CouetteKSError, ParseError, ValidationError
from .estimates import CHECK_GROUPS, SuiteConfig
from .spectral import GridSpec
from .symbol import FlowParams
from .timestepper import StepConfig

__all__ = ["SCHEMA", "ExperimentConfig", "parse_config", "load_config", "default_config"]

INIT_KINDS = ("gaussian", "modes", "file")


# -- value parsers ------------------------------------------------------------


def _float(text):
    s = text.strip().lower()
    if s in ("inf", "+inf", "infinity"):
        return math.inf
    if s.endswith("pi"):
        head = s[:-2].strip().rstrip("*").strip()
        return (float(head) if head else 1.0) * math.pi
    return float(s)


def _int(text):
    return int(text.strip())


def _bool(text):
    s = text.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _triple(conv):
    def parse(text):
        parts = [conv(p) for p in text.split(",")]
        if len(parts) == 1:
            parts *= 3
        if len(parts) != 3:
            raise ValueError("expected one or three values")
        return tuple(parts)
    return parse


def _list(conv):
    def parse(text):
        text = text.strip()
        return tuple(conv(p) for p in text.split(",")) if text else ()
    return parse


def _pairs(text):
    """``s:p, s:p`` -> ((s, p), ...)."""
    text = text.strip()
    if not text:
        return ()
    out = []
    for item in text.split(","):
        s, p = item.split(":")
        out.append((_float(s), _float(p)))
    return tuple(out)


def _index_list(text):
    """``1:0:0, 0:1:0`` -> ((1, 0, 0), (0, 1, 0))."""
    text = text.strip()
    if not text:
        return ()
    return tuple(tuple(int(v) for v in item.split(":")) for item in text.split(","))


def _str(text):
    return text.strip()


# -- formatters (inverse of the parsers) ---------------------------------------


def _fmt_float(v):
    return "inf" if v == math.inf else repr(float(v))


def _fmt_value(kind, v):
    if kind in ("float",):
        return _fmt_float(v)
    if kind in ("int", "str"):
        return str(v)
    if kind == "bool":
        return "true" if v else "false"
    if kind in ("floats3", "floats"):
        return ", ".join(_fmt_float(x) for x in v)
    if kind in ("ints3", "ints"):
        return ", ".join(str(int(x)) for x in v)
    if kind == "strs":
        return ", ".join(v)
    if kind == "pairs":
        return ", ".join(f"{_fmt_float(s)}:{_fmt_float(p)}" for s, p in v)
    if kind == "indices":
        return ", ".join(":".join(str(i) for i in t) for t in v)
    raise AssertionError(kind)


_PARSERS = {
    "float": _float,
    "int": _int,
    "bool": _bool,
    "str": _str,
    "floats3": _triple(_float),
    "ints3": _triple(_int),
    "floats": _list(_float),
    "ints": _list(_int),
    "strs": _list(_str),
    "pairs": _pairs,
    "indices": _index_list,
}


@dataclass(frozen=True)
class Key:
    name: str
    kind: str
    default: Any
    check: Optional[Callable[[Any], Optional[str]]] = None
    doc: str = ""


def _positive(v):
    vals = v if isinstance(v, tuple) else (v,)
    return None if all(x > 0 for x in vals) else "must be positive"


def _nonneg(v):
    vals = v if isinstance(v, tuple) else (v,)
    return None if all(x >= 0 for x in vals) else "must be >= 0"


def _grid_n(v):
    return None if all(x >= 8 and x % 2 == 0 for x in v) else "sizes must be even and >= 8"


def _alpha(v):
    return None if 1 < v <= 2 else "alpha must lie in (1,2]"


def _alphas(v):
    return None if all(1 < a <= 2 for a in v) else "alpha must lie in (1,2]"


def _one_of(options):
    def check(v):
        return None if v in options else f"must be one of {', '.join(map(str, options))}"
    return check


def _in_open_unit(v):
    return None if 0 < v < 1 else "must lie in (0, 1)"


def _cfl(v):
    return None if 0 < v <= 1 else "must lie in (0, 1]"


def _gt1(v):
    return None if v > 1 else "must exceed 1"


def _checks(v):
    bad = [c for c in v if c not in CHECK_GROUPS]
    return None if not bad else f"unknown check groups {bad}; allowed {', '.join(CHECK_GROUPS)}"


def _sweep_range(v):
    return None if len(v) == 2 and 0 < v[0] < v[1] else "needs two increasing positive values"


def _fractional(v):
    for s, p in v:
        if s < 0 or not p >= 1:
            return "entries s:p need s >= 0 and p >= 1"
    return None


_suite_defaults = SuiteConfig()

SCHEMA = {k.name: k for k in [
    Key("grid.n", "ints3", (64, 64, 64), _grid_n, "grid points per axis"),
    Key("grid.box", "floats3", (8 * math.pi,) * 3, _positive, "box side lengths"),
    Key("flow.A", "float", 0.0, _nonneg, "shear rate"),
    Key("flow.alpha", "float", 1.5, _alpha, "order of the fractional Laplacian"),
    Key("init.kind", "str", "gaussian", _one_of(INIT_KINDS), "initial data: gaussian | modes | file"),
    Key("init.mass", "float", 100.0, _positive, "total mass of the initial density"),
    Key("init.sigma", "float", 1.5, _positive, "Gaussian width"),
    Key("init.center", "floats3", (0.0, 0.0, 0.0), None, "Gaussian centre, offset from the box centre"),
    Key("init.seed", "int", 0, _nonneg, "seed for random initial data"),
    Key("init.modes", "int", 4, _positive, "kind=modes: highest mode index perturbed per axis"),
    Key("init.amplitude", "float", 0.5, _in_open_unit, "kind=modes: relative perturbation amplitude"),
    Key("init.file", "str", "", None, "kind=file: snapshot path"),
    Key("time.T", "float", 1.0, _positive, "final time"),
    Key("time.dt_max", "float", 0.05, _positive, "largest step"),
    Key("time.dt_min", "float", 1e-7, _positive, "smallest admissible advective step"),
    Key("time.cfl", "float", 0.5, _cfl, "advective CFL number"),
    Key("time.record_every", "float", 0.1, _positive, "diagnostics interval"),
    Key("time.linear_only", "bool", False, None, "drop the chemotactic term"),
    Key("detect.blowup_factor", "float", 10.0, _gt1, "blow-up when the monitor exceeds this x initial"),
    Key("detect.lp_monitor", "float", 4.0, _one_of((1.0, 2.0, 4.0, math.inf)), "monitored L^p norm"),
    Key("norms.fractional", "pairs", ((0.4, 2.0),), _fractional, "recorded ||Lambda^s n||_p as s:p"),
    Key("output.dir", "str", "out", None, "output directory"),
    Key("output.snapshot_every", "float", 0.0, _nonneg, "checkpoint interval (0: final only)"),
    Key("sweep.A", "floats", (0.0, 100.0), _nonneg, "shear rates of the suppression sweep"),
    Key("sweep.decay_ratio", "float", 0.5, _in_open_unit, "required final/initial monitor ratio"),
    Key("suite.checks", "strs", _suite_defaults.checks, _checks, "estimate check groups"),
    Key("suite.seed", "int", 0, _nonneg, "sampling seed"),
    Key("suite.sample_count", "int", _suite_defaults.sample_count,
        lambda v: None if v >= 10**4 else "must be >= 10000", "samples per inequality"),
    Key("suite.alphas", "floats", _suite_defaults.alphas, _alphas, "alphas of the weighted-norm fits"),
    Key("suite.weights", "indices", _suite_defaults.weights, None, "weights k1:k2:k3"),
    Key("suite.t_sweep", "floats", _suite_defaults.t_sweep, _sweep_range, "t range of the t-slope fits"),
    Key("suite.A_sweep", "floats", _suite_defaults.A_sweep, _sweep_range, "A range of the A-slope fits"),
    Key("suite.sweep_points", "int", _suite_defaults.sweep_points,
        lambda v: None if v >= 3 else "must be >= 3", "points per sweep"),
    Key("suite.kernel_alphas", "floats", _suite_defaults.kernel_alphas, _alphas, "alphas of kernel t-fits"),
    Key("suite.kernel_t_sweep", "floats", _suite_defaults.kernel_t_sweep, _sweep_range, "kernel t range"),
    Key("suite.kernel_derivs", "indices", _suite_defaults.kernel_derivs, None, "kernel derivatives"),
    Key("suite.shear_alphas", "floats", _suite_defaults.shear_alphas, _alphas, "alphas of kernel A-fits"),
    Key("suite.shear_A_sweep", "floats", _suite_defaults.shear_A_sweep, _sweep_range, "kernel A range"),
    Key("suite.oracle_ts", "floats", _suite_defaults.oracle_ts, _positive, "times of the Gaussian oracle"),
]}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration: every schema key with a typed value."""

    values: tuple  # sorted (key, value) pairs, hashable and comparable

    def __getitem__(self, key):
        return dict(self.values)[key]

    def as_dict(self):
        return dict(self.values)

    def replace(self, **updates):
        """Copy with dotted keys replaced (written with ``__`` for ``.``)."""
        d = self.as_dict()
        for k, v in updates.items():
            d[k.replace("__", ".")] = v
        return _validated(d)

    # -- typed views ---------------------------------------------------------

    def grid(self) -> GridSpec:
        return GridSpec(self["grid.n"], self["grid.box"])

    def flow(self) -> FlowParams:
        return FlowParams(self["flow.A"], self["flow.alpha"])

    def step_config(self) -> StepConfig:
        return StepConfig(self["time.dt_max"], self["time.cfl"], self["time.dt_min"],
                          self["detect.blowup_factor"], self["detect.lp_monitor"])

    def norms(self) -> NormsConfig:
        return NormsConfig(self["norms.fractional"])

    def suite(self) -> SuiteConfig:
        d = self.as_dict()
        names = {f.name for f in fields(SuiteConfig)}
        kw = {k[len("suite."):]: v for k, v in d.items() if k.startswith("suite.") and k[6:] in names}
        return SuiteConfig(**kw)

    def echo(self) -> str:
        lines = []
        section = None
        for key, value in self.values:
            sec = key.split(".")[0]
            if sec != section:
                if section is not None:
                    lines.append("")
                section = sec
            lines.append(f"{key} = {_fmt_value(SCHEMA[key].kind, value)}")
        return "\n".join(lines) + "\n"


def _validated(d) -> ExperimentConfig:
    for key, value in d.items():
        spec = SCHEMA.get(key)
        if spec is None:
            raise ValidationError(key, "unknown key")
        if spec.check is not None:
            msg = spec.check(value)
            if msg:
                raise ValidationError(key, msg)
    if d["time.dt_min"] > d["time.dt_max"]:
        raise ValidationError("time.dt_min", "must not exceed time.dt_max")
    if d["init.kind"] == "file" and not d["init.file"]:
        raise ValidationError("init.file", "required when init.kind = file")
    try:
        cfg = ExperimentConfig(tuple(sorted(d.items())))
        cfg.grid()
        cfg.suite()
    except CouetteKSError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError("config", str(exc)) from exc
    return cfg


def default_config() -> ExperimentConfig:
    return _validated({k.name: k.default for k in SCHEMA.values()})


def parse_config(text: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Parse ``key = value`` text; ``overrides`` (already typed) win over the text."""
    given = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'section.key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or "." not in key or " " in key:
            raise ParseError(f"malformed key {key!r}", lineno)
        if key in given:
            raise ParseError(f"duplicate key {key!r}", lineno)
        spec = SCHEMA.get(key)
        if spec is None:
            raise ValidationError(key, f"unknown key (line {lineno})")
        try:
            given[key] = _PARSERS[spec.kind](value)
        except (ValueError, TypeError) as exc:
            raise ValidationError(key, f"cannot read {value!r} as {spec.kind}: {exc}") from None
    d = {k.name: k.default for k in SCHEMA.values()}
    d.update(given)
    d.update(overrides or {})
    return _validated(d)


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), overrides)
