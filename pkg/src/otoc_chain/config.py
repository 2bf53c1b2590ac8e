"""Flat INI-style sweep configuration.

Sections and keys are a documented contract (see README): [model] family,
n, j, jz, delta, h, boundary, override.<site>, pin_offset, pin_site;
[scan] axis plus values or min/max/step; [engine] name; [operators] w, v;
[time] t_max, dt, window_start, window_end; [decomposition] window_time or
resolution, threshold, gs_resolution; [analysis] ops, eta, fix_offset,
fit_column; [run] seed, samples, threads, budget_seconds, output_dir,
compare_engine, sites, zero_tol.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .models import Boundary, Family, LocalOperator, ModelSpec

ENGINES = ("ed-trace", "ed-haar", "bdg", "bdg-zero-mode")
SCAN_AXES = ("h", "n", "jz", "delta")
ANALYSIS_OPS = ("time_average", "transition_point", "power_law_fit",
                "coherence_time", "binder", "ansatz_report", "decomposition")


@dataclass
class SweepConfig:
    model: ModelSpec
    scan_axis: str
    scan_values: list[float]
    engine: str
    w: LocalOperator
    v: LocalOperator
    t_max: float
    dt: float
    window: tuple[float, float]
    window_time: float | None = None
    resolution: float | None = None
    threshold: float | None = None
    gs_resolution: float | None = None
    analysis_ops: list[str] = field(default_factory=list)
    eta_values: list[float] = field(default_factory=list)
    fix_offset: float | None = None
    fit_column: str | None = None
    seed: int = 0
    samples: int = 32
    threads: int = 1
    budget_seconds: float = 0.0
    output_dir: str = "out"
    compare_engine: str | None = None
    sites: list[int] = field(default_factory=lambda: [1])
    zero_tol: float | None = None
    pin_offset: float | None = None
    pin_site: int = 1

    def point_spec(self, value: float) -> ModelSpec:
        from dataclasses import replace
        axis = self.scan_axis
        if axis == "h":
            return replace(self.model, field_h=float(value))
        if axis == "n":
            return replace(self.model, n_sites=int(round(value)))
        if axis == "jz":
            return replace(self.model, coupling_jz=float(value))
        if axis == "delta":
            return replace(self.model, coupling_delta=float(value))
        raise ValidationError(f"unknown scan axis {axis!r}")

    def resolved(self) -> dict:
        """Flat key/value view of every resolved setting, for the manifest."""
        out = {
            "model.family": self.model.family.value,
            "model.n": self.model.n_sites,
            "model.j": self.model.coupling_j,
            "model.jz": self.model.coupling_jz,
            "model.delta": self.model.coupling_delta,
            "model.h": self.model.field_h,
            "model.boundary": self.model.boundary.value,
            "model.overrides": dict(self.model.site_field_overrides),
            "scan.axis": self.scan_axis,
            "scan.values": list(self.scan_values),
            "engine.name": self.engine,
            "operators.w": self.w.describe(),
            "operators.v": self.v.describe(),
            "time.t_max": self.t_max,
            "time.dt": self.dt,
            "time.window": list(self.window),
            "decomposition.window_time": self.window_time,
            "decomposition.resolution": self.resolution,
            "decomposition.threshold": self.threshold,
            "decomposition.gs_resolution": self.gs_resolution,
            "analysis.ops": list(self.analysis_ops),
            "analysis.eta": list(self.eta_values),
            "analysis.fix_offset": self.fix_offset,
            "analysis.fit_column": self.fit_column,
            "run.seed": self.seed,
            "run.samples": self.samples,
            "run.threads": self.threads,
            "run.budget_seconds": self.budget_seconds,
            "run.output_dir": self.output_dir,
            "run.compare_engine": self.compare_engine,
            "run.sites": list(self.sites),
            "run.zero_tol": self.zero_tol,
            "model.pin_offset": self.pin_offset,
            "model.pin_site": self.pin_site,
        }
        return out


def _fail(section: str, key: str, message: str):
    raise ValidationError(f"[{section}] {key}: {message}")


def _get_float(sec, section, key, default=None, required=False):
    raw = sec.get(key, "").strip() if sec else ""
    if not raw:
        if required:
            _fail(section, key, "missing required value")
        return default
    try:
        return float(raw)
    except ValueError:
        _fail(section, key, f"not a number: {raw!r}")


def _get_int(sec, section, key, default=None, required=False):
    value = _get_float(sec, section, key, default=None, required=required)
    if value is None:
        return default
    if value != int(value):
        _fail(section, key, f"not an integer: {value!r}")
    return int(value)


def parse_config(path: str | Path) -> SweepConfig:
    """Parse and validate a sweep configuration file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    text = Path(path).read_text()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"config parse error: {exc}") from exc
    return build_config({name: dict(parser[name]) for name in parser.sections()})


def build_config(sections: dict[str, dict]) -> SweepConfig:
    known = {"model", "scan", "engine", "operators", "time",
             "decomposition", "analysis", "run"}
    for name in sections:
        if name not in known:
            raise ValidationError(f"unknown config section [{name}]")

    model_sec = sections.get("model", {})
    overrides = {}
    for key, raw in model_sec.items():
        if key.startswith("override."):
            site = key.split(".", 1)[1]
            if not site.isdigit():
                _fail("model", key, "override site must be an integer")
            overrides[int(site)] = float(raw)
    family = model_sec.get("family", "").strip().lower()
    if family not in tuple(f.value for f in Family):
        _fail("model", "family", f"expected one of {[f.value for f in Family]}, got {family!r}")
    boundary = model_sec.get("boundary", "open").strip().lower()
    if boundary not in tuple(b.value for b in Boundary):
        _fail("model", "boundary", f"expected open or periodic, got {boundary!r}")
    model = ModelSpec(
        family=Family(family),
        n_sites=_get_int(model_sec, "model", "n", required=True),
        coupling_j=_get_float(model_sec, "model", "j", default=1.0),
        coupling_jz=_get_float(model_sec, "model", "jz", default=0.0),
        coupling_delta=_get_float(model_sec, "model", "delta", default=0.0),
        field_h=_get_float(model_sec, "model", "h", default=0.0),
        site_field_overrides=tuple(sorted(overrides.items())),
        boundary=Boundary(boundary),
    )

    scan_sec = sections.get("scan", {})
    axis = scan_sec.get("axis", "").strip().lower()
    if axis not in SCAN_AXES:
        _fail("scan", "axis", f"expected one of {SCAN_AXES}, got {axis!r}")
    has_values = bool(scan_sec.get("values", "").strip())
    has_range = any(scan_sec.get(k, "").strip() for k in ("min", "max", "step"))
    if has_values and has_range:
        _fail("scan", "values", "give either an explicit list or min/max/step, not both")
    if has_values:
        try:
            values = [float(v) for v in scan_sec["values"].split(",") if v.strip()]
        except ValueError:
            _fail("scan", "values", "expected a comma-separated list of numbers")
    elif has_range:
        lo = _get_float(scan_sec, "scan", "min", required=True)
        hi = _get_float(scan_sec, "scan", "max", required=True)
        step = _get_float(scan_sec, "scan", "step", required=True)
        if step <= 0 or hi < lo:
            _fail("scan", "step", "need step > 0 and max >= min")
        count = int(round((hi - lo) / step))
        values = [lo + step * k for k in range(count + 1)]
    else:
        _fail("scan", "values", "missing scan values (list or min/max/step)")
    if not values:
        _fail("scan", "values", "empty scan")

    engine_sec = sections.get("engine", {})
    engine = engine_sec.get("name", "").strip().lower()
    if engine not in ENGINES:
        _fail("engine", "name", f"expected one of {ENGINES}, got {engine!r}")

    op_sec = sections.get("operators", {})
    w = LocalOperator.parse(op_sec.get("w", "z1"))
    v = LocalOperator.parse(op_sec.get("v", op_sec.get("w", "z1")))

    time_sec = sections.get("time", {})
    t_max = _get_float(time_sec, "time", "t_max", default=20.0)
    dt = _get_float(time_sec, "time", "dt", default=0.05)
    if dt <= 0 or t_max <= 0:
        _fail("time", "dt", "need t_max > 0 and dt > 0")
    w0 = _get_float(time_sec, "time", "window_start", default=0.0)
    w1 = _get_float(time_sec, "time", "window_end", default=t_max)
    if not 0.0 <= w0 < w1 <= t_max + 1e-9:
        _fail("time", "window_start", f"window ({w0}, {w1}) must sit inside [0, {t_max}]")

    dec_sec = sections.get("decomposition", {})
    window_time = _get_float(dec_sec, "decomposition", "window_time", default=None)
    resolution = _get_float(dec_sec, "decomposition", "resolution", default=None)
    if window_time is not None and resolution is not None:
        _fail("decomposition", "resolution", "give window_time or resolution, not both")

    ana_sec = sections.get("analysis", {})
    ops_raw = ana_sec.get("ops", "").strip()
    analysis_ops = [op.strip() for op in ops_raw.split(",") if op.strip()] if ops_raw else []
    for op in analysis_ops:
        if op not in ANALYSIS_OPS:
            _fail("analysis", "ops", f"unknown op {op!r}; expected subset of {ANALYSIS_OPS}")
    eta_raw = ana_sec.get("eta", "").strip()
    eta_values = [float(x) for x in eta_raw.split(",") if x.strip()] if eta_raw else []

    run_sec = sections.get("run", {})
    env_threads = os.environ.get("OTOC_THREADS", "").strip()
    env_budget = os.environ.get("OTOC_BUDGET_SECONDS", "").strip()
    threads = _get_int(run_sec, "run", "threads",
                       default=int(env_threads) if env_threads.isdigit() else 1)
    budget = _get_float(run_sec, "run", "budget_seconds",
                        default=float(env_budget) if env_budget else 0.0)
    sites_raw = run_sec.get("sites", "1").strip()
    sites = [int(x) for x in sites_raw.split(",") if x.strip()]
    compare = run_sec.get("compare_engine", "").strip().lower() or None
    if compare is not None and compare not in ENGINES:
        _fail("run", "compare_engine", f"expected one of {ENGINES}, got {compare!r}")

    config = SweepConfig(
        model=model,
        scan_axis=axis,
        scan_values=values,
        engine=engine,
        w=w,
        v=v,
        t_max=t_max,
        dt=dt,
        window=(w0, w1),
        window_time=window_time,
        resolution=resolution,
        threshold=_get_float(dec_sec, "decomposition", "threshold", default=None),
        gs_resolution=_get_float(dec_sec, "decomposition", "gs_resolution", default=None),
        analysis_ops=analysis_ops,
        eta_values=eta_values,
        fix_offset=_get_float(ana_sec, "analysis", "fix_offset", default=None),
        fit_column=ana_sec.get("fit_column", "").strip() or None,
        seed=_get_int(run_sec, "run", "seed", default=0),
        samples=_get_int(run_sec, "run", "samples", default=32),
        threads=threads,
        budget_seconds=budget,
        output_dir=run_sec.get("output_dir", "out").strip(),
        compare_engine=compare,
        sites=sites,
        zero_tol=_get_float(run_sec, "run", "zero_tol", default=None),
        pin_offset=_get_float(model_sec, "model", "pin_offset", default=None),
        pin_site=_get_int(model_sec, "model", "pin_site", default=1),
    )
    _validate_config(config)
    return config


def _validate_config(config: SweepConfig):
    if config.engine.startswith("bdg"):
        probe = config.point_spec(config.scan_values[0])
        if not probe.quadratic_eligible:
            raise ValidationError(
                f"[engine] name: engine {config.engine} requires a quadratic-eligible "
                f"model (tfim with delta = 0), got family {probe.family.value}")
        if config.w.axis.value != "z" or config.v.axis.value != "z" \
                or config.w.site != config.v.site:
            raise ValidationError(
                "[operators] w: bdg engines evaluate matching z-axis edge/bulk pairs "
                "(w = v = z<site>)")
    if config.scan_axis != "n":
        n = config.model.n_sites
        for op in (config.w, config.v):
            if op.site > n:
                raise ValidationError(f"[operators] {op.describe()}: site outside chain of {n}")
    if "power_law_fit" in config.analysis_ops and config.scan_axis != "n":
        raise ValidationError("[analysis] ops: power_law_fit needs scan axis 'n'")
    if "coherence_time" in config.analysis_ops and not config.eta_values:
        raise ValidationError("[analysis] eta: coherence_time needs at least one eta")
