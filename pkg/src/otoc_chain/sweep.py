"""Sweep orchestration: run an engine across a scan axis, write per-point
series files, an aggregate CSV, analysis records, and a manifest.

Determinism contract: a config plus its seed fully determines every number
in the output CSVs; rerunning produces byte-identical aggregates.  The
manifest additionally records wall-clock and budget events (not covered by
the byte-identity contract).
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import coherence_time, power_law_fit, time_average, transition_point
from .bdg import build_bdg, majorana_otoc, pinned_edge_scan, zero_mode_scan
from .config import SweepConfig
from .decomposition import (
    ansatz_report,
    f_bar_resolved,
    f_gs,
    partition_spectrum,
    resolution_from_window,
)
from .ed import (
    HaarSampling,
    StateVector,
    TraceSampling,
    diagonalize,
    otoc_series,
)
from .errors import ResourceLimitError, ValidationError
from .models import build_hamiltonian, build_local_operator
from .series import FLOAT_FMT, OtocSeries, uniform_grid, write_series_csv

log = logging.getLogger("otoc")

# rough dense-trace cost model used for the pre-run budget estimate
_TRACE_FLOPS_PER_POINT_PER_DIM3 = 4.0
_ASSUMED_FLOPS = 2.0e9

ZERO_MODE_COLUMNS = ("h", "n", "value", "retained_modes", "doublet_splitting",
                     "doublet_value", "diag_value", "site")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return FLOAT_FMT % float(value)


def _write_table(path: Path, header_lines: list[str], columns: list[str],
                 rows: list[dict], footer_lines: list[str] | None = None):
    lines = [f"# {line}" for line in header_lines]
    lines.append("# columns: " + ",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in columns))
    for line in footer_lines or []:
        lines.append(f"# {line}")
    path.write_text("\n".join(lines) + "\n")


class _Budget:
    def __init__(self, seconds: float):
        self.seconds = seconds
        self.start = time.monotonic()
        self.exceeded = False

    def check(self) -> bool:
        if self.seconds > 0 and time.monotonic() - self.start > self.seconds:
            self.exceeded = True
        return self.exceeded


def estimate_trace_cost_seconds(dim: int, n_points: int) -> float:
    return _TRACE_FLOPS_PER_POINT_PER_DIM3 * n_points * dim ** 3 / _ASSUMED_FLOPS


def run_sweep(config: SweepConfig) -> Path:
    """Execute the sweep described by `config`; returns the artifact directory."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t_start = time.time()
    budget = _Budget(config.budget_seconds)
    events: list[dict] = []

    engine = config.engine
    times = uniform_grid(config.t_max, config.dt)
    if engine == "ed-trace" and config.budget_seconds > 0:
        est = sum(estimate_trace_cost_seconds(config.point_spec(v).dim, times.size)
                  for v in config.scan_values)
        if est > config.budget_seconds:
            log.warning(
                "estimated ed-trace cost %.0fs exceeds budget %.0fs; "
                "downgrading to ed-haar (%d samples)",
                est, config.budget_seconds, config.samples)
            events.append({"event": "engine_downgrade", "from": "ed-trace",
                           "to": "ed-haar", "estimated_seconds": est})
            engine = "ed-haar"

    if engine in ("ed-trace", "ed-haar", "bdg"):
        rows, columns = _run_series_points(config, engine, times, out_dir, budget, events)
    else:
        rows, columns = _run_zero_mode_points(config, budget, events)

    footer = _run_analysis(config, rows, columns, out_dir)

    header = [f"sweep aggregate ({engine})"]
    for key, value in sorted(config.resolved().items()):
        header.append(f"{key} = {value}")
    if config.zero_tol is not None:
        header.append(f"zero_tol = {config.zero_tol}")
    _write_table(out_dir / "aggregate.csv", header, columns, rows, footer)

    manifest = {
        "version": __version__,
        "engine_requested": config.engine,
        "engine_used": engine,
        "config": config.resolved(),
        "points_completed": len(rows),
        "points_requested": _expected_rows(config),
        "events": events,
        "wall_clock_seconds": time.time() - t_start,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    if budget.exceeded:
        raise ResourceLimitError(
            f"budget of {config.budget_seconds}s exceeded after {len(rows)} points; "
            "partial results written", details={"artifact_dir": str(out_dir)})
    return out_dir


def _expected_rows(config: SweepConfig) -> int:
    per_point = len(config.sites) if config.engine == "bdg-zero-mode" else 1
    return len(config.scan_values) * per_point


def _series_for_point(config: SweepConfig, engine: str, spec, times, index: int):
    if engine == "bdg":
        return majorana_otoc(build_bdg(spec), config.w.site, times)
    sampling = TraceSampling() if engine == "ed-trace" else HaarSampling(
        n_samples=config.samples, seed=config.seed + index * config.samples)
    return otoc_series(spec, config.w, config.v, times,
                       sampling=sampling, threads=config.threads)


def _run_series_points(config, engine, times, out_dir, budget, events):
    rows: list[dict] = []
    columns = [config.scan_axis, "n", "f_mean", "f_extent", "im_mean"]
    if engine == "ed-haar":
        columns.append("stderr_mean")
    for eta in config.eta_values:
        columns.append(f"tau_eta_{eta:g}")
    decompose = "decomposition" in config.analysis_ops
    if decompose:
        columns += ["f_bar_re", "f_bar_im", "f_diag", "f_offdiag_re",
                    "f_offdiag_im", "c_bar", "f_gs"]
    if "binder" in config.analysis_ops:
        columns.append("binder_u")

    for index, value in enumerate(config.scan_values):
        if budget.check():
            events.append({"event": "budget_truncation", "after_points": len(rows)})
            break
        spec = config.point_spec(value)
        spectrum = None
        if engine == "ed-trace" or decompose or "binder" in config.analysis_ops:
            spectrum = diagonalize(build_hamiltonian(spec))
        series = _series_for_point(config, engine, spectrum if engine == "ed-trace" else spec,
                                   times, index)
        series.meta.setdefault("model", config.resolved()["model.family"])
        write_series_csv(series, out_dir / f"point_{index:04d}_series.csv")
        averaged = time_average(series, config.window)
        row = {
            config.scan_axis: value,
            "n": spec.n_sites,
            "f_mean": averaged.mean,
            "f_extent": averaged.oscillation_extent,
            "im_mean": float(np.mean(series.values.imag)),
        }
        if engine == "ed-haar":
            row["stderr_mean"] = float(np.mean(series.stderr_re))
        for eta in config.eta_values:
            row[f"tau_eta_{eta:g}"] = coherence_time(series, eta)
        if decompose:
            row.update(_decomposition_columns(config, spec, spectrum))
        if "binder" in config.analysis_ops:
            state = StateVector(amplitudes=spectrum.states[:, 0].astype(complex))
            from .analysis import binder_cumulant
            row["binder_u"] = binder_cumulant(state, spec.n_sites)
        if config.compare_engine and config.compare_engine != engine:
            other = _series_for_point(config, config.compare_engine,
                                      spec, times, index)
            deviation = float(np.abs(series.values - other.values).max())
            events.append({"event": "engine_compare", "point": index,
                           "engines": [engine, config.compare_engine],
                           "max_deviation": deviation})
        rows.append(row)
    return rows, columns


def _decomposition_columns(config, spec, spectrum) -> dict:
    if config.window_time is not None:
        resolution = resolution_from_window(config.window_time)
    elif config.resolution is not None:
        resolution = config.resolution
    else:
        resolution = resolution_from_window(config.window[1] - config.window[0])
    part = partition_spectrum(spectrum, resolution, window=config.window_time)
    w_op = build_local_operator(config.w, spec.n_sites)
    v_op = build_local_operator(config.v, spec.n_sites)
    report = f_bar_resolved(spectrum, part, w_op, v_op, threshold=config.threshold)
    gs_res = config.gs_resolution if config.gs_resolution is not None else resolution
    return {
        "f_bar_re": report.f_bar.real, "f_bar_im": report.f_bar.imag,
        "f_diag": report.f_diag,
        "f_offdiag_re": report.f_offdiag.real, "f_offdiag_im": report.f_offdiag.imag,
        "c_bar": report.c_bar,
        "f_gs": f_gs(spectrum, w_op, v_op, gs_res),
    }


def _run_zero_mode_points(config, budget, events):
    rows: list[dict] = []
    columns = list(ZERO_MODE_COLUMNS)
    for index, value in enumerate(config.scan_values):
        if budget.check():
            events.append({"event": "budget_truncation", "after_points": len(rows)})
            break
        spec = config.point_spec(value)
        if config.pin_offset is not None:
            point_rows = pinned_edge_scan(spec, [spec.field_h], config.pin_offset,
                                          sites=config.sites, zero_tol=config.zero_tol,
                                          pin_site=config.pin_site)
        else:
            point_rows = zero_mode_scan(spec, [spec.field_h], sites=config.sites,
                                        zero_tol=config.zero_tol)
        rows.extend(point_rows)
    return rows, columns


def _run_analysis(config, rows, columns, out_dir) -> list[str]:
    footer: list[str] = []
    if not rows:
        return footer
    axis_vals = np.array([row[config.scan_axis] for row in rows if row.get("site", config.sites[0]) == config.sites[0]])

    def column(name):
        return np.array([row[name] for row in rows
                         if row.get("site", config.sites[0]) == config.sites[0]])

    if "transition_point" in config.analysis_ops:
        col = config.fit_column or ("doublet_value" if config.engine == "bdg-zero-mode" else "f_mean")
        tp = transition_point(axis_vals, column(col))
        footer.append(f"transition_point: column={col} h_dc={_fmt(tp.h_dc)} "
                      f"significant={tp.significant} peak_ratio={_fmt(tp.peak_ratio)}")
        curve_rows = [{"h": h, "d2": d2} for h, d2 in
                      zip(tp.h_interior, tp.second_derivative)]
        _write_table(out_dir / "d2_curve.csv", [f"second derivative of {col}"],
                     ["h", "d2"], curve_rows)
    if "power_law_fit" in config.analysis_ops:
        col = config.fit_column or ("value" if config.engine == "bdg-zero-mode" else "f_mean")
        fit = power_law_fit(column("n"), column(col), fix_offset=config.fix_offset)
        footer.append(
            f"power_law_fit: column={col} a={_fmt(fit.amplitude)} xi={_fmt(fit.exponent)} "
            f"c={_fmt(fit.offset)} r2={_fmt(fit.r_squared)} n_points={fit.n_points} "
            f"fixed_offset={fit.fixed_offset}")
    if "ansatz_report" in config.analysis_ops and config.engine.startswith("ed"):
        _emit_ansatz(config, out_dir)
    return footer


def _emit_ansatz(config, out_dir):
    spec = config.point_spec(config.scan_values[0])
    spectrum = diagonalize(build_hamiltonian(spec))
    resolution = (resolution_from_window(config.window_time)
                  if config.window_time is not None
                  else config.resolution or resolution_from_window(config.window[1]))
    part = partition_spectrum(spectrum, resolution)
    report = ansatz_report(spectrum, part, build_local_operator(config.w, spec.n_sites))
    rows = []
    for r, beta in enumerate(report.rows):
        for alpha in range(spectrum.dim):
            rows.append({"beta": beta, "alpha": alpha,
                         "weight": report.weights[r, alpha],
                         "in_group": int(report.in_group[r, alpha])})
    _write_table(out_dir / "ansatz_report.csv",
                 ["matrix-element weights |W_beta,alpha|^2"],
                 ["beta", "alpha", "weight", "in_group"], rows,
                 [f"in_group_weight beta={b}: {_fmt(w)}" for b, w in
                  zip(report.rows, report.in_group_weight)] +
                 [f"out_group_weight beta={b}: {_fmt(w)}" for b, w in
                  zip(report.rows, report.out_group_weight)])
