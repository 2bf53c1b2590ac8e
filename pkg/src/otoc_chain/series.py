"""Time-series container for correlator signals plus its CSV format.

CSV contract: columns t, re_f, im_f (and stderr_re for sampled estimates),
17 significant digits, '#'-prefixed comment header carrying the full model
description, operator descriptors, engine tag, seeds and grid parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

FLOAT_FMT = "%.17g"


@dataclass(eq=False)
class OtocSeries:
    """Correlator values F(t_k) on a uniform time grid with provenance."""

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)
    stderr_re: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.times.ndim != 1 or self.times.size == 0:
            raise ValidationError("time grid must be a non-empty 1-D array")
        if self.values.shape != self.times.shape:
            raise ValidationError("values and times must have matching shapes")
        if self.times.size > 1:
            steps = np.diff(self.times)
            if steps.min() <= 0 or np.ptp(steps) > 1e-9 * max(steps.max(), 1.0):
                raise ValidationError("time grid must be uniform and increasing")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def real(self) -> np.ndarray:
        return self.values.real


def uniform_grid(t_max: float, dt: float, t_min: float = 0.0) -> np.ndarray:
    """Uniform grid t_min, t_min+dt, ..., covering t_max (inclusive endpoint)."""
    if dt <= 0 or t_max < t_min:
        raise ValidationError(f"bad grid parameters t_max={t_max}, dt={dt}")
    n = int(round((t_max - t_min) / dt))
    return t_min + dt * np.arange(n + 1)


def _meta_lines(meta: dict) -> list[str]:
    lines = []
    for key in sorted(meta):
        value = meta[key]
        if isinstance(value, float):
            value = FLOAT_FMT % value
        lines.append(f"# {key} = {value}")
    return lines


def write_series_csv(series: OtocSeries, path: str | Path):
    path = Path(path)
    with_err = series.stderr_re is not None
    cols = "t,re_f,im_f" + (",stderr_re" if with_err else "")
    lines = _meta_lines(series.meta)
    lines.append(f"# columns: {cols}")
    for k, t in enumerate(series.times):
        row = [FLOAT_FMT % t, FLOAT_FMT % series.values[k].real, FLOAT_FMT % series.values[k].imag]
        if with_err:
            row.append(FLOAT_FMT % series.stderr_re[k])
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def read_series_csv(path: str | Path) -> OtocSeries:
    meta: dict = {}
    times, re_f, im_f, err = [], [], [], []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("# ")
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        parts = line.split(",")
        times.append(float(parts[0]))
        re_f.append(float(parts[1]))
        im_f.append(float(parts[2]))
        if len(parts) > 3:
            err.append(float(parts[3]))
    values = np.array(re_f) + 1j * np.array(im_f)
    stderr = np.array(err) if err else None
    return OtocSeries(times=np.array(times), values=values, meta=meta, stderr_re=stderr)
