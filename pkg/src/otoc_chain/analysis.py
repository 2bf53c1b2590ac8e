"""Post-processing of series and scans: time averages, transition-point
extraction, power-law finite-size fits, threshold crossing times, and the
Binder cumulant."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    DegenerateMagnetizationError,
    FitConvergenceError,
    ValidationError,
)
from .ed import HaarSampling, StateVector, TraceSampling, otoc_series
from .models import Axis, Family, LocalOperator, ModelSpec, total_sz_values
from .series import OtocSeries, uniform_grid


@dataclass(frozen=True)
class TimeAverage:
    mean: float
    oscillation_extent: float
    window: tuple[float, float]


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of y = a * N^(-xi) + c."""

    amplitude: float
    exponent: float
    offset: float
    r_squared: float
    n_points: int
    fixed_offset: bool
    model: str = "y = a*N^(-xi) + c"

    def predict(self, n) -> np.ndarray:
        return self.amplitude * np.asarray(n, dtype=float) ** (-self.exponent) + self.offset


@dataclass(frozen=True)
class TransitionPoint:
    """Grid argmax of the centered second derivative, with a significance flag."""

    h_dc: float
    h_interior: np.ndarray
    second_derivative: np.ndarray
    significant: bool
    peak_ratio: float


def time_average(series: OtocSeries, window: tuple[float, float]) -> TimeAverage:
    """Trapezoidal mean of Re F over the window, plus half the min-max spread."""
    t0, t1 = float(window[0]), float(window[1])
    if t1 <= t0:
        raise ValidationError(f"empty window ({t0}, {t1})")
    mask = (series.times >= t0 - 1e-12) & (series.times <= t1 + 1e-12)
    if mask.sum() < 2:
        raise ValidationError(f"window ({t0}, {t1}) covers fewer than 2 grid points")
    t = series.times[mask]
    f = series.values.real[mask]
    mean = np.trapezoid(f, t) / (t[-1] - t[0])
    return TimeAverage(mean=float(mean),
                       oscillation_extent=float((f.max() - f.min()) / 2.0),
                       window=(t0, t1))


def transition_point(h_grid, fbar_values, median_prefilter: bool = False) -> TransitionPoint:
    """Locate the maximum of d^2 F / dh^2 on a uniform grid (>= 5 points).

    The peak is flagged non-significant when it fails to exceed 3x the
    median |d^2| (featureless data) or sits at numerical-noise level.
    """
    h = np.asarray(h_grid, dtype=float)
    y = np.asarray(fbar_values, dtype=float)
    if h.size != y.size:
        raise ValidationError("h grid and values must have equal length")
    if h.size < 5:
        raise ValidationError(f"need >= 5 grid points, got {h.size}")
    steps = np.diff(h)
    if steps.min() <= 0 or np.ptp(steps) > 1e-9 * steps.max():
        raise ValidationError("h grid must be uniform and increasing")
    if median_prefilter:
        padded = np.concatenate(([y[0]], y, [y[-1]]))
        y = np.array([np.median(padded[k:k + 3]) for k in range(y.size)])
    dh = steps[0]
    d2 = (y[2:] - 2.0 * y[1:-1] + y[:-2]) / dh ** 2
    k = int(np.argmax(d2))
    peak = d2[k]
    median = float(np.median(np.abs(d2)))
    noise_floor = 1e3 * np.finfo(float).eps * max(np.abs(y).max(), 1.0) / dh ** 2
    significant = bool(peak > 3.0 * median and peak > noise_floor)
    ratio = float(peak / median) if median > 0 else np.inf
    return TransitionPoint(h_dc=float(h[k + 1]), h_interior=h[1:-1],
                           second_derivative=d2, significant=significant,
                           peak_ratio=ratio)


_EXPONENT_STARTS = (0.25, 0.5, 1.0, 2.0)


def power_law_fit(n_values, y_values, fix_offset: float | None = None) -> ScalingFit:
    """Fit y = a * N^(-xi) + c with multi-start least squares.

    The offset c can be pinned (fix_offset); at least 4 points are required
    for the free-offset fit, 3 when the offset is fixed.
    """
    n = np.asarray(n_values, dtype=float)
    y = np.asarray(y_values, dtype=float)
    if n.size != y.size:
        raise ValidationError("n and y must have equal length")
    min_points = 3 if fix_offset is not None else 4
    if n.size < min_points:
        raise ValidationError(
            f"need >= {min_points} points for this fit, got {n.size}")
    if np.any(np.diff(n) <= 0):
        raise ValidationError("n values must be strictly increasing")

    diagnostics = []
    best = None
    for xi0 in _EXPONENT_STARTS:
        basis = n ** (-xi0)
        try:
            if fix_offset is None:
                coef, *_ = np.linalg.lstsq(np.column_stack([basis, np.ones_like(n)]),
                                           y, rcond=None)
                x0 = [coef[0], xi0, coef[1]]

                def resid(p):
                    return p[0] * n ** (-p[1]) + p[2] - y
            else:
                a0 = float(basis @ (y - fix_offset) / (basis @ basis))
                x0 = [a0, xi0]

                def resid(p):
                    return p[0] * n ** (-p[1]) + fix_offset - y

            sol = least_squares(resid, x0, method="lm", max_nfev=5000)
            cost = float(np.sum(sol.fun ** 2))
            diagnostics.append({"start": xi0, "success": bool(sol.success),
                                "cost": cost, "x": sol.x.tolist()})
            if sol.success and (best is None or cost < best[0]):
                best = (cost, sol.x)
        except Exception as exc:  # singular jacobians on degenerate data
            diagnostics.append({"start": xi0, "success": False, "error": str(exc)})

    if best is None:
        raise FitConvergenceError("power-law fit failed from every start",
                                  diagnostics=diagnostics)
    cost, params = best
    if fix_offset is None:
        a, xi, c = params
    else:
        (a, xi), c = params, fix_offset
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - cost / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(amplitude=float(a), exponent=float(xi), offset=float(c),
                      r_squared=float(r2), n_points=int(n.size),
                      fixed_offset=fix_offset is not None)


def coherence_time(series: OtocSeries, eta: float) -> float | None:
    """First time Re F crosses eta from above (linear interpolation).

    Returns None when no downward crossing occurs inside the grid, which is
    distinct from a crossing at the final grid point.
    """
    if not -1.0 < eta < 1.0:
        raise ValidationError(f"eta must be in (-1, 1), got {eta}")
    f = series.values.real
    t = series.times
    above = f > eta
    for k in range(f.size - 1):
        if above[k] and not above[k + 1]:
            frac = (f[k] - eta) / (f[k] - f[k + 1])
            return float(t[k] + frac * (t[k + 1] - t[k]))
    return None


def binder_cumulant(ground_state: StateVector, n_sites: int) -> float:
    """Fourth-order cumulant of the total magnetization on the given state."""
    amps = ground_state.amplitudes
    if amps.size != 2 ** n_sites:
        raise ValidationError(
            f"state dim {amps.size} does not match n_sites {n_sites}")
    sz = total_sz_values(n_sites)
    prob = np.abs(amps) ** 2
    m2 = float(prob @ sz ** 2)
    m4 = float(prob @ sz ** 4)
    if m2 == 0.0:
        raise DegenerateMagnetizationError(
            "vanishing <Sz^2>: magnetization statistics are degenerate")
    return 1.5 * (1.0 - m4 / (3.0 * m2 ** 2))


def residue_scaling(base_spec: ModelSpec, n_list, window: tuple[float, float],
                    times=None, sampling=None,
                    threads: int | None = None) -> ScalingFit:
    """Size scaling of the edge correlator residue in the gapless regime.

    Runs the edge-operator series for each size, time-averages Re F over the
    window, and fits a pure power law (offset fixed at 0).  Requires
    |Jz/J| < 1 so the chain sits in its gapless phase.
    """
    if base_spec.family is not Family.XXZ:
        raise ValidationError("residue scaling is defined for the XXZ family")
    if abs(base_spec.coupling_jz) >= abs(base_spec.coupling_j):
        raise ValidationError(
            f"|Jz/J| must be < 1, got {base_spec.coupling_jz}/{base_spec.coupling_j}")
    n_list = sorted(int(n) for n in n_list)
    if times is None:
        times = uniform_grid(window[1], max(window[1] / 1024.0, 0.05))
    means = []
    for n in n_list:
        spec = replace(base_spec, n_sites=n)
        edge = LocalOperator(site=1, axis=Axis.Z)
        series = otoc_series(spec, edge, edge, times,
                             sampling=sampling or TraceSampling(), threads=threads)
        means.append(time_average(series, window).mean)
    return power_law_fit(n_list, means, fix_offset=0.0)
