"""Exact spin-basis engine: dense diagonalization, infinite-temperature
states, time evolution, and the correlator time series.

Two propagation paths are provided.  Within the dense cap everything goes
through the eigenbasis (exact phases exp(-i E t)); beyond it, sampled
estimates use sparse matrix-action evolution (scipy expm_multiply) up to the
sparse cap.  Both paths agree to high precision and are cross-checked in the
test suite.
"""

from __future__ import annotations

import os
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ResourceLimitError, ValidationError
from .models import (
    DENSE_SITE_CAP,
    DenseOperator,
    LocalOperator,
    ModelSpec,
    apply_local_pauli,
    build_hamiltonian,
    build_local_operator,
    build_sparse_hamiltonian,
)
from .series import OtocSeries


class Temperature(str, Enum):
    INFINITE = "infinite"
    ZERO = "zero"


@dataclass(frozen=True)
class TraceSampling:
    """Exact Hilbert-space trace, normalized by the dimension."""


@dataclass(frozen=True)
class HaarSampling:
    """Average over `n_samples` Haar-random states; seeds are seed, seed+1, ..."""

    n_samples: int = 32
    seed: int = 0

    def sample_seeds(self) -> list[int]:
        return [self.seed + k for k in range(self.n_samples)]


@dataclass(eq=False)
class Spectrum:
    """Sorted eigenvalues and eigenvectors of a Hermitian operator."""

    energies: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=float)
        self._rotation_cache: "weakref.WeakKeyDictionary[DenseOperator, np.ndarray]" = (
            weakref.WeakKeyDictionary()
        )

    @property
    def dim(self) -> int:
        return self.energies.size

    @property
    def n_sites(self) -> int:
        n = int(round(np.log2(self.dim)))
        if 2 ** n != self.dim:
            raise ValidationError(f"dimension {self.dim} is not a power of two")
        return n

    def rotate(self, op: DenseOperator) -> np.ndarray:
        """Operator in the eigenbasis, S^dag A S; cached per operator object."""
        cached = self._rotation_cache.get(op)
        if cached is not None:
            return cached
        s = self.states
        if np.isrealobj(s) and np.isrealobj(op.entries):
            rotated = s.T @ (op.entries @ s)
        else:
            rotated = s.conj().T @ (op.entries @ s)
        self._rotation_cache[op] = rotated
        return rotated

    def to_eigenbasis(self, vec: np.ndarray) -> np.ndarray:
        return self.states.conj().T @ vec

    def ground_state_splitting(self) -> float:
        return float(self.energies[1] - self.energies[0]) if self.dim > 1 else np.inf


@dataclass(eq=False)
class StateVector:
    """Normalized pure state with optional RNG provenance."""

    amplitudes: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-12:
            raise ValidationError(f"state norm {norm} deviates from 1 beyond 1e-12")


def _fix_eigenvector_phases(states: np.ndarray) -> np.ndarray:
    """Deterministic gauge: largest-|component| entry made real-positive."""
    idx = np.argmax(np.abs(states), axis=0)
    lead = states[idx, np.arange(states.shape[1])]
    if np.isrealobj(states):
        states = states * np.where(lead >= 0, 1.0, -1.0)[None, :]
    else:
        phase = lead / np.abs(lead)
        states = states * phase.conj()[None, :]
    return states


def diagonalize(ham: DenseOperator) -> Spectrum:
    """Full dense eigendecomposition (ascending energies, gauge-fixed columns)."""
    if not ham.hermitian_flag:
        raise ValidationError("diagonalize requires hermitian_flag on the operator")
    if ham.dim > 2 ** DENSE_SITE_CAP:
        raise ResourceLimitError(
            f"dense diagonalization capped at dim {2 ** DENSE_SITE_CAP}, got {ham.dim}",
            details={"cap": 2 ** DENSE_SITE_CAP, "requested": ham.dim},
        )
    energies, states = np.linalg.eigh(ham.entries)
    return Spectrum(energies=energies, states=_fix_eigenvector_phases(states))


def haar_state(dim: int, seed: int) -> StateVector:
    """Haar-random state from a counter-based Philox generator (reproducible)."""
    if dim < 1:
        raise ValidationError(f"dim must be >= 1, got {dim}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    z = rng.standard_normal((2, dim))
    amps = z[0] + 1j * z[1]
    amps /= np.linalg.norm(amps)
    return StateVector(amplitudes=amps, seed=seed)


def default_threads() -> int:
    env = os.environ.get("OTOC_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _ordered_map(fn, items, threads: int):
    """Order-preserving map, optionally on a thread pool (deterministic output)."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# eigenbasis evaluation kernels

def _trace_otoc_values(energies, w_eig, v_eig, times, threads=1) -> np.ndarray:
    m = energies.size

    if np.isrealobj(w_eig) and np.isrealobj(v_eig):
        # contiguous real kernel: W(t) = W o (cos_a cos_b + sin_a sin_b)
        #                              + i W o (sin_a cos_b - cos_a sin_b)
        def point(t: float) -> complex:
            c = np.cos(energies * t)
            s = np.sin(energies * t)
            a_re = w_eig * (np.outer(c, c) + np.outer(s, s))
            a_im = w_eig * (np.outer(s, c) - np.outer(c, s))
            b_re = a_re @ v_eig
            b_im = a_im @ v_eig
            re = (b_re * b_re.T).sum() - (b_im * b_im.T).sum()
            im = (b_re * b_im.T).sum() + (b_im * b_re.T).sum()
            return complex(re, im) / m
    else:
        w_c = np.ascontiguousarray(w_eig, dtype=complex)
        v_c = np.ascontiguousarray(v_eig, dtype=complex)

        def point(t: float) -> complex:
            p = np.exp(1j * energies * t)
            a = (p[:, None] * w_c) * p.conj()[None, :]
            b = a @ v_c
            return complex(np.einsum("ab,ba->", b, b)) / m

    return np.array(_ordered_map(point, list(times), threads), dtype=complex)


def _trace_two_time_values(energies, w_eig, times, threads=1) -> np.ndarray:
    m = energies.size
    q = np.asarray(w_eig * w_eig.T, dtype=complex)

    def point(t: float) -> complex:
        p = np.exp(1j * energies * t)
        return complex(p @ (q @ p.conj())) / m

    return np.array(_ordered_map(point, list(times), threads), dtype=complex)


def _state_otoc_values(energies, w_eig, v_eig, psi_eig, times) -> np.ndarray:
    batch = _batched_state_otoc_values(energies, w_eig, v_eig,
                                       psi_eig[:, None], times)
    return batch[0]


def _batched_state_otoc_values(energies, w_eig, v_eig, psi_cols, times) -> np.ndarray:
    """<psi|W(t) V W(t) V|psi> for a batch of states (columns of psi_cols)."""
    w_c = np.ascontiguousarray(w_eig, dtype=complex)
    v_c = np.ascontiguousarray(v_eig, dtype=complex)
    psi = np.ascontiguousarray(psi_cols, dtype=complex)
    values = np.empty((psi.shape[1], len(times)), dtype=complex)
    for k, t in enumerate(times):
        p = np.exp(1j * energies * t)[:, None]
        x = v_c @ psi
        x = p * (w_c @ (p.conj() * x))
        x = v_c @ x
        x = p * (w_c @ (p.conj() * x))
        values[:, k] = np.einsum("ms,ms->s", psi.conj(), x)
    return values


def _state_two_time_values(energies, w_eig, psi_eig, times) -> np.ndarray:
    return _batched_state_two_time_values(energies, w_eig, psi_eig[:, None], times)[0]


def _batched_state_two_time_values(energies, w_eig, psi_cols, times) -> np.ndarray:
    w_c = np.ascontiguousarray(w_eig, dtype=complex)
    psi = np.ascontiguousarray(psi_cols, dtype=complex)
    values = np.empty((psi.shape[1], len(times)), dtype=complex)
    for k, t in enumerate(times):
        p = np.exp(1j * energies * t)[:, None]
        x = w_c @ psi
        x = p * (w_c @ (p.conj() * x))
        values[:, k] = np.einsum("ms,ms->s", psi.conj(), x)
    return values


# ---------------------------------------------------------------------------
# sparse matrix-action path (beyond the dense cap)

def _sparse_state_otoc_values(spec: ModelSpec, w: LocalOperator, v: LocalOperator,
                              psi: np.ndarray, times) -> np.ndarray:
    ham = build_sparse_hamiltonian(spec).astype(complex)
    gen = -1j * ham
    n = spec.n_sites
    values = np.empty(len(times), dtype=complex)
    x = apply_local_pauli(psi, v, n).astype(complex)   # e^{-iHt} V psi, stepped
    y = psi.astype(complex)                            # e^{-iHt} psi, stepped
    prev_t = 0.0
    for k, t in enumerate(times):
        if t != prev_t:
            step = spla.expm_multiply(gen * (t - prev_t), np.column_stack([x, y]))
            x, y = step[:, 0], step[:, 1]
            prev_t = t
        u = apply_local_pauli(x, w, n)
        if t != 0.0:
            u = spla.expm_multiply(-gen * t, u)        # back to t = 0
        u = apply_local_pauli(u, v, n)
        if t != 0.0:
            u = spla.expm_multiply(gen * t, u)
        u = apply_local_pauli(u, w, n)
        values[k] = np.vdot(y, u)
    return values


# ---------------------------------------------------------------------------
# public operations

def _resolve_spectrum(model) -> Spectrum:
    if isinstance(model, Spectrum):
        return model
    if isinstance(model, ModelSpec):
        return diagonalize(build_hamiltonian(model))
    raise ValidationError(f"expected ModelSpec or Spectrum, got {type(model).__name__}")


def _base_meta(model, engine: str, temperature: Temperature, w, v=None) -> dict:
    meta = {"engine": engine, "temperature": temperature.value, "w": w.describe()}
    if v is not None:
        meta["v"] = v.describe()
    if isinstance(model, ModelSpec):
        meta["model"] = (
            f"{model.family.value} n={model.n_sites} j={model.coupling_j} "
            f"jz={model.coupling_jz} delta={model.coupling_delta} h={model.field_h} "
            f"boundary={model.boundary.value} overrides={dict(model.site_field_overrides)}"
        )
        meta["model_hash"] = model.content_hash()
        meta["n_sites"] = model.n_sites
    return meta


def _check_sites(n_sites: int, *ops: LocalOperator):
    for op in ops:
        if not 1 <= op.site <= n_sites:
            raise ValidationError(f"operator site {op.site} outside chain [1, {n_sites}]")


def _validate_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValidationError("time grid is empty")
    return times


def _zero_temperature_state(spectrum: Spectrum, meta: dict) -> np.ndarray:
    split = spectrum.ground_state_splitting()
    scale = max(abs(spectrum.energies[0]), abs(spectrum.energies[-1]), 1.0)
    if split < 1e-10 * scale:
        meta["ground_state_degenerate"] = True
        meta["ground_state_splitting"] = split
    psi = np.zeros(spectrum.dim, dtype=complex)
    psi[0] = 1.0  # strict lowest column, gauge fixed at diagonalization
    return psi


def otoc_series(model, w: LocalOperator, v: LocalOperator, times, *,
                temperature: Temperature = Temperature.INFINITE,
                sampling=None, threads: int | None = None) -> OtocSeries:
    """Out-of-time-order correlator series F(t) = <W(t) V W(t) V>.

    `model` is a ModelSpec or a precomputed Spectrum.  At infinite
    temperature the expectation is the normalized trace (TraceSampling) or a
    Haar-state average (HaarSampling); at zero temperature it is taken on
    the ground state.  Sampled estimates carry the standard error of the
    mean of Re F per time point.
    """
    times = _validate_times(times)
    threads = default_threads() if threads is None else threads
    sampling = TraceSampling() if sampling is None else sampling
    temperature = Temperature(temperature)

    use_sparse = (
        isinstance(model, ModelSpec)
        and model.n_sites > DENSE_SITE_CAP
        and isinstance(sampling, HaarSampling)
        and temperature is Temperature.INFINITE
    )
    if use_sparse:
        _check_sites(model.n_sites, w, v)
        meta = _base_meta(model, "ED-haar", temperature, w, v)
        meta["propagation"] = "sparse-matrix-action"
        return _haar_series(
            lambda psi: _sparse_state_otoc_values(model, w, v, psi, times),
            model.dim, sampling, times, meta, threads)

    spectrum = _resolve_spectrum(model)
    n = spectrum.n_sites
    _check_sites(n, w, v)
    w_eig = spectrum.rotate(build_local_operator(w, n))
    v_eig = spectrum.rotate(build_local_operator(v, n))

    if temperature is Temperature.ZERO:
        meta = _base_meta(model, "ED-trace", temperature, w, v)
        psi = _zero_temperature_state(spectrum, meta)
        values = _state_otoc_values(spectrum.energies, w_eig, v_eig, psi, times)
        return OtocSeries(times=times, values=values, meta=meta)

    if isinstance(sampling, TraceSampling):
        meta = _base_meta(model, "ED-trace", temperature, w, v)
        values = _trace_otoc_values(spectrum.energies, w_eig, v_eig, times, threads)
        return OtocSeries(times=times, values=values, meta=meta)

    if isinstance(sampling, HaarSampling):
        meta = _base_meta(model, "ED-haar", temperature, w, v)

        def evaluate(psi):
            return _state_otoc_values(spectrum.energies, w_eig, v_eig,
                                      spectrum.to_eigenbasis(psi), times)

        return _haar_series(evaluate, spectrum.dim, sampling, times, meta, threads)

    raise ValidationError(f"unknown sampling {sampling!r}")


def two_time_series(model, w: LocalOperator, times, *,
                    temperature: Temperature = Temperature.INFINITE,
                    sampling=None, threads: int | None = None) -> OtocSeries:
    """Two-time correlator series C(t) = <W(t) W> (same contraction norms)."""
    times = _validate_times(times)
    threads = default_threads() if threads is None else threads
    sampling = TraceSampling() if sampling is None else sampling
    temperature = Temperature(temperature)

    spectrum = _resolve_spectrum(model)
    n = spectrum.n_sites
    _check_sites(n, w)
    w_eig = spectrum.rotate(build_local_operator(w, n))

    if temperature is Temperature.ZERO:
        meta = _base_meta(model, "ED-trace", temperature, w)
        psi = _zero_temperature_state(spectrum, meta)
        values = _state_two_time_values(spectrum.energies, w_eig, psi, times)
        return OtocSeries(times=times, values=values, meta=meta)

    if isinstance(sampling, TraceSampling):
        meta = _base_meta(model, "ED-trace", temperature, w)
        values = _trace_two_time_values(spectrum.energies, w_eig, times, threads)
        return OtocSeries(times=times, values=values, meta=meta)

    if isinstance(sampling, HaarSampling):
        meta = _base_meta(model, "ED-haar", temperature, w)

        def evaluate(psi):
            return _state_two_time_values(spectrum.energies, w_eig,
                                          spectrum.to_eigenbasis(psi), times)

        return _haar_series(evaluate, spectrum.dim, sampling, times, meta, threads)

    raise ValidationError(f"unknown sampling {sampling!r}")


def _haar_series(evaluate, dim: int, sampling: HaarSampling, times, meta: dict,
                 threads: int) -> OtocSeries:
    if sampling.n_samples < 1:
        raise ValidationError("HaarSampling needs n_samples >= 1")
    seeds = sampling.sample_seeds()

    def run(seed: int) -> np.ndarray:
        return evaluate(haar_state(dim, seed).amplitudes)

    per_sample = np.array(_ordered_map(run, seeds, threads))  # [samples, times]
    values = per_sample.mean(axis=0)
    std = per_sample.real.std(axis=0, ddof=1) if len(seeds) > 1 else np.zeros(len(times))
    meta["samples"] = sampling.n_samples
    meta["seeds"] = ",".join(str(s) for s in seeds)
    return OtocSeries(times=times, values=values, meta=meta,
                      stderr_re=std / np.sqrt(len(seeds)))
