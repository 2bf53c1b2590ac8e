"""Degenerate-subspace decomposition of correlator saturation values.

A finite averaging window T induces an energy resolution dE = pi / (4 T);
levels closer than dE are treated as degenerate.  The long-window average
of the four-point correlator then reduces to sums over energy-conserving
index quadruples (E_a - E_b + E_c - E_d = 0 within the resolution):

  * two pair-degenerate sums (a~b with c~d, and a~d with b~c), evaluated
    as block matrix products,
  * minus the all-equal sum (inclusion-exclusion), which is the diagonal
    contribution: all four indices confined to one degenerate subspace,
  * plus generic resonances among distinct levels, enumerated by binning
    all pair differences at the resolution and joining opposing bins.

Generic-resonance terms below a magnitude threshold (default 1/M^2) are
dropped; their count and summed bound are reported so the truncation error
stays visible.  The two-time correlator needs only the first restriction
(a~b) and is exact without any operator assumption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceLimitError, ValidationError
from .ed import Spectrum
from .models import DenseOperator

DEFAULT_CANDIDATE_BUDGET = 200_000_000
_BATCH = 4_000_000


@dataclass(eq=False)
class DegeneracyPartition:
    """Contiguous grouping of sorted spectrum indices at a given resolution."""

    resolution: float
    groups: list[tuple[int, int]]   # half-open index ranges [start, stop)
    window: float | None = None     # averaging time that induced the resolution

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def group_ids(self, dim: int) -> np.ndarray:
        ids = np.empty(dim, dtype=np.int64)
        for g, (start, stop) in enumerate(self.groups):
            ids[start:stop] = g
        return ids

    def largest_diameter(self, energies: np.ndarray) -> float:
        """Largest group energy spread; > resolution signals runaway chaining."""
        return max(float(energies[stop - 1] - energies[start])
                   for start, stop in self.groups)


@dataclass
class SaturationReport:
    """All decomposition-level saturation quantities for one (W, V) pair."""

    f_bar: complex
    f_diag: float
    f_offdiag: complex
    c_bar: float
    f_gs: float
    term_count: dict = field(default_factory=dict)


def resolution_from_window(window_time: float) -> float:
    """Energy resolution induced by a finite averaging window."""
    if window_time <= 0:
        raise ValidationError(f"window time must be > 0, got {window_time}")
    return math.pi / (4.0 * window_time)


def partition_spectrum(spec: Spectrum, resolution: float,
                       window: float | None = None) -> DegeneracyPartition:
    """Chain sorted energies into groups: a gap >= resolution starts a new group."""
    if resolution <= 0:
        raise ValidationError(f"resolution must be > 0, got {resolution}")
    e = spec.energies
    boundaries = np.flatnonzero(np.diff(e) >= resolution) + 1
    edges = np.concatenate(([0], boundaries, [e.size]))
    groups = [(int(edges[k]), int(edges[k + 1])) for k in range(edges.size - 1)]
    return DegeneracyPartition(resolution=float(resolution), groups=groups, window=window)


def _as_eigenbasis(spec: Spectrum, op) -> np.ndarray:
    if isinstance(op, DenseOperator):
        if op.dim != spec.dim:
            raise ValidationError(f"operator dim {op.dim} != spectrum dim {spec.dim}")
        return spec.rotate(op)
    op = np.asarray(op)
    if op.shape != (spec.dim, spec.dim):
        raise ValidationError(f"operator shape {op.shape} != spectrum dim {spec.dim}")
    return op


def f_diag(spec: Spectrum, part: DegeneracyPartition, w, v) -> float:
    """Diagonal contribution: all four indices inside one degenerate group."""
    w_eig = _as_eigenbasis(spec, w)
    v_eig = _as_eigenbasis(spec, v)
    return _group_square_trace(part, w_eig, v_eig).real / spec.dim


def _group_square_trace(part: DegeneracyPartition, w_eig, v_eig) -> complex:
    total = 0.0 + 0.0j
    for start, stop in part.groups:
        block = w_eig[start:stop, start:stop] @ v_eig[start:stop, start:stop]
        total += complex(np.einsum("ab,ba->", block, block))
    return total


def c_bar(spec: Spectrum, part: DegeneracyPartition, w) -> float:
    """Two-time saturation value: (1/M) sum of squared degenerate blocks of W."""
    w_eig = _as_eigenbasis(spec, w)
    total = 0.0 + 0.0j
    for start, stop in part.groups:
        block = w_eig[start:stop, start:stop]
        total += complex(np.einsum("ab,ba->", block, block))
    return total.real / spec.dim


def f_gs(spec: Spectrum, w, v, gs_resolution: float) -> float:
    """Diagonal contribution restricted to the lowest quasi-degenerate group.

    The group holds every state within gs_resolution of the minimum energy;
    the block trace is normalized by the group size so a unique ground
    state returns the plain product (W_00 V_00)^2.
    """
    if gs_resolution <= 0:
        raise ValidationError(f"gs_resolution must be > 0, got {gs_resolution}")
    w_eig = _as_eigenbasis(spec, w)
    v_eig = _as_eigenbasis(spec, v)
    count = int(np.searchsorted(spec.energies, spec.energies[0] + gs_resolution, side="left"))
    count = max(count, 1)
    block = w_eig[:count, :count] @ v_eig[:count, :count]
    return complex(np.einsum("ab,ba->", block, block)).real / count


@dataclass
class AnsatzReport:
    """Matrix-element statistics testing off-diagonal suppression of W."""

    rows: list[int]
    weights: np.ndarray          # [len(rows), M], |W_{beta alpha}|^2
    in_group: np.ndarray         # [len(rows), M] bool mask
    in_group_weight: np.ndarray
    out_group_weight: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        out = np.where(self.out_group_weight > 0, self.out_group_weight, np.nan)
        return self.in_group_weight / out


def ansatz_report(spec: Spectrum, part: DegeneracyPartition, w,
                  rows: list[int] | None = None) -> AnsatzReport:
    """Row-resolved |W_{beta alpha}|^2 with in-group / out-group weight summary.

    Default rows: the ground state and a mid-spectrum state.
    """
    w_eig = _as_eigenbasis(spec, w)
    m = spec.dim
    if rows is None:
        rows = [0, m // 2]
    for beta in rows:
        if not 0 <= beta < m:
            raise ValidationError(f"row {beta} outside [0, {m})")
    ids = part.group_ids(m)
    weights = np.abs(w_eig[rows, :]) ** 2
    in_group = ids[rows][:, None] == ids[None, :]
    in_w = np.where(in_group, weights, 0.0).sum(axis=1)
    out_w = np.where(~in_group, weights, 0.0).sum(axis=1)
    return AnsatzReport(rows=list(rows), weights=weights, in_group=in_group,
                        in_group_weight=in_w, out_group_weight=out_w)


def _block_diagonal_product(part: DegeneracyPartition, blocks_from, full) -> np.ndarray:
    """Rows of (block-diag of `blocks_from`) @ full, group by group."""
    out = np.zeros(full.shape, dtype=np.result_type(blocks_from, full))
    for start, stop in part.groups:
        out[start:stop, :] = blocks_from[start:stop, start:stop] @ full[start:stop, :]
    return out


def f_bar_resolved(spec: Spectrum, part: DegeneracyPartition, w, v,
                   threshold: float | None = None,
                   candidate_budget: int = DEFAULT_CANDIDATE_BUDGET) -> SaturationReport:
    """Resonance-resolved saturation value of the four-point correlator.

    Evaluates the two pair-degenerate sums via group-block products, the
    all-equal sum (diagonal contribution), and the generic resonances
    E_a - E_b + E_c - E_d = 0 within the partition resolution.  Individual
    generic terms below `threshold` (default 1/M^2) are discarded; the
    report carries their count and a bound on the discarded weight.

    Raises ResourceLimitError if the resonance join would exceed
    `candidate_budget` candidate quadruples.
    """
    if threshold is not None and threshold < 0:
        raise ValidationError("threshold must be >= 0")
    w_eig = np.ascontiguousarray(_as_eigenbasis(spec, w))
    v_eig = np.ascontiguousarray(_as_eigenbasis(spec, v))
    m = spec.dim
    theta = (1.0 / m ** 2) if threshold is None else float(threshold)

    # pair-degenerate sums via block-diagonal projections
    b1 = _block_diagonal_product(part, w_eig, v_eig)       # W_D V
    sum_pairs_wd = complex(np.einsum("ab,ba->", b1, b1))   # Tr[(W_D V)^2]
    b2 = _block_diagonal_product(part, v_eig.T, w_eig.T).T  # W V_D (columns blocked)
    sum_pairs_vd = complex(np.einsum("ab,ba->", b2, b2))   # Tr[(W V_D)^2]
    sum_all_equal = _group_square_trace(part, w_eig, v_eig)

    generic = _generic_resonance_sum(spec.energies, part, w_eig, v_eig,
                                     theta, candidate_budget)

    f_bar = (sum_pairs_wd + sum_pairs_vd - sum_all_equal + generic["sum"]) / m
    fd = sum_all_equal.real / m
    report = SaturationReport(
        f_bar=f_bar,
        f_diag=fd,
        f_offdiag=f_bar - fd,
        c_bar=c_bar(spec, part, w_eig),
        f_gs=_lowest_group_term(part, w_eig, v_eig),
        term_count={
            "groups": part.n_groups,
            "largest_group_diameter": part.largest_diameter(spec.energies),
            "threshold": theta,
            "generic_candidates": generic["candidates"],
            "generic_kept": generic["kept"],
            "generic_dropped": generic["dropped"],
            "dropped_bound": generic["dropped_bound"],
            "prefiltered_pairs": generic["prefiltered_pairs"],
        },
    )
    return report


def _lowest_group_term(part: DegeneracyPartition, w_eig, v_eig) -> float:
    start, stop = part.groups[0]
    block = w_eig[start:stop, start:stop] @ v_eig[start:stop, start:stop]
    return complex(np.einsum("ab,ba->", block, block)).real / (stop - start)


def _generic_resonance_sum(energies, part, w_eig, v_eig, theta, budget) -> dict:
    """Sum over resonant quadruples not covered by the pair-degenerate patterns.

    Pairs (a, b) are binned by E_a - E_b at the partition resolution; bins b
    and -b (and neighbours) join into candidate quadruples, filtered to
    |E_a - E_b + E_c - E_d| < resolution, with pattern overlaps masked out.

    Pairs whose W element is so small that no quadruple through them can
    reach the threshold are pruned before the join (every pruned term is
    individually below the threshold by construction); their count is
    reported as `prefiltered_pairs`.
    """
    m = energies.size
    de = part.resolution
    ids = part.group_ids(m)

    w_max = float(np.abs(w_eig).max())
    v_max = float(np.abs(v_eig).max())
    link_bound = v_max * v_max * w_max
    if link_bound == 0.0:
        return {"sum": 0.0 + 0.0j, "candidates": 0, "kept": 0, "dropped": 0,
                "dropped_bound": 0.0, "prefiltered_pairs": m * m}

    a_idx = np.repeat(np.arange(m, dtype=np.int32), m)
    b_idx = np.tile(np.arange(m, dtype=np.int32), m)
    viable = np.abs(w_eig.ravel()) * link_bound >= theta
    prefiltered = int(a_idx.size - viable.sum())
    a_idx, b_idx = a_idx[viable], b_idx[viable]
    omega = energies[a_idx] - energies[b_idx]
    bins = np.floor(omega / de).astype(np.int64)

    order = np.argsort(bins, kind="stable")
    a_idx, b_idx, omega, bins = a_idx[order], b_idx[order], omega[order], bins[order]
    uniq, starts = np.unique(bins, return_index=True)
    starts = np.append(starts, bins.size)
    bin_pos = {int(key): k for k, key in enumerate(uniq)}

    candidates = 0
    for k, key in enumerate(uniq):
        n1 = starts[k + 1] - starts[k]
        for partner in (-int(key) - 2, -int(key) - 1, -int(key)):
            if partner in bin_pos:
                kp = bin_pos[partner]
                candidates += int(n1) * int(starts[kp + 1] - starts[kp])
    if candidates > budget:
        raise ResourceLimitError(
            f"generic resonance enumeration needs {candidates} candidate quadruples, "
            f"budget is {budget}",
            details={"candidates": candidates, "budget": budget,
                     "pairs": m * m, "bins": int(uniq.size),
                     "largest_bin": int(np.diff(starts).max())},
        )

    total = 0.0 + 0.0j
    kept = 0
    dropped = 0
    dropped_bound = 0.0

    def process(sel_p, sel_q):
        nonlocal total, kept, dropped, dropped_bound
        ap, bp = a_idx[sel_p], b_idx[sel_p]
        cq, dq = a_idx[sel_q], b_idx[sel_q]
        res = np.abs(omega[sel_p] + omega[sel_q]) < de
        pattern = ((ids[ap] == ids[bp]) & (ids[cq] == ids[dq])) | \
                  ((ids[ap] == ids[dq]) & (ids[bp] == ids[cq]))
        keep = res & ~pattern
        if not keep.any():
            return
        ap, bp, cq, dq = ap[keep], bp[keep], cq[keep], dq[keep]
        terms = w_eig[ap, bp] * v_eig[bp, cq] * w_eig[cq, dq] * v_eig[dq, ap]
        mags = np.abs(terms)
        big = mags >= theta
        total += complex(terms[big].sum())
        kept += int(big.sum())
        dropped += int((~big).sum())
        dropped_bound += float(mags[~big].sum())

    for k, key in enumerate(uniq):
        p_lo, p_hi = int(starts[k]), int(starts[k + 1])
        for partner in (-int(key) - 2, -int(key) - 1, -int(key)):
            kp = bin_pos.get(partner)
            if kp is None:
                continue
            q_lo, q_hi = int(starts[kp]), int(starts[kp + 1])
            n_p, n_q = p_hi - p_lo, q_hi - q_lo
            # batch the cartesian product to bound memory
            rows_per_batch = max(1, _BATCH // max(n_q, 1))
            for chunk_lo in range(p_lo, p_hi, rows_per_batch):
                chunk_hi = min(chunk_lo + rows_per_batch, p_hi)
                sel_p = np.repeat(np.arange(chunk_lo, chunk_hi), n_q)
                sel_q = np.tile(np.arange(q_lo, q_hi), chunk_hi - chunk_lo)
                process(sel_p, sel_q)

    return {"sum": total, "candidates": candidates, "kept": kept,
            "dropped": dropped, "dropped_bound": dropped_bound,
            "prefiltered_pairs": prefiltered}
