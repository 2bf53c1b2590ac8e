"""Spin-chain model definitions and operator construction.

Three model families on N sites (Pauli-matrix normalization, 1-based sites):

  TFIM       H = -J sum_j sz_j sz_{j+1} + sum_j h_j sx_j
  XXZ        H = sum_j [ J (sx_j sx_{j+1} + sy_j sy_{j+1}) + Jz sz_j sz_{j+1} ] + sum_j h_j sx_j
  NNN_ISING  H = -J sum_j sz_j sz_{j+1} - Delta sum_j sz_j sz_{j+2} + sum_j h_j sx_j

h_j defaults to the uniform transverse field and may be overridden per site
(used to pin an edge spin with a strong local field).  Matrices are built in
the sz product basis: basis index b holds site j in bit (N - j), spin-up =
bit 0, so sz_j has diagonal value 1 - 2*bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .errors import ResourceLimitError, ValidationError

# Full dense eigendecomposition is allowed up to N = 13 (M = 8192); sparse
# matrix-action paths extend to N = 20.
DENSE_SITE_CAP = 13
SPARSE_SITE_CAP = 20


class Family(str, Enum):
    TFIM = "tfim"
    XXZ = "xxz"
    NNN_ISING = "nnn_ising"


class Boundary(str, Enum):
    OPEN = "open"
    PERIODIC = "periodic"


class Axis(str, Enum):
    X = "x"
    Y = "y"
    Z = "z"


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of a spin-chain Hamiltonian."""

    family: Family
    n_sites: int
    coupling_j: float = 1.0
    coupling_jz: float = 0.0
    coupling_delta: float = 0.0
    field_h: float = 0.0
    site_field_overrides: tuple[tuple[int, float], ...] = ()
    boundary: Boundary = Boundary.OPEN

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if self.n_sites < 2:
            raise ValidationError(f"n_sites must be >= 2, got {self.n_sites}")
        overrides = tuple(sorted((int(s), float(v)) for s, v in dict(self.site_field_overrides).items()))
        object.__setattr__(self, "site_field_overrides", overrides)
        for site, _ in overrides:
            if not 1 <= site <= self.n_sites:
                raise ValidationError(f"override site {site} outside [1, {self.n_sites}]")

    @property
    def dim(self) -> int:
        return 2 ** self.n_sites

    @property
    def quadratic_eligible(self) -> bool:
        """True when the model maps to a quadratic fermion chain."""
        return self.family is Family.TFIM and self.coupling_delta == 0.0

    def site_fields(self) -> np.ndarray:
        """Per-site transverse field, overrides applied; index 0 is site 1."""
        h = np.full(self.n_sites, self.field_h, dtype=float)
        for site, value in self.site_field_overrides:
            h[site - 1] = value
        return h

    def content_hash(self) -> str:
        """Stable hash of all fields, used for provenance metadata."""
        canon = (
            f"{self.family.value}|{self.n_sites}|{self.coupling_j!r}|{self.coupling_jz!r}"
            f"|{self.coupling_delta!r}|{self.field_h!r}|{self.site_field_overrides!r}"
            f"|{self.boundary.value}"
        )
        return hashlib.md5(canon.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class LocalOperator:
    """Single-site Pauli operator (Hermitian, unitary, squares to identity)."""

    site: int
    axis: Axis

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        if self.site < 1:
            raise ValidationError(f"site must be >= 1, got {self.site}")

    def describe(self) -> str:
        return f"{self.axis.value}{self.site}"

    @staticmethod
    def parse(text: str) -> "LocalOperator":
        text = text.strip().lower()
        if len(text) < 2 or text[0] not in "xyz" or not text[1:].isdigit():
            raise ValidationError(f"bad operator descriptor {text!r}; expected e.g. 'z1'")
        return LocalOperator(site=int(text[1:]), axis=Axis(text[0]))


@dataclass(eq=False)
class DenseOperator:
    """Dense matrix wrapper; `entries` may be float64 or complex128."""

    dim: int
    entries: np.ndarray
    hermitian_flag: bool = False

    def __post_init__(self):
        if self.entries.shape != (self.dim, self.dim):
            raise ValidationError(
                f"entries shape {self.entries.shape} does not match dim {self.dim}"
            )

    def check_hermitian(self, rtol: float = 1e-12) -> float:
        """Return max|A - A^dag| relative to max|A| (0 for the zero matrix)."""
        scale = np.abs(self.entries).max()
        if scale == 0:
            return 0.0
        dev = np.abs(self.entries - self.entries.conj().T).max()
        return dev / scale


def _check_dense_cap(n_sites: int):
    if n_sites > DENSE_SITE_CAP:
        raise ResourceLimitError(
            f"dense construction capped at N = {DENSE_SITE_CAP} sites "
            f"(M = {2 ** DENSE_SITE_CAP}); requested N = {n_sites}",
            details={"cap": DENSE_SITE_CAP, "requested": n_sites},
        )


def _check_sparse_cap(n_sites: int):
    if n_sites > SPARSE_SITE_CAP:
        raise ResourceLimitError(
            f"sparse construction capped at N = {SPARSE_SITE_CAP} sites; "
            f"requested N = {n_sites}",
            details={"cap": SPARSE_SITE_CAP, "requested": n_sites},
        )


def _sz_values(n_sites: int) -> np.ndarray:
    """Diagonal of sz_j for every site at once: array [M, N] of +/-1."""
    b = np.arange(2 ** n_sites, dtype=np.int64)
    bits = (b[:, None] >> (n_sites - 1 - np.arange(n_sites))[None, :]) & 1
    return 1.0 - 2.0 * bits


def _bonds(n_sites: int, distance: int, boundary: Boundary) -> list[tuple[int, int]]:
    """0-based site pairs at the given distance (seam pairs for periodic chains)."""
    pairs = [(j, j + distance) for j in range(n_sites - distance)]
    if boundary is Boundary.PERIODIC:
        pairs += [(j, (j + distance) % n_sites) for j in range(n_sites - distance, n_sites)]
    return pairs


def build_sparse_hamiltonian(spec: ModelSpec) -> sp.csr_matrix:
    """Sparse (CSR, float64) Hamiltonian; serves the matrix-action engine paths."""
    _check_sparse_cap(spec.n_sites)
    n = spec.n_sites
    m = spec.dim
    sz = _sz_values(n)
    h_j = spec.site_fields()
    b = np.arange(m, dtype=np.int64)

    diag = np.zeros(m)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def add_flip(site0: int, amplitude: np.ndarray | float):
        # off-diagonal term: flips the bit of `site0` with the given amplitude
        mask = 1 << (n - 1 - site0)
        rows.append(b ^ mask)
        cols.append(b)
        vals.append(np.broadcast_to(np.asarray(amplitude, dtype=float), (m,)).copy())

    if spec.family in (Family.TFIM, Family.NNN_ISING):
        for j, k in _bonds(n, 1, spec.boundary):
            diag += -spec.coupling_j * sz[:, j] * sz[:, k]
        if spec.family is Family.NNN_ISING and n >= 3:
            for j, k in _bonds(n, 2, spec.boundary):
                diag += -spec.coupling_delta * sz[:, j] * sz[:, k]
    elif spec.family is Family.XXZ:
        for j, k in _bonds(n, 1, spec.boundary):
            diag += spec.coupling_jz * sz[:, j] * sz[:, k]
            # sx sx + sy sy connects anti-aligned pairs with amplitude 2
            differ = sz[:, j] != sz[:, k]
            mask = (1 << (n - 1 - j)) | (1 << (n - 1 - k))
            rows.append((b ^ mask)[differ])
            cols.append(b[differ])
            vals.append(np.full(int(differ.sum()), 2.0 * spec.coupling_j))
    else:  # pragma: no cover - enum is exhaustive
        raise ValidationError(f"unknown family {spec.family}")

    for j in range(n):
        if h_j[j] != 0.0:
            add_flip(j, h_j[j])

    ham = sp.coo_matrix(
        (np.concatenate(vals) if vals else np.zeros(0),
         (np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64),
          np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64))),
        shape=(m, m),
    ).tocsr()
    ham += sp.diags(diag)
    return ham


def build_hamiltonian(spec: ModelSpec) -> DenseOperator:
    """Dense Hamiltonian matrix for the given model (real symmetric)."""
    _check_dense_cap(spec.n_sites)
    dense = build_sparse_hamiltonian(spec).toarray()
    return DenseOperator(dim=spec.dim, entries=dense, hermitian_flag=True)


def build_local_operator(op: LocalOperator, n_sites: int) -> DenseOperator:
    """Dense single-site Pauli acting as identity on every other site."""
    if not 1 <= op.site <= n_sites:
        raise ValidationError(f"site {op.site} outside [1, {n_sites}]")
    _check_dense_cap(n_sites)
    m = 2 ** n_sites
    b = np.arange(m, dtype=np.int64)
    bit = (b >> (n_sites - op.site)) & 1
    if op.axis is Axis.Z:
        entries = np.zeros((m, m))
        entries[b, b] = 1.0 - 2.0 * bit
    elif op.axis is Axis.X:
        entries = np.zeros((m, m))
        entries[b ^ (1 << (n_sites - op.site)), b] = 1.0
    else:  # Axis.Y: 0 -> 1 carries +i, 1 -> 0 carries -i
        entries = np.zeros((m, m), dtype=complex)
        entries[b ^ (1 << (n_sites - op.site)), b] = 1j * (1.0 - 2.0 * bit)
    return DenseOperator(dim=m, entries=entries, hermitian_flag=True)


def apply_local_pauli(state: np.ndarray, op: LocalOperator, n_sites: int) -> np.ndarray:
    """Matrix-free application of a single-site Pauli to a state vector."""
    if not 1 <= op.site <= n_sites:
        raise ValidationError(f"site {op.site} outside [1, {n_sites}]")
    m = state.shape[0]
    b = np.arange(m, dtype=np.int64)
    bit = (b >> (n_sites - op.site)) & 1
    if op.axis is Axis.Z:
        return state * (1.0 - 2.0 * bit)
    flipped = b ^ (1 << (n_sites - op.site))
    out = np.empty_like(state, dtype=complex)
    if op.axis is Axis.X:
        out[flipped] = state
    else:
        out[flipped] = state * (1j * (1.0 - 2.0 * bit))
    return out


def build_spin_flip(n_sites: int) -> DenseOperator:
    """Global spin flip prod_j sx_j (the Z2 symmetry of all three families)."""
    _check_dense_cap(n_sites)
    m = 2 ** n_sites
    b = np.arange(m, dtype=np.int64)
    entries = np.zeros((m, m))
    entries[b ^ (m - 1), b] = 1.0
    return DenseOperator(dim=m, entries=entries, hermitian_flag=True)


def total_sz_values(n_sites: int) -> np.ndarray:
    """Diagonal of the total magnetization sum_j sz_j."""
    b = np.arange(2 ** n_sites, dtype=np.int64)
    ones = np.array([bin(x).count("1") for x in b], dtype=np.int64)
    return (n_sites - 2 * ones).astype(float)


def build_total_sz(n_sites: int) -> DenseOperator:
    """Total magnetization as a dense diagonal matrix."""
    _check_dense_cap(n_sites)
    m = 2 ** n_sites
    entries = np.zeros((m, m))
    idx = np.arange(m)
    entries[idx, idx] = total_sz_values(n_sites)
    return DenseOperator(dim=m, entries=entries, hermitian_flag=True)
