"""Exact correlator engines and analysis tools for 1D spin chains."""

__version__ = "0.1.0"

from .analysis import (
    ScalingFit,
    TimeAverage,
    TransitionPoint,
    binder_cumulant,
    coherence_time,
    power_law_fit,
    residue_scaling,
    time_average,
    transition_point,
)
from .bdg import (
    BdgSystem,
    ZeroModeValue,
    build_bdg,
    doublet_limit,
    infinite_window_average,
    majorana_otoc,
    majorana_otoc_propagator,
    pinned_edge_scan,
    zero_mode_limit,
    zero_mode_scan,
)
from .decomposition import (
    DegeneracyPartition,
    SaturationReport,
    ansatz_report,
    c_bar,
    f_bar_resolved,
    f_diag,
    f_gs,
    partition_spectrum,
    resolution_from_window,
)
from .ed import (
    HaarSampling,
    Spectrum,
    StateVector,
    Temperature,
    TraceSampling,
    diagonalize,
    haar_state,
    otoc_series,
    two_time_series,
)
from .errors import (
    DegenerateMagnetizationError,
    FitConvergenceError,
    ResourceLimitError,
    UnsupportedModelError,
    ValidationError,
)
from .models import (
    Axis,
    Boundary,
    DenseOperator,
    Family,
    LocalOperator,
    ModelSpec,
    build_hamiltonian,
    build_local_operator,
    build_sparse_hamiltonian,
    build_spin_flip,
    build_total_sz,
)
from .series import OtocSeries, read_series_csv, uniform_grid, write_series_csv
