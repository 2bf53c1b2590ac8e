import sys
import time

import numpy as np

from otoc_chain.analysis import time_average
from otoc_chain.decomposition import (
    f_bar_resolved,
    partition_spectrum,
    resolution_from_window,
)
from otoc_chain.ed import diagonalize, otoc_series
from otoc_chain.models import (
    LocalOperator,
    ModelSpec,
    build_hamiltonian,
    build_local_operator,
)
from otoc_chain.series import uniform_grid


def log(msg):
    print(msg, flush=True)


for fam, kw in (
    ("tfim", dict(field_h=0.3)),
    ("xxz", dict(coupling_jz=2.0)),
    ("nnn_ising", dict(coupling_delta=-0.5, field_h=0.3)),
):
    spec = ModelSpec(family=fam, n_sites=10, **kw)
    t0 = time.time()
    spect = diagonalize(build_hamiltonian(spec))
    log(f"{fam}: diag {time.time()-t0:.1f}s")
    w = LocalOperator(site=1, axis="z")
    wop = build_local_operator(w, 10)
    part = partition_spectrum(spect, resolution_from_window(800.0), window=800.0)
    t0 = time.time()
    rep = f_bar_resolved(spect, part, wop, wop)
    log(f"{fam}: fbar={rep.f_bar.real:.5f} ({time.time()-t0:.1f}s) "
        f"f_diag={rep.f_diag:.5f} counts={rep.term_count}")
    for npts in (256, 512):
        t0 = time.time()
        times = uniform_grid(800.0, 800.0 / npts)
        ser = otoc_series(spect, w, w, times)
        ta = time_average(ser, (0.0, 800.0))
        log(f"{fam}: npts={npts} avg={ta.mean:.5f} ({time.time()-t0:.1f}s) "
            f"|fbar-avg|={abs(rep.f_bar.real-ta.mean):.4f} extent={ta.oscillation_extent:.3f}")
