"""Structure-preserving simulator for incompressible viscoelastic flow with log-strain stress."""

import os as _os

__version__ = "0.1.0"

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _apply_thread_cap():
    # must run before numpy loads its BLAS
    raw = _os.environ.get("LOGVISC_THREADS")
    if raw and raw.strip().isdigit() and int(raw) > 0:
        for var in THREAD_VARS:
            _os.environ.setdefault(var, raw.strip())


_apply_thread_cap()
