"""Filter-pass backends.

A "pass" runs the whole EKF over a measurement batch at a fixed theta and
returns the summed predictive log-density terms; it is the unit of work of
every cost evaluation and dominates runtime.  Two implementations exist:

* a compiled Cython kernel (built as ``dualkin.core._kernel``), and
* a pure-Python fallback composed from the public per-step modules.

The compiled kernel is selected at import when present; set the environment
variable ``DUALKIN_BACKEND=python`` to force the fallback.  Both accept the
same arguments and agree to floating-point rounding; `benchmarks/bench_core.py`
compares their throughput.
"""

from __future__ import annotations

import os

import numpy as np

from .kernel_py import make_filter_pass_python

try:
    from . import _kernel
except ImportError:  # extension not built; fall back
    _kernel = None

_FORCED = os.environ.get("DUALKIN_BACKEND", "").strip().lower()
if _FORCED not in ("", "python", "compiled"):
    raise ValueError(f"DUALKIN_BACKEND must be 'python' or 'compiled', got {_FORCED!r}")
if _FORCED == "compiled" and _kernel is None:
    raise ImportError("DUALKIN_BACKEND=compiled but dualkin.core._kernel is not built")

BACKEND = "compiled" if (_kernel is not None and _FORCED != "python") else "python"

__all__ = ["BACKEND", "available_backends", "make_filter_pass"]


def available_backends() -> tuple[str, ...]:
    return ("python",) if _kernel is None else ("python", "compiled")


def _pack(model):
    """Flatten the measurement model into contiguous arrays for the kernel."""
    chain = model.chain
    mount_body = np.array([m.body_index for m in chain.mountings], dtype=np.int64)
    mount_R = np.ascontiguousarray([m.rotation() for m in chain.mountings], dtype=float)
    mount_r = np.ascontiguousarray([m.r_s for m in chain.mountings], dtype=float)
    return dict(
        axes=np.ascontiguousarray(chain.axes),
        offsets=np.ascontiguousarray(chain.offsets),
        base_R=np.ascontiguousarray(chain.base_R),
        base_w=np.ascontiguousarray(chain.base_omega),
        base_wd=np.ascontiguousarray(chain.base_omegadot),
        base_a=np.ascontiguousarray(chain.base_rddot),
        mount_body=mount_body,
        mount_R=mount_R,
        mount_r=mount_r,
        gravity=np.ascontiguousarray(chain.gravity),
        qv_diag=np.ascontiguousarray(model.q_v_diag),
    )


def make_filter_pass(model, q_eps, backend: str | None = None):
    """Build `pass_fn(theta, t, y, x0, P0, t0, records=None, xhat_out=None) -> float`.

    The callable computes the data term of the parameter cost: the sum over
    the batch of log|W_k| + dy_k^T W_k^-1 dy_k, optionally filling per-step
    records (K, 2) and filtered states (K, 3n).
    """
    backend = backend or BACKEND
    if backend == "python":
        return make_filter_pass_python(model, q_eps)
    if backend != "compiled":
        raise ValueError(f"unknown backend {backend!r}")
    if _kernel is None:
        raise RuntimeError("compiled kernel is not available")
    packed = _pack(model)
    q_eps = np.ascontiguousarray(np.asarray(q_eps, dtype=float) * np.ones(model.chain.n))
    compiled = _kernel.make_filter_pass(q_eps=q_eps, **packed)
    fallback = make_filter_pass_python(model, q_eps)

    def pass_fn(theta, t, y, x0, P0, t0=0.0, records=None, xhat_out=None):
        try:
            return compiled(theta, t, y, x0, P0, t0, records, xhat_out)
        except _kernel.KernelNumericalError:
            # re-run slowly to raise the detailed SingularInnovationError
            return fallback(theta, t, y, x0, P0, t0, records, xhat_out)

    return pass_fn
