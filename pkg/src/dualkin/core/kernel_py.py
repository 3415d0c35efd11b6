"""Pure-Python filter pass, composed from the public per-step modules.

Reference implementation for the compiled kernel and the fallback used when
the extension is not built.
"""

from __future__ import annotations

import numpy as np

from ..filtering import run_filter
from ..imu import MeasurementBatch

__all__ = ["make_filter_pass_python"]


def make_filter_pass_python(model, q_eps):
    q_eps = np.asarray(q_eps, dtype=float)

    def pass_fn(theta, t, y, x0, P0, t0=0.0, records=None, xhat_out=None):
        batch = MeasurementBatch(np.atleast_2d(y), np.asarray(t, dtype=float))
        beliefs, recs = run_filter(model, theta, batch, x0, P0, q_eps, t0=t0)
        if records is not None:
            for k, r in enumerate(recs):
                records[k, 0] = r.log_det_W
                records[k, 1] = r.quad
        if xhat_out is not None:
            for k, b in enumerate(beliefs[1:]):
                xhat_out[k] = b.xhat
        return float(sum(r.log_det_W + r.quad for r in recs))

    return pass_fn
