"""Wall-clock node: a router thread plus an estimation worker thread.

Real-time counterpart of the deterministic state machine: measurements are
forwarded the moment they arrive while optimization runs concurrently, so
data transmission and parameter estimation overlap as they would on a
physical router + VNF.  Activation uses everything buffered at pass start.
Timing here is hardware-dependent; nothing in this module claims
reproducibility.
"""

from __future__ import annotations

import threading
import time

import numpy as np

from ..estimation import descend, fd_gradient
from ..imu import MeasurementBatch
from .messages import Measurement, ParamUpdate, ProtocolError, Shutdown, Threshold
from .nodes import NodeSpec, PassReport

__all__ = ["WallNode"]


class WallNode:
    """Runs against callables `recv() -> msg` and `send(msg)`."""

    def __init__(self, spec: NodeSpec, problem):
        self.spec = spec
        self.problem = problem
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._t: list[float] = []
        self._y: list[np.ndarray] = []
        self._beta = spec.beta
        self._theta = None if spec.theta_init is None else np.asarray(spec.theta_init, float)
        self._last_k = 0
        self._ended = False
        self._passed = False
        self._used = 0
        self.finished = False
        self.reports: list[PassReport] = []

    def run(self, recv, send):
        worker = threading.Thread(target=self._worker, args=(send,), daemon=True)
        worker.start()
        while True:
            msg = recv()
            if isinstance(msg, Measurement):
                with self._cond:
                    if msg.k <= self._last_k:
                        raise ProtocolError(f"out-of-order measurement {msg.k}")
                    self._last_k = msg.k
                    self._t.append(msg.t)
                    self._y.append(msg.y)
                    self._cond.notify_all()
                send(msg)
            elif isinstance(msg, ParamUpdate):
                with self._cond:
                    if not self._passed:
                        self._theta = msg.theta.copy()
                    self._cond.notify_all()
                send(msg)
            elif isinstance(msg, Threshold):
                with self._cond:
                    self._beta = msg.beta
                    self._cond.notify_all()
            elif isinstance(msg, Shutdown):
                with self._cond:
                    self._ended = True
                    self._cond.notify_all()
                worker.join()
                send(msg)
                return
            else:
                raise ProtocolError(f"unknown message {msg!r}")

    # -- worker -------------------------------------------------------------

    def _activatable(self) -> bool:
        return (
            not self._passed
            and self._beta is not None
            and self._theta is not None
            and len(self._t) >= self._beta
        )

    def _repassable(self) -> bool:
        return self.spec.is_final and self._passed and len(self._t) > self._used

    def _worker(self, send):
        spec = self.spec
        while True:
            with self._cond:
                self._cond.wait_for(
                    lambda: self._activatable() or self._repassable() or self._ended
                )
                if self._activatable() or self._repassable():
                    prefix = len(self._t)
                    batch = MeasurementBatch(np.vstack(self._y[:prefix]), np.asarray(self._t[:prefix]))
                    theta0 = self._theta
                elif self._ended:
                    if self.spec.is_final and self._passed and self._used == len(self._t):
                        self.finished = True
                    return
            start = time.monotonic()

            def gradient_fn(theta):
                return fd_gradient(self.problem, theta, batch, spec.optimizer)

            theta, rep = descend(gradient_fn, theta0, prefix, spec.optimizer, final_node=spec.is_final)
            end = time.monotonic()
            with self._cond:
                self._theta = theta
                self._passed = True
                self._used = prefix
                self.reports.append(
                    PassReport(
                        node=spec.index,
                        pass_index=len(self.reports),
                        prefix=prefix,
                        start=start,
                        end=end,
                        iterations=rep.iterations,
                        cost_evals=rep.cost_evals,
                        work=rep.cost_evals * prefix,
                        criterion=rep.criterion,
                        o_final=rep.o_final,
                        odelta_final=rep.odelta_final,
                        theta=tuple(theta),
                        cost_last=rep.cost_last,
                        wall_time=end - start,
                    )
                )
            send(ParamUpdate(spec.index, prefix, theta.copy()))
            send(Threshold(prefix + spec.alpha))
            if not spec.is_final:
                return
