"""Transport-agnostic node and server state machines (deterministic mode).

A parameter node is a router plus an estimation worker.  In logical-time
mode the node is a sequential state machine: `handle(msg)` consumes one
inbound message and returns the ordered outbound messages.  Every decision
depends only on message content and counts, never on physical timing, so
runs are reproducible across transports and schedulers.

Logical-mode pass structure: node l optimizes exactly the first beta_l
measurements once both its threshold and its predecessor's estimate are
known and that much data is buffered; the last node additionally reruns on
the complete stream when it ends, so the final accuracy is governed by the
full data set.  Logical timestamps are assembled afterwards by the
topology runner (measurement k is generated at its timestamp; a cost
evaluation over K samples occupies its node for eval_cost * K logical
seconds); wall mode (see `wall.py`) runs threads against the real clock.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..estimation import EstimationProblem, OptimizerConfig, descend, fd_gradient
from ..filtering import FilterBelief, build_transition, filter_step
from ..imu import MeasurementBatch
from .messages import Measurement, ParamUpdate, ProtocolError, Shutdown, Threshold

__all__ = ["PassReport", "NodeSpec", "ParamNode", "Server", "ServerReport"]


@dataclass(frozen=True)
class PassReport:
    """One completed optimization pass on one node.

    In logical mode start/end are filled in by the topology runner from the
    cascade arithmetic; wall mode stamps them with the monotonic clock.
    """

    node: int
    pass_index: int
    prefix: int
    start: float
    end: float
    iterations: int
    cost_evals: int
    work: int           # cost evaluations weighted by data size
    criterion: str
    o_final: float
    odelta_final: float
    theta: tuple
    cost_last: float
    wall_time: float


@dataclass(frozen=True)
class NodeSpec:
    """Static per-node configuration."""

    index: int                  # 1-based position in the chain
    total: int                  # L, number of parameter nodes
    alpha: int
    optimizer: OptimizerConfig
    eval_cost: float            # logical seconds per cost-evaluation sample
    beta: int | None = None     # activation threshold (known for node 1)
    theta_init: np.ndarray | None = None  # prior mean for node 1

    @property
    def is_final(self) -> bool:
        return self.index == self.total


class ParamNode:
    """Sequential router + estimation VNF for the deterministic modes."""

    def __init__(self, spec: NodeSpec, problem: EstimationProblem):
        self.spec = spec
        self.problem = problem
        self._t: list[float] = []
        self._y: list[np.ndarray] = []
        self._beta = spec.beta
        self._theta = None if spec.theta_init is None else np.asarray(spec.theta_init, float)
        self._last_k = 0
        self._passed = False
        self._used = 0
        self.finished = False          # final node: estimation complete
        self.reports: list[PassReport] = []
        self.done = False              # stream fully processed

    def _run_pass(self, prefix: int) -> ParamUpdate:
        spec = self.spec
        wall0 = time.monotonic()
        batch = MeasurementBatch(np.vstack(self._y[:prefix]), np.asarray(self._t[:prefix]))

        def gradient_fn(theta):
            return fd_gradient(self.problem, theta, batch, spec.optimizer)

        theta, rep = descend(
            gradient_fn, self._theta, prefix, spec.optimizer, final_node=spec.is_final
        )
        self._theta = theta
        self._passed = True
        self._used = prefix
        self.reports.append(
            PassReport(
                node=spec.index,
                pass_index=len(self.reports),
                prefix=prefix,
                start=float("nan"),
                end=float("nan"),
                iterations=rep.iterations,
                cost_evals=rep.cost_evals,
                work=rep.cost_evals * prefix,
                criterion=rep.criterion,
                o_final=rep.o_final,
                odelta_final=rep.odelta_final,
                theta=tuple(theta),
                cost_last=rep.cost_last,
                wall_time=time.monotonic() - wall0,
            )
        )
        return ParamUpdate(spec.index, prefix, theta.copy())

    def _maybe_first_pass(self) -> list:
        if (
            self._passed
            or self._beta is None
            or self._theta is None
            or len(self._t) < self._beta
        ):
            return []
        update = self._run_pass(self._beta)
        return [update, Threshold(self._used + self.spec.alpha)]

    def handle(self, msg) -> list:
        if self.done:
            raise ProtocolError("message after shutdown")
        if isinstance(msg, Measurement):
            if msg.k <= self._last_k:
                raise ProtocolError(
                    f"out-of-order measurement {msg.k} after {self._last_k} at node {self.spec.index}"
                )
            self._last_k = msg.k
            self._t.append(msg.t)
            self._y.append(msg.y)
            return [msg] + self._maybe_first_pass()
        if isinstance(msg, ParamUpdate):
            if msg.theta.shape != (self.problem.dim,):
                raise ProtocolError(
                    f"parameter update carries {msg.theta.shape[0]} values, expected {self.problem.dim}"
                )
            if not self._passed:
                self._theta = msg.theta.copy()
            return [msg] + self._maybe_first_pass()
        if isinstance(msg, Threshold):
            self._beta = msg.beta
            return self._maybe_first_pass()
        if isinstance(msg, Shutdown):
            out = self._maybe_first_pass()
            if self.spec.is_final and self._passed and self._used < len(self._t):
                # the stream is complete: refine on the entire data set
                out.append(self._run_pass(len(self._t)))
            if self.spec.is_final and self._passed and self._used == len(self._t):
                self.finished = True
            out.append(msg)
            self.done = True
            return out
        raise ProtocolError(f"unknown message {msg!r}")


@dataclass
class ServerReport:
    received: int
    swaps: list          # (after_step, source, theta tuple)
    xhat: np.ndarray | None
    pass_report: PassReport | None  # the L=0 baseline optimization
    theta_final: tuple | None


class Server:
    """State estimator at the pipeline sink.

    Applies one filter step per measurement with the most recent parameters;
    with no parameter nodes (L = 0) it runs the whole batch optimization
    itself once the stream ends.
    """

    def __init__(
        self,
        problem: EstimationProblem,
        theta0,
        optimizer: OptimizerConfig,
        num_nodes: int,
        eval_cost: float,
        keep_states: bool = True,
        timing: str = "logical",
    ):
        self.problem = problem
        self.theta = np.asarray(theta0, dtype=float).copy()
        self.optimizer = optimizer
        self.num_nodes = num_nodes
        self.eval_cost = eval_cost
        self.keep_states = keep_states
        self.timing = timing
        self._belief = FilterBelief(xhat=problem.x0.copy(), P=problem.P0.copy())
        self._t_prev = problem.t0
        self._t: list[float] = []
        self._y: list[np.ndarray] = []
        self._xhat: list[np.ndarray] = []
        self._last_k = 0
        self.swaps: list = []
        self.pass_report: PassReport | None = None
        self.done = False

    def handle(self, msg) -> list:
        if self.done:
            raise ProtocolError("message after shutdown")
        if isinstance(msg, Measurement):
            if msg.k <= self._last_k:
                raise ProtocolError(f"out-of-order measurement {msg.k} at server")
            self._last_k = msg.k
            n = self.problem.x0.shape[0] // 3
            transition = build_transition(n, msg.t - self._t_prev, self.problem.q_eps)
            self._belief, _ = filter_step(
                self._belief, msg.y, self.theta, self.problem.model, transition
            )
            self._t_prev = msg.t
            self._t.append(msg.t)
            self._y.append(msg.y)
            if self.keep_states:
                self._xhat.append(self._belief.xhat.copy())
            return []
        if isinstance(msg, ParamUpdate):
            if msg.theta.shape != (self.problem.dim,):
                raise ProtocolError(
                    f"parameter update carries {msg.theta.shape[0]} values, expected {self.problem.dim}"
                )
            self.theta = msg.theta.copy()
            self.swaps.append((len(self._t), msg.source, tuple(msg.theta)))
            return []
        if isinstance(msg, Threshold):
            return []
        if isinstance(msg, Shutdown):
            if self.num_nodes == 0 and self._t:
                self._run_baseline()
            self.done = True
            return []
        raise ProtocolError(f"unknown message {msg!r}")

    def _run_baseline(self):
        wall0 = time.monotonic()
        batch = MeasurementBatch(np.vstack(self._y), np.asarray(self._t))

        def gradient_fn(theta):
            return fd_gradient(self.problem, theta, batch, self.optimizer)

        theta, rep = descend(
            gradient_fn, self.theta, len(batch), self.optimizer, final_node=True
        )
        self.theta = theta
        work = rep.cost_evals * len(batch)
        if self.timing == "wall":
            start, end = wall0, time.monotonic()
        else:
            start = self._t[-1]
            end = start + self.eval_cost * work
        self.pass_report = PassReport(
            node=0,
            pass_index=0,
            prefix=len(batch),
            start=start,
            end=end,
            iterations=rep.iterations,
            cost_evals=rep.cost_evals,
            work=work,
            criterion=rep.criterion,
            o_final=rep.o_final,
            odelta_final=rep.odelta_final,
            theta=tuple(theta),
            cost_last=rep.cost_last,
            wall_time=time.monotonic() - wall0,
        )

    def report(self) -> ServerReport:
        return ServerReport(
            received=len(self._t),
            swaps=list(self.swaps),
            xhat=np.array(self._xhat) if self.keep_states and self._xhat else None,
            pass_report=self.pass_report,
            theta_final=tuple(self.theta),
        )
