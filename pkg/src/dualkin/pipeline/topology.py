"""Topology wiring and the experiment trace.

A topology is L parameter-estimation nodes chained in front of the state-
estimation server.  L = 0 is the baseline: the server alone optimizes on
the complete data set after the stream ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from ..estimation import OptimizerConfig
from . import transport

__all__ = ["Topology", "ExperimentTrace", "run_topology"]


@dataclass(frozen=True)
class Topology:
    """Pipeline shape and runtime mode.

    eval_cost is the logical-clock constant: seconds of logical time one
    cost-evaluation sample occupies.  hop_delay (a fixed per-hop link
    latency) applies to wall timing only; the logical clock treats links
    as ideal.
    """

    L: int
    transport: str = "inproc"       # "inproc" | "socket"
    timing: str = "logical"         # "logical" | "wall"
    alpha: int = 20
    beta1: int = 30
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    node_optimizers: tuple | None = None  # per-node overrides, length L
    node_alphas: tuple | None = None
    eval_cost: float = 1e-3
    pace_scale: float = 1.0
    hop_delay: float = 0.0
    keep_server_states: bool = True
    ports: tuple | None = None

    def __post_init__(self):
        if self.L < 0:
            raise ValueError("L must be nonnegative")
        if self.transport not in ("inproc", "socket"):
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.timing not in ("logical", "wall"):
            raise ValueError(f"unknown timing {self.timing!r}")
        for name in ("node_optimizers", "node_alphas"):
            value = getattr(self, name)
            if value is not None and len(value) != self.L:
                raise ValueError(f"{name} must list one entry per node")

    def optimizer_for(self, index: int) -> OptimizerConfig:
        if self.node_optimizers is not None:
            return self.node_optimizers[index - 1]
        return self.optimizer

    def alpha_for(self, index: int) -> int:
        if self.node_alphas is not None:
            return self.node_alphas[index - 1]
        return self.alpha


@dataclass
class ExperimentTrace:
    L: int
    timing: str
    transport: str
    node_reports: list      # per node 1..L, list of PassReport
    server: object          # ServerReport
    generated: int
    theta_star: tuple
    converged: bool
    cap_hit: bool
    T: float
    total_work: int
    update_events: list     # (stamp, node, theta tuple)
    final_S: float

    @property
    def node_iterations(self) -> list:
        """Total optimization iterations per node (server last for L = 0)."""
        if self.L == 0:
            return [self.server.pass_report.iterations] if self.server.pass_report else []
        return [sum(r.iterations for r in reports) for reports in self.node_reports]


def _assign_logical_stamps(node_reports, batch, eval_cost):
    """Cascade arithmetic: a pass starts once its predecessor pass finished
    and its data prefix has been generated; it lasts eval_cost * work."""
    clock = 0.0
    out = []
    for reports in node_reports:
        stamped = []
        for r in reports:
            start = max(clock, float(batch.t[r.prefix - 1])) if r.prefix else clock
            end = start + eval_cost * r.work
            clock = end
            stamped.append(dc_replace(r, start=start, end=end))
        out.append(stamped)
    return out


def run_topology(topo: Topology, config, batch) -> ExperimentTrace:
    """Drive a full pipeline run over one measurement batch."""
    if topo.timing == "logical" and topo.transport == "inproc":
        node_reports, server_report, t_first_wall = transport.run_inproc_logical(
            config, topo, batch
        )
    elif topo.transport == "socket":
        node_reports, server_report, t_first_wall = transport.run_socket(config, topo, batch)
    else:
        node_reports, server_report, t_first_wall = transport.run_inproc_wall(
            config, topo, batch
        )

    if topo.timing == "logical":
        node_reports = _assign_logical_stamps(node_reports, batch, topo.eval_cost)

    passes = [r for reports in node_reports for r in reports]
    if topo.L == 0 and server_report.pass_report is not None:
        passes = [server_report.pass_report]
    total_work = sum(r.work for r in passes)

    theta0 = tuple(np.asarray(config.theta0, dtype=float))
    final_pass = None
    if topo.L == 0:
        final_pass = server_report.pass_report
    elif node_reports and node_reports[-1]:
        # converged only if the last node consumed the whole stream
        last = node_reports[-1][-1]
        final_pass = last if last.prefix == len(batch) else None

    converged = final_pass is not None and final_pass.criterion == "step_size"
    cap_hit = final_pass is not None and final_pass.criterion == "iteration_cap"
    theta_star = final_pass.theta if final_pass is not None else theta0
    final_S = final_pass.cost_last if final_pass is not None else float("nan")

    t_first = float(batch.t[0]) if len(batch) else 0.0
    if final_pass is None:
        T = float("nan")
    elif topo.timing == "logical":
        T = final_pass.end - t_first
    else:
        T = final_pass.end - (t_first_wall if t_first_wall is not None else final_pass.start)

    origin = t_first if topo.timing == "logical" else (t_first_wall or 0.0)
    update_events = [(r.end - origin, r.node, r.theta) for r in passes]

    return ExperimentTrace(
        L=topo.L,
        timing=topo.timing,
        transport=topo.transport,
        node_reports=node_reports,
        server=server_report,
        generated=len(batch),
        theta_star=theta_star,
        converged=converged,
        cap_hit=cap_hit,
        T=T,
        total_work=total_work,
        update_events=update_events,
        final_S=final_S,
    )
