"""Progressive in-network estimation pipeline.

Measurements stream through a chain of router+estimator nodes to the
state-estimation server; each node refines the offset parameters on a
growing data prefix and hands its result downstream.
"""

from .messages import Measurement, ParamUpdate, ProtocolError, Shutdown, Threshold
from .nodes import NodeSpec, ParamNode, PassReport, Server, ServerReport
from .topology import ExperimentTrace, Topology, run_topology

__all__ = [
    "Measurement",
    "ParamUpdate",
    "Threshold",
    "Shutdown",
    "ProtocolError",
    "NodeSpec",
    "ParamNode",
    "PassReport",
    "Server",
    "ServerReport",
    "Topology",
    "ExperimentTrace",
    "run_topology",
]
