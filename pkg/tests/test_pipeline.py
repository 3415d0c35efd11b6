from dataclasses import replace

import numpy as np
import pytest

from dualkin.estimation import optimize_on_node
from dualkin.filtering import run_filter
from dualkin.harness import ExperimentConfig, run_trial, synthesize_dataset
from dualkin.pipeline.messages import (
    Measurement,
    ParamUpdate,
    ProtocolError,
    Shutdown,
    Threshold,
)
from dualkin.pipeline.nodes import NodeSpec, ParamNode, Server
from dualkin.pipeline.topology import Topology, run_topology


@pytest.fixture(scope="module")
def setup():
    config = ExperimentConfig()
    batch = synthesize_dataset(config, seed=33)
    return config, config.problem(), batch


def _spec(config, index=1, total=1, beta=None, theta=None, alpha=20):
    return NodeSpec(
        index=index,
        total=total,
        alpha=alpha,
        optimizer=config.optimizer(),
        eval_cost=config.logical_eval_cost,
        beta=beta,
        theta_init=theta,
    )


def _feed(node, batch, upto=None):
    outs = []
    for k in range(upto if upto is not None else len(batch)):
        outs += node.handle(Measurement(k=k + 1, t=float(batch.t[k]), y=batch.y[k]))
    return outs


def test_unreachable_threshold_never_optimizes(setup):
    config, problem, batch = setup
    node = ParamNode(_spec(config, beta=len(batch) + 50, theta=np.zeros(3)), problem)
    outs = _feed(node, batch)
    outs += node.handle(Shutdown())
    forwarded = [m for m in outs if isinstance(m, Measurement)]
    updates = [m for m in outs if isinstance(m, ParamUpdate)]
    assert len(forwarded) == len(batch)
    assert updates == []
    assert node.reports == []


def test_threshold_propagation_arithmetic(setup):
    config, problem, batch = setup
    node = ParamNode(_spec(config, beta=120, theta=np.zeros(3)), problem)
    outs = _feed(node, batch)
    outs += node.handle(Shutdown())
    thresholds = [m for m in outs if isinstance(m, Threshold)]
    assert node.reports[0].prefix == 120
    assert thresholds[0].beta == 140  # K1 + alpha


def test_out_of_order_measurement_rejected(setup):
    config, problem, batch = setup
    node = ParamNode(_spec(config, beta=10, theta=np.zeros(3)), problem)
    node.handle(Measurement(k=5, t=0.05, y=batch.y[0]))
    with pytest.raises(ProtocolError):
        node.handle(Measurement(k=5, t=0.06, y=batch.y[1]))


def test_node_forwards_param_updates(setup):
    config, problem, batch = setup
    node = ParamNode(_spec(config, index=2, total=3), problem)
    upd = ParamUpdate(source=1, k_used=30, theta=np.array([0.01, 0.0, 0.02]))
    outs = node.handle(upd)
    assert outs == [upd]


def test_wrong_theta_length_rejected(setup):
    config, problem, batch = setup
    node = ParamNode(_spec(config, index=2, total=3), problem)
    with pytest.raises(ProtocolError):
        node.handle(ParamUpdate(source=1, k_used=30, theta=np.array([0.01, 0.0])))


def test_single_node_matches_direct_optimization(setup):
    """Pipeline node L=1 equals optimize_on_node replayed on the same prefixes."""
    config, problem, batch = setup
    topo = Topology(L=1, optimizer=config.optimizer(), eval_cost=config.logical_eval_cost)
    trace = run_topology(topo, config, batch)
    theta = problem.prior.theta0.copy()
    for report in trace.node_reports[0]:
        theta, _ = optimize_on_node(
            problem, theta, batch.prefix(report.prefix), config.optimizer(), final_node=True
        )
        assert np.allclose(np.asarray(report.theta), theta, atol=1e-12)
    assert np.allclose(np.asarray(trace.theta_star), theta, atol=1e-12)


def test_server_without_updates_equals_plain_filter(setup):
    config, problem, batch = setup
    server = Server(problem, np.zeros(3), config.optimizer(), num_nodes=3, eval_cost=1e-4)
    for k in range(len(batch)):
        server.handle(Measurement(k=k + 1, t=float(batch.t[k]), y=batch.y[k]))
    server.handle(Shutdown())
    report = server.report()
    beliefs, _ = run_filter(problem.model, np.zeros(3), batch, problem.x0, problem.P0, problem.q_eps)
    expected = np.array([b.xhat for b in beliefs[1:]])
    assert np.allclose(report.xhat, expected, atol=1e-12)
    assert report.pass_report is None  # the server never optimizes when L > 0


def test_server_swap_splits_exactly(setup):
    config, problem, batch = setup
    theta_new = np.array([0.04, 0.0, 0.025])
    server = Server(problem, np.zeros(3), config.optimizer(), num_nodes=2, eval_cost=1e-4)
    for k in range(50):
        server.handle(Measurement(k=k + 1, t=float(batch.t[k]), y=batch.y[k]))
    server.handle(ParamUpdate(source=2, k_used=50, theta=theta_new))
    for k in range(50, len(batch)):
        server.handle(Measurement(k=k + 1, t=float(batch.t[k]), y=batch.y[k]))
    server.handle(Shutdown())
    report = server.report()
    # oracle: two half-runs, the second continued from the first's posterior
    first, _ = run_filter(
        problem.model, np.zeros(3), batch.prefix(50), problem.x0, problem.P0, problem.q_eps
    )
    second, _ = run_filter(
        problem.model,
        theta_new,
        type(batch)(batch.y[50:], batch.t[50:]),
        first[-1].xhat,
        first[-1].P,
        problem.q_eps,
        t0=float(batch.t[49]),
    )
    expected = np.vstack([[b.xhat for b in first[1:]], [b.xhat for b in second[1:]]])
    assert np.allclose(report.xhat, expected, atol=1e-12)
    assert report.swaps == [(50, 2, tuple(theta_new))]


def test_baseline_server_matches_direct_optimization(setup):
    config, problem, batch = setup
    topo = Topology(L=0, optimizer=config.optimizer(), eval_cost=config.logical_eval_cost)
    trace = run_topology(topo, config, batch)
    theta_direct, rep = optimize_on_node(
        problem, np.zeros(3), batch, config.optimizer(), final_node=True
    )
    assert np.allclose(np.asarray(trace.theta_star), theta_direct, atol=1e-12)
    assert trace.node_iterations == [rep.iterations]


def test_topologies_agree_on_final_parameters(setup):
    # both runs stop when the parameter step falls to o_min, which pins the
    # iterates to within ~o_min/(lam * curvature) of the full-data optimum;
    # the accuracy-parity invariant bounds the spread at 10 * o_min (checked
    # on the 150-sample stream the bound was calibrated for)
    config, _, _ = setup
    config = replace(config, duration=1.5)
    batch = synthesize_dataset(config, seed=33)
    o_min = config.o_min
    results = {}
    for L in (0, 3):
        topo = Topology(L=L, optimizer=config.optimizer(), eval_cost=config.logical_eval_cost)
        results[L] = np.asarray(run_topology(topo, config, batch).theta_star)
    assert np.linalg.norm(results[3] - results[0]) <= 10 * o_min


def test_measurement_conservation_and_monotone_updates(setup):
    config, problem, batch = setup
    topo = Topology(L=2, optimizer=config.optimizer(), eval_cost=config.logical_eval_cost)
    trace = run_topology(topo, config, batch)
    assert trace.server.received == trace.generated == len(batch)
    stamps = [s for s, _, _ in trace.update_events]
    nodes = [n for _, n, _ in trace.update_events]
    assert all(a <= b for a, b in zip(stamps, stamps[1:]))
    assert all(a <= b for a, b in zip(nodes, nodes[1:]))


def test_prefix_property(setup):
    config, problem, batch = setup
    topo = Topology(L=3, optimizer=config.optimizer(), eval_cost=config.logical_eval_cost)
    trace = run_topology(topo, config, batch)
    first_prefixes = [reports[0].prefix for reports in trace.node_reports]
    final_prefixes = [reports[-1].prefix for reports in trace.node_reports]
    for l in range(len(first_prefixes) - 1):
        assert first_prefixes[l] <= final_prefixes[l + 1]
    assert final_prefixes[-1] == len(batch)


def test_parity_across_L_smoke(setup):
    # same 150-sample frame of reference as the equivalence bound above
    config, _, _ = setup
    config = replace(config, duration=1.5)
    batch = synthesize_dataset(config, seed=33)
    o_min = config.o_min
    base = np.asarray(
        run_topology(
            Topology(L=0, optimizer=config.optimizer(), eval_cost=config.logical_eval_cost),
            config,
            batch,
        ).theta_star
    )
    for L in (1, 2, 4, 6):
        topo = Topology(L=L, optimizer=config.optimizer(), eval_cost=config.logical_eval_cost)
        theta = np.asarray(run_topology(topo, config, batch).theta_star)
        assert np.linalg.norm(theta - base) <= 10 * o_min


def test_socket_transport_identical_rows(setup):
    config, _, _ = setup
    for L in (0, 2):
        row_in = run_trial(config, L, trial=0)
        row_so = run_trial(replace(config, transport="socket"), L, trial=0)
        assert row_in == row_so


def test_wall_mode_smoke(setup):
    config, _, _ = setup
    wall = replace(config, timing="wall", pace_scale=0.05)
    for transport in ("inproc", "socket"):
        row = run_trial(replace(wall, transport=transport), 2, trial=0)
        assert row.converged
        assert row.T > 0
        assert row.e < 0.05


def test_per_node_configuration(setup):
    config, _, batch = setup
    base_opt = config.optimizer()
    capped = type(base_opt)(
        lam=base_opt.lam, eps_fd=base_opt.eps_fd,
        o_min=base_opt.o_min, odelta_min=base_opt.odelta_min, max_iterations=2,
    )
    topo = Topology(
        L=2,
        optimizer=base_opt,
        node_optimizers=(capped, base_opt),
        node_alphas=(5, 20),
        eval_cost=config.logical_eval_cost,
    )
    trace = run_topology(topo, config, batch)
    first_node = trace.node_reports[0][0]
    assert first_node.iterations <= 2  # capped node obeys its own config
    assert trace.node_reports[1][0].prefix == first_node.prefix + 5  # its alpha
    with pytest.raises(ValueError):
        Topology(L=2, node_alphas=(5,))


def test_fixed_port_base(setup):
    config, _, _ = setup
    from dualkin.pipeline.transport import find_free_ports

    base = find_free_ports(3)[0]
    cfg = replace(config, transport="socket", port_base=base)
    row = run_trial(cfg, 1, trial=0)
    assert row.converged


def test_unconverged_topology_reports_nan(setup):
    config, problem, batch = setup
    # first node can never activate: the whole chain stalls
    topo = Topology(
        L=2, beta1=len(batch) + 10, optimizer=config.optimizer(), eval_cost=config.logical_eval_cost
    )
    trace = run_topology(topo, config, batch)
    assert not trace.converged
    assert np.isnan(trace.T)
    assert tuple(trace.theta_star) == tuple(np.zeros(3))
