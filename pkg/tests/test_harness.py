import json
import math
from dataclasses import replace

import numpy as np
import pytest

from dualkin.harness import (
    CSV_HEADER,
    ExperimentConfig,
    MetricsRow,
    emit_results,
    parse_results,
    quintic,
    run_sweep,
    spearman,
    summarize,
    synthesize_dataset,
    trial_seed,
)
from oracles import rotation_from_axis_angle


def test_quintic_boundary_conditions():
    q0 = np.array([0.0, 0.0])
    qe = np.array([np.pi / 4, np.pi / 2])
    for t, expected in ((0.0, q0), (1.0, qe), (2.5, qe)):
        q, qd, qdd = quintic(q0, qe, 1.0, t)
        assert np.allclose(q, expected, atol=1e-12)
        assert np.allclose(qd, 0, atol=1e-12)
        assert np.allclose(qdd, 0, atol=1e-12)


def test_quintic_midpoint():
    q0 = np.array([0.0, 0.0])
    qe = np.array([np.pi / 4, np.pi / 2])
    q, _, _ = quintic(q0, qe, 1.0, 0.5)
    assert np.allclose(q, 0.5 * (q0 + qe), atol=1e-12)


def test_quintic_velocity_integrates_to_displacement():
    q0 = np.array([0.2, -0.4])
    qe = np.array([1.1, 0.9])
    ts = np.linspace(0.0, 1.0, 2001)
    qdots = np.array([quintic(q0, qe, 1.0, t)[1] for t in ts])
    integral = np.trapezoid(qdots, ts, axis=0)
    assert np.allclose(integral, qe - q0, atol=1e-6)


def test_quintic_rejects_bad_horizon():
    with pytest.raises(ValueError):
        quintic([0.0], [1.0], 0.0, 0.1)


def test_dataset_shape(config):
    batch = synthesize_dataset(replace(config, duration=1.5), seed=1)
    assert batch.y.shape == (150, 12)
    assert batch.t[0] == pytest.approx(0.01)
    assert batch.t[-1] == pytest.approx(1.5)
    assert synthesize_dataset(config, seed=1).y.shape == (300, 12)


def test_dataset_static_segment_constant_without_noise(config):
    quiet = replace(config, sigma2_accel=0.0, sigma2_gyro_deg=0.0)
    batch = synthesize_dataset(quiet, seed=2)
    static = batch.y[105:]
    assert np.allclose(static, static[0])


def test_dataset_static_segment_gravity_projection(config):
    batch = synthesize_dataset(config, seed=3)
    static = batch.y[101:]  # t > 1.0: final pose, zero rates
    n = static.shape[0]
    R_s = rotation_from_axis_angle(np.asarray(config.imu_phi))
    base_g = np.array([0.0, 0.0, 9.80665])
    q = np.asarray(config.qe)
    for j, cum in enumerate(np.cumsum(q)):
        R_body = rotation_from_axis_angle(cum * np.asarray(config.joint_axis))
        expected = (R_body @ R_s).T @ base_g
        mean = static[:, 6 * j : 6 * j + 3].mean(axis=0)
        band = 3 * math.sqrt(config.sigma2_accel) / math.sqrt(n)
        assert np.all(np.abs(mean - expected) <= band)
        gyro_mean = static[:, 6 * j + 3 : 6 * j + 6].mean(axis=0)
        assert np.all(np.abs(gyro_mean) <= 3 * math.sqrt(config.sigma2_gyro) / math.sqrt(n))


TABLE1_ECHO = {
    "n_joints": 2,
    "num_links": 2,
    "num_imus": 2,
    "dt": 0.01,
    "eps_fd": 1e-6,
    "lam": 1e-4,
    "sigma2_accel": 0.005,
    "sigma2_gyro_deg": 0.002,
    "sigma2_jerk": 0.5,
    "theta_true": (0.05, 0.0, 0.03),
    "theta0": (0.0, 0.0, 0.0),
    "sigma0_scale": 1.0,
    "q0": (0.0, 0.0),
    "qdot0": (0.0, 0.0),
    "qddot0": (0.0, 0.0),
    "qe": (math.pi / 4, math.pi / 2),
    "base_offset": (0.0, 0.0, 0.0),
    "link_offset": (0.2, 0.0, 0.0),
    "joint_axis": (0.0, 1.0, 0.0),
    "imu_phi": (0.0, math.pi, 0.0),
    "imu_r": (0.1, 0.0, 0.05),
    "t_e": 1.0,
    "o_min": 2e-4,
    "odelta_min": 30.0,
}


def test_config_echo_reproduces_evaluation_setting(config):
    echo = config.echo()
    for key, value in TABLE1_ECHO.items():
        assert echo[key] == value, key
    assert echo["sigma2_gyro_rad"] == 0.002 * (math.pi / 180.0) ** 2


def test_config_file_round_trip(tmp_path, config):
    path = tmp_path / "config.json"
    with open(path, "w") as fh:
        json.dump(config.echo(), fh)
    loaded = ExperimentConfig.from_file(path)
    assert loaded == config


def test_config_file_rejects_unknown_fields(tmp_path):
    path = tmp_path / "config.json"
    path.write_text('{"no_such_field": 1}')
    with pytest.raises(ValueError):
        ExperimentConfig.from_file(path)


def _rows():
    return [
        MetricsRow(
            L=1,
            trial=0,
            seed=7,
            T=1.25,
            e=0.002,
            final_S=-11000.5,
            node_iters=(27, 3),
            theta_star=(0.0482, -1e-11, 0.0278),
            e_timeline=((0.3, 0.006), (1.2, 0.0)),
            converged=True,
        ),
        MetricsRow(
            L=0,
            trial=1,
            seed=8,
            T=2.27,
            e=0.003,
            final_S=-11200.25,
            node_iters=(13,),
            theta_star=(0.05, 0.0, 0.028),
            e_timeline=((2.27, 0.0),),
            converged=True,
        ),
    ]


def test_emit_header_only_for_empty(tmp_path):
    path = tmp_path / "empty.csv"
    emit_results([], path)
    assert path.read_text() == CSV_HEADER + "\n"
    assert parse_results(path) == []


def test_emit_parse_round_trip(tmp_path):
    path = tmp_path / "rows.csv"
    emit_results(_rows(), path)
    parsed = parse_results(path)
    assert parsed == sorted(_rows(), key=lambda r: (r.L, r.trial))


def test_summary_matches_hand_computation():
    rows = _rows()
    summary = summarize(rows)
    assert summary["0"]["mean_e"] == pytest.approx(0.003)
    assert summary["1"]["mean_T"] == pytest.approx(1.25)
    assert summary["0"]["trials"] == 1


def test_sweep_determinism_and_improvement(config):
    cfg = replace(config, seed=5)
    rows1, _ = run_sweep(cfg, [0, 1], trials=1)
    rows2, _ = run_sweep(cfg, [0, 1], trials=1)
    assert rows1 == rows2
    prior_err = float(np.linalg.norm(np.asarray(cfg.theta_true)))
    for row in rows1:
        assert row.converged
        assert row.e < prior_err


def test_trial_seed_shared_across_L(config):
    assert trial_seed(config.seed, 3) == trial_seed(config.seed, 3)
    assert trial_seed(config.seed, 3) != trial_seed(config.seed, 4)


def test_timeline_mostly_nonincreasing(config):
    # suite-level stochastic invariant; rises below the cross-topology
    # accuracy floor (10 * o_min, the parity tolerance) are not meaningful
    rows, _ = run_sweep(replace(config, seed=11), [2, 4], trials=3)
    monotone = strict = 0
    for row in rows:
        dists = [d for _, d in row.e_timeline]
        pairs = list(zip(dists, dists[1:]))
        monotone += all(b <= a + 10 * config.o_min for a, b in pairs)
        strict += all(b <= a for a, b in pairs)
    frac = monotone / len(rows)
    print(f"timeline nonincreasing in {frac:.0%} of trials "
          f"(strict: {strict / len(rows):.0%})")
    assert frac >= 0.9


def test_spearman_reference_values():
    assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    assert spearman([1, 2, 3, 4], [1, 2, 3, 4]) == pytest.approx(1.0)
    assert abs(spearman([1, 2, 3, 4], [2, 1, 4, 3])) < 1.0


def test_cli_simulate_and_verify(tmp_path):
    from dualkin.cli import main

    out = tmp_path / "sim.json"
    rc = main(["simulate", "--nodes", "1", "--seed", "9", "--out", str(out)])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert payload["row"]["L"] == 1
    assert payload["config"]["seed"] == 9
    rc = main(["verify", "--suite", "estimator"])
    assert rc == 0


def test_cli_sweep_writes_outputs(tmp_path):
    from dualkin.cli import main

    out = tmp_path / "sweep.csv"
    rc = main(["sweep", "--nodes", "0-1", "--trials", "1", "--seed", "3", "--out", str(out)])
    assert rc == 0
    rows = parse_results(out)
    assert {r.L for r in rows} == {0, 1}
    summary = json.loads((tmp_path / "sweep.summary.json").read_text())
    assert "config" in summary and "summary" in summary
