import numpy as np
import pytest

from dualkin.kinematics import (
    GeneralizedState,
    ImuMounting,
    KinematicChain,
    forward_kinematics,
    forward_rotational,
    forward_translational,
    rodrigues,
    skew,
)
from oracles import compose_rotations, rotation_from_axis_angle


def test_skew_matches_definition():
    expected = np.array([[0, -3, 2], [3, 0, -1], [-2, 1, 0]], dtype=float)
    assert np.array_equal(skew([1, 2, 3]), expected)


def test_skew_zero():
    assert np.array_equal(skew([0, 0, 0]), np.zeros((3, 3)))


def test_skew_cross_product():
    a = np.array([0.3, -1.0, 2.0])
    assert np.allclose(skew(a) @ a, 0.0)
    b = np.array([0.7, 0.2, -0.5])
    assert np.allclose(skew(a) @ b, np.cross(a, b))


def test_rodrigues_identity_at_zero():
    assert np.array_equal(rodrigues([0.0, 0.0, 0.0]), np.eye(3))


def test_rodrigues_quarter_turn_about_y():
    expected = np.array([[0, 0, 1], [0, 1, 0], [-1, 0, 0]], dtype=float)
    assert np.allclose(rodrigues([0, np.pi / 2, 0]), expected, atol=1e-15)


def test_rodrigues_matches_quaternion_oracle():
    phi = np.array([0.3, -0.2, 0.9])
    assert np.allclose(rodrigues(phi), rotation_from_axis_angle(phi), atol=1e-12)


@pytest.mark.parametrize("scale", [1e-9, 1e-7, 5e-7, 1e-6, 1e-4, 0.5, 2.0])
def test_rodrigues_orthonormal(scale):
    rng = np.random.default_rng(int(scale * 1e10) % 2**31)
    for _ in range(25):
        R = rodrigues(scale * rng.standard_normal(3))
        assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-12
        assert abs(np.linalg.det(R) - 1.0) < 1e-12


def test_rodrigues_continuous_across_series_switch():
    rng = np.random.default_rng(3)
    for _ in range(50):
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        phi = u * 1e-6  # right at the switch
        delta = 1e-7 * rng.standard_normal(3)
        diff = np.linalg.norm(rodrigues(phi) - rodrigues(phi + delta), ord="fro")
        assert diff <= 2.0 * np.linalg.norm(delta)


def test_chain_validation():
    with pytest.raises(ValueError):
        KinematicChain(axes=[[0, 2, 0]], offsets=[[0.1, 0, 0]])  # non-unit axis
    with pytest.raises(ValueError):
        KinematicChain(axes=[[0, 1, 0]], offsets=[[0.1, 0, 0]], base_R=2 * np.eye(3))
    with pytest.raises(ValueError):
        KinematicChain(
            axes=[[0, 1, 0]],
            offsets=[[0.1, 0, 0]],
            mountings=(ImuMounting(5, [0, 0, 0], [0, 0, 0]),),
        )


def test_forward_rotational_rest_configuration(arm_chain, config):
    n = arm_chain.n
    R, omega, omegadot = forward_rotational(arm_chain, GeneralizedState(np.zeros(n), np.zeros(n), np.zeros(n)))
    for i in range(arm_chain.num_bodies):
        assert np.allclose(R[i], arm_chain.base_R)
        assert np.allclose(omega[i], 0)
        assert np.allclose(omegadot[i], 0)


def test_forward_rotational_single_joint_rate():
    chain = KinematicChain(axes=[[0, 1, 0]], offsets=[[0.2, 0, 0]])
    R, omega, _ = forward_rotational(chain, GeneralizedState([0.0], [2.0], [0.0]))
    assert np.allclose(omega[1], [0, 2, 0])


def test_forward_rotational_composition_oracle(arm_chain):
    q = np.array([np.pi / 4, np.pi / 2])
    state = GeneralizedState(q, np.zeros(2), np.zeros(2))
    R, _, _ = forward_rotational(arm_chain, state)
    expected = compose_rotations(arm_chain.axes[0] * q[0], arm_chain.axes[1] * q[1])
    assert np.allclose(R[2], expected, atol=1e-12)


def test_forward_rotational_dimension_mismatch(arm_chain):
    with pytest.raises(ValueError):
        forward_rotational(arm_chain, GeneralizedState([0.0], [0.0], [0.0]))


def test_forward_translational_static_chain():
    chain = KinematicChain(axes=[[0, 1, 0]], offsets=[[0.2, 0, 0]])
    state = GeneralizedState([0.0], [0.0], [0.0])
    R, omega, omegadot = forward_rotational(chain, state)
    r, rdot, rddot = forward_translational(chain, np.zeros(0), R, omega, omegadot)
    assert np.allclose(r[1], [0.2, 0, 0])
    assert np.allclose(rdot[1], 0)
    assert np.allclose(rddot[1], 0)


def test_forward_translational_single_rotating_link():
    # one joint spinning at qd: the origin downstream of it moves with
    # R (w x r); the joint's own origin stays put
    chain = KinematicChain(axes=[[0, 1, 0], [0, 1, 0]], offsets=[[0.2, 0, 0], [0.15, 0, 0]])
    qd = 1.7
    state = GeneralizedState([0.3, 0.0], [qd, 0.0], [0.0, 0.0])
    R, omega, omegadot = forward_rotational(chain, state)
    r, rdot, _ = forward_translational(chain, np.zeros(3), R, omega, omegadot)
    assert np.allclose(rdot[1], 0.0)
    w1 = qd * np.array([0, 1, 0])
    expected = R[1] @ np.cross(w1, [0.15, 0, 0])
    assert np.allclose(rdot[2], expected, atol=1e-14)


def test_acceleration_matches_velocity_derivative(arm_chain, config):
    theta = np.asarray(config.theta_true)
    traj = config.trajectory()
    h = 1e-5
    t = 0.5
    motions = {
        dt: forward_kinematics(arm_chain, theta, traj.state(t + dt)) for dt in (-h, 0.0, h)
    }
    rddot_fd = (motions[h].rdot[2] - motions[-h].rdot[2]) / (2 * h)
    rel = np.linalg.norm(rddot_fd - motions[0.0].rddot[2]) / np.linalg.norm(motions[0.0].rddot[2])
    assert rel < 1e-5


def test_velocity_consistency_along_trajectory(arm_chain, config):
    theta = np.asarray(config.theta_true)
    traj = config.trajectory()
    h = 1e-5
    for t in (0.15, 0.42, 0.77):
        mp = forward_kinematics(arm_chain, theta, traj.state(t + h))
        mm = forward_kinematics(arm_chain, theta, traj.state(t - h))
        m0 = forward_kinematics(arm_chain, theta, traj.state(t))
        for i in range(arm_chain.num_bodies):
            rdot_fd = (mp.r[i] - mm.r[i]) / (2 * h)
            wdot_fd = (mp.omega[i] - mm.omega[i]) / (2 * h)
            assert np.linalg.norm(rdot_fd - m0.rdot[i]) <= 1e-5 * max(1.0, np.linalg.norm(m0.rdot[i]))
            assert np.linalg.norm(wdot_fd - m0.omegadot[i]) <= 1e-5 * max(1.0, np.linalg.norm(m0.omegadot[i]))


def test_positions_affine_in_theta(general_chain):
    rng = np.random.default_rng(8)
    state = GeneralizedState(rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(3))
    for _ in range(10):
        ta = 0.1 * rng.standard_normal(6)
        tb = 0.1 * rng.standard_normal(6)
        lam = rng.random()
        mixed = forward_kinematics(general_chain, lam * ta + (1 - lam) * tb, state)
        ra = forward_kinematics(general_chain, ta, state).r
        rb = forward_kinematics(general_chain, tb, state).r
        assert np.allclose(mixed.r, lam * ra + (1 - lam) * rb, atol=1e-12)


def test_body_rotations_orthonormal(general_chain):
    rng = np.random.default_rng(9)
    state = GeneralizedState(rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(3))
    motion = forward_kinematics(general_chain, np.zeros(6), state)
    for i in range(general_chain.num_bodies):
        assert np.max(np.abs(motion.R[i].T @ motion.R[i] - np.eye(3))) < 1e-10
        assert abs(np.linalg.det(motion.R[i]) - 1) < 1e-10


def test_stacked_round_trip():
    state = GeneralizedState([0.1, 0.2], [0.3, 0.4], [0.5, 0.6])
    again = GeneralizedState.from_stacked(state.stacked())
    assert np.array_equal(again.q, state.q)
    assert np.array_equal(again.qddot, state.qddot)
