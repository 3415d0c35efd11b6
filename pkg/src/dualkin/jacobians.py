"""Analytic measurement Jacobian H = dy/dx via recursive propagation.

Eight 3xn sensitivity matrices are carried along the chain, one set per
body, obtained by differentiating the forward recursions with respect to
the stacked state x = [q; qd; qdd]:

    pos_q       dr/dq   (== d(rdot)/d(qd) == d(rddot)/d(qdd))
    vel_q       d(rdot)/dq
    acc_qd      d(rddot)/d(qd)
    acc_q       d(rddot)/dq
    ang_vel_qd  dw/d(qd) (== d(wdot)/d(qdd))
    ang_vel_q   dw/dq
    ang_acc_qd  d(wdot)/d(qd)
    ang_acc_q   d(wdot)/dq

The base body's set is identically zero (its motion is prescribed).  Every
recursion below is derived from the chain equations by the product and
chain rules, and is validated entry-wise against central finite
differences of the measurement function; that check is the module's
governing property.  Beware when modifying the angular recursions: several
plausible-looking variants (for example using the predecessor's rate in
the axis coupling term, or double-counting the frame-rotation of a carried
matrix) are exactly invisible on planar chains with parallel joint axes,
because every angular rate stays parallel to the axis there.  Only the
finite-difference check on a general three-axis chain with a moving base
discriminates; keep that test authoritative.

A key identity used throughout: the columns of ang_vel_qd are the partial
rotation vectors psi_m with dR_i/dq_m = R_i * skew(psi_m), which gives
d(R_i p)/dq = -R_i skew(p) ang_vel_qd for any body-fixed p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import (
    BodyMotion,
    GeneralizedState,
    KinematicChain,
    effective_offsets,
    forward_kinematics,
    rodrigues,
    skew,
)

__all__ = ["BodyJacobians", "propagate_body_jacobians", "sensor_jacobians", "assemble_H"]


@dataclass(frozen=True)
class BodyJacobians:
    """The eight 3xn sensitivity matrices of one body (or sensor point)."""

    pos_q: np.ndarray
    vel_q: np.ndarray
    acc_qd: np.ndarray
    acc_q: np.ndarray
    ang_vel_qd: np.ndarray
    ang_vel_q: np.ndarray
    ang_acc_qd: np.ndarray
    ang_acc_q: np.ndarray

    @classmethod
    def zero(cls, n: int) -> "BodyJacobians":
        z = lambda: np.zeros((3, n))
        return cls(z(), z(), z(), z(), z(), z(), z(), z())


def _translational_step(prev: BodyJacobians, C, w, wd, p, ang_prev):
    """Shift the translational set across a rigid offset p from a body.

    C, w, wd are the carrying body's rotation and angular rates; ang_prev
    its angular set.  Shared by the body recursion (p = link offset) and
    the sensor transfer (p = lever arm).
    """
    px = skew(p)
    u1x = skew(np.cross(w, p))
    mix = u1x + skew(w) @ px
    cen = skew(np.cross(w, np.cross(w, p)) + np.cross(wd, p))
    pos_q = prev.pos_q - C @ (px @ ang_prev.ang_vel_qd)
    vel_q = prev.vel_q - C @ (u1x @ ang_prev.ang_vel_qd + px @ ang_prev.ang_vel_q)
    acc_qd = prev.acc_qd - C @ (mix @ ang_prev.ang_vel_qd + px @ ang_prev.ang_acc_qd)
    acc_q = prev.acc_q - C @ (
        cen @ ang_prev.ang_vel_qd + mix @ ang_prev.ang_vel_q + px @ ang_prev.ang_acc_q
    )
    return pos_q, vel_q, acc_qd, acc_q


def propagate_body_jacobians(
    chain: KinematicChain, theta, state: GeneralizedState, motion: BodyMotion
) -> list[BodyJacobians]:
    """Sensitivity sets for bodies 0..n, body 0 identically zero."""
    n = chain.n
    if state.n != n:
        raise ValueError("state dimension does not match chain")
    rho = effective_offsets(chain, theta)
    out = [BodyJacobians.zero(n)]
    for i in range(n):
        b = i + 1
        axis = chain.axes[i]
        A = rodrigues(axis * state.q[i])
        qd = state.qdot[i]
        w_b = motion.omega[b]
        wd_b = motion.omegadot[b]
        prev = out[i]
        nx = skew(axis)

        ang_vel_qd = A.T @ prev.ang_vel_qd
        ang_vel_qd[:, i] += axis
        ang_vel_q = A.T @ prev.ang_vel_q
        ang_vel_q[:, i] += np.cross(w_b, axis)
        ang_acc_qd = A.T @ prev.ang_acc_qd - qd * (nx @ ang_vel_qd)
        ang_acc_qd[:, i] += np.cross(w_b, axis)
        ang_acc_q = A.T @ prev.ang_acc_q - qd * (nx @ ang_vel_q)
        ang_acc_q[:, i] += np.cross(wd_b - qd * np.cross(w_b, axis), axis)

        pos_q, vel_q, acc_qd, acc_q = _translational_step(
            prev, motion.R[i], motion.omega[i], motion.omegadot[i], rho[i], prev
        )
        out.append(
            BodyJacobians(
                pos_q=pos_q,
                vel_q=vel_q,
                acc_qd=acc_qd,
                acc_q=acc_q,
                ang_vel_qd=ang_vel_qd,
                ang_vel_q=ang_vel_q,
                ang_acc_qd=ang_acc_qd,
                ang_acc_q=ang_acc_q,
            )
        )
    return out


def sensor_jacobians(
    chain: KinematicChain, mounting, body_jacobians: list[BodyJacobians], motion: BodyMotion
) -> BodyJacobians:
    """Transfer a body's sensitivity set to its rigidly mounted sensor point.

    The mounting rotation is constant, so the angular set just rotates; the
    translational set shifts across the lever arm exactly like a body step.
    """
    i = mounting.body_index
    if not 0 <= i < len(body_jacobians):
        raise ValueError(f"mounting references body {i} outside the chain")
    body = body_jacobians[i]
    D = mounting.rotation()
    pos_q, vel_q, acc_qd, acc_q = _translational_step(
        body, motion.R[i], motion.omega[i], motion.omegadot[i], mounting.r_s, body
    )
    return BodyJacobians(
        pos_q=pos_q,
        vel_q=vel_q,
        acc_qd=acc_qd,
        acc_q=acc_q,
        ang_vel_qd=D.T @ body.ang_vel_qd,
        ang_vel_q=D.T @ body.ang_vel_q,
        ang_acc_qd=D.T @ body.ang_acc_qd,
        ang_acc_q=D.T @ body.ang_acc_q,
    )


def assemble_H(chain: KinematicChain, theta, state: GeneralizedState) -> np.ndarray:
    """Full 6M x 3n measurement Jacobian at (x, theta).

    Row blocks are (accel, gyro) per IMU in mounting order; column blocks
    are (d/dq, d/dqd, d/dqdd).  The gyro rows have a zero d/dqdd block and
    the accel d/dq block carries the frame-rotation coupling
    skew(accel_reading) @ ang_vel_qd, which includes gravity.
    """
    n = chain.n
    motion = forward_kinematics(chain, theta, state)
    body_jacs = propagate_body_jacobians(chain, theta, state, motion)
    H = np.zeros((chain.n_meas, 3 * n))
    for j, m in enumerate(chain.mountings):
        i = m.body_index
        sj = sensor_jacobians(chain, m, body_jacs, motion)
        Rj = motion.R[i] @ m.rotation()
        w = motion.omega[i]
        wd = motion.omegadot[i]
        point_acc = motion.rddot[i] + motion.R[i] @ (
            np.cross(wd, m.r_s) + np.cross(w, np.cross(w, m.r_s))
        )
        accel = Rj.T @ (point_acc + chain.gravity)
        r = 6 * j
        H[r : r + 3, 0:n] = Rj.T @ sj.acc_q + skew(accel) @ sj.ang_vel_qd
        H[r : r + 3, n : 2 * n] = Rj.T @ sj.acc_qd
        H[r : r + 3, 2 * n : 3 * n] = Rj.T @ sj.pos_q
        H[r + 3 : r + 6, 0:n] = sj.ang_vel_q
        H[r + 3 : r + 6, n : 2 * n] = sj.ang_vel_qd
        # gyro rows: d/dqdd block stays zero
    return H
