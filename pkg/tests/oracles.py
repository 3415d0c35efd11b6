"""Independent oracles used by the tests.

Deliberately different code paths from the package: quaternion algebra for
rotations, literal textbook equations with explicit inversion for the EKF
step, and plain central differences.  These stay independent of the
implementations they check.
"""

from __future__ import annotations

import numpy as np


def quat_from_axis_angle(phi):
    phi = np.asarray(phi, dtype=float)
    angle = np.linalg.norm(phi)
    if angle < 1e-300:
        return np.array([1.0, 0.0, 0.0, 0.0])
    axis = phi / angle
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])


def quat_multiply(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_to_matrix(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_from_axis_angle(phi):
    """Quaternion-route rotation matrix for an axis-angle vector."""
    return quat_to_matrix(quat_from_axis_angle(phi))


def compose_rotations(*phis):
    """Rotation matrix of sequential local rotations, via quaternions."""
    q = np.array([1.0, 0.0, 0.0, 0.0])
    for phi in phis:
        q = quat_multiply(q, quat_from_axis_angle(phi))
    return quat_to_matrix(q)


def textbook_ekf_step(xhat, P, y, h_fn, H_fn, F, Q_w, Q_v):
    """Literal EKF equations with explicit matrix inversion."""
    x_pred = F @ xhat
    P_pred = F @ P @ F.T + Q_w
    H = H_fn(x_pred)
    dy = y - h_fn(x_pred)
    W = H @ P_pred @ H.T + Q_v
    Winv = np.linalg.inv(W)
    K = P_pred @ H.T @ Winv
    x_new = x_pred + K @ dy
    P_new = (np.eye(len(xhat)) - K @ H) @ P_pred
    log_det = float(np.linalg.slogdet(W)[1])
    quad = float(dy @ Winv @ dy)
    return x_new, P_new, dy, log_det, quad


def central_difference(f, x, i, h):
    xp = np.array(x, dtype=float)
    xm = np.array(x, dtype=float)
    xp[i] += h
    xm[i] -= h
    return (f(xp) - f(xm)) / (2 * h)
