"""Serial-chain model and forward kinematics.

The chain is a sequence of bodies 0..n connected by single-axis revolute
joints.  Body 0 is the base (pedestal); its pose and motion are prescribed
constants.  Joint i+1 rotates body i+1 relative to body i about the unit
axis ``axes[i]``, expressed in the local frame of body i.  The origin of
body i+1 sits at the constant offset ``offsets[i]`` in frame i.

Offsets past the first are uncertain per individual: the effective offset
of link i (i >= 1) is ``offsets[i] + theta[3*(i-1):3*i]``, where ``theta``
is the flat correction vector of length ``3*(n-1)`` estimated elsewhere.

All quantities are SI (m, rad, s).  Rotation matrices map local coordinates
into the parent/inertial frame; angular velocities are expressed in each
body's own frame, translational quantities in the inertial frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AXIS_UNIT_TOL",
    "GeneralizedState",
    "ImuMounting",
    "KinematicChain",
    "BodyMotion",
    "skew",
    "rodrigues",
    "effective_offsets",
    "forward_rotational",
    "forward_translational",
    "forward_kinematics",
]

AXIS_UNIT_TOL = 1e-12

# Below this rotation magnitude the sin/cos coefficient ratios are replaced
# by their second-order Taylor expansions (removes the 0/0 at zero angle).
_SMALL_ANGLE = 1e-6

STANDARD_GRAVITY = np.array([0.0, 0.0, 9.80665])


def skew(a):
    """Skew-symmetric matrix of a 3-vector: skew(a) @ b == cross(a, b)."""
    a = np.asarray(a, dtype=float)
    return np.array(
        [
            [0.0, -a[2], a[1]],
            [a[2], 0.0, -a[0]],
            [-a[1], a[0], 0.0],
        ]
    )


def rodrigues(phi):
    """Rotation matrix for an axis-angle vector.

    The direction of ``phi`` is the rotation axis and its norm the angle.
    Continuous at phi -> 0 with rodrigues(0) == I; below a small-angle
    threshold the coefficients sin(t)/t and (1-cos(t))/t^2 use their
    Taylor expansions.
    """
    phi = np.asarray(phi, dtype=float)
    t2 = float(phi @ phi)
    t = np.sqrt(t2)
    if t < _SMALL_ANGLE:
        c1 = 1.0 - t2 / 6.0
        c2 = 0.5 - t2 / 24.0
    else:
        c1 = np.sin(t) / t
        c2 = (1.0 - np.cos(t)) / t2
    px = skew(phi)
    return np.eye(3) + c1 * px + c2 * (px @ px)


@dataclass(frozen=True)
class GeneralizedState:
    """Joint coordinates and their first two time derivatives."""

    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "qdot", np.asarray(self.qdot, dtype=float))
        object.__setattr__(self, "qddot", np.asarray(self.qddot, dtype=float))
        n = self.q.shape[0]
        if self.qdot.shape != (n,) or self.qddot.shape != (n,):
            raise ValueError("q, qdot, qddot must share length n")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def stacked(self) -> np.ndarray:
        """Flat state vector [q; qdot; qddot] of length 3n."""
        return np.concatenate([self.q, self.qdot, self.qddot])

    @classmethod
    def from_stacked(cls, x) -> "GeneralizedState":
        x = np.asarray(x, dtype=float)
        n = x.shape[0] // 3
        if x.shape[0] != 3 * n:
            raise ValueError("stacked state length must be a multiple of 3")
        return cls(x[:n], x[n : 2 * n], x[2 * n :])


@dataclass(frozen=True)
class ImuMounting:
    """Rigid IMU attachment: body index, lever arm and axis-angle rotation.

    ``body_index`` counts from the base, so valid sensor carriers are the
    moving links 1..n (0, the base, is accepted but carries no joint
    information).
    """

    body_index: int
    r_s: np.ndarray
    phi_s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r_s", np.asarray(self.r_s, dtype=float))
        object.__setattr__(self, "phi_s", np.asarray(self.phi_s, dtype=float))
        if self.r_s.shape != (3,) or self.phi_s.shape != (3,):
            raise ValueError("r_s and phi_s must be 3-vectors")

    def rotation(self) -> np.ndarray:
        """Constant mounting rotation (sensor frame -> body frame)."""
        return rodrigues(self.phi_s)


def _check_rotation(R, tol, what):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"{what} must be 3x3")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError(f"{what} is not orthonormal with det +1 (tol {tol:g})")
    return R


@dataclass(frozen=True)
class KinematicChain:
    """Immutable chain description.

    axes[i]     unit joint axis of joint i+1, in frame of body i (n rows)
    offsets[i]  nominal offset from body i's origin to body i+1's, frame i
    base_R      rotation of the base body (inertial <- frame 0)
    base_r / base_rdot / base_rddot   inertial-frame base translation state
    base_omega / base_omegadot        base angular motion, frame 0
    mountings   IMU attachments, in measurement order
    gravity     inertial gravity vector added to the accelerometer model
    """

    axes: np.ndarray
    offsets: np.ndarray
    base_R: np.ndarray = field(default_factory=lambda: np.eye(3))
    base_r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_rdot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_rddot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_omegadot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mountings: tuple = ()
    gravity: np.ndarray = field(default_factory=lambda: STANDARD_GRAVITY.copy())

    def __post_init__(self):
        axes = np.atleast_2d(np.asarray(self.axes, dtype=float))
        offsets = np.atleast_2d(np.asarray(self.offsets, dtype=float))
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "offsets", offsets)
        for name in ("base_r", "base_rdot", "base_rddot", "base_omega", "base_omegadot", "gravity"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            object.__setattr__(self, name, v)
        n = axes.shape[0]
        if n < 1:
            raise ValueError("chain needs at least one joint")
        if axes.shape != (n, 3) or offsets.shape != (n, 3):
            raise ValueError("axes and offsets must both be (n, 3)")
        norms = np.linalg.norm(axes, axis=1)
        if np.max(np.abs(norms - 1.0)) > AXIS_UNIT_TOL:
            raise ValueError("joint axes must have unit norm")
        object.__setattr__(self, "base_R", _check_rotation(self.base_R, AXIS_UNIT_TOL, "base_R"))
        object.__setattr__(self, "mountings", tuple(self.mountings))
        for m in self.mountings:
            if not 0 <= m.body_index <= n:
                raise ValueError(
                    f"mounting references body {m.body_index}, chain has bodies 0..{n}"
                )

    @property
    def n(self) -> int:
        """Number of joints == number of moving links."""
        return self.axes.shape[0]

    @property
    def num_bodies(self) -> int:
        """Bodies including the base."""
        return self.n + 1

    @property
    def n_theta(self) -> int:
        """Length of the offset-correction vector (first offset is fixed)."""
        return 3 * (self.n - 1)

    @property
    def n_meas(self) -> int:
        """Measurement dimension: 6 per IMU (accel + gyro)."""
        return 6 * len(self.mountings)

    def zero_theta(self) -> np.ndarray:
        return np.zeros(self.n_theta)

    def check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_theta,):
            raise ValueError(f"theta must have length {self.n_theta}, got {theta.shape}")
        return theta


def effective_offsets(chain: KinematicChain, theta) -> np.ndarray:
    """Nominal offsets with the per-link corrections applied (rows i >= 1)."""
    theta = chain.check_theta(theta)
    out = chain.offsets.copy()
    if chain.n > 1:
        out[1:] += theta.reshape(chain.n - 1, 3)
    return out


@dataclass(frozen=True)
class BodyMotion:
    """Per-body motion, arrays indexed 0..n (base first).

    R[i] rotates frame-i coordinates into the inertial frame.  omega and
    omegadot are body-frame angular rates; r, rdot, rddot inertial-frame
    translation of each body origin.
    """

    R: np.ndarray
    omega: np.ndarray
    omegadot: np.ndarray
    r: np.ndarray
    rdot: np.ndarray
    rddot: np.ndarray


def forward_rotational(chain: KinematicChain, state: GeneralizedState):
    """Propagate rotation, angular velocity and acceleration along the chain.

    Returns (R, omega, omegadot) stacked over bodies 0..n.  The recursion is
    seeded by the base pose and motion, then for each joint

        R_{i+1}     = R_i A,            A = rodrigues(axis_i * q_{i+1})
        w_{i+1}     = A^T w_i + axis_i * qd_{i+1}
        wdot_{i+1}  = A^T wdot_i + (w_{i+1} x axis_i) qd_{i+1} + axis_i qdd_{i+1}
    """
    n = chain.n
    if state.n != n:
        raise ValueError(f"state has {state.n} joints, chain has {n}")
    R = np.empty((n + 1, 3, 3))
    omega = np.empty((n + 1, 3))
    omegadot = np.empty((n + 1, 3))
    R[0] = chain.base_R
    omega[0] = chain.base_omega
    omegadot[0] = chain.base_omegadot
    for i in range(n):
        axis = chain.axes[i]
        A = rodrigues(axis * state.q[i])
        R[i + 1] = R[i] @ A
        w = A.T @ omega[i] + axis * state.qdot[i]
        omega[i + 1] = w
        omegadot[i + 1] = (
            A.T @ omegadot[i] + np.cross(w, axis) * state.qdot[i] + axis * state.qddot[i]
        )
    return R, omega, omegadot


def forward_translational(chain: KinematicChain, theta, R, omega, omegadot):
    """Propagate origin position/velocity/acceleration given rotational results.

    Uses the effective (theta-corrected) offsets; the recursion is seeded by
    the base translational constants.
    """
    n = chain.n
    if R.shape[0] != n + 1:
        raise ValueError("rotational results do not match chain size")
    rho = effective_offsets(chain, theta)
    r = np.empty((n + 1, 3))
    rdot = np.empty((n + 1, 3))
    rddot = np.empty((n + 1, 3))
    r[0] = chain.base_r
    rdot[0] = chain.base_rdot
    rddot[0] = chain.base_rddot
    for i in range(n):
        w = omega[i]
        wd = omegadot[i]
        p = rho[i]
        r[i + 1] = r[i] + R[i] @ p
        rdot[i + 1] = rdot[i] + R[i] @ np.cross(w, p)
        rddot[i + 1] = rddot[i] + R[i] @ (np.cross(w, np.cross(w, p)) + np.cross(wd, p))
    return r, rdot, rddot


def forward_kinematics(chain: KinematicChain, theta, state: GeneralizedState) -> BodyMotion:
    """Full forward pass: rotational then translational recursion."""
    R, omega, omegadot = forward_rotational(chain, state)
    r, rdot, rddot = forward_translational(chain, theta, R, omega, omegadot)
    return BodyMotion(R=R, omega=omega, omegadot=omegadot, r=r, rdot=rdot, rddot=rddot)
