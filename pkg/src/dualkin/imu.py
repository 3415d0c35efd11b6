"""IMU measurement model: gyro + accelerometer per mounted sensor.

Sensor j rides body i at lever arm ``r_s`` (frame i) with constant mounting
rotation ``R_s = rodrigues(phi_s)``.  With body motion from the forward
recursion, the noise-free outputs are

    gyro_j  = R_s^T w_i
    accel_j = R_j^T ( rddot_i + R_i (wdot_i x + w_i x w_i x) r_s + g ),
    R_j     = R_i R_s

so a static sensor in identity pose reads +g on its local z axis.  The
measurement vector stacks [accel; gyro] per IMU, IMUs in mounting order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import GeneralizedState, KinematicChain, forward_kinematics

__all__ = ["NoiseSpec", "MeasurementBatch", "measure", "synthesize"]


@dataclass(frozen=True)
class NoiseSpec:
    """Diagonal measurement-noise variances, one (accel, gyro) pair per IMU.

    sigma2_accel and sigma2_gyro are (M, 3) arrays of per-axis variances in
    (m/s^2)^2 and (rad/s)^2.
    """

    sigma2_accel: np.ndarray
    sigma2_gyro: np.ndarray

    def __post_init__(self):
        sa = np.atleast_2d(np.asarray(self.sigma2_accel, dtype=float))
        sg = np.atleast_2d(np.asarray(self.sigma2_gyro, dtype=float))
        if sa.shape != sg.shape or sa.shape[1] != 3:
            raise ValueError("variance arrays must both be (M, 3)")
        if np.any(sa < 0) or np.any(sg < 0):
            raise ValueError("variances must be nonnegative")
        object.__setattr__(self, "sigma2_accel", sa)
        object.__setattr__(self, "sigma2_gyro", sg)

    @classmethod
    def isotropic(cls, num_imus: int, sigma2_accel: float, sigma2_gyro: float) -> "NoiseSpec":
        return cls(
            np.full((num_imus, 3), float(sigma2_accel)),
            np.full((num_imus, 3), float(sigma2_gyro)),
        )

    @property
    def num_imus(self) -> int:
        return self.sigma2_accel.shape[0]

    def diagonal(self) -> np.ndarray:
        """Stacked diagonal of the 6M x 6M covariance, block order (accel, gyro)."""
        return np.concatenate(
            [np.concatenate([self.sigma2_accel[j], self.sigma2_gyro[j]]) for j in range(self.num_imus)]
        )

    def covariance(self) -> np.ndarray:
        return np.diag(self.diagonal())


@dataclass(frozen=True)
class MeasurementBatch:
    """Time-ordered stack of measurement vectors.

    y[k] is the 6M-vector observed at time t[k]; indices k run 0..K-1 for
    sample numbers 1..K (sample k+1 follows the initial state by k+1 steps).
    """

    y: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        t = np.asarray(self.t, dtype=float)
        if y.shape[0] != t.shape[0]:
            raise ValueError("y and t must have the same number of rows")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)

    def __len__(self) -> int:
        return self.y.shape[0]

    def prefix(self, k: int) -> "MeasurementBatch":
        return MeasurementBatch(self.y[:k], self.t[:k])


def measure(chain: KinematicChain, theta, state: GeneralizedState) -> np.ndarray:
    """Noise-free measurement function h(x, theta), length 6M."""
    if not chain.mountings:
        raise ValueError("chain has no IMU mountings")
    motion = forward_kinematics(chain, theta, state)
    g = chain.gravity
    out = np.empty(chain.n_meas)
    for j, m in enumerate(chain.mountings):
        i = m.body_index
        Ri = motion.R[i]
        Rs = m.rotation()
        Rj = Ri @ Rs
        w = motion.omega[i]
        wd = motion.omegadot[i]
        point_acc = motion.rddot[i] + Ri @ (np.cross(wd, m.r_s) + np.cross(w, np.cross(w, m.r_s)))
        out[6 * j : 6 * j + 3] = Rj.T @ (point_acc + g)
        out[6 * j + 3 : 6 * j + 6] = Rs.T @ w
    return out


def synthesize(
    chain: KinematicChain,
    theta,
    state: GeneralizedState,
    noise: NoiseSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """One noisy measurement: h(x, theta) plus independent Gaussian noise.

    The caller owns the generator; a fixed seed reproduces the same vector.
    """
    if noise.num_imus != len(chain.mountings):
        raise ValueError("noise spec IMU count does not match chain mountings")
    clean = measure(chain, theta, state)
    return clean + np.sqrt(noise.diagonal()) * rng.standard_normal(clean.shape[0])
