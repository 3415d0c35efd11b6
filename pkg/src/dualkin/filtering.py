"""EKF over the near-constant-acceleration transition model.

The state x = [q; qd; qdd] evolves as a per-joint triple integrator whose
jerk is white noise.  Each step predicts with the closed-form transition,
linearizes the IMU measurement function at the predicted state, and applies
the Kalman update.  Besides the posterior, every step exposes the predictive
innovation statistics (log|W|, dy^T W^-1 dy) consumed by the parameter cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imu import MeasurementBatch, NoiseSpec, measure
from .jacobians import assemble_H
from .kinematics import GeneralizedState, KinematicChain

__all__ = [
    "SingularInnovationError",
    "TransitionModel",
    "FilterBelief",
    "StepRecord",
    "ImuMeasurementModel",
    "build_transition",
    "default_initial_covariance",
    "filter_step",
    "run_filter",
]

CONDITION_LIMIT = 1e12


class SingularInnovationError(np.linalg.LinAlgError):
    """Innovation covariance cannot be factorized reliably."""

    def __init__(self, cond: float):
        self.cond = cond
        super().__init__(
            f"innovation covariance is numerically singular (condition number {cond:.3e}, "
            f"limit {CONDITION_LIMIT:.0e})"
        )


@dataclass(frozen=True)
class TransitionModel:
    """Transition matrix and jerk-driven process noise for one time step.

    F is block upper-triangular with identity diagonal blocks; Q_w is the
    integrated white-jerk covariance scaled by the per-joint jerk variances.
    """

    dt: float
    F: np.ndarray
    Q_w: np.ndarray
    q_eps: np.ndarray


def build_transition(n: int, dt: float, q_eps) -> TransitionModel:
    """Assemble F and Q_w for n joints and step dt.

    q_eps holds the per-joint jerk variances (diagonal of the jerk
    covariance).  dt must be positive.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    q_eps = np.asarray(q_eps, dtype=float) * np.ones(n)
    blocks = np.array(
        [
            [1.0, dt, 0.5 * dt * dt],
            [0.0, 1.0, dt],
            [0.0, 0.0, 1.0],
        ]
    )
    noise = np.array(
        [
            [dt**5 / 20.0, dt**4 / 8.0, dt**3 / 6.0],
            [dt**4 / 8.0, dt**3 / 3.0, dt**2 / 2.0],
            [dt**3 / 6.0, dt**2 / 2.0, dt],
        ]
    )
    F = np.kron(blocks, np.eye(n))
    Q_w = np.kron(noise, np.diag(q_eps))
    return TransitionModel(dt=float(dt), F=F, Q_w=Q_w, q_eps=q_eps)


@dataclass
class FilterBelief:
    """Gaussian state posterior plus the last step's innovation statistics."""

    xhat: np.ndarray
    P: np.ndarray
    step: int = 0
    innovation: np.ndarray | None = None
    W: np.ndarray | None = None


@dataclass(frozen=True)
class StepRecord:
    """Per-step predictive statistics feeding the parameter likelihood."""

    innovation: np.ndarray
    log_det_W: float
    quad: float


class ImuMeasurementModel:
    """Bundles chain, noise and theta-dependent h / H evaluation."""

    def __init__(self, chain: KinematicChain, noise: NoiseSpec):
        if noise.num_imus != len(chain.mountings):
            raise ValueError("noise spec does not match number of mounted IMUs")
        self.chain = chain
        self.noise = noise
        self.q_v_diag = noise.diagonal()

    @property
    def dim(self) -> int:
        return self.chain.n_meas

    def h(self, x: np.ndarray, theta) -> np.ndarray:
        return measure(self.chain, theta, GeneralizedState.from_stacked(x))

    def H(self, x: np.ndarray, theta) -> np.ndarray:
        return assemble_H(self.chain, theta, GeneralizedState.from_stacked(x))


def default_initial_covariance(n: int) -> np.ndarray:
    """Tight on q (the initial state is known), loose on qdd."""
    return np.diag(np.concatenate([1e-4 * np.ones(n), 1e-2 * np.ones(n), np.ones(n)]))


def _solve_spd(W, rhs):
    """Cholesky solve, raising with a condition-number report on failure."""
    try:
        L = np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(0.5 * (W + W.T))
        cond = np.inf if eig.min() <= 0 else eig.max() / eig.min()
        raise SingularInnovationError(cond) from None
    d = np.diag(L)
    if (d.max() / d.min()) ** 2 > CONDITION_LIMIT:
        eig = np.linalg.eigvalsh(0.5 * (W + W.T))
        cond = np.inf if eig.min() <= 0 else eig.max() / eig.min()
        if cond > CONDITION_LIMIT:
            raise SingularInnovationError(cond)
    x = np.linalg.solve(L, rhs)
    x = np.linalg.solve(L.T, x)
    return x, 2.0 * np.sum(np.log(d))


def filter_step(
    belief: FilterBelief,
    y: np.ndarray,
    theta,
    model: ImuMeasurementModel,
    transition: TransitionModel,
    joseph: bool = True,
):
    """One predict + update cycle; returns the new belief and its record.

    The Jacobian is linearized at the predicted state.  The covariance uses
    the Joseph form by default; `joseph=False` selects the textbook
    (I - KH) P form (kept for oracle comparison, identical to first order).
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (model.dim,):
        raise ValueError(f"measurement must have length {model.dim}")
    F, Q_w = transition.F, transition.Q_w
    x_pred = F @ belief.xhat
    P_pred = F @ belief.P @ F.T + Q_w
    H = model.H(x_pred, theta)
    dy = y - model.h(x_pred, theta)
    W = H @ P_pred @ H.T + np.diag(model.q_v_diag)
    # K = P H^T W^-1, via W (W^-T) acting on (H P)
    WinvHP, log_det = _solve_spd(W, H @ P_pred)
    K = WinvHP.T
    x_new = x_pred + K @ dy
    if joseph:
        IKH = np.eye(x_new.shape[0]) - K @ H
        P_new = IKH @ P_pred @ IKH.T + (K * model.q_v_diag) @ K.T
    else:
        P_new = (np.eye(x_new.shape[0]) - K @ H) @ P_pred
    P_new = 0.5 * (P_new + P_new.T)
    quad_vec, _ = _solve_spd(W, dy)
    quad = float(dy @ quad_vec)
    new_belief = FilterBelief(
        xhat=x_new, P=P_new, step=belief.step + 1, innovation=dy, W=W
    )
    return new_belief, StepRecord(innovation=dy, log_det_W=log_det, quad=quad)


def run_filter(
    model: ImuMeasurementModel,
    theta,
    batch: MeasurementBatch,
    x0: np.ndarray,
    P0: np.ndarray,
    q_eps,
    t0: float = 0.0,
    joseph: bool = True,
):
    """Sequential filtering over a time-ordered batch.

    Per-step transitions are rebuilt from each step's own dt, so irregular
    sampling is handled.  Returns the list of beliefs (initial one included)
    and one StepRecord per measurement; an empty batch returns just the
    initial belief.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0] // 3
    belief = FilterBelief(xhat=x0.copy(), P=np.asarray(P0, dtype=float).copy())
    beliefs = [belief]
    records: list[StepRecord] = []
    t_prev = t0
    for k in range(len(batch)):
        dt = batch.t[k] - t_prev
        transition = build_transition(n, dt, q_eps)
        belief, rec = filter_step(belief, batch.y[k], theta, model, transition, joseph=joseph)
        beliefs.append(belief)
        records.append(rec)
        t_prev = batch.t[k]
    return beliefs, records
