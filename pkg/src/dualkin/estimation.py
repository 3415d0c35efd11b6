"""MAP estimation of the kinematic offset corrections.

The cost of a candidate theta is the negative log posterior up to constants:
a Gaussian prior penalty plus, per measurement, the predictive log-density
terms log|W_k| + dy_k^T W_k^-1 dy_k produced by re-running the state filter
over the data at that theta.  One cost evaluation is therefore a full
filter pass (linear in the data size).

The optimizer is plain gradient descent with a single-sided finite
difference gradient and a data-size-scaled learning rate lam / K.  A node
stops iterating when the marginal gain is small: either the parameter step
(infinity norm) falls to `o_min` or the gradient norm falls to
`odelta_min`; the last node of a pipeline disables the gradient-norm exit
so that final accuracy is governed by the step criterion alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import core
from .filtering import ImuMeasurementModel, default_initial_covariance
from .imu import MeasurementBatch

__all__ = [
    "OptimizerConfig",
    "Prior",
    "TerminationReport",
    "EstimationProblem",
    "cost_S",
    "fd_gradient",
    "descend",
    "optimize_on_node",
]


@dataclass(frozen=True)
class OptimizerConfig:
    """Gradient-descent constants and greedy termination bounds."""

    lam: float = 1e-4
    eps_fd: float = 1e-6
    o_min: float = 2e-4
    odelta_min: float = 30.0
    max_iterations: int = 5000

    def __post_init__(self):
        if min(self.lam, self.eps_fd, self.o_min, self.odelta_min) <= 0:
            raise ValueError("optimizer constants must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    def learning_rate(self, k: int) -> float:
        """Step scale for a node holding k samples (halves when k doubles)."""
        if k < 1:
            raise ValueError("data size must be at least 1")
        return self.lam / k


@dataclass(frozen=True)
class Prior:
    """Gaussian prior over the offset corrections."""

    theta0: np.ndarray
    sigma0: np.ndarray

    def __post_init__(self):
        theta0 = np.asarray(self.theta0, dtype=float)
        sigma0 = np.asarray(self.sigma0, dtype=float)
        if sigma0.shape != (theta0.size, theta0.size):
            raise ValueError("sigma0 must be square and match theta0")
        if np.max(np.abs(sigma0 - sigma0.T)) > 1e-12:
            raise ValueError("sigma0 must be symmetric")
        # positive definiteness check doubles as factorization
        try:
            np.linalg.cholesky(sigma0)
        except np.linalg.LinAlgError:
            raise ValueError("sigma0 must be positive definite") from None
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "sigma0", sigma0)

    def penalty(self, theta) -> float:
        """log|Sigma0| + (theta - theta0)^T Sigma0^-1 (theta - theta0)."""
        d = np.asarray(theta, dtype=float) - self.theta0
        sign, logdet = np.linalg.slogdet(self.sigma0)
        return float(logdet + d @ np.linalg.solve(self.sigma0, d))


@dataclass(frozen=True)
class TerminationReport:
    """Outcome of one node optimization (a 'pass')."""

    iterations: int
    o_final: float
    odelta_final: float
    criterion: str  # "gradient_norm" | "step_size" | "iteration_cap"
    wall_time: float
    cost_evals: int
    data_size: int
    cost_last: float  # cost at the last gradient's base point


class EstimationProblem:
    """Everything a node needs to evaluate the cost: model, prior, filter init.

    Wraps the measurement model with the selected filter-pass backend so
    repeated cost evaluations avoid per-call setup.
    """

    def __init__(
        self,
        model: ImuMeasurementModel,
        prior: Prior,
        x0,
        q_eps,
        P0=None,
        t0: float = 0.0,
        backend: str | None = None,
    ):
        self.model = model
        self.prior = prior
        self.x0 = np.asarray(x0, dtype=float)
        n = self.x0.shape[0] // 3
        self.P0 = (
            default_initial_covariance(n) if P0 is None else np.asarray(P0, dtype=float)
        )
        self.q_eps = np.asarray(q_eps, dtype=float) * np.ones(n)
        self.t0 = float(t0)
        self._pass_fn = core.make_filter_pass(model, self.q_eps, backend=backend)

    @property
    def dim(self) -> int:
        return self.prior.theta0.size

    def data_term(self, theta, batch: MeasurementBatch) -> float:
        """Sum over the batch of log|W_k| + dy_k^T W_k^-1 dy_k."""
        if len(batch) == 0:
            return 0.0
        return self._pass_fn(
            np.asarray(theta, dtype=float), batch.t, batch.y, self.x0, self.P0, self.t0
        )


def cost_S(problem: EstimationProblem, theta, batch: MeasurementBatch) -> float:
    """Full MAP cost: prior penalty plus filter-derived data term."""
    return problem.prior.penalty(theta) + problem.data_term(theta, batch)


def fd_gradient(problem: EstimationProblem, theta, batch: MeasurementBatch, config: OptimizerConfig):
    """Single-sided finite-difference gradient of the cost.

    Uses exactly dim + 1 cost evaluations (one base, one per coordinate).
    Returns (gradient, base_cost, evals).
    """
    eps = config.eps_fd
    theta = np.asarray(theta, dtype=float)
    base = cost_S(problem, theta, batch)
    grad = np.empty(theta.size)
    for i in range(theta.size):
        probe = theta.copy()
        probe[i] += eps
        grad[i] = (cost_S(problem, probe, batch) - base) / eps
    return grad, base, theta.size + 1


def descend(
    gradient_fn,
    theta_init,
    data_size: int,
    config: OptimizerConfig,
    final_node: bool = False,
):
    """Gradient-descent loop with the greedy exit criteria.

    `gradient_fn(theta) -> (grad, base_cost, evals)` abstracts the cost so
    the loop is testable in isolation.  Exits when the gradient norm drops
    to `odelta_min` (disabled when `final_node`), when the step infinity
    norm drops to `o_min`, or at the iteration cap.  Returns the last
    accepted iterate and a report.
    """
    gamma = config.learning_rate(data_size)
    theta = np.asarray(theta_init, dtype=float).copy()
    start = time.monotonic()
    total_evals = 0
    iterations = 0
    criterion = "iteration_cap"
    o = np.inf
    odelta = np.inf
    cost_last = np.nan
    while iterations < config.max_iterations:
        iterations += 1
        grad, cost_last, evals = gradient_fn(theta)
        total_evals += evals
        step = gamma * grad
        theta = theta - step
        o = float(np.max(np.abs(step)))
        odelta = float(np.linalg.norm(grad))
        if not final_node and odelta <= config.odelta_min:
            criterion = "gradient_norm"
            break
        if o <= config.o_min:
            criterion = "step_size"
            break
    report = TerminationReport(
        iterations=iterations,
        o_final=o,
        odelta_final=odelta,
        criterion=criterion,
        wall_time=time.monotonic() - start,
        cost_evals=total_evals,
        data_size=data_size,
        cost_last=float(cost_last),
    )
    return theta, report


def optimize_on_node(
    problem: EstimationProblem,
    theta_init,
    batch: MeasurementBatch,
    config: OptimizerConfig,
    final_node: bool = False,
):
    """One node's quasi-optimal parameters from its data prefix."""
    if len(batch) < 1:
        raise ValueError("node optimization needs at least one measurement")

    def gradient_fn(theta):
        return fd_gradient(problem, theta, batch, config)

    return descend(gradient_fn, theta_init, len(batch), config, final_node=final_node)
