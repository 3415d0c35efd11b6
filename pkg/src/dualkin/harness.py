"""Evaluation harness: trajectory, configuration, data synthesis, sweeps.

The default configuration reproduces the planar two-joint arm evaluation:
two links rotating about y, one IMU per link, a quintic reach to the final
pose in one second followed by a static hold.  `run_sweep` executes the
pipeline across a range of intermediate-node counts with repeated seeded
trials and aggregates convergence-time and accuracy metrics.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .estimation import EstimationProblem, OptimizerConfig, Prior
from .filtering import ImuMeasurementModel, default_initial_covariance
from .imu import MeasurementBatch, NoiseSpec, synthesize
from .kinematics import GeneralizedState, ImuMounting, KinematicChain

__all__ = [
    "QuinticTrajectory",
    "quintic",
    "ExperimentConfig",
    "MetricsRow",
    "synthesize_dataset",
    "run_sweep",
    "emit_results",
    "parse_results",
    "summarize",
]

DEG = math.pi / 180.0


def quintic(q0, qe, t_e: float, t: float):
    """Minimum-boundary-condition quintic between rest poses.

    Position, velocity and acceleration at time t; holds the final pose
    with zero derivatives for t > t_e.
    """
    if t_e <= 0:
        raise ValueError("t_e must be positive")
    q0 = np.asarray(q0, dtype=float)
    qe = np.asarray(qe, dtype=float)
    if t >= t_e:
        return qe.copy(), np.zeros_like(qe), np.zeros_like(qe)
    tau = t / t_e
    d = qe - q0
    s = 10 * tau**3 - 15 * tau**4 + 6 * tau**5
    sd = (30 * tau**2 - 60 * tau**3 + 30 * tau**4) / t_e
    sdd = (60 * tau - 180 * tau**2 + 120 * tau**3) / t_e**2
    return q0 + d * s, d * sd, d * sdd


@dataclass(frozen=True)
class QuinticTrajectory:
    """Reach-and-hold joint trajectory."""

    q0: np.ndarray
    qe: np.ndarray
    t_e: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "q0", np.asarray(self.q0, dtype=float))
        object.__setattr__(self, "qe", np.asarray(self.qe, dtype=float))
        if self.t_e <= 0:
            raise ValueError("t_e must be positive")

    def state(self, t: float) -> GeneralizedState:
        q, qd, qdd = quintic(self.q0, self.qe, self.t_e, t)
        return GeneralizedState(q, qd, qdd)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full evaluation setting; defaults are the desk-scale arm benchmark."""

    n_joints: int = 2
    num_links: int = 2
    num_imus: int = 2
    dt: float = 0.01
    eps_fd: float = 1e-6
    lam: float = 1e-4
    sigma2_accel: float = 0.005
    sigma2_gyro_deg: float = 0.002  # (deg/s)^2; converted below
    sigma2_jerk: float = 0.5
    theta_true: tuple = (0.05, 0.0, 0.03)
    theta0: tuple = (0.0, 0.0, 0.0)
    sigma0_scale: float = 1.0
    q0: tuple = (0.0, 0.0)
    qdot0: tuple = (0.0, 0.0)
    qddot0: tuple = (0.0, 0.0)
    qe: tuple = (math.pi / 4, math.pi / 2)
    base_offset: tuple = (0.0, 0.0, 0.0)
    link_offset: tuple = (0.2, 0.0, 0.0)
    joint_axis: tuple = (0.0, 1.0, 0.0)
    imu_phi: tuple = (0.0, math.pi, 0.0)
    imu_r: tuple = (0.1, 0.0, 0.05)
    t_e: float = 1.0
    duration: float = 3.0
    o_min: float = 2e-4
    odelta_min: float = 30.0
    max_iterations: int = 5000
    alpha: int = 20
    beta1: int = 30
    num_nodes: int = 0
    trials: int = 50
    seed: int = 1
    transport: str = "inproc"
    timing: str = "logical"
    logical_eval_cost: float = 1e-3  # logical s per cost-evaluation sample
    pace_scale: float = 1.0
    hop_delay: float = 0.0
    port_base: int | None = None  # socket transport; None picks free ports

    @property
    def sigma2_gyro(self) -> float:
        """Gyro variance in (rad/s)^2."""
        return self.sigma2_gyro_deg * DEG**2

    def chain(self) -> KinematicChain:
        axis = np.asarray(self.joint_axis, dtype=float)
        mountings = tuple(
            ImuMounting(body_index=i + 1, r_s=self.imu_r, phi_s=self.imu_phi)
            for i in range(self.num_imus)
        )
        return KinematicChain(
            axes=np.tile(axis, (self.n_joints, 1)),
            offsets=np.vstack([self.base_offset, self.link_offset]),
            mountings=mountings,
        )

    def noise(self) -> NoiseSpec:
        return NoiseSpec.isotropic(self.num_imus, self.sigma2_accel, self.sigma2_gyro)

    def trajectory(self) -> QuinticTrajectory:
        return QuinticTrajectory(q0=self.q0, qe=self.qe, t_e=self.t_e)

    def x0(self) -> np.ndarray:
        return np.concatenate([self.q0, self.qdot0, self.qddot0])

    def prior(self) -> Prior:
        dim = 3 * (self.num_links - 1)
        return Prior(np.asarray(self.theta0, dtype=float), self.sigma0_scale * np.eye(dim))

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            lam=self.lam,
            eps_fd=self.eps_fd,
            o_min=self.o_min,
            odelta_min=self.odelta_min,
            max_iterations=self.max_iterations,
        )

    def problem(self, backend: str | None = None) -> EstimationProblem:
        model = ImuMeasurementModel(self.chain(), self.noise())
        return EstimationProblem(
            model,
            self.prior(),
            self.x0(),
            q_eps=self.sigma2_jerk * np.ones(self.n_joints),
            P0=default_initial_covariance(self.n_joints),
            backend=backend,
        )

    def echo(self) -> dict:
        """Config echo with the raw and converted noise figures."""
        out = asdict(self)
        out["sigma2_gyro_rad"] = self.sigma2_gyro
        return out

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.pop("sigma2_gyro_rad", None)
        fields = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - fields
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        for key, value in list(data.items()):
            if isinstance(value, list):
                data[key] = tuple(value)
        return cls(**data)


def synthesize_dataset(config: ExperimentConfig, seed) -> MeasurementBatch:
    """Sample the trajectory at the configured rate and add sensor noise.

    Measurement k (k = 1..K) is taken at t = k * dt with the true offsets;
    the batch covers (0, duration].
    """
    rng = np.random.default_rng(seed)
    chain = config.chain()
    noise = config.noise()
    traj = config.trajectory()
    theta_true = np.asarray(config.theta_true, dtype=float)
    K = int(round(config.duration / config.dt))
    t = config.dt * np.arange(1, K + 1)
    y = np.empty((K, chain.n_meas))
    for k in range(K):
        y[k] = synthesize(chain, theta_true, traj.state(t[k]), noise, rng)
    return MeasurementBatch(y=y, t=t)


@dataclass(frozen=True)
class MetricsRow:
    """One trial of one topology size."""

    L: int
    trial: int
    seed: int
    T: float
    e: float
    final_S: float
    node_iters: tuple
    theta_star: tuple
    e_timeline: tuple  # ((stamp, ||theta - theta_star_L||), ...)
    converged: bool


# ---------------------------------------------------------------------------
# results persistence

CSV_HEADER = "L,trial,seed,T,e,final_S,node_iters,theta_star,e_timeline,converged"


def _fmt_pairs(pairs) -> str:
    return "|".join(f"{repr(float(a))}:{repr(float(b))}" for a, b in pairs)


def _parse_pairs(text: str):
    if not text:
        return ()
    out = []
    for item in text.split("|"):
        a, b = item.split(":")
        out.append((float(a), float(b)))
    return tuple(out)


def emit_results(rows, path, summary_path=None, config: ExperimentConfig | None = None):
    """Write rows as CSV (deterministic ordering) plus a JSON summary."""
    rows = sorted(rows, key=lambda r: (r.L, r.trial))
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    str(r.L),
                    str(r.trial),
                    str(r.seed),
                    repr(float(r.T)),
                    repr(float(r.e)),
                    repr(float(r.final_S)),
                    ";".join(str(int(v)) for v in r.node_iters),
                    ";".join(repr(float(v)) for v in r.theta_star),
                    _fmt_pairs(r.e_timeline),
                    "1" if r.converged else "0",
                ]
            )
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if summary_path is not None:
        payload = {"summary": summarize(rows)}
        if config is not None:
            payload["config"] = config.echo()
        with open(summary_path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def parse_results(path):
    """Inverse of emit_results for the CSV part."""
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if lines[0] != CSV_HEADER:
        raise ValueError("unexpected CSV header")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        rows.append(
            MetricsRow(
                L=int(parts[0]),
                trial=int(parts[1]),
                seed=int(parts[2]),
                T=float(parts[3]),
                e=float(parts[4]),
                final_S=float(parts[5]),
                node_iters=tuple(int(v) for v in parts[6].split(";") if v),
                theta_star=tuple(float(v) for v in parts[7].split(";") if v),
                e_timeline=_parse_pairs(parts[8]),
                converged=parts[9] == "1",
            )
        )
    return rows


def summarize(rows) -> dict:
    """Per-L aggregate statistics with a 95% confidence interval on e."""
    byL: dict[int, list[MetricsRow]] = {}
    for r in rows:
        byL.setdefault(r.L, []).append(r)
    out = {}
    for L in sorted(byL):
        grp = byL[L]
        T = np.array([r.T for r in grp if r.converged])
        e = np.array([r.e for r in grp if r.converged])
        n = len(e)
        ci = 1.96 * float(np.std(e, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
        out[str(L)] = {
            "trials": len(grp),
            "converged": n,
            "mean_T": float(np.mean(T)) if n else float("nan"),
            "p25_T": float(np.percentile(T, 25)) if n else float("nan"),
            "p75_T": float(np.percentile(T, 75)) if n else float("nan"),
            "mean_e": float(np.mean(e)) if n else float("nan"),
            "ci95_e": ci,
        }
    return out


def trial_seed(root_seed: int, trial: int) -> int:
    """Dataset seed for one trial, shared across topology sizes.

    Sharing the dataset across L makes the cross-L accuracy comparison a
    paired one, which is what the parity checks measure.
    """
    return int(np.random.SeedSequence([root_seed, trial]).generate_state(1)[0])


def run_trial(config: ExperimentConfig, L: int, trial: int):
    """One seeded topology run -> MetricsRow."""
    from .pipeline.topology import Topology, run_topology

    seed = trial_seed(config.seed, trial)
    batch = synthesize_dataset(config, seed)
    topo = Topology(
        L=L,
        transport=config.transport,
        timing=config.timing,
        alpha=config.alpha,
        beta1=config.beta1,
        optimizer=config.optimizer(),
        eval_cost=config.logical_eval_cost,
        pace_scale=config.pace_scale,
        hop_delay=config.hop_delay,
        ports=None
        if config.port_base is None
        else tuple(range(config.port_base, config.port_base + L + 1)),
    )
    trace = run_topology(topo, config, batch)
    theta_true = np.asarray(config.theta_true, dtype=float)
    theta_star = np.asarray(trace.theta_star, dtype=float)
    timeline = tuple(
        (stamp, float(np.linalg.norm(np.asarray(th) - theta_star)))
        for stamp, _node, th in trace.update_events
    )
    return MetricsRow(
        L=L,
        trial=trial,
        seed=seed,
        T=trace.T,
        e=float(np.linalg.norm(theta_star - theta_true)),
        final_S=trace.final_S,
        node_iters=tuple(trace.node_iterations),
        theta_star=tuple(theta_star),
        e_timeline=timeline,
        converged=trace.converged,
    )


def run_sweep(config: ExperimentConfig, L_values, trials: int | None = None):
    """Topology-size sweep with repeated seeded trials.

    Returns (rows, summary).  A failing trial is recorded as a
    non-converged row rather than aborting the sweep.
    """
    trials = config.trials if trials is None else trials
    rows = []
    for L in L_values:
        for trial in range(trials):
            try:
                rows.append(run_trial(config, L, trial))
            except Exception:
                rows.append(
                    MetricsRow(
                        L=L,
                        trial=trial,
                        seed=trial_seed(config.seed, trial),
                        T=float("nan"),
                        e=float("nan"),
                        final_S=float("nan"),
                        node_iters=(),
                        theta_star=(),
                        e_timeline=(),
                        converged=False,
                    )
                )
    return rows, summarize(rows)


def spearman(x, y) -> float:
    """Spearman rank correlation (average ranks on ties)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def ranks(v):
        order = np.argsort(v, kind="stable")
        r = np.empty(len(v))
        i = 0
        while i < len(v):
            j = i
            while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
                j += 1
            r[order[i : j + 1]] = 0.5 * (i + j) + 1.0
            i = j + 1
        return r

    rx, ry = ranks(x), ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    return float(rx @ ry) / denom if denom else 0.0
