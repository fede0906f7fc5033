"""Closed-loop simulation engine: plant, grasp maps and controller wired together.

Each step: the controller reads the (optionally noisy) kinematics, computes
the composite error, regressor, commanded wrench and per-tug wrenches; the
plant is integrated one fixed RK4 step under those wrenches held constant
(zero-order hold); the estimates then take one explicit-Euler adaptation
step. Both link rotations are re-orthonormalized after every step. Runs are
bit-deterministic for a fixed scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import controller as ctl
from . import plant
from .grasp import GraspMap, grasp_matrix, invert_grasp
from .spatial import angle_vector_to_rot, orthonormalize, random_rotation, rot_to_angle_vector, skew

ZERO_WRENCH = np.zeros(6)


class NumericalAbort(RuntimeError):
    """Simulation produced a non-finite state or an ill-conditioned solve."""


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian measurement noise (off by default in every scenario)."""

    position_std: float = 0.0
    velocity_std: float = 0.0
    attitude_std: float = 0.0
    rate_std: float = 0.0

    def any_active(self) -> bool:
        return any(s > 0.0 for s in (self.position_std, self.velocity_std, self.attitude_std, self.rate_std))


@dataclass
class Scenario:
    """Everything needed to reproduce one closed-loop run."""

    truth: plant.SatelliteTruth
    gains: ctl.ControllerGains
    initial: plant.SpatialState
    duration: float = 40.0
    dt: float = 1e-3
    seed: int = 0
    controller_enabled: bool = True
    adaptation_enabled: bool = True
    perfect_knowledge: bool = False
    noise: NoiseSpec | None = None

    def validate(self) -> None:
        self.truth.validate()
        self.gains.validate()
        self.initial.validate()
        if not self.duration > 0.0:
            raise ValueError("duration must be positive")
        if not 0.0 < self.dt <= 0.01:
            raise ValueError("dt must lie in (0, 0.01]")

    def n_steps(self) -> int:
        return max(1, int(round(self.duration / self.dt)))


@dataclass
class TrajectoryLog:
    """Per-step record of states, wrenches, errors, estimates and the monitor."""

    t: np.ndarray
    p: np.ndarray
    rv1: np.ndarray
    rv2: np.ndarray
    v: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    theta_star: np.ndarray
    tug1: np.ndarray
    tug2: np.ndarray
    s: np.ndarray
    lyapunov: np.ndarray
    phi_hat: np.ndarray
    d_hat: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def _pack(state: plant.SpatialState) -> np.ndarray:
    return np.concatenate(
        (state.p, state.R1.ravel(), state.R2.ravel(), state.v, state.w1, state.w2)
    )


def _unpack(x: np.ndarray) -> plant.SpatialState:
    return plant.SpatialState(
        p=x[:3],
        R1=x[3:12].reshape(3, 3),
        R2=x[12:21].reshape(3, 3),
        v=x[21:24],
        w1=x[24:27],
        w2=x[27:30],
    )


def _derivative(
    truth: plant.SatelliteTruth,
    x: np.ndarray,
    tug1: np.ndarray,
    tug2: np.ndarray,
    check: bool,
) -> np.ndarray:
    from .spatial import skew

    state = _unpack(x)
    v_dot, w1_dot, w2_dot = plant.accelerations(truth, state, tug1, tug2, check_conditioning=check)
    dx = np.empty_like(x)
    dx[:3] = state.v
    dx[3:12] = (skew(state.w1) @ state.R1).ravel()
    dx[12:21] = (skew(state.w2) @ state.R2).ravel()
    dx[21:24] = v_dot
    dx[24:27] = w1_dot
    dx[27:30] = w2_dot
    return dx


def integrate_plant(
    truth: plant.SatelliteTruth,
    state: plant.SpatialState,
    tug1: np.ndarray,
    tug2: np.ndarray,
    dt: float,
) -> plant.SpatialState:
    """One fixed-step RK4 step under zero-order-hold tug wrenches."""
    x = _pack(state)
    k1 = _derivative(truth, x, tug1, tug2, check=True)
    k2 = _derivative(truth, x + 0.5 * dt * k1, tug1, tug2, check=False)
    k3 = _derivative(truth, x + 0.5 * dt * k2, tug1, tug2, check=False)
    k4 = _derivative(truth, x + dt * k3, tug1, tug2, check=False)
    out = _unpack(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    out.R1 = orthonormalize(out.R1)
    out.R2 = orthonormalize(out.R2)
    return out


def _measure(
    state: plant.SpatialState, noise: NoiseSpec | None, rng: np.random.Generator
) -> plant.SpatialState:
    if noise is None or not noise.any_active():
        return state
    from .spatial import angle_vector_to_rot

    meas = state.copy()
    meas.p = meas.p + rng.normal(0.0, noise.position_std, 3)
    meas.v = meas.v + rng.normal(0.0, noise.velocity_std, 3)
    meas.w1 = meas.w1 + rng.normal(0.0, noise.rate_std, 3)
    meas.w2 = meas.w2 + rng.normal(0.0, noise.rate_std, 3)
    meas.R1 = angle_vector_to_rot(rng.normal(0.0, noise.attitude_std, 3)) @ meas.R1
    meas.R2 = angle_vector_to_rot(rng.normal(0.0, noise.attitude_std, 3)) @ meas.R2
    return meas


@dataclass
class StepRecord:
    t: float
    state: plant.SpatialState
    theta_star: np.ndarray
    tug1: np.ndarray
    tug2: np.ndarray
    s: np.ndarray
    lyapunov: float
    est: ctl.ParameterEstimate


def initial_estimate(scn: Scenario) -> ctl.ParameterEstimate:
    if scn.perfect_knowledge:
        return ctl.ParameterEstimate(
            ctl.true_parameter_vector(scn.truth), ctl.true_grasp_vector(scn.truth)
        )
    return ctl.ParameterEstimate()


def desired_motion(scn: Scenario) -> ctl.DesiredMotion:
    """Anchor the desired pose at engagement; all desired rates are zero."""
    return ctl.DesiredMotion(p_d=scn.initial.p.copy(), R_d=scn.initial.R1.copy())


def step(
    scn: Scenario,
    des: ctl.DesiredMotion,
    state: plant.SpatialState,
    est: ctl.ParameterEstimate,
    t: float,
    rng: np.random.Generator,
) -> tuple[plant.SpatialState, ctl.ParameterEstimate, StepRecord]:
    """Advance the closed loop by one dt; returns (state', est', record).

    The record captures the step-start state, the wrenches applied over the
    step, the composite error and the Lyapunov value with the step-start
    estimates.
    """
    meas = _measure(state, scn.noise, rng)
    err = ctl.composite_error(meas, des, scn.gains.gamma)
    theta_star, _ = plant.relative_rotation(meas)

    if scn.controller_enabled:
        y_phi = ctl.regressor_phi(meas, des, err)
        t_sigma = ctl.control_wrench(y_phi, est, err, scn.gains)
        share = 0.5 * t_sigma
        tug1 = invert_grasp(GraspMap(meas.R1, est.d_hat[:3]), share)
        tug2 = invert_grasp(GraspMap(meas.R2, est.d_hat[3:]), share)
    else:
        y_phi = np.zeros((6, ctl.N_PARAMS))
        tug1 = ZERO_WRENCH
        tug2 = ZERO_WRENCH

    v_value = ctl.lyapunov_value(err, est, scn.truth, meas, scn.gains)
    record = StepRecord(t, state.copy(), theta_star, tug1.copy(), tug2.copy(),
                        err.stacked(), v_value, est.copy())

    try:
        new_state = integrate_plant(scn.truth, state, tug1, tug2, scn.dt)
    except plant.IllConditionedError as exc:
        raise NumericalAbort(f"t={t:.6f}: {exc}") from exc

    if scn.controller_enabled and scn.adaptation_enabled and not scn.perfect_knowledge:
        y_d = ctl.regressor_d((tug1, tug2), meas)
        new_est = ctl.adaptation_step(2.0 * y_phi, y_d, err, scn.gains, est, scn.dt)
    else:
        new_est = est.copy()

    flat = _pack(new_state)
    if not np.all(np.isfinite(flat)) or not np.all(np.isfinite(new_est.phi_hat)) or not np.all(
        np.isfinite(new_est.d_hat)
    ):
        raise NumericalAbort(f"non-finite state or estimate after step at t={t:.6f}")
    return new_state, new_est, record


def run(scn: Scenario) -> TrajectoryLog:
    """Integrate the full scenario and return the trajectory log.

    Produces n_steps + 1 records: one at the start of every step plus a final
    record at t = duration. Deterministic for a fixed scenario (the seed
    drives only the optional measurement noise).
    """
    scn.validate()
    rng = np.random.default_rng(scn.seed)
    des = desired_motion(scn)
    state = scn.initial.copy()
    est = initial_estimate(scn)
    n = scn.n_steps()
    records: list[StepRecord] = []
    t = 0.0
    for k in range(n):
        state, est, rec = step(scn, des, state, est, t, rng)
        records.append(rec)
        t = (k + 1) * scn.dt
    # Final record: evaluate controller quantities at the terminal state.
    meas = _measure(state, scn.noise, rng)
    err = ctl.composite_error(meas, des, scn.gains.gamma)
    theta_star, _ = plant.relative_rotation(meas)
    if scn.controller_enabled:
        y_phi = ctl.regressor_phi(meas, des, err)
        share = 0.5 * ctl.control_wrench(y_phi, est, err, scn.gains)
        tug1 = invert_grasp(GraspMap(meas.R1, est.d_hat[:3]), share)
        tug2 = invert_grasp(GraspMap(meas.R2, est.d_hat[3:]), share)
    else:
        tug1 = ZERO_WRENCH.copy()
        tug2 = ZERO_WRENCH.copy()
    records.append(
        StepRecord(t, state.copy(), theta_star, tug1, tug2, err.stacked(),
                   ctl.lyapunov_value(err, est, scn.truth, meas, scn.gains), est.copy())
    )
    return _to_log(records)


def _to_log(records: list[StepRecord]) -> TrajectoryLog:
    n = len(records)
    log = TrajectoryLog(
        t=np.empty(n),
        p=np.empty((n, 3)),
        rv1=np.empty((n, 3)),
        rv2=np.empty((n, 3)),
        v=np.empty((n, 3)),
        w1=np.empty((n, 3)),
        w2=np.empty((n, 3)),
        theta_star=np.empty((n, 3)),
        tug1=np.empty((n, 6)),
        tug2=np.empty((n, 6)),
        s=np.empty((n, 6)),
        lyapunov=np.empty(n),
        phi_hat=np.empty((n, ctl.N_PARAMS)),
        d_hat=np.empty((n, 6)),
    )
    for i, rec in enumerate(records):
        log.t[i] = rec.t
        log.p[i] = rec.state.p
        log.rv1[i] = rot_to_angle_vector(rec.state.R1)
        log.rv2[i] = rot_to_angle_vector(rec.state.R2)
        log.v[i] = rec.state.v
        log.w1[i] = rec.state.w1
        log.w2[i] = rec.state.w2
        log.theta_star[i] = rec.theta_star
        log.tug1[i] = rec.tug1
        log.tug2[i] = rec.tug2
        log.s[i] = rec.s
        log.lyapunov[i] = rec.lyapunov
        log.phi_hat[i] = rec.est.phi_hat
        log.d_hat[i] = rec.est.d_hat
    return log


@dataclass(frozen=True)
class DiagnosticCheck:
    name: str
    passed: bool
    worst: float
    threshold: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: worst {self.worst:.3e} (threshold {self.threshold:.3e})"


@dataclass
class DiagnosticsReport:
    checks: list[DiagnosticCheck] = field(default_factory=list)

    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]


def random_state(rng: np.random.Generator) -> plant.SpatialState:
    return plant.SpatialState(
        p=rng.normal(0.0, 1.0, 3),
        R1=random_rotation(rng),
        R2=random_rotation(rng),
        v=rng.normal(0.0, 1.0, 3),
        w1=rng.normal(0.0, 1.0, 3),
        w2=rng.normal(0.0, 1.0, 3),
    )


def random_desired(rng: np.random.Generator) -> ctl.DesiredMotion:
    """Desired signals with nonzero rates: exercises every regressor column."""
    return ctl.DesiredMotion(
        p_d=rng.normal(0.0, 1.0, 3),
        R_d=random_rotation(rng),
        v_d=rng.normal(0.0, 1.0, 3),
        w_d=rng.normal(0.0, 1.0, 3),
        accel_d=rng.normal(0.0, 1.0, 6),
    )


def diagnostics(scn: Scenario, n_samples: int = 1000) -> DiagnosticsReport:
    """Property sweep: SPD of the mass matrices, regressor factorizations,
    skew-symmetry of the velocity-product pairing, and Lyapunov descent over
    a full closed-loop run.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(scn.seed)
    report = DiagnosticsReport()

    worst_sym = 0.0
    worst_lam = np.inf
    worst_phi = 0.0
    worst_d = 0.0
    for _ in range(n_samples):
        state = random_state(rng)
        for m in (
            plant.mass_matrix(scn.truth.link1, state.R1),
            plant.mass_matrix(scn.truth.link2, state.R2, scn.truth.hinge.rotor_inertia),
            plant.mass_composite(scn.truth, state),
        ):
            worst_sym = max(worst_sym, np.linalg.norm(m - m.T) / np.linalg.norm(m))
            _, lam = plant.check_spd(m)
            worst_lam = min(worst_lam, lam)

        des = random_desired(rng)
        y = ctl.regressor_phi(state, des)
        rhs = plant.feedforward_reference(
            scn.truth, state, des.accel_d, np.concatenate((des.v_d, des.w_d))
        )
        worst_phi = max(
            worst_phi,
            float(np.linalg.norm(y @ ctl.true_parameter_vector(scn.truth) - 0.5 * rhs)),
        )

        tug1 = rng.normal(0.0, 10.0, 6)
        tug2 = rng.normal(0.0, 10.0, 6)
        d_hat = rng.normal(0.0, 1.0, 6)
        y_d = ctl.regressor_d((tug1, tug2), state)
        d_err = d_hat - ctl.true_grasp_vector(scn.truth)
        direct = np.zeros(6)
        for tug, r, dh, dt_ in (
            (tug1, state.R1, d_hat[:3], scn.truth.grasp1),
            (tug2, state.R2, d_hat[3:], scn.truth.grasp2),
        ):
            from .grasp import grasp_matrix

            g_tilde = grasp_matrix(GraspMap(r, dh)) - grasp_matrix(GraspMap(r, dt_))
            direct -= g_tilde @ tug
        worst_d = max(worst_d, float(np.linalg.norm(y_d @ d_err - direct)))

    report.checks.append(DiagnosticCheck("mass matrices symmetric", worst_sym < 1e-10, worst_sym, 1e-10))
    report.checks.append(DiagnosticCheck("mass matrices positive definite", worst_lam > 0.0, worst_lam, 0.0))
    report.checks.append(DiagnosticCheck("parameter regressor factorization", worst_phi < 1e-8, worst_phi, 1e-8))
    report.checks.append(DiagnosticCheck("grasp regressor identity", worst_d < 1e-10, worst_d, 1e-10))

    worst_skew = 0.0
    n_skew = min(n_samples, 100)
    for _ in range(n_skew):
        state = random_state(rng)
        x = rng.normal(0.0, 1.0, 6)
        m_dot = mass_rate_fd(scn.truth, state)
        c = plant.coriolis_composite(scn.truth, state)
        resid = abs(x @ (m_dot - 2.0 * c) @ x)
        bound = 1e-6 * float(x @ x) * max(np.linalg.norm(m_dot), 1e-12)
        worst_skew = max(worst_skew, resid / bound if bound > 0 else resid)
    report.checks.append(
        DiagnosticCheck("skew-symmetry of dM/dt - 2C (normalized)", worst_skew < 1.0, worst_skew, 1.0)
    )

    log = run(scn)
    v0 = log.lyapunov[0]
    dv_max = float(np.max(np.diff(log.lyapunov)))
    report.checks.append(
        DiagnosticCheck("Lyapunov per-step increase", dv_max < 1e-4 * v0, dv_max, 1e-4 * v0)
    )
    report.checks.append(
        DiagnosticCheck("Lyapunov final value", log.lyapunov[-1] < 0.05 * v0, float(log.lyapunov[-1]), 0.05 * v0)
    )
    return report


def mass_rate_fd(
    truth: plant.SatelliteTruth, state: plant.SpatialState, delta: float = 1e-6
) -> np.ndarray:
    """Central finite difference of the composite mass matrix along the flow."""
    from .spatial import angle_vector_to_rot

    def shifted(sign: float) -> plant.SpatialState:
        s = state.copy()
        s.p = s.p + sign * delta * s.v
        s.R1 = angle_vector_to_rot(sign * delta * s.w1) @ s.R1
        s.R2 = angle_vector_to_rot(sign * delta * s.w2) @ s.R2
        return s

    m_plus = plant.mass_composite(truth, shifted(+1.0))
    m_minus = plant.mass_composite(truth, shifted(-1.0))
    return (m_plus - m_minus) / (2.0 * delta)
