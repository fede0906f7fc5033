"""Decentralized adaptive feedback-linearizing PD controller for two space tugs.

The controller sees only kinematics measured at the shared point P (position,
both link attitudes and their rates) and never the plant parameters. Each
cycle it forms a composite velocity/pose error, evaluates a regressor that is
linear in a 22-entry physical parameter vector, commands a composite wrench
(feed-forward plus PD), splits it evenly between the tugs through the
estimated grasp maps, and updates the parameter and grasp-offset estimates by
gradient adaptation.

Parameter vector layout (22 entries)
------------------------------------
    [0]      combined mass m1 + m2
    [1:4]    link-1 mass-weighted COM offset m1*d1     (link-1 frame)
    [4:7]    link-2 mass-weighted COM offset m2*d2     (link-2 frame)
    [7:10]   link-1 point-inertia diagonal             (link-1 frame)
    [10:13]  link-2 point-inertia diagonal, incl rotor (link-2 frame)
    [13:16]  hinge damping
    [16:19]  hinge stiffness
    [19:22]  hinge Coulomb friction torque

The point-inertia groups keep only the principal-axis diagonal of each link's
inertia about P: the doubled width-3 template cannot carry two full symmetric
tensors, and the off-diagonal content multiplies desired accelerations that
are identically zero in a detumbling task.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import plant
from .spatial import parallel_axis, skew, vee

N_PARAMS = 22

_SLICE_PI1 = slice(1, 4)
_SLICE_PI2 = slice(4, 7)
_SLICE_J1 = slice(7, 10)
_SLICE_J2 = slice(10, 13)
_SLICE_DAMPING = slice(13, 16)
_SLICE_STIFFNESS = slice(16, 19)
_SLICE_FRICTION = slice(19, 22)


@dataclass(frozen=True)
class ControllerGains:
    """PD gain, adaptation gains and the composite-error mixing constant."""

    k_pd: np.ndarray
    gamma_phi: np.ndarray
    gamma_d: np.ndarray
    gamma: float

    def validate(self) -> None:
        for name, n in (("k_pd", 6), ("gamma_phi", N_PARAMS), ("gamma_d", 6)):
            m = np.asarray(getattr(self, name))
            if m.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
            ok, lam = plant.check_spd(m)
            if not ok:
                raise ValueError(f"{name} must be symmetric positive definite (lambda_min={lam:.3e})")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")


def default_gains(
    k_pd_diag: np.ndarray | None = None,
    gamma: float = 0.3,
    rate_body: float = 1e-4,
    rate_damping: np.ndarray | None = None,
    rate_stiffness: np.ndarray | None = None,
    rate_friction: np.ndarray | None = None,
    rate_grasp: float = 1.0,
) -> ControllerGains:
    """Diagonal gain set with per-group adaptation rates.

    Body parameters (mass, offsets, inertia) get a tiny rate: their regressor
    columns vanish whenever the desired rates are zero, so in a detumbling
    run they are never excited and a large weight would only park estimation
    error in the Lyapunov function.
    """
    if k_pd_diag is None:
        k_pd_diag = np.array([60.0, 60.0, 60.0, 25.0, 25.0, 25.0])
    if rate_damping is None:
        rate_damping = np.array([1.0, 1.0, 0.05])
    if rate_stiffness is None:
        rate_stiffness = np.array([1.0, 1.0, 0.05])
    if rate_friction is None:
        rate_friction = np.array([1.0, 1.0, 1.0])
    gp = np.empty(N_PARAMS)
    gp[:13] = rate_body
    gp[_SLICE_DAMPING] = rate_damping
    gp[_SLICE_STIFFNESS] = rate_stiffness
    gp[_SLICE_FRICTION] = rate_friction
    return ControllerGains(
        k_pd=np.diag(np.asarray(k_pd_diag, dtype=float)),
        gamma_phi=np.diag(gp),
        gamma_d=rate_grasp * np.eye(6),
        gamma=gamma,
    )


@dataclass
class ParameterEstimate:
    """Adaptive state: 22 physical parameters and the stacked grasp offsets."""

    phi_hat: np.ndarray = field(default_factory=lambda: np.zeros(N_PARAMS))
    d_hat: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def copy(self) -> "ParameterEstimate":
        return ParameterEstimate(self.phi_hat.copy(), self.d_hat.copy())


@dataclass(frozen=True)
class DesiredMotion:
    """Anchor pose with zero desired rates (detumbling target)."""

    p_d: np.ndarray
    R_d: np.ndarray
    v_d: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w_d: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_d: np.ndarray = field(default_factory=lambda: np.zeros(6))


@dataclass(frozen=True)
class CompositeError:
    """Sliding-style error: linear slot epsilon, angular slot o."""

    epsilon: np.ndarray
    o: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate((self.epsilon, self.o))


def composite_error(meas: plant.SpatialState, des: DesiredMotion, gamma: float) -> CompositeError:
    """Combine velocity errors with gamma-weighted pose errors.

    Errors are in the desired-minus-actual sense. The attitude term uses the
    antisymmetric part of the rotation error, which vanishes exactly at the
    target attitude and is restoring elsewhere.
    """
    e_p = des.p_d - meas.p
    e_p_dot = des.v_d - meas.v
    e_w = des.w_d - meas.w1
    r_e = des.R_d.T @ meas.R1
    s_e = 0.5 * gamma * (des.R_d @ vee(r_e.T - r_e))
    return CompositeError(epsilon=e_p_dot + gamma * e_p, o=e_w + s_e)


def true_parameter_vector(truth: plant.SatelliteTruth) -> np.ndarray:
    """Ground-truth value of the 22-entry parameter vector (diagnostics only)."""
    phi = np.empty(N_PARAMS)
    phi[0] = truth.link1.mass + truth.link2.mass
    phi[_SLICE_PI1] = truth.link1.mass * truth.link1.com_offset
    phi[_SLICE_PI2] = truth.link2.mass * truth.link2.com_offset
    j1 = parallel_axis(truth.link1.inertia_cm, truth.link1.mass, truth.link1.com_offset)
    j2 = parallel_axis(truth.link2.inertia_cm, truth.link2.mass, truth.link2.com_offset)
    phi[_SLICE_J1] = np.diag(j1)
    phi[_SLICE_J2] = np.diag(j2) + truth.hinge.rotor_inertia
    phi[_SLICE_DAMPING] = truth.hinge.damping
    phi[_SLICE_STIFFNESS] = truth.hinge.stiffness
    phi[_SLICE_FRICTION] = truth.hinge.friction
    return phi


def true_grasp_vector(truth: plant.SatelliteTruth) -> np.ndarray:
    return np.concatenate((truth.grasp1, truth.grasp2))


def _offset_columns(
    r: np.ndarray, omega: np.ndarray, v: np.ndarray, qdd: np.ndarray, qd: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Regressor columns of one link's mass-weighted COM offset."""
    a_d, alpha_d = qdd[:3], qdd[3:]
    v_d, w_d = qd[:3], qd[3:]
    ox = skew(omega)
    force = (skew(alpha_d) + ox @ skew(w_d) - 2.0 * skew(np.cross(omega, w_d))) @ r
    torque = (-skew(a_d) + ox @ skew(v_d) - skew(w_d) @ skew(v)) @ r
    return force, torque


def _inertia_columns(
    r: np.ndarray, omega: np.ndarray, qdd: np.ndarray, qd: np.ndarray
) -> np.ndarray:
    """Torque-slot columns of one link's point-inertia diagonal."""
    alpha_d, w_d = qdd[3:], qd[3:]
    cols = np.empty((3, 3))
    ox = skew(omega)
    for j in range(3):
        axis = r[:, j]
        cols[:, j] = axis * (axis @ alpha_d) + ox @ axis * (axis @ w_d)
    return cols.reshape(3, 3)


def regressor_phi(
    meas: plant.SpatialState,
    des: DesiredMotion,
    err: CompositeError | None = None,
) -> np.ndarray:
    """Per-tug regressor Y (6 x 22): Y @ phi_true equals half the composite
    feed-forward wrench for every admissible state and desired signal.

    The feed-forward is evaluated on the desired rates/accelerations, so the
    body-parameter columns vanish in a detumbling run; the hinge columns are
    state-driven and carry the compensation sign (negative), pushing against
    the modeled hinge load. The composite error is accepted for signature
    compatibility but does not enter the columns.
    """
    del err
    qdd = des.accel_d
    qd = np.concatenate((des.v_d, des.w_d))
    theta_star, omega_star = plant.relative_rotation(meas)

    y = np.zeros((6, N_PARAMS))
    y[:3, 0] = qdd[:3]
    f1, t1 = _offset_columns(meas.R1, meas.w1, meas.v, qdd, qd)
    f2, t2 = _offset_columns(meas.R2, meas.w2, meas.v, qdd, qd)
    y[:3, _SLICE_PI1] = f1
    y[3:, _SLICE_PI1] = t1
    y[:3, _SLICE_PI2] = f2
    y[3:, _SLICE_PI2] = t2
    y[3:, _SLICE_J1] = _inertia_columns(meas.R1, meas.w1, qdd, qd)
    y[3:, _SLICE_J2] = _inertia_columns(meas.R2, meas.w2, qdd, qd)
    y[3:, _SLICE_DAMPING] = -2.0 * meas.R1 * omega_star
    y[3:, _SLICE_STIFFNESS] = -2.0 * meas.R1 * theta_star
    y[3:, _SLICE_FRICTION] = -2.0 * meas.R1 * np.sign(omega_star)
    return 0.5 * y


def regressor_d(
    commanded: tuple[np.ndarray, np.ndarray], meas: plant.SpatialState
) -> np.ndarray:
    """Grasp-offset regressor Y_d (6 x 6).

    Built from the commanded tug forces: Y_d @ (d_hat - d_true) is exactly the
    wrench delivery error caused by commanding the tugs through mismatched
    grasp maps (the force rows are zero because forces transport unchanged).
    """
    tug1, tug2 = commanded
    y = np.zeros((6, 6))
    y[3:, :3] = skew(tug1[:3]) @ meas.R1
    y[3:, 3:] = skew(tug2[:3]) @ meas.R2
    return y


def control_wrench(
    y_phi: np.ndarray,
    est: ParameterEstimate,
    err: CompositeError,
    gains: ControllerGains,
) -> np.ndarray:
    """Composite commanded wrench: adaptive feed-forward plus PD on the error.

    The PD term acts along the composite error (desired-minus-actual sense),
    driving the measured rates toward the anchor. Each tug realizes half of
    this wrench through the inverse of its estimated grasp map.
    """
    s = err.stacked()
    return 2.0 * (y_phi @ est.phi_hat) + gains.k_pd @ s


def adaptation_step(
    y_phi: np.ndarray,
    y_d: np.ndarray,
    err: CompositeError,
    gains: ControllerGains,
    est: ParameterEstimate,
    dt: float,
) -> ParameterEstimate:
    """Explicit-Euler gradient update of both estimates.

    Pure gradient: no projection or deadzone; boundedness is monitored by the
    runner instead of enforced. The caller passes the same regressors that
    produced the commanded wrench so the update descends the tracking error.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    s = err.stacked()
    phi = est.phi_hat + dt * (gains.gamma_phi @ (y_phi.T @ s))
    d = est.d_hat + dt * (gains.gamma_d @ (y_d.T @ s))
    return ParameterEstimate(phi, d)


def lyapunov_value(
    err: CompositeError,
    est: ParameterEstimate,
    truth: plant.SatelliteTruth,
    meas: plant.SpatialState,
    gains: ControllerGains,
) -> float:
    """Stability monitor: error energy plus gain-weighted estimation error.

    Needs the ground truth, so it is a simulation-side diagnostic only; it is
    zero exactly when the composite error vanishes and both estimates match
    the truth.
    """
    s = err.stacked()
    m_nu = plant.mass_composite(truth, meas)
    phi_err = est.phi_hat - true_parameter_vector(truth)
    d_err = est.d_hat - true_grasp_vector(truth)
    return float(
        0.5 * s @ m_nu @ s
        + 0.5 * phi_err @ gains.gamma_phi @ phi_err
        + 0.5 * d_err @ gains.gamma_d @ d_err
    )
