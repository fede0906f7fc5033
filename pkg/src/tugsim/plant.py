"""Ground-truth dynamics of the two-link compliant satellite.

The satellite is modeled as two rigid links joined at a single shared point P
(the measurement point, placed at the malfunctioning hinge). Link-1 is the
base module, Link-2 the compliant solar panel. The joint transmits force but
no constraint torque; all three relative rotation axes are compliant, loaded
by a per-axis spring, viscous damper and Coulomb friction torque.

State and frames
----------------
* p, v           position/velocity of P in the world frame.
* R1, R2         link body-to-world rotations.
* w1, w2         world-frame angular velocities of the links.
* com_offset d   position of a link's center of mass relative to P, link frame.
* theta_star     hinge deflection: rotation vector of R1^T R2 (frame of link 1).
* omega_star     relative angular rate R1^T (w2 - w1) (frame of link 1).

All 6x6 matrices here act on stacked (linear, angular) coordinates of the
measurement point. The hinge torque acts with equal magnitude and opposite
sign on the two links, so it cancels from the total (two-link) wrench balance;
the simulation integrates the full 9-DOF system (v, w1, w2) exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grasp import GraspMap, apply_grasp
from .spatial import is_rotation, parallel_axis, rot_to_angle_vector, skew

COND_LIMIT = 1e12


class IllConditionedError(RuntimeError):
    """Mass matrix condition number exceeded COND_LIMIT."""


@dataclass(frozen=True)
class LinkParams:
    """Mass properties of one link.

    com_offset is the center-of-mass position relative to the measurement
    point, expressed in the link body frame.
    """

    mass: float
    inertia_cm: np.ndarray
    com_offset: np.ndarray

    def validate(self) -> None:
        if not self.mass > 0.0:
            raise ValueError("m > 0 required for link mass")
        i = np.asarray(self.inertia_cm, dtype=float)
        if i.shape != (3, 3) or np.linalg.norm(i - i.T) > 1e-9 * max(1.0, np.linalg.norm(i)):
            raise ValueError("inertia_cm must be a symmetric 3x3 matrix")
        lam = np.sort(np.linalg.eigvalsh(i))
        if lam[0] <= 0.0:
            raise ValueError("inertia_cm must be positive definite")
        if lam[2] > lam[0] + lam[1] + 1e-12:
            raise ValueError("inertia_cm violates the triangle inequality on its eigenvalues")
        if not np.all(np.isfinite(self.com_offset)):
            raise ValueError("com_offset must be finite")


@dataclass(frozen=True)
class HingeParams:
    """Per-axis hinge coefficients, expressed in the frame of link 1.

    stiffness (N*m/rad), damping (N*m*s/rad) and friction (N*m, Coulomb
    magnitude) apply componentwise to the hinge deflection and rate.
    load_split is the fraction of the doubled hinge load booked against
    link 1 in the per-link wrench model; it cancels from the composite.
    rotor_inertia is the diagonal of the hinge rotor inertia, which spins
    with link 2 and sits at the measurement point.
    """

    stiffness: np.ndarray
    damping: np.ndarray
    friction: np.ndarray
    load_split: float = 0.5
    rotor_inertia: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def validate(self) -> None:
        for name in ("stiffness", "damping", "friction", "rotor_inertia"):
            val = np.asarray(getattr(self, name), dtype=float)
            if val.shape != (3,) or not np.all(np.isfinite(val)) or np.any(val < 0.0):
                raise ValueError(f"hinge {name} must be a finite nonnegative 3-vector")
        if not 0.0 < self.load_split < 1.0:
            raise ValueError("hinge load_split must lie in (0, 1)")


@dataclass(frozen=True)
class SatelliteTruth:
    """Full plant parameter set, hidden from the controller."""

    link1: LinkParams
    link2: LinkParams
    hinge: HingeParams
    grasp1: np.ndarray
    grasp2: np.ndarray

    def validate(self) -> None:
        self.link1.validate()
        self.link2.validate()
        self.hinge.validate()
        for g in (self.grasp1, self.grasp2):
            if np.asarray(g).shape != (3,) or not np.all(np.isfinite(g)):
                raise ValueError("grasp offsets must be finite 3-vectors")


@dataclass
class SpatialState:
    """Pose and twist of the measurement point plus both link attitudes."""

    p: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    v: np.ndarray
    w1: np.ndarray
    w2: np.ndarray

    def copy(self) -> "SpatialState":
        return SpatialState(
            self.p.copy(), self.R1.copy(), self.R2.copy(),
            self.v.copy(), self.w1.copy(), self.w2.copy(),
        )

    def validate(self) -> None:
        for name in ("p", "v", "w1", "w2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"state field {name} must be finite")
        for name in ("R1", "R2"):
            if not is_rotation(getattr(self, name), tol=1e-6):
                raise ValueError(f"state field {name} is not a rotation matrix")


def relative_rotation(state: SpatialState) -> tuple[np.ndarray, np.ndarray]:
    """Hinge deflection vector and relative angular rate, both in frame 1.

    The deflection is the rotation vector of R1^T R2; its exact time
    derivative equals omega_star only to first order in the deflection
    (the rotation-vector rate picks up a Jacobian factor at finite angles).
    """
    theta_star = rot_to_angle_vector(state.R1.T @ state.R2)
    omega_star = state.R1.T @ (state.w2 - state.w1)
    return theta_star, omega_star


def hinge_wrench(hinge: HingeParams, theta_star: np.ndarray, omega_star: np.ndarray) -> np.ndarray:
    """Spring + damper + Coulomb friction wrench, frame of link 1, zero force.

    sign(0) = 0, so there is no stiction band: a resting hinge transmits only
    the spring torque.
    """
    torque = (
        hinge.stiffness * theta_star
        + hinge.damping * omega_star
        + hinge.friction * np.sign(omega_star)
    )
    return np.concatenate((np.zeros(3), torque))


def mass_matrix(link: LinkParams, r: np.ndarray, rotor_diag: np.ndarray | None = None) -> np.ndarray:
    """Spatial inertia of one link about the measurement point, world frame.

    The rotational block carries the parallel-axis inertia (plus the rotor
    diagonal when given); the off-diagonal blocks couple translation and
    rotation through the center-of-mass offset.
    """
    j_body = parallel_axis(link.inertia_cm, link.mass, link.com_offset)
    if rotor_diag is not None:
        j_body = j_body + np.diag(rotor_diag)
    u = r @ link.com_offset
    w = link.mass * skew(u)
    out = np.empty((6, 6))
    out[:3, :3] = link.mass * np.eye(3)
    out[:3, 3:] = -w
    out[3:, :3] = w
    out[3:, 3:] = r @ j_body @ r.T
    return out


def coriolis_matrix(
    link: LinkParams,
    r: np.ndarray,
    omega: np.ndarray,
    v: np.ndarray,
    rotor_diag: np.ndarray | None = None,
) -> np.ndarray:
    """Velocity-product matrix paired with mass_matrix.

    Satisfies both requirements the stability analysis needs: C @ (v, omega)
    is the true velocity-dependent wrench, and dM/dt = C + C^T exactly along
    the rigid-body flow (so x^T (dM/dt - 2C) x = 0 for every x).
    """
    j_body = parallel_axis(link.inertia_cm, link.mass, link.com_offset)
    if rotor_diag is not None:
        j_body = j_body + np.diag(rotor_diag)
    j_world = r @ j_body @ r.T
    u = r @ link.com_offset
    wx = skew(omega)
    mu = link.mass * skew(u)
    out = np.zeros((6, 6))
    out[:3, 3:] = -wx @ mu + 2.0 * mu @ wx
    out[3:, :3] = -wx @ mu
    out[3:, 3:] = wx @ j_world - skew(mu @ v)
    return out


def mass_composite(truth: SatelliteTruth, state: SpatialState) -> np.ndarray:
    """Combined two-link spatial inertia at the measurement point."""
    return (
        mass_matrix(truth.link1, state.R1)
        + mass_matrix(truth.link2, state.R2, truth.hinge.rotor_inertia)
    )


def coriolis_composite(truth: SatelliteTruth, state: SpatialState) -> np.ndarray:
    """Sum of the per-link velocity-product matrices (each on its own rate)."""
    return (
        coriolis_matrix(truth.link1, state.R1, state.w1, state.v)
        + coriolis_matrix(truth.link2, state.R2, state.w2, state.v, truth.hinge.rotor_inertia)
    )


def _hinge_world(truth: SatelliteTruth, state: SpatialState) -> np.ndarray:
    theta_star, omega_star = relative_rotation(state)
    return state.R1 @ hinge_wrench(truth.hinge, theta_star, omega_star)[3:]


def link_wrench_model(
    truth: SatelliteTruth, state: SpatialState, accel: np.ndarray, link_index: int
) -> np.ndarray:
    """Per-link share of the composite wrench model (diagnostic).

    Books the doubled hinge load split load_split : (1 - load_split) between
    the links so the two shares always sum to composite_dynamics.
    """
    h6 = np.concatenate((np.zeros(3), _hinge_world(truth, state)))
    lam = truth.hinge.load_split
    if link_index == 1:
        m = mass_matrix(truth.link1, state.R1)
        c = coriolis_matrix(truth.link1, state.R1, state.w1, state.v)
        rate = np.concatenate((state.v, state.w1))
        return m @ accel + c @ rate + 2.0 * lam * h6
    m = mass_matrix(truth.link2, state.R2, truth.hinge.rotor_inertia)
    c = coriolis_matrix(truth.link2, state.R2, state.w2, state.v, truth.hinge.rotor_inertia)
    rate = np.concatenate((state.v, state.w2))
    return m @ accel + c @ rate + 2.0 * (1.0 - lam) * h6


def composite_dynamics(truth: SatelliteTruth, state: SpatialState, accel: np.ndarray) -> np.ndarray:
    """Composite wrench model at the measurement point (diagnostic).

    Carries the doubled hinge terms of the single-state-variable model. Note
    the true per-link hinge reactions are equal and opposite, so they cancel
    from the physical two-link balance; this expression is the bookkeeping
    model the controller's parameter layout mirrors, not the simulated truth.
    """
    m_nu = mass_composite(truth, state)
    c1 = coriolis_matrix(truth.link1, state.R1, state.w1, state.v)
    c2 = coriolis_matrix(truth.link2, state.R2, state.w2, state.v, truth.hinge.rotor_inertia)
    h6 = np.concatenate((np.zeros(3), _hinge_world(truth, state)))
    return (
        m_nu @ accel
        + c1 @ np.concatenate((state.v, state.w1))
        + c2 @ np.concatenate((state.v, state.w2))
        + 2.0 * h6
    )


def _diag_inertia_world(r: np.ndarray, diag: np.ndarray) -> np.ndarray:
    return r @ np.diag(diag) @ r.T


def feedforward_reference(
    truth: SatelliteTruth,
    state: SpatialState,
    qdd_des: np.ndarray,
    qd_des: np.ndarray,
) -> np.ndarray:
    """Composite feed-forward wrench the controller's regressor factorizes.

    Inertia terms keep only the principal-axis (diagonal, link-frame) part of
    each link's point inertia so the whole expression is linear in the
    22-entry parameter vector; the hinge terms enter with a negative sign,
    i.e. the feed-forward pushes against the modeled hinge load on both links
    (shielding link 1 and reinforcing the panel's own dissipation).
    """
    m1, m2 = truth.link1.mass, truth.link2.mass
    pi1 = m1 * truth.link1.com_offset
    pi2 = m2 * truth.link2.com_offset
    j1_body = parallel_axis(truth.link1.inertia_cm, m1, truth.link1.com_offset)
    j2_body = parallel_axis(truth.link2.inertia_cm, m2, truth.link2.com_offset) + np.diag(
        truth.hinge.rotor_inertia
    )
    j1 = _diag_inertia_world(state.R1, np.diag(j1_body))
    j2 = _diag_inertia_world(state.R2, np.diag(j2_body))
    w1x = skew(state.R1 @ pi1)
    w2x = skew(state.R2 @ pi2)

    m_ff = np.zeros((6, 6))
    m_ff[:3, :3] = (m1 + m2) * np.eye(3)
    m_ff[:3, 3:] = -(w1x + w2x)
    m_ff[3:, :3] = w1x + w2x
    m_ff[3:, 3:] = j1 + j2

    c_ff = np.zeros((6, 6))
    for wx, omega, j in ((w1x, state.w1, j1), (w2x, state.w2, j2)):
        ox = skew(omega)
        c_ff[:3, 3:] += -ox @ wx + 2.0 * wx @ ox
        c_ff[3:, :3] += -ox @ wx
        c_ff[3:, 3:] += ox @ j - skew(wx @ state.v)

    h6 = np.concatenate((np.zeros(3), _hinge_world(truth, state)))
    return m_ff @ qdd_des + c_ff @ qd_des - 2.0 * h6


def _delivered_wrenches(
    truth: SatelliteTruth,
    state: SpatialState,
    tug1: np.ndarray,
    tug2: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    w1 = apply_grasp(GraspMap(state.R1, truth.grasp1), tug1)
    w2 = apply_grasp(GraspMap(state.R2, truth.grasp2), tug2)
    return w1, w2


def _system_matrix(truth: SatelliteTruth, state: SpatialState) -> np.ndarray:
    m1 = mass_matrix(truth.link1, state.R1)
    m2 = mass_matrix(truth.link2, state.R2, truth.hinge.rotor_inertia)
    a = np.zeros((9, 9))
    a[:3, :3] = m1[:3, :3] + m2[:3, :3]
    a[:3, 3:6] = m1[:3, 3:]
    a[:3, 6:] = m2[:3, 3:]
    a[3:6, :3] = m1[3:, :3]
    a[3:6, 3:6] = m1[3:, 3:]
    a[6:, :3] = m2[3:, :3]
    a[6:, 6:] = m2[3:, 3:]
    return a


def accelerations(
    truth: SatelliteTruth,
    state: SpatialState,
    tug1: np.ndarray,
    tug2: np.ndarray,
    check_conditioning: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve the full 9-DOF wrench balance for (v_dot, w1_dot, w2_dot).

    tug1/tug2 are the wrenches the tugs exert at their grasp points; they are
    transported through the true grasp maps internally. The joint constraint
    force is eliminated by summing the two force rows, leaving a symmetric
    positive definite 9x9 system.
    """
    t1, t2 = _delivered_wrenches(truth, state, tug1, tug2)
    c1 = coriolis_matrix(truth.link1, state.R1, state.w1, state.v)
    c2 = coriolis_matrix(truth.link2, state.R2, state.w2, state.v, truth.hinge.rotor_inertia)
    vel1 = c1 @ np.concatenate((state.v, state.w1))
    vel2 = c2 @ np.concatenate((state.v, state.w2))
    h = _hinge_world(truth, state)

    a = _system_matrix(truth, state)
    if check_conditioning:
        lam = np.linalg.eigvalsh(a)
        if lam[0] <= 0.0 or lam[-1] / lam[0] > COND_LIMIT:
            raise IllConditionedError(
                f"mass matrix condition number {lam[-1] / max(lam[0], 1e-300):.3e} exceeds {COND_LIMIT:.0e}"
            )

    b = np.empty(9)
    b[:3] = t1[:3] + t2[:3] - vel1[:3] - vel2[:3]
    b[3:6] = t1[3:] + h - vel1[3:]
    b[6:] = t2[3:] - h - vel2[3:]
    x = np.linalg.solve(a, b)
    return x[:3], x[3:6], x[6:]


def forward_dynamics(
    truth: SatelliteTruth,
    state: SpatialState,
    tug1: np.ndarray,
    tug2: np.ndarray,
    lock_hinge: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Accelerations of the measurement point plus the hinge relative term.

    Returns (accel6, hinge_angular_accel) where accel6 stacks (v_dot, w1_dot)
    and hinge_angular_accel = w2_dot - w1_dot in the world frame. With
    lock_hinge the links are rigidized (w2 follows w1 and the relative
    acceleration is zero); the hinge wrench then acts as an internal
    constraint and drops out.
    """
    if lock_hinge:
        t1, t2 = _delivered_wrenches(truth, state, tug1, tug2)
        m_nu = mass_composite(truth, state)
        lam = np.linalg.eigvalsh(m_nu)
        if lam[0] <= 0.0 or lam[-1] / lam[0] > COND_LIMIT:
            raise IllConditionedError("rigidized mass matrix is ill-conditioned")
        c1 = coriolis_matrix(truth.link1, state.R1, state.w1, state.v)
        c2 = coriolis_matrix(truth.link2, state.R2, state.w1, state.v, truth.hinge.rotor_inertia)
        rate = np.concatenate((state.v, state.w1))
        accel = np.linalg.solve(m_nu, t1 + t2 - c1 @ rate - c2 @ rate)
        return accel, np.zeros(3)
    v_dot, w1_dot, w2_dot = accelerations(truth, state, tug1, tug2)
    return np.concatenate((v_dot, w1_dot)), w2_dot - w1_dot


def check_spd(m: np.ndarray, rel_tol: float = 1e-8) -> tuple[bool, float]:
    """Symmetry within rel_tol (relative) and positive definiteness.

    Returns (passed, smallest eigenvalue of the symmetric part).
    """
    scale = max(np.linalg.norm(m), 1e-300)
    symmetric = np.linalg.norm(m - m.T) < rel_tol * scale
    lam_min = float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])
    return bool(symmetric and lam_min > 0.0), lam_min


def com_velocities(truth: SatelliteTruth, state: SpatialState) -> tuple[np.ndarray, np.ndarray]:
    v1 = state.v + np.cross(state.w1, state.R1 @ truth.link1.com_offset)
    v2 = state.v + np.cross(state.w2, state.R2 @ truth.link2.com_offset)
    return v1, v2


def linear_momentum(truth: SatelliteTruth, state: SpatialState) -> np.ndarray:
    v1, v2 = com_velocities(truth, state)
    return truth.link1.mass * v1 + truth.link2.mass * v2


def angular_momentum(truth: SatelliteTruth, state: SpatialState) -> np.ndarray:
    """Total angular momentum about the world origin."""
    v1, v2 = com_velocities(truth, state)
    c1 = state.p + state.R1 @ truth.link1.com_offset
    c2 = state.p + state.R2 @ truth.link2.com_offset
    j1 = state.R1 @ truth.link1.inertia_cm @ state.R1.T
    j2 = state.R2 @ truth.link2.inertia_cm @ state.R2.T
    j_rot = state.R2 @ np.diag(truth.hinge.rotor_inertia) @ state.R2.T
    return (
        np.cross(c1, truth.link1.mass * v1)
        + np.cross(c2, truth.link2.mass * v2)
        + j1 @ state.w1
        + (j2 + j_rot) @ state.w2
    )


def kinetic_energy(truth: SatelliteTruth, state: SpatialState) -> float:
    v1, v2 = com_velocities(truth, state)
    j1 = state.R1 @ truth.link1.inertia_cm @ state.R1.T
    j2 = state.R2 @ truth.link2.inertia_cm @ state.R2.T
    j_rot = state.R2 @ np.diag(truth.hinge.rotor_inertia) @ state.R2.T
    return float(
        0.5 * truth.link1.mass * (v1 @ v1)
        + 0.5 * truth.link2.mass * (v2 @ v2)
        + 0.5 * state.w1 @ j1 @ state.w1
        + 0.5 * state.w2 @ (j2 + j_rot) @ state.w2
    )


def spring_energy(truth: SatelliteTruth, state: SpatialState) -> float:
    theta_star, _ = relative_rotation(state)
    return float(0.5 * theta_star @ (truth.hinge.stiffness * theta_star))


def total_energy(truth: SatelliteTruth, state: SpatialState, include_spring: bool = True) -> float:
    e = kinetic_energy(truth, state)
    if include_spring:
        e += spring_energy(truth, state)
    return e


def zero_dissipation(truth: SatelliteTruth, zero_spring: bool = False) -> SatelliteTruth:
    """Copy of the truth with damping and friction (optionally spring) removed."""
    hinge = replace(
        truth.hinge,
        damping=np.zeros(3),
        friction=np.zeros(3),
        stiffness=np.zeros(3) if zero_spring else truth.hinge.stiffness,
    )
    return replace(truth, hinge=hinge)
