"""Quadrotor and fixed-wing UAV models.

Quadrotor state: ``(x, y, z, phi, theta, psi)`` followed by their first
derivatives; phi is roll, theta pitch, psi yaw. Inputs are the four motor
speeds.

Fixed-wing state: ``(p_n, p_e, h, psi, gamma, Va)``; inputs are the lift
coefficient, thrust and roll angle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._util import SingularityError, check_positive, cols, pack

MIN_AIRSPEED = 0.01


@dataclass(frozen=True)
class QuadrotorParams:
    mass: float
    gravity: float
    arm_length: float
    Ix: float
    Iy: float
    Iz: float
    motor_inertia: float
    thrust_factor: float
    drag_factor: float

    def __post_init__(self):
        check_positive(
            "QuadrotorParams",
            mass=self.mass,
            gravity=self.gravity,
            arm_length=self.arm_length,
            Ix=self.Ix,
            Iy=self.Iy,
            Iz=self.Iz,
            thrust_factor=self.thrust_factor,
            drag_factor=self.drag_factor,
        )
        if not np.isclose(self.Ix, self.Iy, rtol=1e-12, atol=0.0):
            raise ValueError("QuadrotorParams: a symmetric quadrotor needs Ix == Iy")
        if self.motor_inertia < 0:
            raise ValueError("QuadrotorParams: motor_inertia must be >= 0")

    @cached_property
    def mixing(self) -> np.ndarray:
        """Maps squared motor speeds to (ux, uy, uz, upsi)."""
        kb, kt = self.thrust_factor, self.drag_factor
        return np.array(
            [
                [-kb, 0.0, kb, 0.0],
                [0.0, kb, 0.0, -kb],
                [kb, kb, kb, kb],
                [kt, -kt, kt, -kt],
            ]
        )

    @cached_property
    def mixing_inv(self) -> np.ndarray:
        return np.linalg.inv(self.mixing)


@dataclass(frozen=True)
class QuadrotorState:
    position: tuple = (0.0, 0.0, 0.0)
    attitude: tuple = (0.0, 0.0, 0.0)
    velocity: tuple = (0.0, 0.0, 0.0)
    attitude_rate: tuple = (0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.attitude, self.velocity, self.attitude_rate]).astype(float)


class InfeasibleCommandError(ValueError):
    pass


def quadrotor_unmix(motor_speeds, params: QuadrotorParams):
    """Motor speeds -> (ux, uy, uz, upsi, q_w)."""
    w = np.asarray(motor_speeds, dtype=float)
    u4 = (w * w) @ params.mixing.T
    w1, w2, w3, w4 = cols(w)
    return u4, w1 - w2 + w3 - w4


def quadrotor_mix(u4, params: QuadrotorParams):
    """Solve for squared motor speeds that realise ``(ux, uy, uz, upsi)``."""
    sq = np.asarray(u4, dtype=float) @ params.mixing_inv.T
    if np.any(sq < -1e-12 * np.max(np.abs(sq), initial=1.0)):
        raise InfeasibleCommandError(f"command requires negative squared motor speed: {sq}")
    return np.maximum(sq, 0.0)


def hover_motor_speed(params: QuadrotorParams) -> float:
    return float(np.sqrt(params.mass * params.gravity / (4 * params.thrust_factor)))


def quadrotor_derivative(state, motor_speeds, params: QuadrotorParams):
    state = state.as_array() if isinstance(state, QuadrotorState) else state
    if np.ndim(state) == 1 and np.ndim(motor_speeds) == 1:
        return _quadrotor_derivative_single(state, motor_speeds, params)
    if np.any(np.asarray(motor_speeds) < 0):
        raise ValueError("motor speeds must be >= 0")
    _, _, _, phi, theta, psi, vx, vy, vz, dphi, dtheta, dpsi = cols(state)
    u4, qw = quadrotor_unmix(motor_speeds, params)
    ux, uy, uz, upsi = cols(u4)
    p = params
    cphi, sphi = np.cos(phi), np.sin(phi)
    cth, sth = np.cos(theta), np.sin(theta)
    cpsi, spsi = np.cos(psi), np.sin(psi)
    thrust = uz / p.mass
    ax = (cphi * sth * cpsi + sphi * spsi) * thrust
    ay = (cphi * sth * spsi - sphi * cpsi) * thrust
    az = cphi * cth * thrust - p.gravity
    ddphi = (p.Iy - p.Iz) / p.Ix * dtheta * dpsi - p.motor_inertia / p.Ix * dtheta * qw + p.arm_length * uy / p.Ix
    ddtheta = (p.Iz - p.Ix) / p.Iy * dphi * dpsi + p.motor_inertia / p.Iy * dphi * qw + p.arm_length * ux / p.Iy
    ddpsi = (p.Ix - p.Iy) / p.Iz * dphi * dtheta + upsi / p.Iz
    return pack(vx, vy, vz, dphi, dtheta, dpsi, ax, ay, az, ddphi, ddtheta, ddpsi)


def _quadrotor_derivative_single(state, motor_speeds, p: QuadrotorParams):
    """Same equations on plain floats; long single rollouts spend most of their time here."""
    _, _, _, phi, theta, psi, vx, vy, vz, dphi, dtheta, dpsi = np.asarray(state, dtype=float).tolist()
    w1, w2, w3, w4 = np.asarray(motor_speeds, dtype=float).tolist()
    if min(w1, w2, w3, w4) < 0:
        raise ValueError("motor speeds must be >= 0")
    ux, uy, uz, upsi = ((np.array([w1 * w1, w2 * w2, w3 * w3, w4 * w4]) @ p.mixing.T)).tolist()
    qw = w1 - w2 + w3 - w4
    cphi, sphi = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    cpsi, spsi = math.cos(psi), math.sin(psi)
    thrust = uz / p.mass
    return np.array([
        vx, vy, vz, dphi, dtheta, dpsi,
        (cphi * sth * cpsi + sphi * spsi) * thrust,
        (cphi * sth * spsi - sphi * cpsi) * thrust,
        cphi * cth * thrust - p.gravity,
        (p.Iy - p.Iz) / p.Ix * dtheta * dpsi - p.motor_inertia / p.Ix * dtheta * qw + p.arm_length * uy / p.Ix,
        (p.Iz - p.Ix) / p.Iy * dphi * dpsi + p.motor_inertia / p.Iy * dphi * qw + p.arm_length * ux / p.Iy,
        (p.Ix - p.Iy) / p.Iz * dphi * dtheta + upsi / p.Iz,
    ])


@dataclass(frozen=True)
class FixedWingParams:
    mass: float
    gravity: float
    air_density: float
    wing_area: float
    cd0: float
    k_induced: float

    def __post_init__(self):
        check_positive(
            "FixedWingParams",
            mass=self.mass,
            gravity=self.gravity,
            air_density=self.air_density,
            wing_area=self.wing_area,
            cd0=self.cd0,
            k_induced=self.k_induced,
        )


@dataclass(frozen=True)
class FixedWingState:
    p_n: float
    p_e: float
    h: float
    psi: float
    gamma: float
    Va: float

    def __post_init__(self):
        if not self.Va > 0:
            raise ValueError("FixedWingState: airspeed must be > 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.p_n, self.p_e, self.h, self.psi, self.gamma, self.Va])


def _fw(state):
    return state.as_array() if isinstance(state, FixedWingState) else state


def aero_forces(Va, CL, params: FixedWingParams):
    q = 0.5 * params.air_density * Va**2 * params.wing_area
    return q * CL, q * (params.cd0 + params.k_induced * CL**2)


def fixedwing_derivative(state, CL, thrust, phi, params: FixedWingParams):
    _, _, _, psi, gamma, Va = cols(_fw(state))
    if np.any(Va <= MIN_AIRSPEED):
        raise SingularityError(f"fixed-wing model is singular at airspeed <= {MIN_AIRSPEED} m/s")
    lift, drag = aero_forces(Va, CL, params)
    m, g = params.mass, params.gravity
    return pack(
        Va * np.cos(psi) * np.cos(gamma),
        Va * np.sin(psi) * np.cos(gamma),
        Va * np.sin(gamma),
        lift / (m * Va) * np.sin(phi) / np.cos(gamma),
        lift / (m * Va) * np.cos(phi) - g / Va * np.cos(gamma),
        thrust / m - drag / m - g * np.sin(gamma),
    )


def fixedwing_level_kinematics(state, phi, params: FixedWingParams):
    """Constant altitude and airspeed reduction: a unicycle with turn rate (g/Va) tan(phi)."""
    _, _, _, psi, _, Va = cols(_fw(state))
    return pack(Va * np.cos(psi), Va * np.sin(psi), params.gravity / Va * np.tan(phi))


def level_trim(Va, phi, params: FixedWingParams):
    """Lift coefficient and thrust that hold altitude and airspeed at bank ``phi``."""
    q = 0.5 * params.air_density * Va**2 * params.wing_area
    CL = params.mass * params.gravity / (np.cos(phi) * q)
    _, drag = aero_forces(Va, CL, params)
    return CL, drag


def min_turn_radius(Va, phi_max, gravity):
    return Va**2 / (gravity * np.tan(phi_max))


LONGITUDINAL_STATES = ("u", "w", "q", "theta", "h")
LONGITUDINAL_INPUTS = ("delta_e", "tau")
LATERAL_STATES = ("v", "p", "r", "phi", "psi")
LATERAL_INPUTS = ("delta_a", "delta_r")


@dataclass(frozen=True)
class LinearAircraftModel:
    """Decoupled linearised longitudinal (A, B) and lateral (C, D) models."""

    A: np.ndarray | None = None
    B: np.ndarray | None = None
    C: np.ndarray | None = None
    D: np.ndarray | None = None
    labels: dict = field(
        default_factory=lambda: {
            "longitudinal": (LONGITUDINAL_STATES, LONGITUDINAL_INPUTS),
            "lateral": (LATERAL_STATES, LATERAL_INPUTS),
        }
    )

    def __post_init__(self):
        shapes = {"A": (5, 5), "B": (5, 2), "C": (5, 5), "D": (5, 2)}
        for name, shape in shapes.items():
            m = getattr(self, name)
            if m is None:
                continue
            m = np.asarray(m, dtype=float)
            if m.shape != shape:
                raise ValueError(f"LinearAircraftModel: {name} must be {shape}, got {m.shape}")
            object.__setattr__(self, name, m)

    def matrices(self, axis):
        pair = {"longitudinal": ("A", "B"), "lateral": ("C", "D")}.get(axis)
        if pair is None:
            raise ValueError(f"axis must be 'longitudinal' or 'lateral', got {axis!r}")
        mats = [getattr(self, n) for n in pair]
        if any(m is None for m in mats):
            raise ValueError(f"LinearAircraftModel: matrices {pair} are required for the {axis} axis")
        return mats


def linear_aircraft_derivative(model: LinearAircraftModel, state, inputs, axis="longitudinal"):
    M, N = model.matrices(axis)
    return np.asarray(state, dtype=float) @ M.T + np.asarray(inputs, dtype=float) @ N.T


def example_linear_aircraft() -> LinearAircraftModel:
    """An illustrative small-UAV trim set around 25 m/s level flight.

    The numbers are representative of a ~13 kg airframe and are meant for
    demos and tests, not for any specific aircraft.
    """
    A = np.array(
        [
            [-0.20, 0.50, -1.20, -9.80, 0.0],
            [-0.60, -4.10, 24.0, -0.60, 0.0],
            [0.20, -3.90, -4.70, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 25.0, 0.0],
        ]
    )
    B = np.array([[-0.14, 43.0], [-2.6, 0.0], [-36.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    C = np.array(
        [
            [-0.78, 1.20, -24.9, 9.80, 0.0],
            [-3.90, -22.7, 10.7, 0.0, 0.0],
            [0.80, -0.20, -1.10, 0.0, 0.0],
            [0.0, 1.0, 0.05, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0],
        ]
    )
    D = np.array([[1.50, 3.80], [130.0, -1.40], [5.70, -24.0], [0.0, 0.0], [0.0, 0.0]])
    return LinearAircraftModel(A=A, B=B, C=C, D=D)
