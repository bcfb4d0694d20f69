"""Motion-energy models evaluated over sampled trajectories.

Two quadrature conventions are used. Integrands that depend on a
piecewise-constant control ``u_k`` are integrated interval by interval with
the trapezoid rule, pairing ``u_k`` with the states at both interval ends.
Integrands that only depend on sampled profiles use the plain trapezoid rule
on the sample grid. Accelerations come from ``np.gradient`` (central
differences inside, one-sided at the ends).

All functions broadcast over leading batch axes; time runs along the
second-to-last axis for vector profiles and the last axis for scalar ones.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .motion._util import SingularityError
from .motion.dynamics import rotation_z
from .motion.integrate import Trajectory


class NegativeEnergyWarning(UserWarning):
    """An integrand went negative somewhere (power flowing back to the battery)."""


class EfficiencyError(ValueError):
    pass


def _interval_trapezoid(left, right, dt):
    return np.sum(0.5 * (left + right), axis=-1) * dt


def _trapezoid(samples, dt):
    return np.trapezoid(samples, dx=dt, axis=-1)


def _flag_negative(values, what):
    if np.any(np.asarray(values) < 0):
        warnings.warn(f"{what}: integrand is negative on part of the trajectory", NegativeEnergyWarning, stacklevel=3)


def _require_controls(traj: Trajectory):
    if traj.controls is None:
        raise ValueError("energy model needs the trajectory's control sequence")
    return traj.controls


@dataclass(frozen=True)
class MotorElectricParams:
    k1: float
    k2: float = 0.0
    Vs: float = 1.0

    def __post_init__(self):
        if not self.k1 > 0:
            raise ValueError("MotorElectricParams: k1 must be > 0")


def square_norm_energy(controls, dt) -> np.ndarray:
    """Integral of ``||u||^2`` for a piecewise-constant schedule (control-units^2 * s)."""
    u = np.asarray(controls, dtype=float)
    sq = np.sum(u * u, axis=-1)
    return _interval_trapezoid(sq, sq, dt)


def electric_energy_ddr(traj: Trajectory, params: MotorElectricParams, Tq, z_indices=(3, 4)):
    """Electrical input energy of a differential drive, ``k1||u||^2 - k2 z^T Tq^-T u``.

    ``z`` (linear speed, heading rate) is read from ``z_indices`` of the state.
    """
    u = _require_controls(traj)
    Tq_inv = np.linalg.inv(np.asarray(Tq, dtype=float))
    z = traj.states[..., list(z_indices)]
    # z^T Tq^-T u = (Tq^-1 z) . u
    wheel = z @ Tq_inv.T
    sq = np.sum(u * u, axis=-1)
    left = params.k1 * sq - params.k2 * np.sum(wheel[..., :-1, :] * u, axis=-1)
    right = params.k1 * sq - params.k2 * np.sum(wheel[..., 1:, :] * u, axis=-1)
    if params.k2 != 0:
        _flag_negative(np.minimum(left, right), "electric_energy_ddr")
    return _interval_trapezoid(left, right, traj.dt)


def electric_energy_tomr(traj: Trajectory, params: MotorElectricParams, B, rate_indices=(3, 4, 5), heading_index=2):
    """Electrical input energy of a three-wheel omnidirectional robot, ``k1||u||^2 - k2 pdot^T R(phi) B u``."""
    u = _require_controls(traj)
    B = np.asarray(B, dtype=float)
    pdot = traj.states[..., list(rate_indices)]
    R = rotation_z(traj.states[..., heading_index])
    # pdot^T R = (R^T pdot)^T
    body = np.einsum("...ji,...j->...i", R, pdot)
    Bu = u @ B.T
    sq = np.sum(u * u, axis=-1)
    left = params.k1 * sq - params.k2 * np.sum(body[..., :-1, :] * Bu, axis=-1)
    right = params.k1 * sq - params.k2 * np.sum(body[..., 1:, :] * Bu, axis=-1)
    if params.k2 != 0:
        _flag_negative(np.minimum(left, right), "electric_energy_tomr")
    return _interval_trapezoid(left, right, traj.dt)


@dataclass(frozen=True)
class PhysicsEnergyParams:
    mass: float
    rotational_inertia: float
    friction_coefficient: float
    half_axle: float
    gravity: float = 9.81
    regeneration: bool = False

    def __post_init__(self):
        for name in ("mass", "rotational_inertia", "gravity"):
            if not getattr(self, name) > 0:
                raise ValueError(f"PhysicsEnergyParams: {name} must be > 0")
        if self.friction_coefficient < 0:
            raise ValueError("PhysicsEnergyParams: friction_coefficient must be >= 0")
        if self.half_axle < 0:
            raise ValueError("PhysicsEnergyParams: half_axle must be >= 0")


@dataclass(frozen=True)
class PhysicsEnergy:
    kinetic: float
    resistance: float

    @property
    def total(self):
        return self.kinetic + self.resistance


def physics_energy_ddr(v, omega, dt, params: PhysicsEnergyParams) -> PhysicsEnergy:
    """Kinetic plus floor-friction energy from sampled speed profiles.

    Without regeneration, decelerating phases contribute nothing to the
    kinetic term instead of refunding energy.
    """
    v = np.asarray(v, dtype=float)
    omega = np.asarray(omega, dtype=float)
    a = np.gradient(v, dt, axis=-1)
    beta = np.gradient(omega, dt, axis=-1)
    lin = params.mass * v * a
    rot = params.rotational_inertia * omega * beta
    if not params.regeneration:
        lin, rot = np.maximum(lin, 0.0), np.maximum(rot, 0.0)
    e_kin = _trapezoid(lin + rot, dt)
    drag = np.maximum(np.abs(v), params.half_axle * np.abs(omega))
    e_res = 2.0 * params.friction_coefficient * params.mass * params.gravity * _trapezoid(drag, dt)
    return PhysicsEnergy(e_kin, e_res)


@dataclass(frozen=True)
class PolynomialPowerModel:
    """Power as ``sum_j a_j s^j`` for ``j = j_min .. j_min + len(a) - 1``."""

    coefficients: tuple
    j_min: int = 0
    input_kind: str = "motor_speed"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not self.coefficients:
            raise ValueError("PolynomialPowerModel: need at least one coefficient")
        if self.j_min < -1 or self.j_max > 6:
            raise ValueError(f"PolynomialPowerModel: powers must lie in [-1, 6], got [{self.j_min}, {self.j_max}]")
        if self.input_kind not in ("motor_speed", "linear_speed"):
            raise ValueError(f"PolynomialPowerModel: unknown input_kind {self.input_kind!r}")

    @property
    def j_max(self) -> int:
        return self.j_min + len(self.coefficients) - 1


def polynomial_power(speed, model: PolynomialPowerModel):
    s = np.asarray(speed, dtype=float)
    uses_reciprocal = any(c != 0 for j, c in zip(range(model.j_min, 0), model.coefficients))
    if uses_reciprocal and np.any(s <= 0):
        raise SingularityError("polynomial power model with a 1/speed term is singular at speed <= 0")
    total = np.zeros_like(s)
    for j, c in zip(range(model.j_min, model.j_max + 1), model.coefficients):
        if c != 0:
            total = total + c * s**j
    return total


def polynomial_energy(speeds, dt, model: PolynomialPowerModel):
    return _trapezoid(polynomial_power(speeds, model), dt)


def trajectory_speeds(traj: Trajectory, position_indices=(0, 1)):
    """Speed along the path, from finite differences of the positions."""
    pos = traj.states[..., list(position_indices)]
    vel = np.gradient(pos, traj.dt, axis=-2)
    return np.linalg.norm(vel, axis=-1)


def distance_energy(profile, k: float, dt: float | None = None, position_indices=(0, 1)):
    """``k`` times the distance travelled.

    ``profile`` is either a :class:`Trajectory` (speeds are recovered from its
    positions) or an array of sampled speeds, in which case ``dt`` is needed.
    """
    if isinstance(profile, Trajectory):
        speeds, dt = trajectory_speeds(profile, position_indices), profile.dt
    else:
        if dt is None:
            raise ValueError("distance_energy: dt is required for a raw speed profile")
        speeds = np.abs(np.asarray(profile, dtype=float))
    return k * _trapezoid(speeds, dt)


def quadrotor_polynomial_energy(motor_speeds, dt, c):
    """Four-motor polynomial energy model.

    ``motor_speeds`` has shape ``(..., K, 4)``; ``c`` holds ten coefficients
    ``c0..c9`` of which ``c5`` is unused. Terms: ``c0..c4`` multiply powers of
    the motor speed, ``c6..c9`` multiply ``w'``, ``w'^2``, ``w w'`` and ``w^2 w'``.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (10,):
        raise ValueError(f"expected 10 coefficients c0..c9, got shape {c.shape}")
    w = np.asarray(motor_speeds, dtype=float)
    wd = np.gradient(w, dt, axis=-2)
    poly = c[0] + w * (c[1] + w * (c[2] + w * (c[3] + w * c[4])))
    integrand = poly + c[6] * wd + c[7] * wd**2 + c[8] * w * wd + c[9] * w**2 * wd
    return _trapezoid(np.sum(integrand, axis=-1), dt)


@dataclass(frozen=True)
class QuadrotorHybridParams:
    """Rotor inertia ``J``, drag ``K_tau``, viscous ``D_v`` and motor efficiency map.

    ``efficiency`` is a 4x3 array: rows are the cubic coefficients a, b, c, d of
    ``f_r(tau, w) = a tau^3 + b tau^2 + c tau + d``, each a quadratic
    ``p0 + p1 w + p2 w^2``. ``None`` means unit efficiency.
    """

    J: float
    K_tau: float
    D_v: float
    efficiency: np.ndarray | None = None
    min_efficiency: float = 1e-3

    def __post_init__(self):
        if self.efficiency is not None:
            eff = np.asarray(self.efficiency, dtype=float)
            if eff.shape != (4, 3):
                raise ValueError("QuadrotorHybridParams: efficiency must be a 4x3 coefficient array")
            object.__setattr__(self, "efficiency", eff)

    @staticmethod
    def constant_efficiency(value: float) -> np.ndarray:
        eff = np.zeros((4, 3))
        eff[3, 0] = value
        return eff


def motor_efficiency(tau, omega, params: QuadrotorHybridParams):
    if params.efficiency is None:
        return np.ones(np.broadcast(tau, omega).shape)
    e = params.efficiency
    a, b, c, d = (e[i, 0] + omega * (e[i, 1] + omega * e[i, 2]) for i in range(4))
    return ((a * tau + b) * tau + c) * tau + d


def quadrotor_hybrid_energy(motor_speeds, dt, params: QuadrotorHybridParams):
    """Mechanical rotor power ``tau * w`` divided by motor efficiency, summed over four motors."""
    w = np.asarray(motor_speeds, dtype=float)
    wd = np.gradient(w, dt, axis=-2)
    tau = params.J * wd + params.K_tau * w**2 + params.D_v * w
    fr = motor_efficiency(tau, w, params)
    bad = (fr < params.min_efficiency) | (fr > 1.0 + 1e-12)
    if np.any(bad):
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        raise EfficiencyError(
            f"motor efficiency {float(fr[idx]):.4g} outside [{params.min_efficiency}, 1] "
            f"at torque {float(tau[idx]):.4g} N*m, speed {float(w[idx]):.4g} rad/s (index {idx})"
        )
    return _trapezoid(np.sum(tau * w / fr, axis=-1), dt)


@dataclass(frozen=True)
class FixedWingEnergyParams:
    c1: float
    c2: float
    mass: float
    gravity: float = 9.81

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("FixedWingEnergyParams: c1 and c2 must be > 0")
        if not (self.mass > 0 and self.gravity > 0):
            raise ValueError("FixedWingEnergyParams: mass and gravity must be > 0")


def fixedwing_energy(velocities, dt, params: FixedWingEnergyParams, accelerations=None):
    """Propulsion energy of a fixed-wing aircraft plus its kinetic-energy change.

    Only the acceleration component normal to the velocity loads the wing:
    ``||a||^2 - (a.v)^2/||v||^2``.
    """
    v = np.asarray(velocities, dtype=float)
    a = np.gradient(v, dt, axis=-2) if accelerations is None else np.asarray(accelerations, dtype=float)
    speed = np.linalg.norm(v, axis=-1)
    if np.any(speed <= 1e-9):
        raise SingularityError("fixed-wing energy model is singular at zero airspeed")
    along = np.sum(a * v, axis=-1)
    normal_sq = np.maximum(np.sum(a * a, axis=-1) - along**2 / speed**2, 0.0)
    g = params.gravity
    integrand = params.c1 * speed**3 + params.c2 / speed * (1.0 + normal_sq / g**2)
    kinetic = 0.5 * params.mass * (speed[..., -1] ** 2 - speed[..., 0] ** 2)
    return _trapezoid(integrand, dt) + kinetic


def power_optimal_speed(params: FixedWingEnergyParams) -> float:
    """Speed minimising ``c1 v^3 + c2 / v`` in straight level flight."""
    return (params.c2 / (3.0 * params.c1)) ** 0.25
