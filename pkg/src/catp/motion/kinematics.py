"""Kinematic models of wheeled ground robots.

State layouts (fixed, shared with the planner and CSV export):

* unicycle / DDR / car-like: ``(x, y, theta)``
* bicycle: ``(x, y, theta, phi)`` with ``phi`` the steering angle
* three-wheel omnidirectional (TOMR): ``(x, y, phi)`` with ``phi`` the heading

Every function broadcasts over leading axes, so a whole population of
candidate states can be evaluated in one call.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._util import SingularityError, check_positive, cols, pack, wrap_angle

STEER_MARGIN = 1e-6


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(wrap_angle(self.theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


def _pose(pose) -> np.ndarray:
    return pose.as_array() if isinstance(pose, Pose2D) else np.asarray(pose, dtype=float)


@dataclass(frozen=True)
class DdrParams:
    wheel_radius: float
    half_axle: float

    def __post_init__(self):
        check_positive("DdrParams", wheel_radius=self.wheel_radius, half_axle=self.half_axle)


@dataclass(frozen=True)
class TomrParams:
    wheel_radius: float
    center_distance: float

    def __post_init__(self):
        check_positive(
            "TomrParams", wheel_radius=self.wheel_radius, center_distance=self.center_distance
        )

    @cached_property
    def geometry(self) -> np.ndarray:
        """Wheel geometry matrix M with wheel speeds = M @ (xdot, ydot, phidot) / r."""
        s, c, L = np.sin(np.pi / 3), np.cos(np.pi / 3), self.center_distance
        return np.array([[0.0, 1.0, L], [-s, -c, L], [s, -c, L]])

    @cached_property
    def geometry_inv(self) -> np.ndarray:
        return np.linalg.inv(self.geometry)


@dataclass(frozen=True)
class BicycleParams:
    wheelbase: float
    steer_limit: float = np.pi / 2 - STEER_MARGIN

    def __post_init__(self):
        check_positive("BicycleParams", wheelbase=self.wheelbase)
        if not 0 < self.steer_limit < np.pi / 2:
            raise ValueError(f"BicycleParams: steer_limit must lie in (0, pi/2), got {self.steer_limit}")


@dataclass(frozen=True)
class CarLikeParams:
    wheel_radius: float
    wheelbase: float

    def __post_init__(self):
        check_positive("CarLikeParams", wheel_radius=self.wheel_radius, wheelbase=self.wheelbase)


def unicycle_derivative(pose, v, omega, allow_reverse=False):
    """(v cos theta, v sin theta, omega).

    The unicycle is defined for ``v >= 0``; the virtual-unicycle view of a
    differential drive needs signed speeds, hence ``allow_reverse``.
    """
    _, _, theta = cols(_pose(pose))
    if not allow_reverse and np.any(np.asarray(v) < 0):
        raise ValueError("unicycle driving velocity must be >= 0")
    return pack(v * np.cos(theta), v * np.sin(theta), omega)


def bicycle_derivative(state, v, omega, params: BicycleParams, drive="front"):
    _, _, theta, phi = cols(state)
    if drive == "front":
        return pack(
            v * np.cos(theta) * np.cos(phi),
            v * np.sin(theta) * np.cos(phi),
            v * np.sin(phi) / params.wheelbase,
            omega,
        )
    if drive == "rear":
        if np.any(np.abs(phi) >= params.steer_limit):
            raise SingularityError("rear-drive bicycle is singular at |phi| = pi/2")
        return pack(
            v * np.cos(theta),
            v * np.sin(theta),
            v * np.tan(phi) / params.wheelbase,
            omega,
        )
    raise ValueError(f"unknown drive {drive!r}; expected 'front' or 'rear'")


def ddr_forward_kinematics(omega_r, omega_l, theta, params: DdrParams):
    # same operation order as ddr_body_speeds + unicycle_derivative
    r, b = params.wheel_radius, params.half_axle
    v = r * (omega_r + omega_l) / 2
    return pack(v * np.cos(theta), v * np.sin(theta), r * (omega_r - omega_l) / (2 * b))


def ddr_body_speeds(omega_r, omega_l, params: DdrParams):
    r, b = params.wheel_radius, params.half_axle
    return r * (omega_r + omega_l) / 2, r * (omega_r - omega_l) / (2 * b)


def ddr_inverse_kinematics(v, thetadot, params: DdrParams):
    r, b = params.wheel_radius, params.half_axle
    return (v + b * thetadot) / r, (v - b * thetadot) / r


def carlike_derivative(omega, delta, theta, params: CarLikeParams):
    """Car-like robot with rear-wheel speed ``omega`` and steering ``delta``.

    The heading enters as (cos(pi/2 - theta), sin(pi/2 - theta)), i.e.
    (sin theta, cos theta): heading is measured from the y axis.
    """
    if np.any(np.abs(delta) >= np.pi / 2 - STEER_MARGIN):
        raise SingularityError("car-like model is singular at |delta| = pi/2")
    speed = omega * params.wheel_radius
    return pack(
        speed * np.cos(np.pi / 2 - theta),
        speed * np.sin(np.pi / 2 - theta),
        speed * np.tan(delta) / params.wheelbase,
    )


def tomr_forward_kinematics(omega1, omega2, omega3, params: TomrParams):
    w = pack(omega1, omega2, omega3)
    return params.wheel_radius * (w @ params.geometry_inv.T)


def tomr_inverse_kinematics(xdot, ydot, phidot, params: TomrParams):
    q = pack(xdot, ydot, phidot)
    w = (q @ params.geometry.T) / params.wheel_radius
    return tuple(np.moveaxis(w, -1, 0))
