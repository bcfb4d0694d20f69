"""Named motion models with a uniform ``f(x, u) -> xdot`` interface.

Each factory returns a :class:`MotionModel` whose derivative broadcasts over
leading batch axes. State and control layouts are documented by the label
tuples and stay fixed, so trajectories can be exchanged between modules.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import aerial, dynamics, kinematics
from ._util import SingularityError, cols, pack


@dataclass(frozen=True)
class MotionModel:
    name: str
    state_labels: tuple
    control_labels: tuple
    derivative: Callable
    angle_indices: tuple = ()
    position_indices: tuple = (0, 1)
    # (lo, hi) arrays: inputs are clamped and the step flagged as saturated
    input_limits: tuple | None = None
    check_state: Callable | None = None
    params: object = None
    meta: dict = field(default_factory=dict)

    @property
    def state_dim(self) -> int:
        return len(self.state_labels)

    @property
    def control_dim(self) -> int:
        return len(self.control_labels)

    def __call__(self, x, u):
        return self.derivative(x, u)


def _labels(prefix, n):
    return tuple(f"{prefix}{i}" for i in range(n))


def pure_integrator(order: int = 1, dim: int = 2) -> MotionModel:
    axes = ("x", "y", "z")[:dim] if dim <= 3 else _labels("p", dim)
    states = []
    for k in range(order):
        states += [a + "'" * k for a in axes]
    return MotionModel(
        name=f"integrator{order}",
        state_labels=tuple(states),
        control_labels=tuple(f"u_{a}" for a in axes),
        derivative=lambda x, u: dynamics.pure_integrator_derivative(order, x, u),
        position_indices=tuple(range(dim)),
        meta={"order": order, "dim": dim},
    )


def single_integrator(dim: int = 2) -> MotionModel:
    return pure_integrator(1, dim)


def double_integrator(dim: int = 2) -> MotionModel:
    return pure_integrator(2, dim)


def unicycle(allow_reverse: bool = False) -> MotionModel:
    def f(x, u):
        v, omega = cols(u)
        return kinematics.unicycle_derivative(x, v, omega, allow_reverse=allow_reverse)

    return MotionModel("unicycle", ("x", "y", "theta"), ("v", "omega"), f, angle_indices=(2,))


def bicycle(params: kinematics.BicycleParams, drive: str = "front") -> MotionModel:
    def f(x, u):
        v, omega = cols(u)
        return kinematics.bicycle_derivative(x, v, omega, params, drive)

    return MotionModel(
        f"bicycle_{drive}", ("x", "y", "theta", "phi"), ("v", "omega"), f, angle_indices=(2, 3), params=params
    )


def ddr_kinematic(params: kinematics.DdrParams) -> MotionModel:
    def f(x, u):
        wr, wl = cols(u)
        return kinematics.ddr_forward_kinematics(wr, wl, cols(x)[2], params)

    return MotionModel(
        "ddr", ("x", "y", "theta"), ("omega_R", "omega_L"), f, angle_indices=(2,), params=params
    )


def carlike(params: kinematics.CarLikeParams) -> MotionModel:
    def f(x, u):
        omega, delta = cols(u)
        return kinematics.carlike_derivative(omega, delta, cols(x)[2], params)

    return MotionModel("carlike", ("x", "y", "theta"), ("omega", "delta"), f, angle_indices=(2,), params=params)


def tomr_kinematic(params: kinematics.TomrParams) -> MotionModel:
    def f(x, u):
        w1, w2, w3 = cols(u)
        return np.broadcast_to(kinematics.tomr_forward_kinematics(w1, w2, w3, params), np.shape(x))

    return MotionModel(
        "tomr", ("x", "y", "phi"), ("omega_1", "omega_2", "omega_3"), f, angle_indices=(2,), params=params
    )


def ddr_dynamic(params: dynamics.DdrDynParams) -> MotionModel:
    """State ``(x, y, phi, v, phidot)``, inputs ``(u_R, u_L)`` in [-1, 1]."""

    def f(x, u):
        x = np.asarray(x, dtype=float)
        zdot, posedot, _ = dynamics.ddr_dynamics_derivative(x[..., 3:5], u, x[..., 0:3], params)
        return np.concatenate([posedot, zdot], axis=-1)

    return MotionModel(
        "ddr_dynamic",
        ("x", "y", "phi", "v", "phidot"),
        ("u_R", "u_L"),
        f,
        angle_indices=(2,),
        input_limits=(np.array([-1.0, -1.0]), np.array([1.0, 1.0])),
        params=params,
    )


def tomr_dynamic(params: dynamics.TomrDynParams) -> MotionModel:
    return MotionModel(
        "tomr_dynamic",
        ("x", "y", "phi", "xdot", "ydot", "phidot"),
        ("u_1", "u_2", "u_3"),
        lambda x, u: dynamics.tomr_dynamics_derivative(x, u, params),
        angle_indices=(2,),
        input_limits=(-np.ones(3), np.ones(3)),
        params=params,
    )


def quadrotor(params: aerial.QuadrotorParams) -> MotionModel:
    return MotionModel(
        "quadrotor",
        ("x", "y", "z", "phi", "theta", "psi", "xdot", "ydot", "zdot", "phidot", "thetadot", "psidot"),
        ("omega_1", "omega_2", "omega_3", "omega_4"),
        lambda x, u: aerial.quadrotor_derivative(x, u, params),
        angle_indices=(3, 4, 5),
        position_indices=(0, 1, 2),
        params=params,
    )


def _check_airspeed(x):
    if np.any(np.asarray(x)[..., 5] <= aerial.MIN_AIRSPEED):
        raise SingularityError(f"airspeed dropped below {aerial.MIN_AIRSPEED} m/s")


def fixedwing(params: aerial.FixedWingParams) -> MotionModel:
    def f(x, u):
        CL, thrust, phi = cols(u)
        return aerial.fixedwing_derivative(x, CL, thrust, phi, params)

    return MotionModel(
        "fixedwing",
        ("p_n", "p_e", "h", "psi", "gamma", "Va"),
        ("CL", "thrust", "phi"),
        f,
        angle_indices=(3,),
        position_indices=(0, 1, 2),
        check_state=_check_airspeed,
        params=params,
    )


def fixedwing_level(params: aerial.FixedWingParams, airspeed: float) -> MotionModel:
    """Planar constant-altitude flight: state ``(p_n, p_e, psi)``, input roll ``phi``."""
    if airspeed <= aerial.MIN_AIRSPEED:
        raise ValueError("fixedwing_level: airspeed must be positive")

    def f(x, u):
        pn, pe, psi = cols(x)
        (phi,) = cols(u)
        full = pack(pn, pe, 0.0 * psi, psi, 0.0 * psi, airspeed + 0.0 * psi)
        return aerial.fixedwing_level_kinematics(full, phi, params)

    return MotionModel(
        "fixedwing_level", ("p_n", "p_e", "psi"), ("phi",), f, angle_indices=(2,), params=params,
        meta={"airspeed": airspeed},
    )


def linear_aircraft(model: aerial.LinearAircraftModel, axis: str = "longitudinal") -> MotionModel:
    model.matrices(axis)
    states, inputs = model.labels[axis]
    angles = (3,) if axis == "longitudinal" else (3, 4)
    return MotionModel(
        f"linear_{axis}",
        tuple(states),
        tuple(inputs),
        lambda x, u: aerial.linear_aircraft_derivative(model, x, u, axis),
        angle_indices=angles,
        position_indices=(4,) if axis == "longitudinal" else (),
        params=model,
    )
