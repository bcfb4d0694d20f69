"""Dynamic models of wheeled robots: pure integrators, DDR and TOMR."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import cols, pack


def pure_integrator_derivative(order: int, state, u):
    """Chain of ``order`` integrators driven by ``u``.

    ``state`` stacks ``(p, p', ..., p^(order-1))`` block-wise, each block of
    size ``dim(u)``. The derivative shifts every block up by one and puts
    ``u`` in the top block.
    """
    if order < 1:
        raise ValueError(f"integrator order must be >= 1, got {order}")
    state = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    d = u.shape[-1]
    if state.shape[-1] != order * d:
        raise ValueError(
            f"state has {state.shape[-1]} components, expected order*dim(u) = {order * d}"
        )
    u = np.broadcast_to(u, state.shape[:-1] + (d,))
    return np.concatenate([state[..., d:], u], axis=-1)


@dataclass(frozen=True)
class DdrDynParams:
    """First-order speed dynamics of a differential drive.

    ``A``, ``B`` are the electromechanical matrices of z' = A z + B u with
    z = (v, phidot); ``Tq`` maps wheel speeds to z.
    """

    A: np.ndarray
    B: np.ndarray
    Tq: np.ndarray
    voltage_amplitude: float = 1.0

    def __post_init__(self):
        for name in ("A", "B", "Tq"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (2, 2) or not np.all(np.isfinite(m)):
                raise ValueError(f"DdrDynParams: {name} must be a finite 2x2 matrix")
            object.__setattr__(self, name, m)
        if abs(np.linalg.det(self.Tq)) < 1e-12:
            raise ValueError("DdrDynParams: Tq must be invertible")

    @staticmethod
    def wheel_map(wheel_radius: float, half_axle: float) -> np.ndarray:
        r, b = wheel_radius, half_axle
        return r / 2 * np.array([[1.0, 1.0], [1.0 / b, -1.0 / b]])


def clamp_unit(u):
    """Clamp normalized voltages to [-1, 1]; returns (clamped, saturated flag)."""
    u = np.asarray(u, dtype=float)
    clamped = np.clip(u, -1.0, 1.0)
    return clamped, np.any(clamped != u, axis=-1)


def ddr_dynamics_derivative(z, u, pose, params: DdrDynParams):
    """Returns ``(zdot, posedot, saturated)`` for the DDR dynamic model.

    Inputs outside [-1, 1] are clamped rather than rejected.
    """
    u, saturated = clamp_unit(u)
    z = np.asarray(z, dtype=float)
    zdot = z @ params.A.T + u @ params.B.T
    v, phidot = cols(z)
    _, _, phi = cols(pose)
    posedot = pack(v * np.cos(phi), v * np.sin(phi), phidot)
    return zdot, posedot, saturated


@dataclass(frozen=True)
class TomrDynParams:
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        for name in ("B", "C"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (3, 3) or not np.all(np.isfinite(m)):
                raise ValueError(f"TomrDynParams: {name} must be a finite 3x3 matrix")
            object.__setattr__(self, name, m)


def rotation_z(phi):
    c, s = np.cos(phi), np.sin(phi)
    zero, one = np.zeros_like(c), np.ones_like(c)
    return np.stack(
        [np.stack([c, -s, zero], -1), np.stack([s, c, zero], -1), np.stack([zero, zero, one], -1)],
        -2,
    )


# R(phi) dR/dphi^T is the same for every phi
_CORIOLIS = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def tomr_dynamics_derivative(z, u, params: TomrDynParams):
    """z = (x, y, phi, xdot, ydot, phidot); z' = A(phi, phidot) z + [0; B] u.

    The velocity block of A is R(phi) R'(phi)^T phidot - C, where R' is the
    derivative of the planar rotation with respect to phi.
    """
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    vel = z[..., 3:6]
    phidot = z[..., 5:6]
    acc = phidot * (vel @ _CORIOLIS.T) - vel @ params.C.T + u @ params.B.T
    return np.concatenate([vel, acc], axis=-1)
