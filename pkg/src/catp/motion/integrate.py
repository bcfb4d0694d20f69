"""Fixed-step integration of motion models under piecewise-constant controls."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import SingularityError, wrap_angle
from .models import MotionModel


class IntegrationError(RuntimeError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"integration failed at step {step}: {cause}")
        self.step = step
        self.cause = cause


@dataclass(frozen=True)
class Trajectory:
    """States on a uniform grid plus one control per interval.

    ``states`` has shape ``(..., N + 1, n)`` and ``controls`` ``(..., N, m)``;
    the leading axes (if any) index a batch of trajectories.
    """

    t0: float
    dt: float
    states: np.ndarray
    controls: np.ndarray | None
    saturated: np.ndarray | None = None
    model_name: str = ""

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("Trajectory: dt must be > 0")
        if self.controls is not None and self.controls.shape[-2] + 1 != self.states.shape[-2]:
            raise ValueError("Trajectory: need exactly one control per interval")

    @property
    def n_intervals(self) -> int:
        return self.states.shape[-2] - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_intervals + 1)

    @property
    def duration(self) -> float:
        return self.dt * self.n_intervals

    def positions(self, indices) -> np.ndarray:
        return self.states[..., list(indices)]


def _step(f, x, u, h, method):
    if method == "euler":
        return x + h * f(x, u)
    k1 = f(x, u)
    k2 = f(x + (0.5 * h) * k1, u)
    k3 = f(x + (0.5 * h) * k2, u)
    k4 = f(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rollout(model: MotionModel, x0, controls, dt, method="rk4", substeps=1):
    """Integrate a (possibly batched) control schedule.

    Returns ``(states, saturated)`` with shapes ``(..., N+1, n)`` and
    ``(..., N)``.
    """
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown integration method {method!r}")
    if dt <= 0:
        raise ValueError("dt must be > 0")
    controls = np.asarray(controls, dtype=float)
    n_steps = controls.shape[-2]
    x = np.array(np.broadcast_to(np.asarray(x0, dtype=float), controls.shape[:-2] + (model.state_dim,)))
    saturated = np.zeros(controls.shape[:-1], dtype=bool)
    if model.input_limits is not None:
        lo, hi = model.input_limits
        clipped = np.clip(controls, lo, hi)
        saturated = np.any(clipped != controls, axis=-1)
        controls = clipped

    states = np.empty(controls.shape[:-2] + (n_steps + 1, model.state_dim))
    states[..., 0, :] = x
    angles = list(model.angle_indices)
    h = dt / substeps
    f = model.derivative
    for k in range(n_steps):
        u = controls[..., k, :]
        try:
            for _ in range(substeps):
                x = _step(f, x, u, h, method)
            if angles:
                x[..., angles] = wrap_angle(x[..., angles])
            if model.check_state is not None:
                model.check_state(x)
        except (SingularityError, ValueError, FloatingPointError) as exc:
            raise IntegrationError(k, exc) from exc
        states[..., k + 1, :] = x
    return states, saturated


def integrate(model: MotionModel, x0, controls, dt, *, t0=0.0, T=None, method="rk4", substeps=1) -> Trajectory:
    """Simulate ``model`` from ``x0``.

    ``controls`` is either an ``(N, m)`` array of piecewise-constant inputs
    (one per interval of length ``dt``) or a callable ``u(t)`` sampled at the
    start of each interval, in which case ``T`` fixes the horizon.
    """
    if callable(controls):
        if T is None or T <= t0:
            raise ValueError("a callable control schedule needs T > t0")
        n = int(round((T - t0) / dt))
        if not np.isclose(n * dt, T - t0, rtol=1e-9, atol=1e-12):
            raise ValueError("T - t0 must be an integer multiple of dt")
        controls = np.array([np.asarray(controls(t0 + k * dt), dtype=float) for k in range(n)])
        controls = controls.reshape(n, model.control_dim)
    else:
        controls = np.asarray(controls, dtype=float)
        if controls.ndim == 1:
            controls = controls[:, None]
        if T is not None and not np.isclose(controls.shape[-2] * dt, T - t0):
            raise ValueError("control schedule does not cover [t0, T]")
    states, saturated = rollout(model, x0, controls, dt, method=method, substeps=substeps)
    if model.input_limits is not None:
        lo, hi = model.input_limits
        controls = np.clip(controls, lo, hi)
    return Trajectory(t0, dt, states, controls, saturated, model.name)
