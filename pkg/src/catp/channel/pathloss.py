"""Deterministic large-scale attenuation: distance power law and wall/floor losses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Breakpoint:
    alpha1: float
    alpha2: float
    distance: float


@dataclass(frozen=True)
class PathLossParams:
    """Amplitude path loss ``K0 (d/d0)^(alpha/2)``.

    With a :class:`Breakpoint`, the exponent is ``alpha1`` below the break
    distance and ``alpha2`` from it on. By default the switch happens with
    the reference level kept at ``d0``, which makes the loss jump at the
    break distance; ``continuous=True`` instead re-anchors the second
    segment so the curve is continuous.
    """

    K0: float = 1.0
    d0: float = 1.0
    alpha: float = 2.0
    breakpoint: Breakpoint | None = None
    continuous: bool = False

    def __post_init__(self):
        if not self.d0 > 0:
            raise ValueError("PathLossParams: d0 must be > 0")
        if not self.alpha > 0:
            raise ValueError("PathLossParams: alpha must be > 0")
        if not self.K0 > 0:
            raise ValueError("PathLossParams: K0 must be > 0")
        bp = self.breakpoint
        if bp is not None:
            if not 0 < bp.alpha1 < bp.alpha2:
                raise ValueError("PathLossParams: breakpoint needs 0 < alpha1 < alpha2")
            if not bp.distance > self.d0:
                raise ValueError("PathLossParams: breakpoint distance must exceed d0")


class RangeError(ValueError):
    pass


def path_loss_amplitude(d, params: PathLossParams):
    d = np.asarray(d, dtype=float)
    if np.any(d < params.d0):
        raise RangeError(f"path loss model is only valid for d >= d0 = {params.d0} m (got min {d.min():.4g} m)")
    ratio = d / params.d0
    bp = params.breakpoint
    if bp is None:
        return params.K0 * ratio ** (params.alpha / 2)
    near = params.K0 * ratio ** (bp.alpha1 / 2)
    if params.continuous:
        at_break = params.K0 * (bp.distance / params.d0) ** (bp.alpha1 / 2)
        far = at_break * (d / bp.distance) ** (bp.alpha2 / 2)
    else:
        far = params.K0 * ratio ** (bp.alpha2 / 2)
    return np.where(d < bp.distance, near, far)


def path_loss_db(d, params: PathLossParams):
    """Power loss in dB (positive numbers mean attenuation)."""
    return 20.0 * np.log10(path_loss_amplitude(d, params))


@dataclass(frozen=True)
class Wall:
    """A vertical wall given by its 2D footprint segment."""

    start: tuple
    end: tuple
    attenuation_db: float

    def __post_init__(self):
        if not (np.isfinite(self.attenuation_db) and self.attenuation_db >= 0):
            raise ValueError("Wall: attenuation_db must be finite and >= 0")


@dataclass(frozen=True)
class Floor:
    """A horizontal slab at height ``z``."""

    z: float
    attenuation_db: float

    def __post_init__(self):
        if not (np.isfinite(self.attenuation_db) and self.attenuation_db >= 0):
            raise ValueError("Floor: attenuation_db must be finite and >= 0")


@dataclass(frozen=True)
class BuildingLayout:
    walls: tuple = ()
    floors: tuple = ()


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def segments_intersect(p, q, a, b, eps=1e-12):
    """Closed-segment intersection test for 2D segments p-q and a-b (batched over p, q)."""
    px, py = p[..., 0], p[..., 1]
    qx, qy = q[..., 0], q[..., 1]
    ax, ay = a
    bx, by = b
    d1 = _cross(bx - ax, by - ay, px - ax, py - ay)
    d2 = _cross(bx - ax, by - ay, qx - ax, qy - ay)
    d3 = _cross(qx - px, qy - py, ax - px, ay - py)
    d4 = _cross(qx - px, qy - py, bx - px, by - py)
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)

    def on_seg(ux, uy, vx, vy, wx, wy, d):
        return (np.abs(d) <= eps) & (np.minimum(ux, vx) - eps <= wx) & (wx <= np.maximum(ux, vx) + eps) & (
            np.minimum(uy, vy) - eps <= wy
        ) & (wy <= np.maximum(uy, vy) + eps)

    touch = (
        on_seg(ax, ay, bx, by, px, py, d1)
        | on_seg(ax, ay, bx, by, qx, qy, d2)
        | on_seg(px, py, qx, qy, ax, ay, d3)
        | on_seg(px, py, qx, qy, bx, by, d4)
    )
    return proper | touch


def wall_floor_attenuation_db(p, q, layout: BuildingLayout):
    """Sum of the losses of every wall and floor the straight p-q link passes through.

    Each obstacle counts at most once, also when the link only touches it.
    Floors need 3D positions; a link lying inside a floor's plane does not
    cross it.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    shape = np.broadcast_shapes(p.shape, q.shape)[:-1]
    total = np.zeros(shape)
    for wall in layout.walls:
        hit = segments_intersect(p[..., :2], q[..., :2], wall.start, wall.end)
        total = total + np.where(hit, wall.attenuation_db, 0.0)
    if layout.floors:
        if p.shape[-1] < 3 or q.shape[-1] < 3:
            raise ValueError("floor attenuation needs 3D positions")
        for floor in layout.floors:
            dp, dq = p[..., 2] - floor.z, q[..., 2] - floor.z
            in_plane = (dp == 0) & (dq == 0)
            hit = (dp * dq <= 0) & ~in_plane
            total = total + np.where(hit, floor.attenuation_db, 0.0)
    return total
