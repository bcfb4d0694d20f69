"""Composite channel ``H = s * h / L_P`` between a robot at ``p`` and a peer at ``q``.

``L_P`` combines the distance law with wall/floor losses. The shadowing
``s`` and fading ``h`` fields are indexed by the robot position ``p`` (the
peer is treated as the fixed end of the link the fields were drawn for).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scipy.special import exp1

from .fields import FadingProcess, ShadowingField
from .pathloss import BuildingLayout, PathLossParams, path_loss_db, wall_floor_attenuation_db


@dataclass
class CompositeChannel:
    path_loss: PathLossParams | None = None
    layout: BuildingLayout | None = None
    shadowing: ShadowingField | None = None
    fading: FadingProcess | None = None
    # "error" rejects links shorter than d0, "clamp" evaluates them at d0
    near_field: str = "error"

    def __post_init__(self):
        if self.near_field not in ("error", "clamp"):
            raise ValueError(f"near_field must be 'error' or 'clamp', got {self.near_field!r}")

    @property
    def fading_kind(self) -> str:
        return "none" if self.fading is None else self.fading.distribution

    @property
    def rician_k(self) -> float:
        return 0.0 if self.fading is None else float(self.fading.rician_k)

    def deterministic_loss_db(self, p, q):
        """Distance and obstruction loss in dB (positive = attenuation)."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        loss = np.zeros(np.broadcast_shapes(p.shape, q.shape)[:-1])
        if self.path_loss is not None:
            d = np.linalg.norm(p - q, axis=-1)
            if self.near_field == "clamp":
                d = np.maximum(d, self.path_loss.d0)
            loss = loss + path_loss_db(d, self.path_loss)
        if self.layout is not None:
            loss = loss + wall_floor_attenuation_db(p, q, self.layout)
        return loss

    def shadowing_db(self, p):
        if self.shadowing is None:
            return np.zeros(np.shape(p)[:-1])
        return self.shadowing.db_at(p)

    def large_scale_db(self, p, q):
        """Gain in dB without small-scale fading: ``20 log10(s / L_P)``."""
        return self.shadowing_db(p) - self.deterministic_loss_db(p, q)

    def large_scale_amplitude(self, p, q):
        return 10.0 ** (self.large_scale_db(p, q) / 20.0)

    def mean_power_gain(self, p, q):
        """``E|H|^2`` over fading, with the shadowing realisation held fixed."""
        fading_power = 1.0 + self.rician_k if self.fading is not None else 1.0
        return self.large_scale_amplitude(p, q) ** 2 * fading_power

    def fading_log_mean_db(self) -> float:
        """``E[10 log10 |h|^2]`` of the fading term (0 without fading).

        ``|h|^2`` is exponential for Rayleigh fading, giving ``-gamma_E`` in
        natural-log units; with a line-of-sight term the mean log power is
        ``ln K + E1(K)``.
        """
        if self.fading is None:
            return 0.0
        K = self.rician_k
        mean_ln = -np.euler_gamma if K == 0 else np.log(K) + exp1(K)
        return float(10.0 / np.log(10.0) * mean_ln)

    def mean_gain_db(self, p, q):
        """Ensemble mean of ``20 log10 |H|`` over shadowing and fading realisations."""
        out = -self.deterministic_loss_db(p, q)
        if self.shadowing is not None:
            out = out + self.shadowing.mu_db
        if self.fading is not None:
            out = out + self.fading_log_mean_db()
        return out

    def realization_db(self, p, q, t=0.0):
        """``20 log10 |H|`` of the drawn realisation, built term by term like :meth:`mean_gain_db`."""
        out = -self.deterministic_loss_db(p, q)
        if self.shadowing is not None:
            out = out + self.shadowing.db_at(p)
        if self.fading is not None:
            h = self.fading.at(np.asarray(p, dtype=float)[..., :2], t)
            with np.errstate(divide="ignore"):
                out = out + 20.0 * np.log10(np.abs(h))
        return out

    def gain(self, p, q, t=0.0):
        """Complex amplitude gain at robot position ``p``, peer ``q`` and time ``t``."""
        amp = self.large_scale_amplitude(p, q)
        if self.fading is None:
            return amp.astype(complex)
        return amp * self.fading.at(np.asarray(p, dtype=float)[..., :2], t)


def channel_gain(model: CompositeChannel, p, q, t=0.0):
    return model.gain(p, q, t)
