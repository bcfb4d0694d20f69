"""Air-to-ground and air-to-air channel models for UAV links."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import i0e

from ..seeding import as_rng
from .pathloss import PathLossParams, path_loss_amplitude


@dataclass(frozen=True)
class A2GParams:
    wavelength: float
    mu_los: float
    sigma_los: float
    mu_nlos: float
    sigma_nlos: float
    a: float = 9.61
    b: float = 0.16
    # "printed": -20 log10(4 pi lambda d); "free_space": -20 log10(4 pi d / lambda)
    path_form: str = "printed"

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("A2GParams: wavelength must be > 0")
        if self.sigma_los < 0 or self.sigma_nlos < 0:
            raise ValueError("A2GParams: sigmas must be >= 0")
        if self.path_form not in ("printed", "free_space"):
            raise ValueError(f"A2GParams: unknown path_form {self.path_form!r}")


def elevation_deg(p_uav, q_ground):
    """Elevation of the UAV seen from the ground node, in degrees (90 when directly above)."""
    p = np.asarray(p_uav, dtype=float)
    q = np.asarray(q_ground, dtype=float)
    dz = p[..., 2] - q[..., 2]
    dh = np.hypot(p[..., 0] - q[..., 0], p[..., 1] - q[..., 1])
    return np.degrees(np.arctan2(dz, dh))


def los_probability_from_elevation(elev_deg, a, b):
    return 1.0 / (1.0 + a * np.exp(-b * (elev_deg - a)))


def a2g_los_probability(p_uav, q_ground, params: A2GParams):
    p = np.asarray(p_uav, dtype=float)
    if np.any(p[..., 2] - np.asarray(q_ground, dtype=float)[..., 2] <= 0):
        raise ValueError("UAV must fly above the ground node")
    return los_probability_from_elevation(elevation_deg(p_uav, q_ground), params.a, params.b)


def a2g_path_db(p_uav, q_ground, params: A2GParams):
    d = np.linalg.norm(np.asarray(p_uav, dtype=float) - np.asarray(q_ground, dtype=float), axis=-1)
    if np.any(d <= 0):
        raise ValueError("air-to-ground link needs a positive distance")
    lam = params.wavelength
    arg = 4 * np.pi * lam * d if params.path_form == "printed" else 4 * np.pi * d / lam
    return -20.0 * np.log10(arg)


def a2g_mean_gain_db(p_uav, q_ground, params: A2GParams):
    p_los = a2g_los_probability(p_uav, q_ground, params)
    return a2g_path_db(p_uav, q_ground, params) + p_los * params.mu_los + (1 - p_los) * params.mu_nlos


def a2g_gain_db(p_uav, q_ground, params: A2GParams, rng):
    """One draw of the air-to-ground gain in dB: path term plus a LoS/NLoS Gaussian term."""
    rng = as_rng(rng)
    path = a2g_path_db(p_uav, q_ground, params)
    p_los = a2g_los_probability(p_uav, q_ground, params)
    shape = np.shape(path)
    los = rng.random(shape) < p_los
    z = rng.standard_normal(shape)
    xi = np.where(los, params.mu_los + params.sigma_los * z, params.mu_nlos + params.sigma_nlos * z)
    return path + xi


@dataclass(frozen=True)
class A2AParams:
    """Height law ``sigma0(h) = a h^b + c`` of the scattered component, plus the LoS strength ``rho``."""

    a: float
    b: float
    c: float
    rho: float = 1.0
    path_loss: PathLossParams = PathLossParams(K0=1.0, d0=1.0, alpha=2.0)
    # "printed" keeps the Bessel argument x rho / (2 sigma0^2); "textbook" uses x rho / sigma0^2
    pdf_form: str = "printed"

    def __post_init__(self):
        if not self.b < 0:
            raise ValueError("A2AParams: b must be < 0")
        if self.rho < 0:
            raise ValueError("A2AParams: rho must be >= 0")
        if self.pdf_form not in ("printed", "textbook"):
            raise ValueError(f"A2AParams: unknown pdf_form {self.pdf_form!r}")

    def sigma0(self, altitude):
        h = np.asarray(altitude, dtype=float)
        if np.any(h <= 0):
            raise ValueError("altitude must be > 0")
        s = self.a * h**self.b + self.c
        if np.any(s <= 0):
            raise ValueError(f"scattered strength sigma0 = a h^b + c is not positive at altitude {h}")
        return s


def _rician_log_kernel(x, rho, sigma0, bessel_scale):
    z = bessel_scale * x * rho / sigma0**2
    with np.errstate(divide="ignore"):
        return np.log(x / sigma0**2) - (x**2 + rho**2) / (2 * sigma0**2) + np.log(i0e(z)) + z


def rician_pdf(x, rho, sigma0, form="printed", n_grid=4001):
    """Amplitude density of the scattered-plus-LoS fading term.

    The ``printed`` variant halves the Bessel argument relative to the
    textbook Rician law and is therefore renormalised numerically.
    """
    x = np.asarray(x, dtype=float)
    if form == "textbook":
        out = np.exp(_rician_log_kernel(np.maximum(x, 0.0), rho, sigma0, 1.0))
        return np.where(x >= 0, out, 0.0)
    grid, dens = _printed_density(rho, sigma0, n_grid)
    out = np.exp(_rician_log_kernel(np.maximum(x, 0.0), rho, sigma0, 0.5)) / _printed_norm(grid, dens)
    return np.where(x >= 0, out, 0.0)


def _printed_density(rho, sigma0, n_grid):
    upper = rho + 12.0 * sigma0
    grid = np.linspace(0.0, upper, n_grid)
    return grid, np.exp(_rician_log_kernel(grid, rho, sigma0, 0.5))


def _printed_norm(grid, dens):
    return np.trapezoid(dens, grid)


def sample_rician_amplitude(rho, sigma0, size, rng, form="printed", n_grid=4001):
    rng = as_rng(rng)
    if form == "textbook":
        z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        return np.abs(rho + sigma0 * z)
    grid, dens = _printed_density(rho, sigma0, n_grid)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    return np.interp(rng.random(size), cdf, grid)


def a2a_channel(p1, p2, params: A2AParams, rng, size=None):
    """Complex gain between two UAVs flying at the same altitude.

    Free-space path loss over the link distance, times a fading amplitude
    drawn from the height-dependent Rician law with a uniform phase.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if not np.allclose(p1[..., 2], p2[..., 2]):
        raise ValueError("air-to-air model assumes both UAVs fly at the same altitude")
    sigma0 = float(params.sigma0(p1[..., 2]))
    rng = as_rng(rng)
    amp = sample_rician_amplitude(params.rho, sigma0, size, rng, form=params.pdf_form)
    phase = rng.uniform(0.0, 2 * math.pi, size)
    lp = path_loss_amplitude(np.linalg.norm(p1 - p2, axis=-1), params.path_loss)
    return amp * np.exp(1j * phase) / lp
