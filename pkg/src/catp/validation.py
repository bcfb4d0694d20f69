"""Statistical self-checks of the channel generators and closed-form link formulas.

Each check returns a row with the estimate, the expected value, the
tolerance and a ``pass`` / ``fail`` / ``skipped`` status. Failures are
reported, never raised.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats
from scipy.special import j0

from . import comms
from .channel import Grid2D, sample_fading_field, sample_shadowing_field
from .seeding import stream_rng, stream_seed


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    estimate: float | None
    expected: float | None
    tolerance: float | None
    detail: str = ""

    def as_dict(self):
        return asdict(self)


def _check(name, estimate, expected, tol, detail=""):
    ok = abs(estimate - expected) <= tol
    return CheckResult(name, "pass" if ok else "fail", float(estimate), float(expected), float(tol), detail)


def empirical_autocorrelation(values, lag_cells: int, axis: int = 1) -> float:
    """Sample correlation between the field and itself shifted by ``lag_cells`` along ``axis``."""
    v = np.asarray(values, dtype=float)
    v = (v - v.mean()) / v.std()
    a = np.take(v, np.arange(v.shape[axis] - lag_cells), axis=axis)
    b = np.take(v, np.arange(lag_cells, v.shape[axis]), axis=axis)
    return float(np.mean(a * b))


def shadowing_checks(sigma_db, beta, size, seed):
    spacing = beta / 4.0
    lags = {"beta/2": 2, "beta": 4, "2beta": 8, "3beta": 12}
    if sigma_db == 0:
        rows = [CheckResult(f"shadowing_autocorrelation[{k}]", "skipped", None, None, None,
                            "sigma_db = 0 gives a constant field") for k in lags]
        return rows + [CheckResult("shadowing_std", "skipped", None, None, None, "sigma_db = 0")]
    grid = Grid2D((0.0, 0.0), spacing, (size, size))
    field = sample_shadowing_field(grid, 0.0, sigma_db, beta, stream_seed(seed, "shadowing"))
    rows = []
    for label, lag in lags.items():
        est = 0.5 * (empirical_autocorrelation(field.values_db, lag, 1) + empirical_autocorrelation(field.values_db, lag, 0))
        rows.append(_check(f"shadowing_autocorrelation[{label}]", est, math.exp(-lag * spacing / beta), 0.05))
    std = float(np.std(field.values_db))
    rows.append(_check("shadowing_std", std, sigma_db, 0.05 * sigma_db, "relative tolerance 5%"))
    return rows


def _scatter_lattice(wavelength, n_samples, seed, rician_k=0.0):
    """Fading values on a sparse lattice (far beyond the coherence distance)."""
    side = int(math.ceil(math.sqrt(n_samples)))
    spacing = 20.37 * wavelength
    field = sample_fading_field(None, wavelength, stream_rng(seed, "fading", 1), rician_k=rician_k, method="sos")
    coords = spacing * np.arange(side)
    return field, field.on_lattice(coords, coords).ravel()[:n_samples]


def fading_checks(wavelength, check_wavelength, n_samples, rician_ks, seed):
    rows = []
    field, h = _scatter_lattice(wavelength, n_samples, seed)
    ks = stats.kstest(np.abs(h), stats.rayleigh(scale=1 / math.sqrt(2)).cdf)
    rows.append(CheckResult("rayleigh_ks", "pass" if ks.pvalue > 0.01 else "fail", float(ks.pvalue), None, 0.01,
                            f"KS statistic {ks.statistic:.4g} over {len(h)} samples; pass when p > 0.01"))
    # correlation at a half-wavelength offset, averaged over the lattice
    d = wavelength / 2
    side = int(math.ceil(math.sqrt(min(n_samples, 40_000))))
    coords = 20.37 * wavelength * np.arange(side)
    a = field.on_lattice(coords, coords)
    b = field.on_lattice(coords + d, coords)
    corr = float(np.real(np.mean(a * np.conj(b))) / np.mean(np.abs(a) ** 2))
    lam = check_wavelength or wavelength
    rows.append(_check("jakes_correlation[lambda/2]", corr, j0(2 * np.pi * d / lam), 0.05,
                       f"checked against wavelength {lam} m"))
    for i, K in enumerate(rician_ks):
        _, hk = _scatter_lattice(wavelength, n_samples, seed + 1 + i, rician_k=K)
        p = np.abs(hk) ** 2
        gamma = p.var() / p.mean() ** 2
        s = math.sqrt(max(1.0 - gamma, 0.0))
        K_hat = s / (1 - s) if s < 1 else math.inf
        rows.append(_check(f"rician_k[{K:g}]", K_hat, K, 0.1 * K, "moment estimator, relative tolerance 10%"))
    return rows


def link_checks(mc_samples, seed):
    rng = stream_rng(seed, "mc", 99)
    h = comms.sample_fading((mc_samples,), "rayleigh", 0.0, rng)
    g = np.abs(h) ** 2
    hit = (g >= 1.0).astype(float)
    est, se = hit.mean(), hit.std(ddof=1) / math.sqrt(mc_samples)
    rows = [_check("rayleigh_success_probability[gamma0=mean]", est, math.exp(-1.0), 3 * se, "3 standard errors")]
    cap = np.log2(1.0 + 10.0 * g)
    est, se = cap.mean(), cap.std(ddof=1) / math.sqrt(mc_samples)
    rows.append(_check("ergodic_capacity[mean_snr=10]", est, comms.ergodic_capacity_rayleigh(1.0, 10.0), 3 * se,
                       "3 standard errors"))
    return rows


def run_validation(cfg, seed: int, mc_samples: int | None = None):
    """Run every check for a :class:`catp.scenario.ValidateBlock`-like config."""
    mc = mc_samples or cfg.mc_samples
    rows = shadowing_checks(cfg.shadowing_sigma_db, cfg.shadowing_beta_m, cfg.shadowing_size, seed)
    rows += fading_checks(cfg.wavelength_m, cfg.check_wavelength_m, cfg.fading_samples, cfg.rician_k, seed)
    rows += link_checks(mc, seed)
    return rows
