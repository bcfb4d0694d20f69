"""Spatially correlated random fields: log-normal shadowing and small-scale fading."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import j0

from ..seeding import as_rng


class OutsideFieldError(ValueError):
    pass


@dataclass(frozen=True)
class Grid2D:
    """Cell-centre lattice ``origin + spacing * (i, j)``; values are stored ``[row=y, col=x]``."""

    origin: tuple
    spacing: float
    shape: tuple  # (ny, nx)

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("Grid2D: spacing must be > 0")
        if len(self.shape) != 2 or min(self.shape) < 1:
            raise ValueError("Grid2D: shape must be (ny, nx) with positive entries")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "shape", tuple(int(v) for v in self.shape))

    @classmethod
    def covering(cls, lower, upper, spacing):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        n = np.floor((upper - lower) / spacing + 1e-9).astype(int) + 1
        return cls(tuple(lower), spacing, (int(n[1]), int(n[0])))

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def upper(self):
        return (self.origin[0] + (self.shape[1] - 1) * self.spacing, self.origin[1] + (self.shape[0] - 1) * self.spacing)

    def coordinates(self):
        xs = self.origin[0] + self.spacing * np.arange(self.shape[1])
        ys = self.origin[1] + self.spacing * np.arange(self.shape[0])
        return np.meshgrid(xs, ys)

    def fractional_index(self, points):
        pts = np.asarray(points, dtype=float)[..., :2]
        col = (pts[..., 0] - self.origin[0]) / self.spacing
        row = (pts[..., 1] - self.origin[1]) / self.spacing
        tol = 1e-9
        if np.any((col < -tol) | (row < -tol) | (col > self.shape[1] - 1 + tol) | (row > self.shape[0] - 1 + tol)):
            raise OutsideFieldError(f"position outside the sampled field {self.origin}..{self.upper}")
        return np.clip(row, 0, self.shape[0] - 1), np.clip(col, 0, self.shape[1] - 1)

    def bilinear(self, values, points):
        row, col = self.fractional_index(points)
        r0 = np.minimum(np.floor(row).astype(int), max(self.shape[0] - 2, 0))
        c0 = np.minimum(np.floor(col).astype(int), max(self.shape[1] - 2, 0))
        r1 = np.minimum(r0 + 1, self.shape[0] - 1)
        c1 = np.minimum(c0 + 1, self.shape[1] - 1)
        fr, fc = row - r0, col - c0
        top = values[r0, c0] * (1 - fc) + values[r0, c1] * fc
        bottom = values[r1, c0] * (1 - fc) + values[r1, c1] * fc
        return top * (1 - fr) + bottom * fr

    def nearest(self, values, points):
        row, col = self.fractional_index(points)
        return values[np.rint(row).astype(int), np.rint(col).astype(int)]


def _torus_distances(shape, spacing):
    """Euclidean distances from cell (0, 0) on a periodic lattice of ``shape``."""
    ny, nx = shape
    iy = np.minimum(np.arange(ny), ny - np.arange(ny))
    ix = np.minimum(np.arange(nx), nx - np.arange(nx))
    return spacing * np.hypot(iy[:, None], ix[None, :])


def circulant_gaussian_field(grid: Grid2D, covariance, rng):
    """Stationary zero-mean Gaussian field by circulant embedding.

    The grid is embedded in a periodic lattice of twice its size; small
    negative eigenvalues of the embedding (from truncating the covariance)
    are clipped to zero.
    """
    ny, nx = grid.shape
    big = (2 * ny, 2 * nx)
    c = covariance(_torus_distances(big, grid.spacing))
    lam = np.fft.fft2(c).real
    lam = np.maximum(lam, 0.0)
    noise = rng.standard_normal(big) + 1j * rng.standard_normal(big)
    y = np.fft.fft2(np.sqrt(lam / (big[0] * big[1])) * noise)
    return y.real[:ny, :nx]


@dataclass(frozen=True)
class ShadowingField:
    """Gaussian field in dB with exponential spatial correlation ``exp(-d / beta)``."""

    grid: Grid2D
    values_db: np.ndarray
    mu_db: float
    sigma_db: float
    beta: float
    seed: int | None = None

    def db_at(self, points):
        return self.grid.bilinear(self.values_db, points)

    def amplitude_at(self, points):
        return 10.0 ** (self.db_at(points) / 20.0)


def sample_shadowing_field(grid: Grid2D, mu_db: float, sigma_db: float, beta: float, seed) -> ShadowingField:
    if not beta > 0:
        raise ValueError("shadowing decorrelation distance beta must be > 0")
    if sigma_db < 0:
        raise ValueError("shadowing sigma_db must be >= 0")
    if grid.spacing > beta / 4 * (1 + 1e-12):
        raise ValueError(f"grid spacing {grid.spacing} m is too coarse; need <= beta/4 = {beta / 4} m")
    if sigma_db == 0:
        values = np.full(grid.shape, float(mu_db))
    else:
        rng = as_rng(seed)
        unit = circulant_gaussian_field(grid, lambda d: np.exp(-d / beta), rng)
        values = mu_db + sigma_db * unit
    values.setflags(write=False)
    return ShadowingField(grid, values, float(mu_db), float(sigma_db), float(beta), seed)


def jakes_correlation(d, wavelength):
    """Normalised spatial correlation ``J0(2 pi d / lambda)`` of ring-of-scatterers fading."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be >= 0")
    return j0(2.0 * np.pi * d / wavelength)


CHOLESKY_MAX_CELLS = 4096


def _cholesky_with_jitter(cov, max_jitter=1e-4):
    jitter = 0.0
    scale = float(np.mean(np.diag(cov)))
    for _ in range(12):
        try:
            return np.linalg.cholesky(cov + jitter * scale * np.eye(len(cov)))
        except np.linalg.LinAlgError:
            jitter = 1e-12 if jitter == 0 else jitter * 10
            if jitter > max_jitter:
                break
    raise np.linalg.LinAlgError("fading covariance is not positive definite even after adding jitter")


@dataclass(frozen=True)
class FadingField:
    """One realisation of small-scale fading.

    Backed either by grid samples (``values``, looked up at the nearest
    cell) or by a ring of scatterers with fixed arrival angles and phases,
    which can be evaluated exactly anywhere in the plane.
    """

    wavelength: float
    los: float
    grid: Grid2D | None = None
    values: np.ndarray | None = None
    angles: np.ndarray | None = None
    phases: np.ndarray | None = None

    @property
    def rician_k(self) -> float:
        return self.los**2

    def scattered_at(self, points, chunk=4096):
        pts = np.asarray(points, dtype=float)[..., :2]
        if self.values is not None:
            return self.grid.nearest(self.values, pts)
        k = 2.0 * np.pi / self.wavelength
        dirs = np.stack([np.cos(self.angles), np.sin(self.angles)], axis=-1) * k
        flat = pts.reshape(-1, 2)
        out = np.empty(len(flat), dtype=complex)
        norm = 1.0 / math.sqrt(len(self.angles))
        for s in range(0, len(flat), chunk):
            arg = flat[s : s + chunk] @ dirs.T + self.phases
            out[s : s + chunk] = norm * np.exp(1j * arg).sum(axis=-1)
        return out.reshape(pts.shape[:-1])

    def at(self, points):
        return self.scattered_at(points) + self.los

    def on_lattice(self, xs, ys):
        """Values on the lattice ``xs`` x ``ys`` as an array ``[len(ys), len(xs)]``.

        For the scatterer representation the plane wave factorises into an
        x part and a y part, so the lattice costs one matrix product.
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if self.values is not None:
            X, Y = np.meshgrid(xs, ys)
            return self.at(np.stack([X, Y], axis=-1))
        k = 2.0 * np.pi / self.wavelength
        ex = np.exp(1j * (k * xs[:, None] * np.cos(self.angles) + self.phases))
        ey = np.exp(1j * k * ys[:, None] * np.sin(self.angles))
        return (ey @ ex.T) / math.sqrt(len(self.angles)) + self.los


def sample_fading_field(
    grid: Grid2D | None,
    wavelength: float,
    seed,
    *,
    rician_k: float = 0.0,
    method: str = "auto",
    n_scatterers: int = 2048,
) -> FadingField:
    """Correlated complex Gaussian fading with Jakes correlation.

    The scattered part has unit power; a line-of-sight term ``sqrt(K)`` is
    added for Rician fading. ``method`` is ``cholesky`` (exact on the grid),
    ``sos`` (sum of sinusoids) or ``auto``, which picks Cholesky up to
    4096 cells.
    """
    if not wavelength > 0:
        raise ValueError("wavelength must be > 0")
    if rician_k < 0:
        raise ValueError("Rician K must be >= 0")
    if grid is not None and grid.spacing > wavelength / 8 * (1 + 1e-12):
        raise ValueError(f"grid spacing {grid.spacing} m is too coarse; need <= lambda/8 = {wavelength / 8} m")
    if method == "auto":
        method = "cholesky" if grid is not None and grid.size <= CHOLESKY_MAX_CELLS else "sos"
    rng = as_rng(seed)
    los = math.sqrt(rician_k)
    if method == "cholesky":
        if grid is None:
            raise ValueError("the covariance method needs a grid")
        xs, ys = grid.coordinates()
        pts = np.stack([xs.ravel(), ys.ravel()], axis=-1)
        dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        chol = _cholesky_with_jitter(jakes_correlation(dist, wavelength))
        z = rng.standard_normal((2, grid.size))
        h = (chol @ z[0] + 1j * (chol @ z[1])) / math.sqrt(2.0)
        values = h.reshape(grid.shape)
        values.setflags(write=False)
        return FadingField(wavelength, los, grid=grid, values=values)
    if method == "sos":
        m = np.arange(n_scatterers)
        angles = 2.0 * np.pi * (m + rng.random(n_scatterers)) / n_scatterers
        phases = rng.uniform(0.0, 2.0 * np.pi, n_scatterers)
        return FadingField(wavelength, los, grid=grid, angles=angles, phases=phases)
    raise ValueError(f"unknown fading generator {method!r}")


@dataclass
class FadingProcess:
    """Block fading: an independent field for every coherence interval ``tau``.

    ``tau = inf`` gives a time-invariant channel. Block ``k`` is generated
    from ``SeedSequence(seed, spawn_key=(k,))`` so any block can be rebuilt
    on its own.
    """

    wavelength: float
    seed: int
    grid: Grid2D | None = None
    rician_k: float = 0.0
    coherence_time: float = math.inf
    method: str = "auto"
    n_scatterers: int = 2048
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.coherence_time > 0:
            raise ValueError("coherence_time must be > 0")

    @property
    def distribution(self) -> str:
        return "rayleigh" if self.rician_k == 0 else "rician"

    def block_index(self, t):
        if math.isinf(self.coherence_time):
            return np.zeros(np.shape(t), dtype=int)
        return np.floor(np.asarray(t, dtype=float) / self.coherence_time).astype(int)

    def block(self, k: int) -> FadingField:
        k = int(k)
        if k not in self._cache:
            ss = np.random.SeedSequence(self.seed, spawn_key=(k,))
            self._cache[k] = sample_fading_field(
                self.grid,
                self.wavelength,
                np.random.default_rng(ss),
                rician_k=self.rician_k,
                method=self.method,
                n_scatterers=self.n_scatterers,
            )
        return self._cache[k]

    def at(self, points, t=0.0):
        pts = np.asarray(points, dtype=float)
        blocks = np.broadcast_to(self.block_index(t), pts.shape[:-1])
        out = np.empty(pts.shape[:-1], dtype=complex)
        for k in np.unique(blocks):
            sel = blocks == k
            out[sel] = self.block(k).at(pts[sel])
        return out
