"""Spatial lattice, wave-function storage and the modulus/phase split."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateDomainError,
    NonPositiveConstantError,
    NormalizationError,
    TooFewPointsError,
    TruncationWarning,
    WavefieldError,
)

DEFAULT_MASK_THRESHOLD = 1e-8


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform 1-D lattice x_i = x_min + i*dx, i = 0..n_points-1.

    Both end points are samples. For periodic propagation the period is
    ``n_points * dx``, i.e. the point after ``x_max`` is identified with ``x_min``.
    """

    x_min: float
    x_max: float
    n_points: int
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise DegenerateDomainError(
                f"degenerate domain: x_max={self.x_max!r} must exceed x_min={self.x_min!r}"
            )
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise TooFewPointsError(f"n_points must be an integer >= 8, got {self.n_points!r}")
        if not self.hbar > 0:
            raise NonPositiveConstantError(f"hbar must be positive, got {self.hbar!r}")
        if not self.mass > 0:
            raise NonPositiveConstantError(f"mass must be positive, got {self.mass!r}")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def period(self) -> float:
        return self.n_points * self.dx

    @cached_property
    def x(self) -> np.ndarray:
        return _frozen(self.x_min + np.arange(self.n_points) * self.dx)

    def refined(self) -> Grid:
        """Same domain with dx halved (every old point is kept)."""
        return Grid(self.x_min, self.x_max, 2 * (self.n_points - 1) + 1, self.hbar, self.mass)


def make_grid(x_min, x_max, n_points, hbar=1.0, mass=1.0) -> Grid:
    return Grid(float(x_min), float(x_max), n_points, float(hbar), float(mass))


@dataclass(frozen=True)
class WaveFunction:
    grid: Grid
    samples: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != (self.grid.n_points,):
            raise WavefieldError(
                f"expected {self.grid.n_points} samples, got array of shape {s.shape}"
            )
        object.__setattr__(self, "samples", _frozen(s))

    @property
    def norm(self) -> float:
        """Discrete norm sum |psi_i|^2 dx."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dx)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def with_samples(self, samples, time=None) -> WaveFunction:
        return WaveFunction(self.grid, samples, self.time if time is None else time)

    def rotated(self, alpha: float) -> WaveFunction:
        """Global phase rotation psi -> exp(i alpha) psi."""
        return self.with_samples(np.exp(1j * alpha) * self.samples)


def normalize(psi: WaveFunction) -> WaveFunction:
    n = psi.norm
    if not (n > 0 and np.isfinite(n)):
        raise NormalizationError(f"cannot normalize a wave function with norm {n!r}")
    return psi.with_samples(psi.samples / np.sqrt(n))


def gaussian_packet(grid: Grid, x0: float, sigma: float, k0: float, time: float = 0.0) -> WaveFunction:
    """Normalized packet exp(-(x-x0)^2/(4 sigma^2) + i k0 x).

    ``sigma`` is the standard deviation of the position density. Emits a
    :class:`TruncationWarning` if the density at either domain edge exceeds
    1e-12 of its maximum.
    """
    if not sigma > 0:
        raise WavefieldError(f"sigma must be positive, got {sigma!r}")
    x = grid.x
    psi = np.exp(-((x - x0) ** 2) / (4.0 * sigma**2) + 1j * k0 * x)
    w = np.abs(psi) ** 2
    if max(w[0], w[-1]) > 1e-12 * w.max():
        warnings.warn(
            f"Gaussian packet (x0={x0}, sigma={sigma}) is truncated by the domain "
            f"[{grid.x_min}, {grid.x_max}]",
            TruncationWarning,
            stacklevel=2,
        )
    return normalize(WaveFunction(grid, psi, time))


def plane_wave(grid: Grid, k: float, time: float = 0.0) -> WaveFunction:
    """Normalized exp(i k x); density 1/period on the periodic lattice."""
    return normalize(WaveFunction(grid, np.exp(1j * k * grid.x), time))


def box_eigenstate(grid: Grid, n: int, time: float = 0.0) -> WaveFunction:
    """Analytic infinite-well state sqrt(2/L) sin(n pi (x - x_min)/L) with walls at the domain ends."""
    if n < 1:
        raise WavefieldError(f"box quantum number must be >= 1, got {n}")
    L = grid.length
    i = np.arange(grid.n_points)
    last = grid.n_points - 1
    # measure the argument from the nearer wall so it is exact to rounding at both ends
    near = np.minimum(i, last - i)
    sign = np.where(i <= last - i, 1.0, (-1.0) ** (n + 1))
    u = np.sqrt(2.0 / L) * sign * np.sin(n * np.pi * near / last)
    u[0] = u[-1] = 0.0
    return WaveFunction(grid, u.astype(complex), time)


def unmasked_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open index ranges [start, stop) of contiguous False entries."""
    ok = ~np.asarray(mask, dtype=bool)
    padded = np.concatenate(([False], ok, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return list(zip(edges[0::2].tolist(), edges[1::2].tolist()))


@dataclass(frozen=True)
class ModulusPhaseField:
    """psi = sqrt(w) exp(i phi), with phi unwrapped along each unmasked run."""

    grid: Grid
    w: np.ndarray
    phi: np.ndarray
    mask: np.ndarray
    time: float = 0.0
    threshold: float = DEFAULT_MASK_THRESHOLD

    def __post_init__(self):
        for name in ("w", "phi", "mask"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def reconstruct(self) -> np.ndarray:
        return np.sqrt(self.w) * np.exp(1j * self.phi)


def density_mask(w: np.ndarray, threshold: float) -> np.ndarray:
    wmax = w.max()
    if wmax <= 0:
        return np.ones_like(w, dtype=bool)
    return w < threshold * wmax


def decompose(psi: WaveFunction, mask_threshold: float = DEFAULT_MASK_THRESHOLD) -> ModulusPhaseField:
    w = np.abs(psi.samples) ** 2
    mask = density_mask(w, mask_threshold)
    phi = np.angle(psi.samples)
    for a, b in unmasked_runs(mask):
        phi[a:b] = np.unwrap(phi[a:b])
    return ModulusPhaseField(psi.grid, w, phi, mask, psi.time, mask_threshold)
