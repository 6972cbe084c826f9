"""Local observable fields extracted from a single wave function snapshot.

Every field that divides by the density w is built from derivatives of psi
itself (psi_x, psi_xx) and never from finite differences of w. The density
derivatives needed for the wave part of the kinetic energy follow from the
product rule,

    w_x  = 2 Re(psi* psi_x)
    w_xx = 2 Re(psi* psi_xx) + 2 |psi_x|^2

which keeps the extraction well conditioned near nodes and makes
K = -(hbar^2/2m) Re(psi* psi_xx)/w hold to rounding for the discrete operator.

Derivative backends (``deriv``):

``"fd"``     centered 3-point stencils; the two end points are undefined.
``"fft"``    spectral on the periodic lattice (period n_points*dx).
``"sine"``   spectral via odd extension; for states vanishing at both walls.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import MaskedProbabilityWarning, UnwrapGuardError, WavefieldError
from .grid import (
    DEFAULT_MASK_THRESHOLD,
    Grid,
    ModulusPhaseField,
    WaveFunction,
    _frozen,
    density_mask,
    unmasked_runs,
)
from .potentials import PotentialField

DERIVS = ("fd", "fft", "sine")
LABELS = ("w", "phi", "k", "p", "K", "Kw", "E", "omega", "j", "Q")


# -- derivatives -------------------------------------------------------------


def _spectral(f: np.ndarray, period: float, orders: Sequence[int]) -> list[np.ndarray]:
    # real and imaginary parts separately, so a real input has an exactly real derivative
    if np.iscomplexobj(f):
        re = _spectral(np.ascontiguousarray(f.real), period, orders)
        im = _spectral(np.ascontiguousarray(f.imag), period, orders)
        return [a + 1j * b for a, b in zip(re, im)]
    n = f.size
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=period / n)
    F = np.fft.rfft(f)
    out = []
    for order in orders:
        ik = (1j * k) ** order
        if order % 2 == 1 and n % 2 == 0:
            ik[-1] = 0.0
        out.append(np.fft.irfft(ik * F, n))
    return out


def derivatives(f: np.ndarray, dx: float, deriv: str = "fd", orders=(1, 2)) -> list[np.ndarray]:
    """First and/or second x-derivative of sampled ``f`` by the chosen backend."""
    f = np.asarray(f)
    if deriv == "fd":
        out = []
        for order in orders:
            d = np.full(f.shape, np.nan, dtype=f.dtype)
            if order == 1:
                d[1:-1] = (f[2:] - f[:-2]) / (2.0 * dx)
            elif order == 2:
                d[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / dx**2
            elif order == 0:
                d = f.copy()
            else:
                raise WavefieldError(f"fd derivative of order {order} not available")
            out.append(d)
        return out
    if deriv == "fft":
        return _spectral(f, f.size * dx, orders)
    if deriv == "sine":
        n = f.size
        ext = np.concatenate([f, -f[-2:0:-1]])
        return [d[:n] for d in _spectral(ext, ext.size * dx, orders)]
    raise WavefieldError(f"unknown derivative backend {deriv!r}; expected one of {DERIVS}")


def ddx(f: np.ndarray, dx: float, deriv: str = "fd") -> np.ndarray:
    return derivatives(f, dx, deriv, orders=(1,))[0]


def stencil_mask(mask: np.ndarray, deriv: str) -> np.ndarray:
    """Mask after applying one centered stencil: run edges and grid ends drop out."""
    mask = np.asarray(mask, dtype=bool)
    if deriv != "fd":
        return mask.copy()
    out = mask.copy()
    out[1:] |= mask[:-1]
    out[:-1] |= mask[1:]
    out[0] = out[-1] = True
    return out


# -- data types --------------------------------------------------------------


@dataclass(frozen=True)
class ObservableField:
    label: str
    values: np.ndarray
    mask: np.ndarray
    grid: Grid
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "mask", _frozen(np.asarray(self.mask, dtype=bool)))

    @property
    def valid(self) -> np.ndarray:
        return self.values[~self.mask]

    def linf(self) -> float:
        v = self.valid
        return float(np.max(np.abs(v))) if v.size else 0.0

    def l2(self) -> float:
        v = self.valid
        return float(np.sqrt(np.sum(v**2) * self.grid.dx))

    @property
    def masked_fraction(self) -> float:
        return float(np.mean(self.mask))


@dataclass(frozen=True)
class OperatorStencil:
    """O = sum_n c_n(x) (d/dx)^n for n <= 2, complex coefficient samples per point."""

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(None if c is None else _frozen(np.asarray(c, dtype=complex)) for c in self.coefficients)
        if not 1 <= len(coeffs) <= 3:
            raise WavefieldError("operator order must be 0, 1 or 2")
        sizes = {c.size for c in coeffs if c is not None}
        if len(sizes) > 1:
            raise WavefieldError("coefficient sample counts differ")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @classmethod
    def identity(cls, grid: Grid):
        return cls((np.ones(grid.n_points),))

    @classmethod
    def position(cls, grid: Grid):
        return cls((grid.x,))

    @classmethod
    def momentum(cls, grid: Grid):
        return cls((None, np.full(grid.n_points, -1j * grid.hbar)))

    @classmethod
    def kinetic(cls, grid: Grid):
        return cls((None, None, np.full(grid.n_points, -(grid.hbar**2) / (2.0 * grid.mass))))

    @classmethod
    def hamiltonian(cls, grid: Grid, v: PotentialField):
        return cls((v.v, None, np.full(grid.n_points, -(grid.hbar**2) / (2.0 * grid.mass))))


@dataclass(frozen=True)
class Expectation:
    value: float
    masked_probability: float
    warning: bool = False

    def __float__(self):
        return self.value


# -- snapshot kinematics -----------------------------------------------------


class _Snapshot:
    """psi, its two derivatives, and the density mask for one wave function."""

    def __init__(self, psi: WaveFunction, mask_threshold: float, deriv: str):
        g = psi.grid
        self.psi = psi
        self.grid = g
        self.time = psi.time
        self.deriv = deriv
        s = psi.samples
        self.s = s
        self.d1, self.d2 = derivatives(s, g.dx, deriv)
        self.w = np.abs(s) ** 2
        self.density_mask = density_mask(self.w, mask_threshold)
        self.mask = stencil_mask(self.density_mask, deriv)

    def divide(self, num: np.ndarray, mask=None) -> np.ndarray:
        mask = self.mask if mask is None else mask
        out = np.full(num.shape, np.nan)
        ok = ~mask
        out[ok] = num[ok] / self.w[ok]
        return out

    def field(self, label, values, mask=None) -> ObservableField:
        return ObservableField(label, values, self.mask if mask is None else mask, self.grid, self.time)

    # density-weighted smooth quantities (no division by w)
    def im_current(self) -> np.ndarray:
        return np.imag(np.conj(self.s) * self.d1)

    def w_x(self) -> np.ndarray:
        return 2.0 * np.real(np.conj(self.s) * self.d1)

    def w_xx(self) -> np.ndarray:
        return 2.0 * np.real(np.conj(self.s) * self.d2) + 2.0 * np.abs(self.d1) ** 2

    def flux(self) -> np.ndarray:
        g = self.grid
        return g.hbar * self.im_current() / g.mass

    def kinetic_density(self) -> np.ndarray:
        """w K = -(hbar^2/2m) Re(psi* psi_xx)."""
        g = self.grid
        return -(g.hbar**2) / (2.0 * g.mass) * np.real(np.conj(self.s) * self.d2)

    def q(self) -> np.ndarray:
        """Q = p^2 w/m + (hbar^2/4m)(w_x^2/w - w_xx), rewritten free of 1/w."""
        g = self.grid
        return g.hbar**2 / (2.0 * g.mass) * (np.abs(self.d1) ** 2 - np.real(np.conj(self.s) * self.d2))


def _snapshot(psi, mask_threshold, deriv) -> _Snapshot:
    if isinstance(psi, _Snapshot):
        return psi
    return _Snapshot(psi, mask_threshold, deriv)


# -- field extractors ----------------------------------------------------------


def momentum_field(psi, mask_threshold=DEFAULT_MASK_THRESHOLD, deriv="fd") -> ObservableField:
    """p = hbar Im(psi* psi_x) / w."""
    sn = _snapshot(psi, mask_threshold, deriv)
    return sn.field("p", sn.grid.hbar * sn.divide(sn.im_current()))


def wavenumber_field(mp: ModulusPhaseField, grid: Grid | None = None) -> ObservableField:
    """k = phi_x by centered differences of the spatially unwrapped phase."""
    grid = mp.grid if grid is None else grid
    mask = stencil_mask(mp.mask, "fd")
    k = np.full(grid.n_points, np.nan)
    k[1:-1] = (mp.phi[2:] - mp.phi[:-2]) / (2.0 * grid.dx)
    k[mask] = np.nan
    return ObservableField("k", k, mask, grid, mp.time)


def temporal_phase_difference(phi_prev: ModulusPhaseField, phi_next: ModulusPhaseField):
    """phi_next - phi_prev reduced to (-pi, pi], with the union mask.

    Raises :class:`UnwrapGuardError` if the reduced difference jumps by more
    than pi between neighbouring points of one unmasked run, which happens
    when the true phase change crossed +-pi somewhere. The test uses only
    the reduced values, so it is indifferent to how a pi step at a sign
    change was unwrapped in space.
    """
    mask = phi_prev.mask | phi_next.mask
    red = np.angle(np.exp(1j * (phi_next.phi - phi_prev.phi)))
    for a, b in unmasked_runs(mask):
        if b - a > 1:
            jumps = np.flatnonzero(np.abs(np.diff(red[a:b])) > np.pi)
            if jumps.size:
                raise UnwrapGuardError(
                    f"temporal phase change reaches pi near x = {phi_prev.grid.x[a + jumps[0]]:.6g}; reduce dt"
                )
    return red, mask


def frequency_field(phi_prev: ModulusPhaseField, phi_next: ModulusPhaseField, dt: float) -> ObservableField:
    """omega = -phi_t from snapshots at t-dt and t+dt (centered difference)."""
    red, mask = temporal_phase_difference(phi_prev, phi_next)
    omega = -red / (2.0 * dt)
    omega = np.where(mask, np.nan, omega)
    t = 0.5 * (phi_prev.time + phi_next.time)
    return ObservableField("omega", omega, mask, phi_prev.grid, t)


def kinetic_field(psi, mask_threshold=DEFAULT_MASK_THRESHOLD, deriv="fd"):
    """(K, K_w) with K = p^2/2m + K_w and K_w = (hbar^2/4m)[(w_x/w)^2/2 - w_xx/w]."""
    sn = _snapshot(psi, mask_threshold, deriv)
    g = sn.grid
    p = momentum_field(sn).values
    wx = sn.divide(sn.w_x())
    wxx = sn.divide(sn.w_xx())
    kw = g.hbar**2 / (4.0 * g.mass) * (0.5 * wx**2 - wxx)
    K = p**2 / (2.0 * g.mass) + kw
    return sn.field("K", K), sn.field("Kw", kw)


def energy_field(psi, v: PotentialField, mask_threshold=DEFAULT_MASK_THRESHOLD, deriv="fd") -> ObservableField:
    sn = _snapshot(psi, mask_threshold, deriv)
    K, _ = kinetic_field(sn)
    return sn.field("E", K.values + v.v)


def flux_field(psi, mask_threshold=DEFAULT_MASK_THRESHOLD, deriv="fd") -> ObservableField:
    """j = w p / m, set to 0 where the density is masked."""
    sn = _snapshot(psi, mask_threshold, deriv)
    j = np.where(sn.mask, 0.0, sn.flux())
    return sn.field("j", j)


def q_field(psi, mask_threshold=DEFAULT_MASK_THRESHOLD, deriv="fd") -> ObservableField:
    """Q = p^2 w/m + (hbar^2/4m)(w_x^2/w - w_xx).

    Q carries a factor of w, so unlike p, K and E it stays defined where the
    density vanishes; only the stencil end points are masked.
    """
    sn = _snapshot(psi, mask_threshold, deriv)
    mask = stencil_mask(np.zeros(sn.grid.n_points, dtype=bool), deriv)
    return sn.field("Q", np.where(mask, np.nan, sn.q()), mask)


def local_field(psi, op: OperatorStencil, mask_threshold=DEFAULT_MASK_THRESHOLD, deriv="fd") -> ObservableField:
    """O = Re(psi* O psi) / (psi* psi) for a differential operator of order <= 2."""
    sn = _snapshot(psi, mask_threshold, deriv)
    if any(c is not None and c.size != sn.grid.n_points for c in op.coefficients):
        raise WavefieldError("operator coefficients do not match the grid")
    terms = (sn.s, sn.d1, sn.d2)
    o_psi = np.zeros(sn.grid.n_points, dtype=complex)
    for c, t in zip(op.coefficients, terms):
        if c is not None:
            o_psi = o_psi + c * t
    mask = sn.density_mask if op.order == 0 else sn.mask
    values = sn.divide(np.real(np.conj(sn.s) * o_psi), mask)
    return sn.field("custom", values, mask)


def expectation(fld: ObservableField, mp: ModulusPhaseField, grid: Grid | None = None,
                max_masked_probability: float = 1e-6) -> Expectation:
    """<O> = sum of O_i w_i dx over the defined region.

    Masked gaps strictly inside the support (nodes) are bridged by linear
    interpolation of O between the bounding points, weighted by the actual w,
    so a node does not leak probability. The outer tails are dropped and the
    two outermost defined points get trapezoid half-weights.
    """
    grid = mp.grid if grid is None else grid
    if fld.values.shape != mp.w.shape:
        raise WavefieldError("field and density live on different grids")
    runs = unmasked_runs(fld.mask)
    weights = np.zeros(grid.n_points)
    values = np.where(fld.mask, 0.0, fld.values)
    if runs:
        a, b = runs[0][0], runs[-1][1]
        weights[a:b] = grid.dx
        if b - a > 1:
            weights[a] *= 0.5
            weights[b - 1] *= 0.5
        for (_, end), (start, _) in zip(runs[:-1], runs[1:]):
            lo, hi = end - 1, start
            t = (np.arange(end, start) - lo) / (hi - lo)
            values[end:start] = (1.0 - t) * fld.values[lo] + t * fld.values[hi]
    ok = weights > 0
    value = float(np.sum(values[ok] * mp.w[ok] * weights[ok]))
    lost = float(np.sum(mp.w * (grid.dx - weights)))
    warn = lost > max_masked_probability
    if warn:
        warnings.warn(
            f"masked points carry probability {lost:.3g} (> {max_masked_probability:g})",
            MaskedProbabilityWarning,
            stacklevel=2,
        )
    return Expectation(value, lost, warn)


def default_deriv(boundary: str) -> str:
    """Spectral derivatives on periodic runs, 3-point stencils otherwise."""
    return "fft" if boundary == "periodic" else "fd"


def all_fields(psi: WaveFunction, v: PotentialField, mask_threshold=DEFAULT_MASK_THRESHOLD, deriv="fd",
               omega: ObservableField | None = None) -> dict:
    """Every canonical column of the field table for one snapshot."""
    from .grid import decompose

    sn = _snapshot(psi, mask_threshold, deriv)
    mp = decompose(psi, mask_threshold)
    K, Kw = kinetic_field(sn)
    n = psi.grid.n_points
    return {
        "w": mp.w,
        "phi": mp.phi,
        "k": wavenumber_field(mp).values,
        "p": momentum_field(sn).values,
        "K": K.values,
        "Kw": Kw.values,
        "E": K.values + v.v,
        "omega": np.full(n, np.nan) if omega is None else omega.values,
        "j": flux_field(sn).values,
        "Q": q_field(sn).values,
        "mask": mp.mask.astype(int),
    }
