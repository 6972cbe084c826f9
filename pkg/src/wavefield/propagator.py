"""Time stepping of i hbar psi_t = H psi and the stationary eigenproblem.

Two independent schemes are provided:

* Crank-Nicolson on the 3-point Laplacian with Dirichlet walls (the first and
  last grid points are pinned to zero), solved as a tridiagonal system.
* Strang split-step with the kinetic factor applied exactly in Fourier space on
  the periodic lattice of period ``n_points * dx``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.linalg.lapack import get_lapack_funcs

from .errors import EigenSolverError, PropagationError, SchemeMismatchError, UnwrapGuardError, WavefieldError
from .grid import Grid, WaveFunction, _frozen
from .potentials import PotentialField

SCHEMES = ("crank_nicolson", "split_fourier")
BOUNDARIES = ("dirichlet", "periodic")
NATURAL_BOUNDARY = {"crank_nicolson": "dirichlet", "split_fourier": "periodic"}


@dataclass(frozen=True)
class PropagatorConfig:
    scheme: str = "split_fourier"
    dt: float = 1e-3
    boundary: str | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise WavefieldError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.boundary is None:
            object.__setattr__(self, "boundary", NATURAL_BOUNDARY[self.scheme])
        if self.boundary not in BOUNDARIES:
            raise WavefieldError(f"unknown boundary {self.boundary!r}; expected one of {BOUNDARIES}")
        if self.boundary != NATURAL_BOUNDARY[self.scheme]:
            raise SchemeMismatchError(
                f"scheme {self.scheme} requires {NATURAL_BOUNDARY[self.scheme]} boundary, "
                f"got {self.boundary}"
            )
        if not self.dt > 0:
            raise WavefieldError(f"dt must be positive, got {self.dt!r}")


def hamiltonian_tridiagonal(v: PotentialField, grid: Grid):
    """Diagonal and off-diagonal of the discrete H on the interior points 1..n-2."""
    t = grid.hbar**2 / (2.0 * grid.mass * grid.dx**2)
    d = 2.0 * t + v.v[1:-1]
    e = np.full(grid.n_points - 3, -t)
    return d, e


def apply_hamiltonian(psi: WaveFunction, v: PotentialField) -> np.ndarray:
    """H psi with the Dirichlet 3-point stencil; zero at the wall points."""
    g = psi.grid
    s = psi.samples
    out = np.zeros_like(s)
    lap = (s[2:] - 2.0 * s[1:-1] + s[:-2]) / g.dx**2
    out[1:-1] = -(g.hbar**2) / (2.0 * g.mass) * lap + v.v[1:-1] * s[1:-1]
    return out


class CrankNicolson:
    """Cayley-form stepper (1 + i H dt/2hbar)^-1 (1 - i H dt/2hbar) with a cached LU."""

    def __init__(self, grid: Grid, v: PotentialField, dt: float):
        if v.v.shape != (grid.n_points,):
            raise WavefieldError("potential does not match the grid")
        self.grid = grid
        self.dt = dt
        d, e = hamiltonian_tridiagonal(v, grid)
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise PropagationError("non-finite Hamiltonian entries")
        c = 0.5j * dt / grid.hbar
        self._d, self._e = d, e
        self._c = c
        gttrf, self._gttrs = get_lapack_funcs(("gttrf", "gttrs"), dtype=complex)
        dl = (c * e).astype(complex)
        du = dl.copy()
        dd = (1.0 + c * d).astype(complex)
        dl, dd, du, du2, ipiv, info = gttrf(dl, dd, du)
        if info != 0 or not np.all(np.isfinite(dd)):
            raise PropagationError(f"tridiagonal factorization broke down (info={info})")
        self._lu = (dl, dd, du, du2, ipiv)

    def __call__(self, samples: np.ndarray) -> np.ndarray:
        s = samples[1:-1]
        c, d, e = self._c, self._d, self._e
        rhs = (1.0 - c * d) * s
        rhs[1:] -= c * e * s[:-1]
        rhs[:-1] -= c * e * s[1:]
        sol, info = self._gttrs(*self._lu, rhs)
        if info != 0:
            raise PropagationError(f"tridiagonal solve failed (info={info})")
        out = np.zeros_like(samples)
        out[1:-1] = sol
        return out


class SplitFourier:
    """Strang splitting exp(-iV dt/2hbar) exp(-iT dt/hbar) exp(-iV dt/2hbar)."""

    def __init__(self, grid: Grid, v: PotentialField, dt: float):
        if v.v.shape != (grid.n_points,):
            raise WavefieldError("potential does not match the grid")
        self.grid = grid
        self.dt = dt
        k = 2.0 * np.pi * np.fft.fftfreq(grid.n_points, d=grid.dx)
        self._kin = np.exp(-1j * grid.hbar * k**2 * dt / (2.0 * grid.mass))
        self._half_v = np.exp(-0.5j * v.v * dt / grid.hbar)

    def __call__(self, samples: np.ndarray) -> np.ndarray:
        s = self._half_v * samples
        s = np.fft.ifft(self._kin * np.fft.fft(s))
        return self._half_v * s


def make_stepper(config: PropagatorConfig, grid: Grid, v: PotentialField, dt: float | None = None):
    dt = config.dt if dt is None else dt
    if config.scheme == "crank_nicolson":
        return CrankNicolson(grid, v, dt)
    return SplitFourier(grid, v, dt)


def step_crank_nicolson(psi: WaveFunction, v: PotentialField, dt: float) -> WaveFunction:
    out = CrankNicolson(psi.grid, v, dt)(psi.samples)
    return psi.with_samples(out, psi.time + dt)


def step_split_fourier(psi: WaveFunction, v: PotentialField, dt: float) -> WaveFunction:
    out = SplitFourier(psi.grid, v, dt)(psi.samples)
    return psi.with_samples(out, psi.time + dt)


def check_time_step(psi: WaveFunction, v: PotentialField, config: PropagatorConfig) -> float:
    """Return max|E(x)| * dt / hbar over unmasked points; raise if it reaches pi.

    Beyond pi the phase advance per step is ambiguous modulo 2 pi.
    """
    from .fields import default_deriv, energy_field

    E = energy_field(psi, v, deriv=default_deriv(config.boundary)).valid
    if E.size == 0:
        return 0.0
    guard = float(np.max(np.abs(E))) * config.dt / psi.grid.hbar
    if guard >= np.pi:
        raise UnwrapGuardError(f"max|E| * dt / hbar = {guard:.3g} >= pi; reduce dt")
    return guard


def propagate(psi0: WaveFunction, v: PotentialField, config: PropagatorConfig,
              n_snapshots: int, steps_per_snapshot: int) -> list[WaveFunction]:
    """Snapshots at t0 + j * steps_per_snapshot * dt for j = 0..n_snapshots-1.

    The time step is checked against the initial local energy first
    (:func:`check_time_step`).
    """
    if n_snapshots < 1 or steps_per_snapshot < 1:
        raise WavefieldError("n_snapshots and steps_per_snapshot must be >= 1")
    if config.boundary == "dirichlet" and (psi0.samples[0] != 0 or psi0.samples[-1] != 0):
        # walls pin the end points; tiny tails are simply cut
        s = psi0.samples.copy()
        s[0] = s[-1] = 0.0
        psi0 = psi0.with_samples(s)
    check_time_step(psi0, v, config)
    step = make_stepper(config, psi0.grid, v)
    out = [psi0]
    s = psi0.samples.copy()
    for j in range(1, n_snapshots):
        for _ in range(steps_per_snapshot):
            s = step(s)
        t = psi0.time + j * steps_per_snapshot * config.dt
        if not np.all(np.isfinite(s)):
            raise PropagationError("state became non-finite", time=t)
        out.append(WaveFunction(psi0.grid, s, t))
    return out


@dataclass(frozen=True)
class EigenSolution:
    grid: Grid
    energies: np.ndarray
    states: np.ndarray  # shape (n_states, n_points), real, sum u^2 dx = 1

    def __post_init__(self):
        object.__setattr__(self, "energies", _frozen(self.energies))
        object.__setattr__(self, "states", _frozen(self.states))

    def wavefunction(self, index: int, time: float = 0.0) -> WaveFunction:
        return WaveFunction(self.grid, self.states[index].astype(complex), time)

    def residuals(self, v: PotentialField) -> np.ndarray:
        """dx-weighted L2 norm of H u - E u for each pair."""
        out = []
        for E, u in zip(self.energies, self.states):
            r = apply_hamiltonian(WaveFunction(self.grid, u), v) - E * u
            out.append(np.sqrt(np.sum(np.abs(r) ** 2) * self.grid.dx))
        return np.array(out)


def _polish(d: np.ndarray, e: np.ndarray, u: np.ndarray, E: float, sweeps: int = 2):
    """Inverse iteration in extended precision.

    LAPACK vectors are accurate to eps*max|u| in absolute terms, which is a
    large relative error next to the walls where u is small; fields divide by
    u^2 there. Iterating in long double gives componentwise accuracy after the
    final rounding to double.
    """
    ld = np.longdouble
    d = d.astype(ld)
    e = e.astype(ld)
    x = u.astype(ld)
    n = d.size
    scale = np.max(np.abs(d)) + 2 * np.max(np.abs(e), initial=0)
    tiny = ld(np.finfo(ld).eps) * scale
    lam = ld(E)
    for _ in range(sweeps):
        # Thomas algorithm for (H - lam) y = x
        c = np.empty(n - 1, dtype=ld)
        y = np.empty(n, dtype=ld)
        piv = d[0] - lam
        if abs(piv) < tiny:
            piv = tiny
        c[0] = e[0] / piv
        y[0] = x[0] / piv
        for i in range(1, n):
            piv = d[i] - lam - e[i - 1] * c[i - 1]
            if abs(piv) < tiny:
                piv = tiny
            if i < n - 1:
                c[i] = e[i] / piv
            y[i] = (x[i] - e[i - 1] * y[i - 1]) / piv
        for i in range(n - 2, -1, -1):
            y[i] -= c[i] * y[i + 1]
        x = y / np.sqrt(np.sum(y * y))
        hx = d * x
        hx[1:] += e * x[:-1]
        hx[:-1] += e * x[1:]
        lam = np.sum(x * hx)
    return x, lam


def solve_stationary(v: PotentialField, grid: Grid, n_states: int, polish: bool = True) -> EigenSolution:
    """Lowest eigenpairs of the Dirichlet 3-point Hamiltonian."""
    if not 1 <= n_states < grid.n_points - 2:
        raise WavefieldError(f"n_states must be in [1, {grid.n_points - 3}], got {n_states}")
    d, e = hamiltonian_tridiagonal(v, grid)
    try:
        vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, n_states - 1))
    except LinAlgError as exc:
        raise EigenSolverError(
            f"tridiagonal eigensolver failed for {grid.n_points - 2} interior points "
            f"and {n_states} states: {exc}"
        ) from exc
    states = np.zeros((n_states, grid.n_points))
    if polish:
        for i in range(n_states):
            x, lam = _polish(d, e, vecs[:, i], vals[i])
            x = x / np.sqrt(np.sum(x * x) * np.longdouble(grid.dx))
            states[i, 1:-1] = x.astype(float)
            vals[i] = float(lam)
    else:
        states[:, 1:-1] = vecs.T
        states /= np.sqrt(np.sum(states**2, axis=1, keepdims=True) * grid.dx)
    if not np.all(np.diff(vals) > 0):
        raise EigenSolverError(f"eigenvalues not strictly ascending: {vals}")
    for u in states:
        lead = np.flatnonzero(np.abs(u) > 1e-3 * np.abs(u).max())[0]
        if u[lead] < 0:
            u *= -1.0
    return EigenSolution(grid, vals, states)
