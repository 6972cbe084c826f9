"""Pointwise identity residuals on propagated runs and the verification report.

Identities checked (tags used in configs and reports):

continuity        w_t + j_x = 0
energy_frequency  hbar omega - E = 0
momentum_balance  p_t + E_x = 0
local_balance     w E_x + p j_x - w V_x - Q_x = 0
ehrenfest         d<p>/dt + <V_x> = 0

Time derivatives are centered differences over neighbouring snapshots, so
only interior snapshots are tested.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import HistoryError, SurfaceTermWarning, UnwrapGuardError, WavefieldError
from .fields import (
    ObservableField,
    _Snapshot,
    ddx,
    default_deriv,
    frequency_field,
    momentum_field,
    stencil_mask,
    wavenumber_field,
)
from .grid import DEFAULT_MASK_THRESHOLD, Grid, ModulusPhaseField, WaveFunction, decompose
from .potentials import PotentialField
from .propagator import PropagatorConfig

IDENTITIES = ("continuity", "energy_frequency", "momentum_balance", "local_balance", "ehrenfest")

DEFAULT_TOLERANCES = {
    "ratio_window": (3.5, 4.5),
    "stationary_ceiling": 1e-9,
    "ehrenfest_ceiling": 1e-4,
}


@dataclass
class RunHistory:
    states: list
    potential: PotentialField
    config: PropagatorConfig
    mask_threshold: float = DEFAULT_MASK_THRESHOLD
    deriv: str | None = None

    def __post_init__(self):
        if len(self.states) < 1:
            raise HistoryError("a run history needs at least one snapshot")
        if self.deriv is None:
            self.deriv = default_deriv(self.config.boundary)
        t = self.times
        if len(t) > 2:
            steps = np.diff(t)
            if np.max(np.abs(steps - steps[0])) > 1e-9 * max(abs(steps[0]), 1.0):
                raise HistoryError("snapshots are not uniformly spaced in time")
        self._snaps = {}
        self._phases = {}

    def __len__(self):
        return len(self.states)

    @property
    def grid(self) -> Grid:
        return self.states[0].grid

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    @property
    def dt_out(self) -> float:
        if len(self.states) < 2:
            raise HistoryError("dt_out undefined for a single snapshot")
        return float((self.times[-1] - self.times[0]) / (len(self.states) - 1))

    def snapshot(self, i: int) -> _Snapshot:
        if i not in self._snaps:
            self._snaps[i] = _Snapshot(self.states[i], self.mask_threshold, self.deriv)
        return self._snaps[i]

    def phase(self, i: int) -> ModulusPhaseField:
        if i not in self._phases:
            self._phases[i] = decompose(self.states[i], self.mask_threshold)
        return self._phases[i]

    def rotated(self, alpha: float) -> RunHistory:
        return RunHistory([s.rotated(alpha) for s in self.states], self.potential, self.config,
                          self.mask_threshold, self.deriv)

    def interior(self) -> range:
        return range(1, len(self.states) - 1)


def _check_index(h: RunHistory, t_index: int):
    if len(h) < 3:
        raise HistoryError(f"time-derivative checks need >= 3 snapshots, history has {len(h)}")
    if not 1 <= t_index <= len(h) - 2:
        raise HistoryError(f"t_index must be in [1, {len(h) - 2}], got {t_index}")


def _residual(h_or_grid, label, values, mask, time) -> ObservableField:
    grid = h_or_grid if isinstance(h_or_grid, Grid) else h_or_grid.grid
    values = np.where(mask, np.nan, values)
    return ObservableField(label, values, mask, grid, time)


def _kinetic_gradient(sn: _Snapshot) -> np.ndarray:
    """K_x from density-weighted quantities: (D(wK) - K D(w)) / w."""
    dx = sn.grid.dx
    wk = sn.kinetic_density()
    K = sn.divide(wk)
    num = ddx(wk, dx, sn.deriv) - K * ddx(sn.w, dx, sn.deriv)
    return sn.divide(num, stencil_mask(sn.mask, sn.deriv))


def continuity_residual(h: RunHistory, t_index: int) -> ObservableField:
    _check_index(h, t_index)
    prev, cur, nxt = (h.snapshot(t_index + d) for d in (-1, 0, 1))
    w_t = (nxt.w - prev.w) / (2.0 * h.dt_out)
    j_x = ddx(cur.flux(), h.grid.dx, h.deriv)
    mask = prev.density_mask | cur.density_mask | nxt.density_mask
    mask = stencil_mask(stencil_mask(mask, h.deriv), h.deriv)
    return _residual(h, "continuity", w_t + j_x, mask, cur.time)


def _energy(sn: _Snapshot, v: PotentialField) -> np.ndarray:
    return sn.divide(sn.kinetic_density()) + v.v


def energy_frequency_residual(h: RunHistory, t_index: int) -> ObservableField:
    _check_index(h, t_index)
    cur = h.snapshot(t_index)
    E = _energy(cur, h.potential)
    emax = np.nanmax(np.abs(E[~cur.mask])) if np.any(~cur.mask) else 0.0
    if emax * 2.0 * h.dt_out / h.grid.hbar >= math.pi:
        raise UnwrapGuardError(
            f"max|E| * 2 dt_out / hbar = {emax * 2 * h.dt_out / h.grid.hbar:.3g} >= pi; reduce dt_out"
        )
    omega = frequency_field(h.phase(t_index - 1), h.phase(t_index + 1), h.dt_out)
    mask = omega.mask | cur.mask
    return _residual(h, "energy_frequency", h.grid.hbar * omega.values - E, mask, cur.time)


def momentum_balance_residual(h: RunHistory, t_index: int) -> ObservableField:
    _check_index(h, t_index)
    prev, cur, nxt = (h.snapshot(t_index + d) for d in (-1, 0, 1))
    p_prev = momentum_field(prev).values
    p_next = momentum_field(nxt).values
    p_t = (p_next - p_prev) / (2.0 * h.dt_out)
    E_x = _kinetic_gradient(cur) + h.potential.v_x
    mask = prev.mask | nxt.mask | stencil_mask(cur.mask, h.deriv) | h.potential.edge_mask
    return _residual(h, "momentum_balance", p_t + E_x, mask, cur.time)


def local_balance_residual(psi: WaveFunction, v: PotentialField, mask_threshold=DEFAULT_MASK_THRESHOLD,
                           deriv="fd") -> ObservableField:
    sn = psi if isinstance(psi, _Snapshot) else _Snapshot(psi, mask_threshold, deriv)
    dx = sn.grid.dx
    p = momentum_field(sn).values
    E_x = _kinetic_gradient(sn) + v.v_x
    j_x = ddx(sn.flux(), dx, sn.deriv)
    Q_x = ddx(sn.q(), dx, sn.deriv)
    r = sn.w * E_x + p * j_x - sn.w * v.v_x - Q_x
    mask = stencil_mask(stencil_mask(sn.mask, sn.deriv), sn.deriv) | v.edge_mask
    return _residual(sn.grid, "local_balance", r, mask, sn.time)


def duality_residual(psi: WaveFunction, mask_threshold=DEFAULT_MASK_THRESHOLD, deriv="fd") -> ObservableField:
    """p - hbar k, with p from Im(psi* psi_x)/w and k from the unwrapped phase."""
    sn = psi if isinstance(psi, _Snapshot) else _Snapshot(psi, mask_threshold, deriv)
    p = momentum_field(sn)
    k = wavenumber_field(decompose(sn.psi, mask_threshold))
    mask = p.mask | k.mask
    return _residual(sn.grid, "duality", p.values - sn.grid.hbar * k.values, mask, sn.time)


@dataclass(frozen=True)
class QBoundaryCheck:
    left: float
    right: float
    passed: bool
    note: str


def q_boundary_check(psi, mask_threshold=DEFAULT_MASK_THRESHOLD, deriv="fd", rel_tol=1e-9) -> QBoundaryCheck:
    """Q at the outermost defined points of each side, relative to max |Q|."""
    from .fields import q_field

    Q = q_field(psi, mask_threshold, deriv)
    idx = np.flatnonzero(~Q.mask)
    left, right = float(Q.values[idx[0]]), float(Q.values[idx[-1]])
    qmax = float(np.max(np.abs(Q.values[idx])))
    passed = max(abs(left), abs(right)) < rel_tol * qmax
    if passed:
        note = "Q vanishes at both domain edges"
    else:
        note = (
            f"Q does not vanish at the domain edges (|Q|/max|Q| = "
            f"{max(abs(left), abs(right)) / qmax:.3g}); the Q_x surface term is not zero, "
            "so Ehrenfest's theorem cannot be read off the local balance here"
        )
    return QBoundaryCheck(left, right, bool(passed), note)


@dataclass(frozen=True)
class EhrenfestSeries:
    times: np.ndarray  # all snapshot times
    mean_p: np.ndarray  # <p> at every snapshot
    force: np.ndarray  # -<V_x> at every snapshot
    interior_times: np.ndarray
    dp_dt: np.ndarray  # centered difference of <p>, interior snapshots
    residual: np.ndarray  # dp_dt - force at interior snapshots
    surface_ok: bool

    def table(self) -> list[tuple[float, float, float, float]]:
        f = self.force[1:-1]
        return list(zip(self.interior_times.tolist(), self.dp_dt.tolist(), f.tolist(), self.residual.tolist()))


def mean_momentum(sn: _Snapshot) -> float:
    return float(sn.grid.hbar * np.nansum(sn.im_current()) * sn.grid.dx)


def ehrenfest_check(h: RunHistory, warn: bool = True) -> EhrenfestSeries:
    if len(h) < 3:
        raise HistoryError(f"Ehrenfest check needs >= 3 snapshots, history has {len(h)}")
    dx = h.grid.dx
    mean_p = np.array([mean_momentum(h.snapshot(i)) for i in range(len(h))])
    force = np.array([-np.sum(h.snapshot(i).w * h.potential.v_x) * dx for i in range(len(h))])
    dp_dt = (mean_p[2:] - mean_p[:-2]) / (2.0 * h.dt_out)
    residual = dp_dt - force[1:-1]
    surface_ok = all(q_boundary_check(h.snapshot(i).psi, h.mask_threshold, h.deriv).passed
                     for i in (0, len(h) // 2, len(h) - 1))
    if warn and not surface_ok:
        warnings.warn("Q does not vanish at the domain edges; Ehrenfest surface term assumption violated",
                      SurfaceTermWarning, stacklevel=2)
    return EhrenfestSeries(h.times, mean_p, force, h.times[1:-1], dp_dt, residual, surface_ok)


RESIDUALS = {
    "continuity": continuity_residual,
    "energy_frequency": energy_frequency_residual,
    "momentum_balance": momentum_balance_residual,
}


def residual_at(h: RunHistory, tag: str, t_index: int) -> ObservableField:
    if tag == "local_balance":
        _check_index(h, t_index)
        return local_balance_residual(h.snapshot(t_index), h.potential)
    return RESIDUALS[tag](h, t_index)


@dataclass
class IdentityEntry:
    tag: str
    linf: float
    l2: float
    masked_fraction: float
    passed: bool
    tolerance: str
    ratio: float | None = None  # L2 ratio coarse/refined
    ratio_linf: float | None = None
    refined_linf: float | None = None
    refined_l2: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class VerificationReport:
    entries: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries.values())

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "identities": {k: e.to_dict() for k, e in self.entries.items()},
            "notes": list(self.notes),
            "tables": self.tables,
        }

    def lines(self) -> list[str]:
        out = []
        for tag, e in self.entries.items():
            ratio = "" if e.ratio is None else f"  ratio(L2)={e.ratio:.3f} ratio(Linf)={e.ratio_linf:.3f}"
            out.append(
                f"{'PASS' if e.passed else 'FAIL'}  {tag:<17} Linf={e.linf:.3e} L2={e.l2:.3e} "
                f"masked={e.masked_fraction:.3f}{ratio}  [{e.tolerance}]"
            )
        out.extend(f"note: {n}" for n in self.notes)
        return out


def _norms(h: RunHistory, tag: str, indices) -> tuple[float, float, float]:
    linf, l2, masked = 0.0, 0.0, []
    for i in indices:
        r = residual_at(h, tag, i)
        linf = max(linf, r.linf())
        l2 = max(l2, r.l2())
        masked.append(r.masked_fraction)
    return linf, l2, float(np.mean(masked)) if masked else 0.0


def _ehrenfest_norms(series: EhrenfestSeries, dt_out: float, times=None):
    res = series.residual
    if times is not None:
        keep = np.array([np.any(np.isclose(t, times, rtol=0, atol=1e-9 * max(1.0, abs(t))))
                         for t in series.interior_times])
        res = res[keep]
    linf = float(np.max(np.abs(res))) if res.size else 0.0
    l2 = float(np.sqrt(np.sum(res**2) * dt_out))
    return linf, l2


def _matching_indices(h: RunHistory, times: np.ndarray) -> list[int]:
    out = []
    for t in times:
        j = int(np.argmin(np.abs(h.times - t)))
        if abs(h.times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise HistoryError(f"refined history has no snapshot at t = {t}")
        out.append(j)
    return out


def _check_refinement(h: RunHistory, r: RunHistory):
    g, gr = h.grid, r.grid
    same_domain = math.isclose(g.x_min, gr.x_min) and math.isclose(g.x_max, gr.x_max)
    if not same_domain or gr.n_points != 2 * (g.n_points - 1) + 1:
        raise HistoryError("refinement history must cover the same domain with dx halved")
    if (g.hbar, g.mass) != (gr.hbar, gr.mass) or h.potential.kind != r.potential.kind:
        raise HistoryError("refinement history describes a different physical scenario")
    if not math.isclose(h.times[0], r.times[0], abs_tol=1e-12) or not math.isclose(
        h.times[-1], r.times[-1], rel_tol=1e-9, abs_tol=1e-12
    ):
        raise HistoryError("refinement history spans a different time interval")
    if not math.isclose(r.dt_out, 0.5 * h.dt_out, rel_tol=1e-9):
        raise HistoryError("refinement history must halve dt_out")
    if h.config.scheme != r.config.scheme:
        raise HistoryError("refinement history uses a different propagation scheme")


def build_report(h: RunHistory, identities=IDENTITIES, refinement: RunHistory | None = None,
                 tolerances: dict | None = None) -> VerificationReport:
    identities = tuple(identities)
    if not identities:
        raise WavefieldError("identity selection is empty")
    unknown = [i for i in identities if i not in IDENTITIES]
    if unknown:
        raise WavefieldError(f"unknown identity tag(s) {unknown}; expected from {IDENTITIES}")
    if len(h) < 3:
        raise HistoryError("verification needs >= 3 snapshots")
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    lo, hi = tol["ratio_window"]
    floor = tol["stationary_ceiling"]
    if refinement is not None:
        _check_refinement(h, refinement)
    report = VerificationReport()
    base_idx = list(h.interior())
    base_times = h.times[base_idx]
    ref_idx = _matching_indices(refinement, base_times) if refinement is not None else None

    for tag in identities:
        if tag == "ehrenfest":
            series = ehrenfest_check(h, warn=False)
            linf, l2 = _ehrenfest_norms(series, h.dt_out)
            masked = 0.0
            if not series.surface_ok:
                report.notes.append("ehrenfest: Q does not vanish at the domain edges (surface term assumption violated)")
            report.tables["ehrenfest"] = series.table()
        else:
            linf, l2, masked = _norms(h, tag, base_idx)
        entry = IdentityEntry(tag, linf, l2, masked, False, "")
        if refinement is not None:
            if tag == "ehrenfest":
                rs = ehrenfest_check(refinement, warn=False)
                rlinf, rl2 = _ehrenfest_norms(rs, refinement.dt_out, base_times)
                rl2 *= math.sqrt(2.0)  # same time sampling as the coarse series
            else:
                rlinf, rl2, _ = _norms(refinement, tag, ref_idx)
            entry.refined_linf, entry.refined_l2 = rlinf, rl2
            entry.ratio = l2 / rl2 if rl2 > 0 else math.inf
            entry.ratio_linf = linf / rlinf if rlinf > 0 else math.inf
        if tag == "ehrenfest":
            ceiling = tol["ehrenfest_ceiling"]
            entry.passed = linf <= ceiling
            entry.tolerance = f"max|residual| <= {ceiling:g}"
        elif refinement is not None:
            at_floor = linf <= floor and entry.refined_linf <= floor
            entry.passed = at_floor or lo <= entry.ratio <= hi
            entry.tolerance = f"ratio in [{lo}, {hi}] or Linf <= {floor:g} at both resolutions"
        else:
            entry.passed = linf <= floor
            entry.tolerance = f"Linf <= {floor:g}"
        report.entries[tag] = entry
    return report
