"""Scenario documents: parsing, serialization and run orchestration.

A scenario is a flat ``key = value`` document with ``#`` comments. Keys are
grouped by prefix (``grid.``, ``potential.``, ``state.``, ``prop.``,
``verify.``, ``out.``)::

    grid.x_min = -15
    grid.x_max = 15
    grid.n_points = 4096
    state.kind = gaussian
    state.sigma = 1
    state.k0 = 1
    prop.scheme = crank_nicolson
    prop.dt = 5e-4
    prop.t_end = 1
    out.dt_out = 0.01
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import (
    DegenerateDomainError,
    NonPositiveConstantError,
    PotentialError,
    ScenarioError,
    SchemeMismatchError,
    TooFewPointsError,
    WavefieldError,
)
from .fields import LABELS, default_deriv, energy_field, q_field
from .grid import DEFAULT_MASK_THRESHOLD, Grid, WaveFunction, gaussian_packet, plane_wave
from .potentials import KINDS, PotentialField, PotentialSpec, eval_potential
from .propagator import BOUNDARIES, NATURAL_BOUNDARY, SCHEMES, PropagatorConfig, propagate, solve_stationary
from .verify import IDENTITIES, RunHistory, VerificationReport, build_report

STATE_KINDS = ("gaussian", "eigenstate", "plane_wave")
_STATE_PARAMS = {"gaussian": ("x0", "sigma", "k0"), "eigenstate": ("n",), "plane_wave": ("k0",)}
_STATE_DEFAULTS = {"x0": 0.0, "sigma": 1.0, "k0": 0.0, "n": 1}
_POTENTIAL_PARAMS = ("omega", "height", "left", "right", "slope")


@dataclass(frozen=True)
class GridConfig:
    x_min: float
    x_max: float
    n_points: int
    hbar: float = 1.0
    mass: float = 1.0

    def build(self) -> Grid:
        return Grid(self.x_min, self.x_max, self.n_points, self.hbar, self.mass)


@dataclass(frozen=True)
class PotentialConfig:
    kind: str = "free"
    omega: float | None = None
    height: float | None = None
    left: float | None = None
    right: float | None = None
    slope: float | None = None

    def spec(self) -> PotentialSpec:
        params = {k: getattr(self, k) for k in _POTENTIAL_PARAMS if getattr(self, k) is not None}
        return PotentialSpec(self.kind, params)


@dataclass(frozen=True)
class StateConfig:
    kind: str
    x0: float | None = None
    sigma: float | None = None
    k0: float | None = None
    n: int | None = None


@dataclass(frozen=True)
class PropConfig:
    dt: float
    t_end: float
    scheme: str = "split_fourier"
    boundary: str | None = None

    def config(self) -> PropagatorConfig:
        return PropagatorConfig(self.scheme, self.dt, self.boundary)


@dataclass(frozen=True)
class VerifyConfig:
    identities: tuple = IDENTITIES
    refinement: bool = False
    mask_threshold: float = DEFAULT_MASK_THRESHOLD


@dataclass(frozen=True)
class OutConfig:
    dt_out: float
    dir: str = "out"
    plots: tuple = ()


@dataclass(frozen=True)
class Scenario:
    grid: GridConfig
    potential: PotentialConfig
    state: StateConfig
    prop: PropConfig
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    out: OutConfig = None

    @property
    def steps_per_snapshot(self) -> int:
        return int(round(self.out.dt_out / self.prop.dt))

    @property
    def n_snapshots(self) -> int:
        return int(math.floor(self.prop.t_end / self.out.dt_out + 1e-9)) + 1

    @property
    def boundary(self) -> str:
        return self.prop.boundary or NATURAL_BOUNDARY[self.prop.scheme]

    def refined(self) -> Scenario:
        """Same physics with dx, dt and dt_out halved."""
        g = self.grid
        return replace(
            self,
            grid=replace(g, n_points=2 * (g.n_points - 1) + 1),
            prop=replace(self.prop, dt=0.5 * self.prop.dt),
            out=replace(self.out, dt_out=0.5 * self.out.dt_out),
        )


# -- parsing -------------------------------------------------------------------

_SECTIONS = {
    "grid": GridConfig,
    "potential": PotentialConfig,
    "state": StateConfig,
    "prop": PropConfig,
    "verify": VerifyConfig,
    "out": OutConfig,
}
_INT_KEYS = {"grid.n_points", "state.n"}
_FLOAT_KEYS = {
    "grid.x_min", "grid.x_max", "grid.hbar", "grid.mass",
    "potential.omega", "potential.height", "potential.left", "potential.right", "potential.slope",
    "state.x0", "state.sigma", "state.k0",
    "prop.dt", "prop.t_end",
    "verify.mask_threshold",
    "out.dt_out",
}
_BOOL_KEYS = {"verify.refinement"}
_LIST_KEYS = {"verify.identities", "out.plots"}
_STR_KEYS = {"potential.kind", "state.kind", "prop.scheme", "prop.boundary", "out.dir"}
KEYS = tuple(sorted(_INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _LIST_KEYS | _STR_KEYS))
REQUIRED = ("grid.x_min", "grid.x_max", "grid.n_points", "state.kind", "prop.dt", "prop.t_end", "out.dt_out")


def _convert(key: str, raw: str, line: int):
    try:
        if key in _INT_KEYS:
            v = float(raw)
            if not v.is_integer():
                raise ValueError
            return int(v)
        if key in _FLOAT_KEYS:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
    except ValueError:
        kind = "an integer" if key in _INT_KEYS else "a finite number"
        raise ScenarioError(f"expected {kind}, got {raw!r}", key, line) from None
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low not in ("true", "false"):
            raise ScenarioError(f"expected true or false, got {raw!r}", key, line)
        return low == "true"
    if key in _LIST_KEYS:
        items = tuple(s.strip() for s in raw.split(",") if s.strip())
        if key == "verify.identities" and items == ("all",):
            return IDENTITIES
        return items
    return raw


def _tokenize(text: str) -> dict:
    entries = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ScenarioError(f"expected 'key = value', got {body!r}", None, lineno)
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in KEYS:
            raise ScenarioError("unknown key", key, lineno)
        if key in entries:
            raise ScenarioError(f"duplicate key (first set on line {entries[key][1]})", key, lineno)
        if raw == "":
            raise ScenarioError("missing value", key, lineno)
        entries[key] = (_convert(key, raw, lineno), lineno)
    return entries


def parse_scenario(text: str) -> Scenario:
    """Validated :class:`Scenario` from a key-value document; defaults applied."""
    entries = _tokenize(text)
    missing = [k for k in REQUIRED if k not in entries]
    if missing:
        raise ScenarioError(f"required key(s) missing: {', '.join(missing)}", missing[0])

    def val(key, default=None):
        return entries[key][0] if key in entries else default

    def line(key):
        return entries[key][1] if key in entries else None

    def fail(msg, key):
        raise ScenarioError(msg, key, line(key))

    # grid
    try:
        grid_cfg = GridConfig(val("grid.x_min"), val("grid.x_max"), val("grid.n_points"),
                              val("grid.hbar", 1.0), val("grid.mass", 1.0))
        grid = grid_cfg.build()
    except DegenerateDomainError as e:
        fail(str(e), "grid.x_max")
    except TooFewPointsError as e:
        fail(str(e), "grid.n_points")
    except NonPositiveConstantError as e:
        fail(str(e), "grid.hbar" if "hbar" in str(e) else "grid.mass")

    # potential
    pkind = val("potential.kind", "free")
    if pkind not in KINDS or pkind == "tabulated":
        allowed = [k for k in KINDS if k != "tabulated"]
        fail(f"unknown potential kind {pkind!r}; expected one of {allowed}", "potential.kind")
    pot_cfg = PotentialConfig(pkind, **{k: val(f"potential.{k}") for k in _POTENTIAL_PARAMS})
    try:
        pspec = pot_cfg.spec()
    except PotentialError as e:
        extra = [k for k in _POTENTIAL_PARAMS if f"potential.{k}" in entries]
        key = next((f"potential.{k}" for k in extra if k in str(e)), "potential.kind")
        fail(str(e), key)

    # state
    skind = val("state.kind")
    if skind not in STATE_KINDS:
        fail(f"unknown state kind {skind!r}; expected one of {STATE_KINDS}", "state.kind")
    for k in ("x0", "sigma", "k0", "n"):
        if f"state.{k}" in entries and k not in _STATE_PARAMS[skind]:
            fail(f"{skind} state does not take '{k}'", f"state.{k}")
    state_cfg = StateConfig(skind, **{k: val(f"state.{k}", _STATE_DEFAULTS[k]) for k in _STATE_PARAMS[skind]})
    if skind == "gaussian" and not state_cfg.sigma > 0:
        fail(f"sigma must be positive, got {state_cfg.sigma}", "state.sigma")
    if skind == "eigenstate" and not 1 <= state_cfg.n <= grid.n_points - 3:
        fail(f"eigenstate index must be in [1, {grid.n_points - 3}], got {state_cfg.n}", "state.n")

    # propagation
    scheme = val("prop.scheme", "split_fourier")
    if scheme not in SCHEMES:
        fail(f"unknown scheme {scheme!r}; expected one of {SCHEMES}", "prop.scheme")
    boundary = val("prop.boundary")
    if boundary is not None and boundary not in BOUNDARIES:
        fail(f"unknown boundary {boundary!r}; expected one of {BOUNDARIES}", "prop.boundary")
    prop_cfg = PropConfig(val("prop.dt"), val("prop.t_end"), scheme, boundary)
    try:
        pcfg = prop_cfg.config()
    except SchemeMismatchError as e:
        fail(str(e), "prop.boundary")
    except WavefieldError as e:
        fail(str(e), "prop.dt")
    if pspec.requires_dirichlet and pcfg.boundary != "dirichlet":
        fail(f"boundary/scheme mismatch: a box potential needs dirichlet walls, but scheme "
             f"{scheme} propagates with {pcfg.boundary} boundaries; use crank_nicolson",
             "prop.scheme" if "prop.scheme" in entries else "potential.kind")
    if skind == "eigenstate" and pcfg.boundary != "dirichlet":
        fail("eigenstates come from the dirichlet eigensolver; use scheme crank_nicolson", "state.kind")
    if skind == "plane_wave":
        if pcfg.boundary != "periodic":
            fail("a plane wave needs periodic boundaries; use scheme split_fourier", "state.kind")
        turns = state_cfg.k0 * grid.period / (2.0 * math.pi)
        if abs(turns - round(turns)) > 1e-9 * max(1.0, abs(turns)):
            fail(f"k0 = {state_cfg.k0!r} is not commensurate with the period {grid.period!r}", "state.k0")

    # verification
    ids = val("verify.identities", IDENTITIES)
    if not ids:
        fail("identity selection is empty", "verify.identities")
    bad = [i for i in ids if i not in IDENTITIES]
    if bad:
        fail(f"unknown identity tag(s) {bad}; expected from {IDENTITIES} or 'all'", "verify.identities")
    if len(set(ids)) != len(ids):
        fail("identity listed twice", "verify.identities")
    thr = val("verify.mask_threshold", DEFAULT_MASK_THRESHOLD)
    if not 0 < thr < 1:
        fail(f"mask_threshold must lie in (0, 1), got {thr}", "verify.mask_threshold")
    verify_cfg = VerifyConfig(tuple(ids), val("verify.refinement", False), thr)

    # output
    dt, dt_out, t_end = prop_cfg.dt, val("out.dt_out"), prop_cfg.t_end
    if not dt_out > 0:
        fail(f"dt_out must be positive, got {dt_out}", "out.dt_out")
    ratio = dt_out / dt
    if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9 * ratio:
        fail(f"dt_out = {dt_out!r} is not an integer multiple of dt = {dt!r}", "out.dt_out")
    if not t_end >= 2.0 * dt_out * (1 - 1e-12):
        fail(f"t_end = {t_end!r} must be at least 2 * dt_out = {2 * dt_out!r}", "prop.t_end")
    plots = val("out.plots", ())
    bad = [p for p in plots if p not in LABELS]
    if bad:
        fail(f"unknown field(s) {bad}; expected from {LABELS}", "out.plots")
    out_cfg = OutConfig(dt_out, val("out.dir", "out"), tuple(plots))

    return Scenario(grid_cfg, pot_cfg, state_cfg, prop_cfg, verify_cfg, out_cfg)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(v)
    return str(v)


def serialize(s: Scenario) -> str:
    """Key-value text that parses back to an equal Scenario (floats use repr)."""
    lines = []
    for section, cls in _SECTIONS.items():
        cfg = getattr(s, section)
        for f in fields(cls):
            v = getattr(cfg, f.name)
            if v is None or (isinstance(v, tuple) and not v):
                continue
            lines.append(f"{section}.{f.name} = {_format(v)}")
    return "\n".join(lines) + "\n"


# -- running -------------------------------------------------------------------


def initial_state(s: Scenario, grid: Grid, v: PotentialField) -> WaveFunction:
    st = s.state
    if st.kind == "gaussian":
        return gaussian_packet(grid, st.x0, st.sigma, st.k0)
    if st.kind == "plane_wave":
        return plane_wave(grid, st.k0)
    return solve_stationary(v, grid, st.n).wavefunction(st.n - 1)


def simulate(s: Scenario) -> RunHistory:
    """Propagate the scenario and collect snapshots every dt_out."""
    grid = s.grid.build()
    v = eval_potential(s.potential.spec(), grid)
    cfg = s.prop.config()
    states = propagate(initial_state(s, grid, v), v, cfg, s.n_snapshots, s.steps_per_snapshot)
    return RunHistory(states, v, cfg, s.verify.mask_threshold, default_deriv(cfg.boundary))


@dataclass(frozen=True)
class StationaryRow:
    n: int
    energy: float  # eigenvalue
    e_mean: float  # mean of the local energy field
    e_spread: float  # (max - min)/|mean| of the local energy field
    q_mean: float
    q_spread: float
    q_exact: float | None  # hbar^2 k_n^2/(m L) for the box


def stationary_summary(s: Scenario, count: int) -> list[StationaryRow]:
    """Local energy and Q constancy for the lowest ``count`` eigenstates.

    E uses 3-point stencils (it tests the discrete eigenproblem). Q uses the
    odd-extension spectral derivative: the discrete eigenvectors are sampled
    sines for the box, so this evaluates Q of the state itself rather than
    the stencil error of a first difference.
    """
    grid = s.grid.build()
    v = eval_potential(s.potential.spec(), grid)
    sol = solve_stationary(v, grid, count)
    thr = s.verify.mask_threshold
    rows = []
    for i in range(count):
        psi = sol.wavefunction(i)
        E = energy_field(psi, v, thr, "fd")
        Q = q_field(psi, thr, "sine")
        e, q = E.valid, Q.valid
        qx = None
        if s.potential.kind == "box":
            kn = (i + 1) * math.pi / grid.length
            qx = grid.hbar**2 * kn**2 / (grid.mass * grid.length)
        rows.append(StationaryRow(
            i + 1, float(sol.energies[i]),
            float(np.mean(e)), float(np.ptp(e) / abs(np.mean(e))),
            float(np.mean(q)), float(np.ptp(q) / abs(np.mean(q))), qx,
        ))
    return rows


def run_scenario(s: Scenario) -> tuple[RunHistory, VerificationReport]:
    """Propagate, verify the selected identities and return (history, report).

    With ``verify.refinement`` the scenario is rerun at half dx, dt and dt_out
    and the report carries convergence ratios.
    """
    h = simulate(s)
    ref = simulate(s.refined()) if s.verify.refinement else None
    report = build_report(h, s.verify.identities, refinement=ref)
    if s.state.kind == "eigenstate":
        rows = stationary_summary(s, s.state.n)
        report.tables["stationary"] = [r.__dict__ for r in rows]
        report.tables["Q_by_n"] = [[r.n, r.q_mean] for r in rows]
    return h, report
