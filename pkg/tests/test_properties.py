"""Property-based checks of invariances that hold for any admissible state."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavefield import (
    IDENTITIES,
    PotentialSpec,
    PropagatorConfig,
    RunHistory,
    all_fields,
    build_report,
    decompose,
    eval_potential,
    gaussian_packet,
    kinetic_field,
    make_grid,
    momentum_field,
    normalize,
    propagate,
)
from wavefield.grid import WaveFunction, unmasked_runs

GRID = make_grid(-15.0, 15.0, 256)
V = eval_potential(PotentialSpec.harmonic(1.0), GRID)

alphas = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)
centres = st.floats(min_value=-3.0, max_value=3.0)
widths = st.floats(min_value=0.6, max_value=1.5)
boosts = st.floats(min_value=-3.0, max_value=3.0)


@pytest.fixture(scope="module")
def history():
    psi0 = gaussian_packet(GRID, 1.0, 0.9, 0.7)
    cfg = PropagatorConfig("crank_nicolson", 1e-3)
    return RunHistory(propagate(psi0, V, cfg, 9, 50), V, cfg, 1e-8, "fd")


def _close(a, b, tol):
    a, b = np.asarray(a, float), np.asarray(b, float)
    assert np.array_equal(np.isnan(a), np.isnan(b))
    ok = ~np.isnan(a)
    assert np.max(np.abs(a[ok] - b[ok]), initial=0.0) <= tol


@given(alpha=alphas)
@settings(max_examples=25)
def test_fields_invariant_under_global_phase(history, alpha):
    psi = history.states[4]
    a = all_fields(psi, V)
    b = all_fields(psi.rotated(alpha), V)
    for key in ("w", "k", "p", "K", "Kw", "E", "j", "Q"):
        _close(a[key], b[key], 1e-13)
    # phi itself shifts by alpha modulo 2 pi
    ok = a["mask"] == 0
    d = np.angle(np.exp(1j * (b["phi"][ok] - a["phi"][ok] - alpha)))
    assert np.max(np.abs(d)) < 1e-12


@given(alpha=alphas)
@settings(max_examples=10)
def test_report_invariant_under_global_phase(history, alpha):
    ids = tuple(i for i in IDENTITIES if i != "ehrenfest")
    r0 = build_report(history, ids)
    r1 = build_report(history.rotated(alpha), ids)
    for tag in ids:
        assert r1.entries[tag].linf == pytest.approx(r0.entries[tag].linf, rel=1e-9, abs=1e-13)


@given(x0=centres, sigma=widths, k0=boosts, scale=st.floats(min_value=1e-3, max_value=1e3))
def test_normalize_gives_unit_norm(x0, sigma, k0, scale):
    psi = gaussian_packet(GRID, x0, sigma, k0)
    raw = WaveFunction(GRID, scale * psi.samples)
    assert normalize(raw).norm == pytest.approx(1.0, abs=1e-13)


@given(x0=centres, sigma=widths, k0=boosts, alpha=alphas)
def test_modulus_phase_reconstruction(x0, sigma, k0, alpha):
    psi = gaussian_packet(GRID, x0, sigma, k0).rotated(alpha)
    mp = decompose(psi)
    err = np.abs(mp.reconstruct() - psi.samples)
    assert err.max() <= 1e-12 * np.abs(psi.samples).max()


@given(x0=centres, sigma=widths, k0=boosts, alpha=alphas)
def test_unwrapped_phase_has_no_pi_steps(x0, sigma, k0, alpha):
    mp = decompose(gaussian_packet(GRID, x0, sigma, k0).rotated(alpha))
    for a, b in unmasked_runs(mp.mask):
        assert np.all(np.abs(np.diff(mp.phi[a:b])) < np.pi)


@given(x0=centres, sigma=widths, k0=boosts)
def test_kinetic_splits_into_flow_and_quantum_parts(x0, sigma, k0):
    psi = gaussian_packet(GRID, x0, sigma, k0)
    K, Kw = kinetic_field(psi)
    p = momentum_field(psi)
    ok = ~(K.mask | Kw.mask | p.mask)
    lhs = K.values[ok]
    rhs = p.values[ok] ** 2 / (2 * GRID.mass) + Kw.values[ok]
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(lhs)))
