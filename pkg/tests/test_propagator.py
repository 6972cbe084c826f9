import numpy as np
import pytest

from oracles import box_energy, box_energy_discrete, free_gaussian_psi
from wavefield import (
    PotentialSpec,
    PropagationError,
    PropagatorConfig,
    SchemeMismatchError,
    UnwrapGuardError,
    WaveFunction,
    WavefieldError,
    box_eigenstate,
    eval_potential,
    gaussian_packet,
    make_grid,
    plane_wave,
    propagate,
    solve_stationary,
    step_crank_nicolson,
    step_split_fourier,
)
from wavefield.propagator import CrankNicolson, apply_hamiltonian


def free(g):
    return eval_potential(PotentialSpec.free(), g)


def test_config_boundary_defaults_and_mismatch():
    assert PropagatorConfig("crank_nicolson", 1e-3).boundary == "dirichlet"
    assert PropagatorConfig("split_fourier", 1e-3).boundary == "periodic"
    with pytest.raises(SchemeMismatchError):
        PropagatorConfig("split_fourier", 1e-3, "dirichlet")
    with pytest.raises(SchemeMismatchError):
        PropagatorConfig("crank_nicolson", 1e-3, "periodic")
    with pytest.raises(WavefieldError):
        PropagatorConfig("crank_nicolson", 0.0)
    with pytest.raises(WavefieldError):
        PropagatorConfig("leapfrog", 1e-3)


def test_cn_on_discrete_eigenstate_is_cayley_factor():
    g = make_grid(0, 1, 129)
    v = free(g)
    sol = solve_stationary(v, g, 1)
    u, E = sol.wavefunction(0), sol.energies[0]
    dt = 1e-3
    out = step_crank_nicolson(u, v, dt)
    factor = (1 - 0.5j * E * dt) / (1 + 0.5j * E * dt)
    np.testing.assert_allclose(out.samples, factor * u.samples, rtol=0, atol=1e-13)
    np.testing.assert_allclose(np.abs(out.samples), np.abs(u.samples), rtol=0, atol=1e-13)
    assert out.time == pytest.approx(dt)


def test_cn_single_step_norm():
    g = make_grid(-10, 10, 1001)
    v = eval_potential(PotentialSpec.harmonic(1.0), g)
    psi = gaussian_packet(g, 1, 0.8, 2)
    out = step_crank_nicolson(psi.with_samples(np.where(np.arange(1001) % 1000 == 0, 0, psi.samples)), v, 0.01)
    assert abs(out.norm - 1.0) <= 1e-12


def test_cn_harmonic_coherent_half_period():
    g = make_grid(-10, 10, 2001)
    v = eval_potential(PotentialSpec.harmonic(1.0), g)
    psi = gaussian_packet(g, 1.0, np.sqrt(0.5), 0.0)
    steps = 3142
    out = propagate(psi, v, PropagatorConfig("crank_nicolson", np.pi / steps), 2, steps)[-1]
    assert np.sum(g.x * out.density) * g.dx == pytest.approx(-1.0, abs=1e-3)


def test_split_plane_wave_exact_dispersion():
    g = make_grid(0, 2 * np.pi * 63 / 64, 64)
    psi = plane_wave(g, 2.0)
    out = step_split_fourier(psi, free(g), 0.1)
    np.testing.assert_allclose(out.samples, np.exp(-0.2j) * psi.samples, rtol=0, atol=1e-14)


def test_split_free_gaussian_matches_closed_form():
    g = make_grid(-20, 20, 2048)
    psi = gaussian_packet(g, 0, 1, 0)
    out = propagate(psi, free(g), PropagatorConfig("split_fourier", 1e-3), 2, 1000)[-1]
    assert np.max(np.abs(out.samples - free_gaussian_psi(g.x, 1.0))) < 1e-6


def test_split_reversible():
    g = make_grid(-10, 10, 512)
    psi = gaussian_packet(g, -1, 0.7, 3)
    back = step_split_fourier(step_split_fourier(psi, free(g), 0.05), free(g), -0.05)
    np.testing.assert_allclose(back.samples, psi.samples, rtol=0, atol=1e-12)


def test_split_norm_per_step():
    g = make_grid(-10, 10, 512)
    v = eval_potential(PotentialSpec.harmonic(1.0), g)
    out = step_split_fourier(gaussian_packet(g, 1, 1, 1), v, 0.01)
    assert abs(out.norm - 1.0) <= 1e-12


def test_cn_time_order_against_closed_form():
    g = make_grid(-20, 20, 8001)
    psi = gaussian_packet(g, 0, 1, 1)
    errs = []
    for dt in (0.04, 0.02):
        out = propagate(psi, free(g), PropagatorConfig("crank_nicolson", dt), 2, int(round(1 / dt)))[-1]
        errs.append(np.max(np.abs(out.samples - free_gaussian_psi(g.x, 1.0, 0, 1, 1))))
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_propagate_snapshot_times():
    g = make_grid(-10, 10, 256)
    st = propagate(gaussian_packet(g, 0, 1, 0), free(g), PropagatorConfig("split_fourier", 0.01), 5, 3)
    np.testing.assert_allclose([s.time for s in st], [0, 0.03, 0.06, 0.09, 0.12])


def test_propagate_reports_failure_time():
    g = make_grid(-10, 10, 256)
    bad = WaveFunction(g, np.full(256, np.nan + 0j), 0.5)
    with pytest.raises(PropagationError) as info:
        propagate(bad, free(g), PropagatorConfig("split_fourier", 1e-3), 3, 2)
    assert info.value.time == pytest.approx(0.502)
    assert "0.502" in str(info.value)


def test_dt_guard_at_run_start():
    g = make_grid(0, 1, 257)
    v = eval_potential(PotentialSpec.box(), g)
    psi = box_eigenstate(g, 4)  # E ~ 79
    with pytest.raises(UnwrapGuardError):
        propagate(psi, v, PropagatorConfig("crank_nicolson", 0.05), 3, 1)


def test_box_ground_state_within_fd_bound():
    g = make_grid(0, 1, 2001)
    sol = solve_stationary(free(g), g, 1)
    bound = (np.pi * g.dx) ** 2 / 12
    assert abs(sol.energies[0] - box_energy(1)) / box_energy(1) <= bound * 1.0001
    assert sol.energies[0] == pytest.approx(4.934802, abs=2e-6)


def test_box_spectrum_matches_discrete_closed_form():
    g = make_grid(0, 1, 513)
    sol = solve_stationary(free(g), g, 6)
    exact = [box_energy_discrete(n, 1.0, 513) for n in range(1, 7)]
    np.testing.assert_allclose(sol.energies, exact, rtol=1e-12)


def test_harmonic_ground_state():
    g = make_grid(-10, 10, 2001)
    sol = solve_stationary(eval_potential(PotentialSpec.harmonic(1.0), g), g, 3)
    assert sol.energies[0] == pytest.approx(0.5, abs=1e-5)
    assert np.all(np.diff(sol.energies) > 0)


def test_eigen_invariants():
    g = make_grid(-8, 8, 801)
    v = eval_potential(PotentialSpec.harmonic(1.3), g)
    sol = solve_stationary(v, g, 5)
    norms = np.sum(sol.states**2, axis=1) * g.dx
    np.testing.assert_allclose(norms, 1.0, atol=1e-10)
    assert np.all(sol.residuals(v) <= 1e-8 * np.abs(sol.energies))
    for u in sol.states:
        lead = np.flatnonzero(np.abs(u) > 1e-3 * np.abs(u).max())[0]
        assert u[lead] > 0
    assert np.all(sol.states[:, [0, -1]] == 0)


def test_eigen_state_count_validated():
    g = make_grid(0, 1, 16)
    with pytest.raises(WavefieldError):
        solve_stationary(free(g), g, 0)
    with pytest.raises(WavefieldError):
        solve_stationary(free(g), g, 14)


def test_apply_hamiltonian_on_sine_matches_discrete_eigenvalue():
    g = make_grid(0, 1, 65)
    u = box_eigenstate(g, 3)
    hu = apply_hamiltonian(u, free(g))
    np.testing.assert_allclose(hu, box_energy_discrete(3, 1.0, 65) * u.samples, atol=1e-10)


def test_cn_stepper_rejects_mismatched_potential():
    g = make_grid(0, 1, 16)
    with pytest.raises(WavefieldError):
        CrankNicolson(g, free(make_grid(0, 1, 17)), 1e-3)
