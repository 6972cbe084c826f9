import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavefield import ScenarioError
from wavefield.scenario import (
    IDENTITIES,
    load_scenario,
    parse_scenario,
    run_scenario,
    serialize,
    simulate,
    stationary_summary,
)

MINIMAL = """
grid.x_min = -10
grid.x_max = 10
grid.n_points = 256
state.kind = gaussian
prop.dt = 0.001
prop.t_end = 0.05
out.dt_out = 0.01
"""


def test_minimal_document_defaults():
    s = parse_scenario(MINIMAL)
    assert s.grid.hbar == 1.0 and s.grid.mass == 1.0
    assert s.prop.scheme == "split_fourier" and s.boundary == "periodic"
    assert s.potential.kind == "free"
    assert s.state.x0 == 0.0 and s.state.sigma == 1.0 and s.state.k0 == 0.0
    assert s.verify.identities == IDENTITIES and s.verify.refinement is False
    assert s.verify.mask_threshold == 1e-8 and s.out.dir == "out" and s.out.plots == ()
    assert s.n_snapshots == 6 and s.steps_per_snapshot == 10


def test_comments_and_blank_lines():
    s = parse_scenario("# header\n" + MINIMAL.replace("grid.n_points = 256", "grid.n_points = 256   # trailing"))
    assert s.grid.n_points == 256


def err(text):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    return info.value


def test_dt_out_not_multiple_names_both_values():
    e = err(MINIMAL.replace("out.dt_out = 0.01", "out.dt_out = 0.0025"))
    assert "0.0025" in str(e) and "0.001" in str(e) and e.key == "out.dt_out" and e.line == 8


def test_box_with_split_is_scheme_mismatch():
    e = err(MINIMAL + "potential.kind = box\nprop.scheme = split_fourier\n")
    assert "mismatch" in str(e) and e.key == "prop.scheme"
    e = err(MINIMAL + "potential.kind = box\n")  # split_fourier by default
    assert "mismatch" in str(e) and e.key == "potential.kind"


@pytest.mark.parametrize(
    "extra, key",
    [
        ("grid.colour = blue\n", "grid.colour"),
        ("grid.hbar = fast\n", "grid.hbar"),
        ("grid.hbar = -1\n", "grid.hbar"),
        ("verify.refinement = maybe\n", "verify.refinement"),
        ("verify.identities = continuity, entropy\n", "verify.identities"),
        ("verify.mask_threshold = 2\n", "verify.mask_threshold"),
        ("potential.kind = harmonic\n", "potential.kind"),
        ("potential.kind = harmonic\npotential.omega = -2\n", "potential.omega"),
        ("potential.slope = 1\n", "potential.slope"),
        ("state.n = 2\n", "state.n"),
        ("state.sigma = 0\n", "state.sigma"),
        ("out.plots = p, velocity\n", "out.plots"),
        ("prop.boundary = dirichlet\n", "prop.boundary"),
        ("prop.scheme = leapfrog\n", "prop.scheme"),
        ("grid.x_min = 3\n", "grid.x_min"),
    ],
)
def test_rejections_name_key_and_line(extra, key):
    e = err(MINIMAL + extra)
    assert e.key == key and e.line is not None
    assert f"line {e.line}" in str(e) and key in str(e)


def test_duplicate_missing_and_malformed_lines():
    assert "duplicate" in str(err(MINIMAL + "grid.x_min = 3\n"))
    e = err(MINIMAL.replace("prop.t_end = 0.05\n", ""))
    assert e.key == "prop.t_end"
    e = err(MINIMAL + "just words\n")
    assert e.line == 9
    assert err(MINIMAL.replace("grid.n_points = 256", "grid.n_points = 5")).key == "grid.n_points"
    assert err(MINIMAL.replace("grid.n_points = 256", "grid.n_points = 25.5")).key == "grid.n_points"
    assert err(MINIMAL.replace("grid.x_max = 10", "grid.x_max = -10")).key == "grid.x_max"
    assert err(MINIMAL.replace("prop.t_end = 0.05", "prop.t_end = 0.015")).key == "prop.t_end"


def test_state_constraints():
    e = err(MINIMAL.replace("state.kind = gaussian", "state.kind = eigenstate"))
    assert "crank_nicolson" in str(e)
    e = err(MINIMAL.replace("state.kind = gaussian", "state.kind = plane_wave\nstate.k0 = 1.3"))
    assert e.key == "state.k0"


def test_canonical_scenarios_parse(scenario_path):
    for name in ("free_gaussian", "box_eigenstates", "harmonic_coherent", "plane_wave_periodic", "linear_ramp"):
        s = load_scenario(scenario_path(name))
        assert parse_scenario(serialize(s)) == s


floats = st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False)


@given(
    x_min=floats,
    width=st.floats(min_value=1e-3, max_value=100),
    n=st.integers(8, 10_000),
    hbar=st.floats(min_value=1e-3, max_value=10),
    mass=st.floats(min_value=1e-3, max_value=10),
    x0=floats,
    sigma=st.floats(min_value=1e-3, max_value=10),
    k0=floats,
    dt=st.floats(min_value=1e-6, max_value=1e-1),
    ratio=st.integers(1, 50),
    extra=st.integers(0, 100),
    ids=st.lists(st.sampled_from(IDENTITIES), min_size=1, max_size=5, unique=True),
    refinement=st.booleans(),
    thr=st.floats(min_value=1e-16, max_value=0.5),
    plots=st.lists(st.sampled_from(["w", "p", "E", "Q"]), max_size=3),
    scheme=st.sampled_from(["crank_nicolson", "split_fourier"]),
    potential=st.sampled_from(["free", "harmonic", "linear", "barrier"]),
)
def test_serialize_round_trip(x_min, width, n, hbar, mass, x0, sigma, k0, dt, ratio, extra, ids, refinement,
                              thr, plots, scheme, potential):
    x_max = x_min + width
    if not x_max > x_min:
        return
    dt_out = dt * ratio
    if abs(dt_out / dt - round(dt_out / dt)) > 1e-9 * ratio:
        return
    pot = {"free": "", "harmonic": "potential.omega = 1.5\n", "linear": f"potential.slope = {k0!r}\n",
           "barrier": "potential.height = 2\npotential.left = -1\npotential.right = 0.5\n"}[potential]
    text = (
        f"grid.x_min = {x_min!r}\ngrid.x_max = {x_max!r}\ngrid.n_points = {n}\n"
        f"grid.hbar = {hbar!r}\ngrid.mass = {mass!r}\n"
        f"potential.kind = {potential}\n{pot}"
        f"state.kind = gaussian\nstate.x0 = {x0!r}\nstate.sigma = {sigma!r}\nstate.k0 = {k0!r}\n"
        f"prop.scheme = {scheme}\nprop.dt = {dt!r}\nprop.t_end = {dt_out * (2 + extra)!r}\n"
        f"verify.identities = {', '.join(ids)}\nverify.refinement = {str(refinement).lower()}\n"
        f"verify.mask_threshold = {thr!r}\n"
        f"out.dt_out = {dt_out!r}\nout.dir = runs/x\n" + (f"out.plots = {', '.join(dict.fromkeys(plots))}\n" if plots else "")
    )
    s = parse_scenario(text)
    again = parse_scenario(serialize(s))
    assert again == s
    assert serialize(again) == serialize(s)


def test_run_scenario_stationary_tables(scenario_path):
    s = load_scenario(scenario_path("box_eigenstates"))
    h, rep = run_scenario(s)
    assert rep.passed and len(h) == s.n_snapshots == 11
    assert [row[0] for row in rep.tables["Q_by_n"]] == [1, 2]


def test_stationary_summary_q_sequence(scenario_path):
    s = load_scenario(scenario_path("box_eigenstates"))
    rows = stationary_summary(s, 4)
    q = np.array([r.q_mean for r in rows])
    np.testing.assert_allclose(q, [r.q_exact for r in rows], rtol=1e-10)
    # the sequence grows like n^2
    np.testing.assert_allclose(q / q[0], [1, 4, 9, 16], rtol=1e-10)
    assert all(r.q_spread < 1e-10 for r in rows)


def test_simulate_is_deterministic(scenario_path):
    s = parse_scenario(MINIMAL + "state.k0 = 1\n")
    a, b = simulate(s), simulate(s)
    for x, y in zip(a.states, b.states):
        assert np.array_equal(x.samples, y.samples)
