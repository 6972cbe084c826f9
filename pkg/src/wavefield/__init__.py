"""Local observable fields of one-dimensional wave functions.

A wave function is split into modulus and phase, psi = sqrt(w) exp(i phi),
and the pointwise momentum, kinetic, energy, frequency, flux and Q fields are
extracted on a grid. Propagated runs are checked against the local
conservation identities those fields satisfy.
"""

from .errors import *  # noqa: F401,F403
from .fields import (
    DERIVS,
    LABELS,
    Expectation,
    ObservableField,
    OperatorStencil,
    all_fields,
    derivatives,
    energy_field,
    expectation,
    flux_field,
    frequency_field,
    kinetic_field,
    local_field,
    momentum_field,
    q_field,
    temporal_phase_difference,
    wavenumber_field,
)
from .grid import (
    Grid,
    ModulusPhaseField,
    WaveFunction,
    box_eigenstate,
    decompose,
    gaussian_packet,
    make_grid,
    normalize,
    plane_wave,
)
from .potentials import PotentialField, PotentialSpec, eval_potential
from .propagator import (
    EigenSolution,
    PropagatorConfig,
    propagate,
    solve_stationary,
    step_crank_nicolson,
    step_split_fourier,
)
from .scenario import Scenario, load_scenario, parse_scenario, run_scenario, serialize
from .verify import (
    IDENTITIES,
    RunHistory,
    VerificationReport,
    build_report,
    continuity_residual,
    duality_residual,
    ehrenfest_check,
    energy_frequency_residual,
    local_balance_residual,
    momentum_balance_residual,
    q_boundary_check,
)

__version__ = "0.1.0"
