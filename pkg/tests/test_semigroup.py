import math

import numpy as np
import pytest
from scipy.sparse.linalg import expm_multiply

from adslab.errors import ConfigurationError
from adslab.generator import Absorber, Problem, Resolution, assemble, eigs_near, sample_mode
from adslab.generator import gradient_witness
from adslab.semigroup import (decay_experiment, energy_flux_audit, evolve, evolve_leapfrog,
                              finite_speed_test, leapfrog_dt, remove_kernel_witnesses, shell_data)
from adslab.sphere import ModeProblem, make_profile

LAM = (1 - math.sqrt(5)) / 2


@pytest.fixture(scope="module")
def gen():
    return assemble(Problem(1.0), Resolution(N_r=100))


def test_zero_data_stays_zero(gen):
    tr = evolve(gen, np.zeros(gen.size), 1.0, dt=0.1)
    assert np.all(tr.energy == 0) and np.all(tr.final.fields == 0)


def test_input_validation(gen):
    with pytest.raises(ConfigurationError):
        evolve(gen, np.zeros(3), 1.0)
    with pytest.raises(ConfigurationError):
        evolve(gen, np.full(gen.size, np.nan), 1.0)
    with pytest.raises(ConfigurationError):
        evolve(gen, np.zeros(gen.size), 0.0)
    with pytest.raises(ConfigurationError):
        shell_data(gen, 0.5, 2.0)


def test_reflecting_problem_conserves_energy():
    g = assemble(Problem(1.0, reflecting=True), Resolution(N_r=80, absorber=Absorber(sigma_max=0.0)))
    f = shell_data(g, 2.0, 4.0)
    tr = evolve(g, f, 3.0, dt=0.05)
    assert np.max(np.abs(tr.energy - tr.energy[0])) < 1e-12


def test_reflecting_drift_over_long_run():
    g = assemble(Problem(1.0, reflecting=True), Resolution(N_r=100))
    tr = evolve(g, shell_data(g, 2.0, 3.0), 10.0)
    assert np.max(np.abs(tr.energy / tr.energy[0] - 1)) < 1e-8


def test_eigenmode_boundary_rate_is_twice_decay_rate():
    g = assemble(Problem(1.0), Resolution(N_r=200))
    f = sample_mode(g, make_profile(ModeProblem(1, "TE", 1.0), complex(LAM)))
    audit = energy_flux_audit(evolve(g, f, 3.0, dt=0.02))
    assert audit["mean_boundary_rate"] == pytest.approx(2 * LAM, rel=0.02)


def test_no_boundary_flux_before_arrival():
    g = assemble(Problem(1.0), Resolution(N_r=200))
    tr = evolve(g, shell_data(g, 3.0, 4.0), 1.5)
    assert np.max(np.abs(tr.boundary_flux)) < 1e-12 * tr.energy[0]


def test_energy_balance_and_flux_signs(gen):
    f = shell_data(gen, 2.0, 4.0)
    tr = evolve(gen, f, 4.0, dt=0.05)
    audit = energy_flux_audit(tr)
    assert audit["balance_ok"] and audit["balance_mismatch"] < 1e-10
    assert audit["boundary_flux_nonpositive"] and audit["absorber_flux_nonpositive"]
    assert np.all(np.diff(tr.energy) <= 1e-14)
    assert audit["boundary_flux_total"] < 0


@pytest.mark.parametrize("eps", [0.1, 10.0])
def test_boundary_flux_nonpositive_for_any_epsilon(eps):
    g = assemble(Problem(eps), Resolution(N_r=80))
    tr = evolve(g, shell_data(g, 1.5, 3.0, pol="TM"), 3.0, dt=0.05)
    assert energy_flux_audit(tr)["boundary_flux_nonpositive"]


def test_semigroup_property(gen):
    f = shell_data(gen, 2.0, 4.0, l=1, m=1, pol="TM")
    a = evolve(gen, f, 1.0, dt=0.05).final.fields
    b = evolve(gen, a, 0.5, dt=0.05).final.fields
    c = evolve(gen, f, 1.5, dt=0.05).final.fields
    assert np.linalg.norm(b - c) < 1e-12 * np.linalg.norm(c)


def test_matches_matrix_exponential_at_second_order():
    g = assemble(Problem(1.0), Resolution(N_r=40))
    f = shell_data(g, 2.0, 4.0)
    T = 1.0
    exact = expm_multiply(g.G * T, f)
    errs = [np.linalg.norm(evolve(g, f, T, dt=dt).final.fields - exact) for dt in (0.04, 0.02, 0.01)]
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(rates) > 1.9


def test_discrete_eigenvector_decays_at_scheme_rate(gen):
    e = [e for e in eigs_near(gen, LAM, 3) if e.accepted][0]
    dt, T = 0.05, 2.0
    tr = evolve(gen, e.vector, T, dt=dt)
    amp = (1 + 0.5 * e.value * dt) / (1 - 0.5 * e.value * dt)
    n = np.arange(len(tr.times))
    expect = tr.energy[0] * np.abs(amp) ** (2 * n)
    np.testing.assert_allclose(tr.energy, expect, rtol=1e-9)


def test_sampled_mode_decays_near_continuum_rate():
    g = assemble(Problem(1.0), Resolution(N_r=200))
    f = sample_mode(g, make_profile(ModeProblem(1, "TE", 1.0), LAM))
    tr = evolve(g, f, 2.0, dt=0.02, store_every=25)
    ratio = np.sqrt(tr.energy / tr.energy[0])
    assert np.max(np.abs(ratio / np.exp(LAM * tr.times) - 1)) < 0.01
    # lambda* is real, so the phase of <f, u(t)> must not rotate
    for st in tr.states[1:]:
        z = g.inner(f, st.fields)
        assert abs(np.angle(z)) < 0.01 and abs(abs(z) / g.energy(f) - np.exp(LAM * st.t)) < 0.01


def test_leapfrog_is_stable():
    g = assemble(Problem(1.0), Resolution(N_r=150, beta=0.0))
    f = shell_data(g, 2.0, 3.0)
    dt = leapfrog_dt(g)
    tr = evolve_leapfrog(g, f, 6.0, dt=dt)
    assert np.max(tr.energy) < 1.1 * tr.energy[0]
    assert tr.energy[-1] < tr.energy[0]


def test_leapfrog_rejects_mass_matrix():
    g = assemble(Problem(1.0, delta=0.05, shape=((2, 0, 1.0),)), Resolution(L_max=2, N_r=30))
    with pytest.raises(ConfigurationError):
        evolve_leapfrog(g, np.zeros(g.size), 1.0)


def test_finite_speed_on_uniform_grid():
    g = assemble(Problem(1.0), Resolution(N_r=200, beta=0.0))
    f = shell_data(g, 2.0, 3.0)
    rep = finite_speed_test(g, f, b=3.0, c=5.0)
    assert rep["passed"]
    assert rep["bound"] <= rep["arrival"] < 2.6


def test_probe_inside_support_sees_data_immediately():
    g = assemble(Problem(1.0), Resolution(N_r=100, beta=0.0))
    rep = finite_speed_test(g, shell_data(g, 2.0, 3.0), b=3.0, c=2.5, T=0.5)
    assert rep["arrival"] == 0.0


def test_implicit_scheme_precursor_is_diagnostic_only():
    g = assemble(Problem(1.0), Resolution(N_r=100, beta=0.0))
    rep = finite_speed_test(g, shell_data(g, 2.0, 3.0), b=3.0, c=5.0, T=3.0, method="cn")
    assert rep["method"] == "cn" and math.isfinite(rep["arrival"])
    with pytest.raises(ConfigurationError):
        finite_speed_test(g, shell_data(g, 2.0, 3.0), b=3.0, c=25.0)


def test_witness_projection_removes_kernel_part(gen):
    w = gradient_witness(gen, 0, 4.0, 1.0)
    f = shell_data(gen, 2.0, 3.0)
    mixed = f + w / math.sqrt(gen.energy(w))
    g, removed = remove_kernel_witnesses(gen, mixed, witnesses=[w, gradient_witness(gen, 0, 8.0, 2.0)])
    assert removed == pytest.approx(0.5, abs=1e-6)  # f is orthogonal to gradients
    # the projected data keeps no stationary part along that witness
    assert abs(gen.inner(w, g)) < 1e-10 * math.sqrt(gen.energy(w) * gen.energy(g))


def test_decay_experiment_reports_profile(gen):
    f = shell_data(gen, 2.0, 3.0) + shell_data(gen, 1.5, 4.0, pol="TM")
    # energy leaves through the boundary and, after r = 20, through the absorber
    rep = decay_experiment(gen, f, 60.0, dt=0.05)
    assert abs(rep["kernel_fraction_removed"]) < 1e-12  # tangential data has no gradient part
    assert rep["energy_ratio"][0] == pytest.approx(1.0)
    assert np.all(np.diff(rep["energy_ratio"]) <= 1e-12)
    assert rep["final_ratio"] < 0.1 and rep["boundary_loss"] > 0
