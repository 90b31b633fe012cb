import math

import numpy as np
import pytest
import scipy.sparse as sp

from adslab.errors import ConfigurationError, NearSingularSolve, ResolutionError, UnstableAbsorber
from adslab.generator import (Absorber, ContourSpec, Problem, Resolution, assemble,
                              coercivity_diagnostic, eigs_near, kernel_witness_check, mapped_grid,
                              resolvent_solve, sample_mode)
from adslab.sphere import ModeProblem, find_roots, make_profile

LAM = (1 - math.sqrt(5)) / 2
RES200 = Resolution(N_r=200)


@pytest.fixture(scope="module")
def gen200():
    return assemble(Problem(1.0), RES200)


def test_grid_is_staggered_and_clustered():
    r, rh = mapped_grid(1.0, 30.0, 50, 4.0)
    assert r[0] == 1.0 and r[-1] == 30.0
    assert np.all(np.diff(r) > 0) and np.all((rh > r[:-1]) & (rh < r[1:]))
    assert np.diff(r)[0] < np.diff(r)[-1]
    r0, _ = mapped_grid(1.0, 30.0, 50, 0.0)
    np.testing.assert_allclose(np.diff(r0), 29.0 / 50)


def test_block_diagonal_symmetric_case():
    gen = assemble(Problem(1.0), Resolution(L_max=2, N_r=40))
    assert gen.is_block_diagonal()
    assert len(gen.modes) == 2 * 8


def test_dissipative_symmetric_part(gen200):
    WG = gen200.WG.toarray()
    sym = 0.5 * (WG + WG.conj().T)
    assert np.max(np.linalg.eigvalsh(sym)) <= 1e-10


def test_reflecting_variant_is_skew():
    res = Resolution(N_r=80, absorber=Absorber(sigma_max=0.0))
    gen = assemble(Problem(1.0, reflecting=True), res)
    WG = gen.WG.toarray()
    assert np.max(np.abs(WG + WG.conj().T)) < 1e-10 * np.max(np.abs(WG))
    ev = np.linalg.eigvals(gen.G.toarray())
    assert np.max(np.abs(ev.real)) < 1e-8


def test_angle_epsilon_constant_list_matches_float():
    res = Resolution(N_r=60)
    y00 = math.sqrt(4 * math.pi)
    a = assemble(Problem(1.0), res)
    b = assemble(Problem(((0, 0, y00),)), res)
    assert abs(a.G - b.G).max() < 1e-12


def test_angle_epsilon_couples_modes_and_stays_dissipative():
    res = Resolution(N_r=40)
    y00 = math.sqrt(4 * math.pi)
    gen = assemble(Problem(((0, 0, y00), (2, 0, 0.8))), res)
    assert not gen.is_block_diagonal()
    WG = gen.WG.toarray()
    assert np.max(np.linalg.eigvalsh(0.5 * (WG + WG.conj().T))) <= 1e-10


def test_nonpositive_angle_epsilon_rejected():
    with pytest.raises(ConfigurationError):
        assemble(Problem(((0, 0, 0.1), (1, 0, 3.0))), Resolution(N_r=30))


def test_eigenvalue_near_sphere_root(gen200):
    res = [e for e in eigs_near(gen200, LAM, 6) if e.accepted]
    best = min(res, key=lambda e: abs(e.value - LAM))
    assert abs(best.value - LAM) < 2e-4
    assert best.residual < 1e-8
    # triple m-degeneracy of the l = 1 TE mode
    assert sum(abs(e.value - best.value) < 1e-8 for e in res) == 3
    assert all(e.value.real <= 1e-8 for e in res)


def test_conjugate_target_gives_conjugate_eigenvalues():
    gen = assemble(Problem(0.3), Resolution(L_max=2, N_r=100))
    z = complex(-1.0, 0.8)
    a = sorted([e.value for e in eigs_near(gen, z, 4) if e.accepted], key=lambda w: (w.real, w.imag))
    b = sorted([e.value.conjugate() for e in eigs_near(gen, z.conjugate(), 4) if e.accepted],
               key=lambda w: (w.real, w.imag))
    assert len(a) == len(b) > 0
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_no_spurious_eigenvalue_in_certified_empty_disk(gen200):
    # dispersion roots certify that no l <= 1 mode lies near -2 + 3i
    from adslab.sphere import winding_number
    for pol in ("TE", "TM"):
        assert winding_number(ModeProblem(1, pol, 1.0), (-2.3, -1.7, 2.7, 3.3)) == 0
    res = eigs_near(gen200, complex(-2, 3), 4)
    assert not any(e.accepted and abs(e.value - complex(-2, 3)) < 0.3 for e in res)


def test_resolvent_identity(gen200):
    rng = np.random.default_rng(0)
    b = rng.standard_normal(gen200.size)
    for z in (0.5 + 0.2j, -1.0, -0.3 + 2j):
        x = resolvent_solve(gen200, z, b)
        r = z * x - gen200.G @ x - b
        assert np.linalg.norm(r) < 1e-10 * np.linalg.norm(b) * (1 + abs(z))


def test_resolvent_refuses_known_eigenvalue():
    gen = assemble(Problem(1.0), Resolution(N_r=60))
    lam = [e for e in eigs_near(gen, LAM, 3) if e.accepted][0].value
    with pytest.raises(NearSingularSolve):
        resolvent_solve(gen, lam, np.ones(gen.size))


def test_kernel_witnesses(gen200):
    kw = kernel_witness_check(gen200, count=12, seed=1)
    assert kw["passed"]
    assert kw["max_ratio"] < 1e-6 and kw["gram_rank"] == 12
    assert kw["boundary_overlap_ratio"] > 1e3 * kw["max_ratio"]


def test_coercivity_diagnostic():
    gen = assemble(Problem(1.0), Resolution(N_r=60))
    rep = coercivity_diagnostic(gen, [-1.0, -0.01, complex(-0.1, 1.0)])
    # one discrete gradient per interior half-node in each block
    assert rep["kernel_dimension"] == len(gen.modes) * 60
    for c in rep["bound_curve"]:
        z = complex(*c["z"])
        assert 0 < c["sigma_min_full"] <= abs(z) + 1e-12
        assert c["sigma_min_on_complement"] >= c["sigma_min_full"] * (1 - 1e-10)
    with pytest.raises(ValueError):
        coercivity_diagnostic(gen, [0.5])


def test_sample_mode_is_nearly_an_eigenvector(gen200):
    prof = make_profile(ModeProblem(1, "TE", 1.0), LAM)
    x = sample_mode(gen200, prof)
    r = gen200.G @ x - LAM * x
    # interior residual is a discretization error; the sponge region is excluded
    mask = np.zeros(gen200.size, bool)
    b = gen200.block_index(1, 0, "TE")
    su, sv, sw = gen200.slices(b)
    inner = gen200.r < 15
    for s, sel in ((su, inner), (sw, inner), (sv, gen200.rh < 15)):
        idx = np.arange(s.start, s.stop)[sel]
        mask[idx] = True
    assert np.linalg.norm(r[mask]) < 1e-2 * np.linalg.norm(x[mask])


def test_hash_and_config_validation():
    a = assemble(Problem(1.0), Resolution(N_r=30))
    b = assemble(Problem(1.0, delta=0.0, shape=((2, 0, 1.0),)), Resolution(N_r=30))
    c = assemble(Problem(1.0, delta=0.1, shape=((2, 0, 1.0),)), Resolution(L_max=1, N_r=30))
    assert a.hash == b.hash != c.hash
    with pytest.raises(ConfigurationError):
        Resolution.from_dict({"N_r": 10, "bogus": 1})
    with pytest.raises(ConfigurationError):
        Problem.from_dict({"epsilon": 1.0, "colour": "red"})
    with pytest.raises(ConfigurationError):
        Problem(-1.0)
    with pytest.raises(ResolutionError):
        assemble(Problem(1.0), Resolution(N_r=8))
    with pytest.raises(ResolutionError):
        assemble(Problem(1.0), Resolution(R_max=10.0))
    with pytest.raises(UnstableAbsorber):
        assemble(Problem(1.0), Resolution(N_r=30, absorber=Absorber(sigma_max=-1.0)))
    with pytest.raises(ConfigurationError):
        ContourSpec(-0.1, 0.5)
    with pytest.raises(ConfigurationError):
        ContourSpec(-1.0, 0.5, nodes=4)


def test_shape_perturbation_splits_multiplet():
    res = Resolution(L_max=3, N_r=120)
    base = assemble(Problem(1.0), res)
    pert = assemble(Problem(1.0, delta=0.05, shape=((2, 0, 1.0),)), res)
    assert pert.M is not None and base.M is None
    vals = [e.value for e in eigs_near(pert, LAM, 6) if e.accepted and abs(e.value - LAM) < 0.1]
    distinct = []
    for v in sorted(vals, key=lambda z: z.real):
        if all(abs(v - w) > 1e-6 for w in distinct):
            distinct.append(v)
    assert len(vals) == 3 and len(distinct) == 2


def test_coo_export_roundtrip():
    gen = assemble(Problem(1.0), Resolution(N_r=20))
    rows = [line.split() for line in gen.to_coo_text().splitlines()[1:]]
    i = np.array([int(r[0]) for r in rows])
    j = np.array([int(r[1]) for r in rows])
    v = np.array([float(r[2]) + 1j * float(r[3]) for r in rows])
    A = sp.coo_matrix((v, (i, j)), shape=gen.G.shape)
    assert abs(A - gen.G).max() == 0
