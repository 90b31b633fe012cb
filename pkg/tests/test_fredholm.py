import time

import numpy as np
import pytest

from adslab.errors import (BasepointRegular, CircleHitsSingularity, ConfigurationError,
                           TruncationInconclusive)
from adslab.fredholm import (AnalyticMatrixFamily, classify, companion_oracle, index,
                             meromorphic_inverse_data, planted_demo, planted_family, schur_reduce)

Z2 = np.zeros((2, 2))


def fam(*coeffs, **kw):
    return AnalyticMatrixFamily([np.asarray(c, dtype=complex) for c in coeffs], **kw)


def test_diag_tau_one():
    f = fam([[0, 0], [0, 1]], [[1, 0], [0, 0]])
    cls = classify(f)
    assert cls.kind == "discrete_singular_set"
    assert len(cls.points) == 1 and abs(cls.points[0][0]) < 1e-12 and cls.points[0][1] == 1
    assert cls.schur_agrees == [True]
    red = schur_reduce(f, 0.0)
    assert red.kernel_basis.shape[1] == 1
    for t in (0.1, -0.2 + 0.3j):
        s = red.s(t)
        assert s.shape == (1, 1) and abs(abs(s[0, 0]) - abs(t)) < 1e-12
    pp = meromorphic_inverse_data(f, 0.0)
    assert pp.pole_order == 1 and pp.ranks == [1]
    np.testing.assert_allclose(pp.coefficients[0], [[1, 0], [0, 0]], atol=1e-12)


def test_constant_invertible_family_has_empty_set():
    cls = classify(fam(np.eye(3)))
    assert cls.kind == "discrete_singular_set" and cls.points == []


def test_rank_one_projector_padded_is_nowhere_invertible():
    P = np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 0]])
    assert classify(fam(np.zeros((3, 3)), P)).kind == "nowhere_invertible"


def test_non_square_is_nowhere_invertible():
    assert classify(fam(np.ones((3, 2)))).kind == "nowhere_invertible"


def test_index_conventions():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 5))
    assert index(A) == -2
    assert index(A.T) == 2
    assert index(np.eye(4)) == 0
    assert index(np.zeros((2, 3))) == -1
    # constant on the family away from singular points
    f = fam(rng.standard_normal((3, 5)), rng.standard_normal((3, 5)))
    taus = rng.uniform(-0.7, 0.7, 20) + 1j * rng.uniform(-0.7, 0.7, 20)
    assert {index(f(t)) for t in taus} == {-2}


def test_tau_identity_double_point():
    f = fam(Z2, np.eye(2))
    cls = classify(f)
    assert [(round(abs(p), 12), m) for p, m in cls.points] == [(0.0, 2)]
    red = schur_reduce(f, 0.0)
    assert red.kernel_basis.shape[1] == 2
    pp = meromorphic_inverse_data(f, 0.0)
    assert pp.ranks == [2]


def test_diag_tau_squared_one():
    f = fam([[0, 0], [0, 1]], Z2, [[1, 0], [0, 0]])
    cls = classify(f)
    assert cls.points[0][1] == 2 and abs(cls.points[0][0]) < 1e-9
    pp = meromorphic_inverse_data(f, 0.0)
    # tau^-1 coefficient vanishes identically for the diagonal family
    assert pp.pole_order == 2 and pp.ranks == [0, 1]


def test_coupled_double_pole_has_two_rank_one_coefficients():
    # M = [[1, t], [0, 1]] diag(t^2, 1): M^{-1} = [[t^-2, -t^-1], [0, 1]]
    f = fam([[0, 0], [0, 1]], [[0, 1], [0, 0]], [[1, 0], [0, 0]])
    pp = meromorphic_inverse_data(f, 0.0)
    assert pp.pole_order == 2 and pp.ranks == [1, 1]
    np.testing.assert_allclose(pp.coefficients[0], [[0, -1], [0, 0]], atol=1e-12)
    np.testing.assert_allclose(pp.coefficients[1], [[1, 0], [0, 0]], atol=1e-12)


def test_regular_point_has_no_principal_part():
    f = fam([[0, 0], [0, 1]], [[1, 0], [0, 0]])
    pp = meromorphic_inverse_data(f, 0.5, radius=0.2)
    assert pp.pole_order == 0 and pp.ranks == []


def test_circle_through_singularity_rejected():
    f = fam([[0, 0], [0, 1]], [[1, 0], [0, 0]])
    with pytest.raises(CircleHitsSingularity):
        meromorphic_inverse_data(f, 0.2, radius=0.2)


def test_schur_inverse_reconstruction():
    rng = np.random.default_rng(5)
    f, truth = planted_family(rng, 5, 2)
    p = truth.points[0]
    red = schur_reduce(f, p, sv_tol=1e-7)
    for h in (0.01, 0.02j, -0.015 + 0.01j):
        t = p + h * red.sub_radius
        M = f(t)
        ref = np.linalg.inv(M)
        assert np.linalg.norm(red.inverse(t) - ref) < 1e-12 * np.linalg.norm(ref) * np.linalg.cond(M)
        np.testing.assert_allclose(red.inverse(t) @ M, np.eye(5), atol=1e-8)


def test_schur_blocks_vanish_at_basepoint_and_invert_elsewhere():
    f, truth = planted_family(np.random.default_rng(5), 5, 2)
    p = truth.points[0]
    red = schur_reduce(f, p)
    a11, _, a21, _ = red.blocks(p)
    assert np.abs(a11).max() < 1e-12 and np.abs(a21).max() < 1e-12
    for t in (p + 0.3, p - 0.2j):
        np.testing.assert_allclose(f(t) @ red.inverse(t), np.eye(5), atol=1e-12)


def test_basepoint_regular():
    with pytest.raises(BasepointRegular):
        schur_reduce(fam(np.eye(2), np.eye(2)), 0.0)


def test_planted_family_matches_oracle():
    f = fam(np.diag([0.3 + 0j, 1, 1]), np.diag([-1.0, 0, 0]))
    assert [(round(p.real, 12), m) for p, m in companion_oracle(f)] == [(0.3, 1)]
    rng = np.random.default_rng(1)
    for _ in range(5):
        f, truth = planted_family(rng, 6, 3)
        found = classify(f).points
        oracle = companion_oracle(f)
        assert len(found) == len(oracle) == 3
        for p, m in zip(truth.points, truth.multiplicities):
            q, mq = min(found, key=lambda x: abs(x[0] - p))
            o, mo = min(oracle, key=lambda x: abs(x[0] - p))
            assert abs(q - p) < 1e-9 and abs(o - p) < 1e-9 and mq == mo == m


def test_planted_demo_fifty_families():
    t = time.perf_counter()
    rep = planted_demo(50, seed=0)
    assert time.perf_counter() - t < 30
    assert rep["passed"], [r for r in rep["families"] if not r["passed"]]
    assert rep["max_location_error"] < 1e-9


@pytest.mark.parametrize("seed", [1, 2])
def test_planted_demo_other_seeds(seed):
    assert planted_demo(15, seed=seed)["passed"]


def test_family_validation():
    with pytest.raises(ConfigurationError):
        fam(np.eye(2), np.eye(3))
    with pytest.raises(ConfigurationError):
        AnalyticMatrixFamily([])
    with pytest.raises(TruncationInconclusive):
        AnalyticMatrixFamily([np.eye(2), np.eye(2)], polynomial=False)
    with pytest.raises(ConfigurationError):
        AnalyticMatrixFamily.from_dict({"coefficients": [[[1.0]]], "colour": 1})
    f = AnalyticMatrixFamily.from_dict({"coefficients": [[[0.0]], [[1.0]]],
                                        "coefficients_imag": [[[0.5]], [[0.0]]], "center": [0.1, 0]})
    assert f.center == 0.1 and abs(f(0.1)[0, 0] - 0.5j) < 1e-15
