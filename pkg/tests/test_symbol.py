import json

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from adslab.errors import (ConfigurationError, ConstantRankViolation, DegenerateSymbol,
                           ExactSequenceFailure)
from adslab.polynomial import PolynomialMatrix
from adslab.symbol import (SymmetricSystem, build_Q, bundled_maxwell_path, cayley_hamilton_residual,
                           certify, char_poly_coeffs, check_L_ellipticity, eval_symbol,
                           load_system, maxwell_divergence_Q, maxwell_system, spectral_data,
                           system_from_dict, verify_exact_sequence)


@pytest.fixture(scope="module")
def maxwell():
    return maxwell_system()


@pytest.fixture(scope="module")
def maxwell_Q(maxwell):
    data = spectral_data(maxwell, 200)
    return build_Q(maxwell, char_poly_coeffs(maxwell, data), data.d0)


def hand_maxwell_e1():
    # dE/dt = curl B, dB/dt = -curl E; along e1 only d/dx1 survives
    A = np.zeros((6, 6))
    # (curl B)_2 = -dB3/dx1, (curl B)_3 = dB2/dx1
    A[1, 5], A[2, 4] = -1, 1
    A[4, 2], A[5, 1] = 1, -1
    return A


def test_bundled_file_matches_builtin(maxwell):
    sys_file = load_system(bundled_maxwell_path())
    assert sys_file.n == 3 and sys_file.r == 6
    for a, b in zip(sys_file.A, maxwell.A):
        np.testing.assert_array_equal(a, b)


def test_symbol_at_zero_and_e1(maxwell):
    np.testing.assert_array_equal(eval_symbol(maxwell, [0, 0, 0]), np.zeros((6, 6)))
    np.testing.assert_array_equal(eval_symbol(maxwell, [1, 0, 0]), hand_maxwell_e1())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(-5, 5))
def test_symbol_homogeneous_and_symmetric(xi, c):
    m = maxwell_system()
    A = eval_symbol(m, xi)
    np.testing.assert_allclose(eval_symbol(m, c * np.array(xi)), c * A, atol=1e-12)
    np.testing.assert_array_equal(A, A.T)


def test_spectral_data_maxwell(maxwell):
    data = spectral_data(maxwell, 1000)
    assert (data.d0, data.d) == (2, 2)
    np.testing.assert_allclose(data.speeds, 1.0, atol=1e-12)
    assert abs(data.v_min - 1) < 1e-12 and abs(data.v_max - 1) < 1e-12


def test_speeds_scale_with_coefficients(maxwell):
    data = spectral_data(maxwell.scaled(2.5), 300)
    assert abs(data.v_min - 2.5) < 1e-12


def test_rank_drop_detected():
    sys = SymmetricSystem((np.diag([1.0, -1.0, 0.0]), np.zeros((3, 3)), np.zeros((3, 3))))
    with pytest.raises(ConstantRankViolation):
        spectral_data(sys, 200)


def test_rank_drop_is_kernel_change_not_vanishing():
    # A(xi) = diag(xi1, -xi1, xi2, -xi2, xi3, -xi3): rank 6 generically, 4 on the
    # coordinate planes, never zero on the sphere
    sys = SymmetricSystem(tuple(np.diag(np.kron(np.eye(3)[j], [1.0, -1.0])) for j in range(3)))
    with pytest.raises(ConstantRankViolation) as exc:
        spectral_data(sys, 500)
    assert not isinstance(exc.value, DegenerateSymbol)
    assert exc.value.witnesses is not None


def test_input_validation():
    with pytest.raises(ConfigurationError):
        SymmetricSystem((np.array([[0.0, 1.0], [0.0, 0.0]]),) * 3)
    with pytest.raises(ConfigurationError):
        SymmetricSystem((np.eye(2),) * 2)
    with pytest.raises(ConfigurationError):
        system_from_dict({"n": 3, "r": 6, "A": [np.eye(6).tolist()] * 3, "extra": 1})
    with pytest.raises(ConfigurationError):
        system_from_dict({"n": 3, "r": 5, "A": [np.eye(6).tolist()] * 3})


def test_char_poly_maxwell(maxwell):
    data = spectral_data(maxwell, 200)
    c = char_poly_coeffs(maxwell, data)
    assert len(c) == 5
    xi = np.array([0.3, -1.2, 0.7])
    s = xi @ xi
    vals = [float(ci(xi)[0, 0]) for ci in c]
    np.testing.assert_allclose(vals, [s ** 2, 0.0, -2 * s, 0.0, 1.0], atol=1e-10)


def test_Q_is_closed_form(maxwell, maxwell_Q):
    assert maxwell_Q.total_degree == 4
    rng = np.random.default_rng(3)
    for xi in rng.standard_normal((10, 3)):
        A = eval_symbol(maxwell, xi)
        expect = np.linalg.matrix_power(A @ A - (xi @ xi) * np.eye(6), 2)
        np.testing.assert_allclose(maxwell_Q(xi), expect, atol=1e-9 * max(1, (xi @ xi) ** 2))


def test_cayley_hamilton_coefficients_vanish(maxwell, maxwell_Q):
    assert cayley_hamilton_residual(maxwell, maxwell_Q, 2) < 1e-12


def test_exact_sequence_built_Q(maxwell, maxwell_Q):
    xis = np.random.default_rng(0).standard_normal((100, 3))
    rep = verify_exact_sequence(maxwell, maxwell_Q, xis)
    assert rep.certified and rep.max_angle < 1e-10


def test_exact_sequence_divergence_Q(maxwell):
    xis = np.random.default_rng(1).standard_normal((100, 3))
    rep = verify_exact_sequence(maxwell, maxwell_divergence_Q(), xis)
    assert rep.certified and rep.max_angle < 1e-8


def test_identity_Q_fails(maxwell):
    Q = PolynomialMatrix.identity(3, 6)
    with pytest.raises(ExactSequenceFailure):
        verify_exact_sequence(maxwell, Q, np.random.default_rng(2).standard_normal((5, 3)))


def test_L_ellipticity(maxwell, maxwell_Q):
    xis = np.random.default_rng(4).standard_normal((30, 3))
    rep = check_L_ellipticity(maxwell, maxwell_Q, [0.0, 0.5, -0.5], xis, 2, 1.0, margin=0.0)
    assert abs(rep.min_sv_at_tau0 - 1) < 1e-8
    assert rep.speed_bound_ok
    rep1 = check_L_ellipticity(maxwell, maxwell_Q, [1.0], np.eye(3), 2, 1.0, margin=0.0)
    assert 1.0 in rep1.characteristic_taus


S1 = np.array([[0.0, 1], [1, 0]])
S3 = np.array([[1.0, 0], [0, -1]])
# pairwise anticommuting real symmetric 4x4 matrices, each squaring to I
GAMMA = [np.kron(S3, S1), np.kron(S3, S3), np.kron(S1, np.eye(2))]


def test_vanishing_direction_is_degenerate():
    sys = SymmetricSystem((S1, S3, np.zeros((2, 2))))
    with pytest.raises(DegenerateSymbol):
        spectral_data(sys, 200)


def test_elliptic_system_has_zero_Q():
    # d0 = 0: Cayley-Hamilton makes R(A(xi), xi) vanish identically
    sys = SymmetricSystem(tuple(GAMMA))
    data = spectral_data(sys, 200)
    assert data.d0 == 0
    Q = build_Q(sys, char_poly_coeffs(sys, data), 0)
    assert Q.is_zero()


def _block_system(rng):
    """6x6 system with Range A(xi) = span of the first four columns of P for every xi != 0."""
    mats = []
    for G in GAMMA:
        M = np.zeros((6, 6))
        M[:4, :4] = G
        mats.append(M)
    P = np.linalg.qr(rng.standard_normal((6, 6)))[0]
    rot = [P @ M @ P.T for M in mats]
    return SymmetricSystem(tuple(0.5 * (R + R.T) for R in rot)), P[:, :4]


def test_synthetic_block_systems_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(3):
        sys, rng_basis = _block_system(rng)
        data = spectral_data(sys, 300)
        assert data.d0 == 2
        Q = build_Q(sys, char_poly_coeffs(sys, data), data.d0)
        for xi in rng.standard_normal((50, 3)):
            kerQ = scipy.linalg.null_space(Q(xi), rcond=1e-9)
            assert kerQ.shape[1] == 4
            assert np.max(scipy.linalg.subspace_angles(kerQ, rng_basis)) < 1e-8


def test_certify_report(maxwell):
    rep = certify(maxwell)
    assert rep["d0"] == 2 and rep["d"] == 2
    assert rep["exact_sequence_certified"] and rep["speed_bound_ok"]
    assert rep["exact_sequence_max_angle"] < 1e-8
    assert abs(rep["ellipticity_min_sv"] - 1) < 1e-8
    json.dumps(rep)
