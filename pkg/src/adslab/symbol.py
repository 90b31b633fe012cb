"""Principal symbol of a symmetric hyperbolic system and its compatibility polynomial.

For ``G = sum_j A_j d/dx_j`` the symbol is ``A(xi) = sum_j A_j xi_j``.  When
``rank A(xi) = r - d0`` is constant on ``xi != 0`` the characteristic
polynomial factors as ``det(z - A(xi)) = R(z, xi) z**d0`` and
``Q(xi) = R(A(xi), xi)`` satisfies ``Ker Q(xi) = Range A(xi)``.  The
functions below build ``Q`` with exact polynomial-matrix arithmetic and
certify the identities numerically on sampled directions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.stats import norm, qmc

from .errors import (CayleyHamiltonResidual, ConfigurationError, ConstantRankViolation,
                     DegenerateSymbol, ExactSequenceFailure, InterpolationFailure)
from .polynomial import PolynomialMatrix, eval_scalar, fit_homogeneous

RANK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SymmetricSystem:
    """Coefficients ``A_1..A_n`` of ``G = sum_j A_j d/dx_j``."""

    A: tuple
    name: str = ""

    def __post_init__(self):
        mats = tuple(np.array(a, dtype=float) for a in self.A)
        if not mats:
            raise ConfigurationError("a system needs at least one coefficient matrix")
        r = mats[0].shape[0]
        for j, m in enumerate(mats):
            if m.shape != (r, r):
                raise ConfigurationError(f"A_{j + 1} has shape {m.shape}, expected {(r, r)}")
            if not np.array_equal(m, m.T):
                raise ConfigurationError(f"A_{j + 1} is not symmetric")
        n = len(mats)
        if n < 3 or n % 2 == 0:
            raise ConfigurationError(f"spatial dimension must be odd and >= 3, got {n}")
        for m in mats:
            m.setflags(write=False)
        object.__setattr__(self, "A", mats)

    @property
    def n(self) -> int:
        return len(self.A)

    @property
    def r(self) -> int:
        return self.A[0].shape[0]

    def symbol_polynomial(self) -> PolynomialMatrix:
        return PolynomialMatrix.linear(self.A)

    def scaled(self, c: float) -> "SymmetricSystem":
        return SymmetricSystem(tuple(c * a for a in self.A), self.name)

    def to_dict(self) -> dict:
        return {"n": self.n, "r": self.r, "A": [a.tolist() for a in self.A]}


def system_from_dict(doc: dict) -> SymmetricSystem:
    try:
        A = doc["A"]
        n, r = int(doc["n"]), int(doc["r"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"system description needs n, r and A: {exc}") from exc
    unknown = set(doc) - {"n", "r", "A", "name"}
    if unknown:
        raise ConfigurationError(f"unknown keys in system description: {sorted(unknown)}")
    sys = SymmetricSystem(tuple(A), doc.get("name", ""))
    if sys.n != n or sys.r != r:
        raise ConfigurationError(f"declared (n, r) = ({n}, {r}) but matrices give ({sys.n}, {sys.r})")
    return sys


def load_system(path) -> SymmetricSystem:
    with open(path) as fh:
        return system_from_dict(json.load(fh))


def bundled_maxwell_path() -> Path:
    return Path(__file__).parent / "data" / "maxwell.json"


def _cross_matrix(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def maxwell_system() -> SymmetricSystem:
    """u = (E, B) with dE/dt = curl B, dB/dt = -curl E."""
    mats = []
    for j in range(3):
        S = _cross_matrix(np.eye(3)[j])
        A = np.zeros((6, 6))
        A[:3, 3:] = S
        A[3:, :3] = -S
        mats.append(A)
    return SymmetricSystem(tuple(mats), "maxwell")


def maxwell_divergence_Q() -> PolynomialMatrix:
    """Degree-one compatibility symbol (E, B) -> (xi.E, xi.B)."""
    mats = []
    for j in range(3):
        Qj = np.zeros((2, 6))
        Qj[0, j] = 1.0
        Qj[1, 3 + j] = 1.0
        mats.append(Qj)
    return PolynomialMatrix.linear(mats)


def eval_symbol(sys: SymmetricSystem, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (sys.n,):
        raise ConfigurationError(f"xi has shape {xi.shape}, system has n = {sys.n}")
    return np.tensordot(xi, np.stack(sys.A), axes=1)


def sphere_points(n: int, count: int, include_axes: bool = False) -> np.ndarray:
    """Deterministic quasi-uniform points on the unit sphere in R^n.

    A Fibonacci lattice for n = 3, otherwise an unscrambled Halton sequence
    pushed through the Gaussian quantile map.
    """
    if count < 1:
        raise ConfigurationError("need at least one sample")
    if n == 3:
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        rho = np.sqrt(1.0 - z * z)
        phi = np.pi * (1.0 + 5 ** 0.5) * i
        pts = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    else:
        u = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
        pts = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    if include_axes:
        eye = np.eye(n)
        pts = np.vstack([pts, eye, -eye])
    return pts


@dataclass
class SymbolSpectralData:
    d0: int
    d: int
    directions: np.ndarray
    speeds: np.ndarray            # (samples, d), each row decreasing
    eigenvectors: np.ndarray      # (samples, r, d) for the positive speeds of A(-omega)
    v_min: float
    v_max: float

    @property
    def r(self) -> int:
        return self.d0 + 2 * self.d


def spectral_data(sys: SymmetricSystem, samples: int = 1000, points=None,
                  include_axes: bool = True, rank_tol: float = RANK_TOL) -> SymbolSpectralData:
    """Kernel dimension and sound speeds of A(-omega) over sampled directions.

    Certification of constant rank is probabilistic: only the sampled
    directions are examined.
    """
    if points is None:
        points = sphere_points(sys.n, samples, include_axes=include_axes)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    points = points / np.linalg.norm(points, axis=1, keepdims=True)
    stack = np.stack(sys.A)
    mats = -np.einsum("pj,jab->pab", points, stack)
    mu, vecs = np.linalg.eigh(mats)
    scale = np.max(np.abs(mu), axis=1)
    global_scale = scale.max()
    if global_scale == 0.0:
        raise DegenerateSymbol("the symbol vanishes identically")
    dead = np.flatnonzero(scale <= 1e-14 * global_scale)
    if dead.size:
        raise DegenerateSymbol(f"A(omega) = 0 at omega = {points[dead[0]].tolist()}",
                               witnesses=(points[dead[0]],))
    kernel_dims = np.sum(np.abs(mu) < rank_tol * scale[:, None], axis=1)
    d0 = int(kernel_dims[0])
    bad = np.flatnonzero(kernel_dims != d0)
    if bad.size:
        k = bad[0]
        raise ConstantRankViolation(
            f"dim Ker A = {d0} at {points[0].tolist()} but {int(kernel_dims[k])} at {points[k].tolist()}",
            witnesses=(points[0], points[k]))
    if (sys.r - d0) % 2:
        raise ConstantRankViolation(f"rank {sys.r - d0} is odd; nonzero spectrum is not +- paired")
    d = (sys.r - d0) // 2
    if d == 0:
        raise DegenerateSymbol("A(omega) has no nonzero eigenvalues")
    # eigh sorts ascending; the d largest are the positive speeds
    speeds = mu[:, ::-1][:, :d]
    if np.any(speeds <= rank_tol * scale[:, None]):
        raise ConstantRankViolation("positive and negative speeds are not balanced")
    eigvecs = vecs[:, :, ::-1][:, :, :d]
    return SymbolSpectralData(d0=d0, d=d, directions=points, speeds=speeds,
                              eigenvectors=eigvecs, v_min=float(speeds[:, -1].min()),
                              v_max=float(speeds[:, 0].max()))


def char_poly_coeffs(sys: SymmetricSystem, data: SymbolSpectralData, seed: int = 0,
                     tol: float = 1e-10) -> list[PolynomialMatrix]:
    """Coefficients c_0..c_2d of R(z, xi), det(z - A(xi)) = sum c_j z**(j + d0).

    Each c_j is homogeneous of degree 2d - j and is recovered by least-squares
    interpolation on random xi, then checked on held-out points.
    """
    n, r, d0, d = sys.n, sys.r, data.d0, data.d
    rng = np.random.default_rng(seed)
    stack = np.stack(sys.A)

    def charpoly(points):
        mats = np.einsum("pj,jab->pab", points, stack)
        mu = np.linalg.eigvalsh(mats)
        return np.array([np.real(np.poly(m)) for m in mu])   # highest power first

    from math import comb
    nfit = 3 * comb(2 * d + n - 1, n - 1) + 10
    train = rng.standard_normal((nfit, n))
    held = rng.standard_normal((40, n))
    ct, ch = charpoly(train), charpoly(held)
    low = ch[:, r - d0 + 1:] if d0 else np.zeros((1, 0))
    if low.size and np.max(np.abs(low)) > tol * max(1.0, np.max(np.abs(ch))):
        raise InterpolationFailure("characteristic polynomial is not divisible by z**d0")
    coeffs = []
    for j in range(2 * d + 1):
        col = r - j - d0
        deg = 2 * d - j
        terms = fit_homogeneous(train, ct[:, col], deg)
        terms = {e: c for e, c in terms.items() if abs(c) > 1e-12}
        pred = eval_scalar(terms, held)
        scale = np.max(np.abs(ch[:, col])) + 1.0
        resid = np.max(np.abs(pred - ch[:, col])) / scale
        if resid > tol:
            raise InterpolationFailure(f"c_{j}: held-out residual {resid:.2e} exceeds {tol:.0e}")
        coeffs.append(PolynomialMatrix.scalar(n, terms))
    return coeffs


def build_Q(sys: SymmetricSystem, coeffs: Sequence[PolynomialMatrix], d0: int | None = None,
            tol: float = 1e-9) -> PolynomialMatrix:
    """Q(xi) = sum_j c_j(xi) A(xi)**j, checked against Q(xi) A(xi)**d0 == 0."""
    A = sys.symbol_polynomial()
    Q = PolynomialMatrix.zeros(sys.n, (sys.r, sys.r))
    power = PolynomialMatrix.identity(sys.n, sys.r)
    for c in coeffs:
        Q = Q + c.scale(power)
        power = power @ A
    if d0 is None:
        d0 = sys.r - (len(coeffs) - 1)
    resid = cayley_hamilton_residual(sys, Q, d0)
    if resid > tol:
        raise CayleyHamiltonResidual(f"Q A^{d0} has relative coefficient {resid:.2e}")
    return Q


def cayley_hamilton_residual(sys: SymmetricSystem, Q: PolynomialMatrix, d0: int) -> float:
    """Largest coefficient of Q(xi) A(xi)**d0 relative to the assembled scale."""
    A = PolynomialMatrix.linear(sys.A, drop_tol=0.0)
    prod = PolynomialMatrix(Q.nvars, Q.shape, Q.terms, drop_tol=0.0)
    for _ in range(d0):
        prod = prod @ A
    scale = Q.max_abs_coefficient() * max(A.max_abs_coefficient(), 1.0) ** d0
    if scale == 0.0:
        return 0.0
    return prod.max_abs_coefficient() / scale


def _orth_range(M, rank_tol=RANK_TOL):
    U, s, _ = np.linalg.svd(M)
    if s.size == 0 or s[0] == 0.0:
        return U[:, :0]
    k = int(np.sum(s > rank_tol * s[0]))
    return U[:, :k]


def _null_space(M, rank_tol=RANK_TOL):
    _, s, Vh = np.linalg.svd(M)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(M.shape[1])
    k = int(np.sum(s > rank_tol * s[0]))
    return Vh[k:].conj().T


@dataclass
class ExactSequenceReport:
    certified: bool
    max_angle: float
    dims: list = field(default_factory=list)    # (dim Range A, dim Ker Q) per sample
    worst_xi: np.ndarray | None = None


def verify_exact_sequence(sys: SymmetricSystem, Q: PolynomialMatrix, xi_samples,
                          angle_tol: float = 1e-8, raise_on_failure: bool = True
                          ) -> ExactSequenceReport:
    """Compare Ker Q(xi) with Range A(xi) through principal angles."""
    xi_samples = np.atleast_2d(np.asarray(xi_samples, dtype=float))
    worst, worst_xi, dims, ok = 0.0, None, [], True
    for xi in xi_samples:
        if not np.any(xi):
            raise ConfigurationError("exact-sequence samples must be nonzero")
        rng_basis = _orth_range(eval_symbol(sys, xi))
        ker_basis = _null_space(Q(xi))
        dims.append((rng_basis.shape[1], ker_basis.shape[1]))
        if rng_basis.shape[1] != ker_basis.shape[1]:
            angle = np.pi / 2
        elif rng_basis.shape[1] == 0:
            angle = 0.0
        else:
            angle = float(np.max(scipy.linalg.subspace_angles(rng_basis, ker_basis)))
        if angle > worst or worst_xi is None:
            worst, worst_xi = max(angle, worst), xi
        if angle >= angle_tol:
            ok = False
            if raise_on_failure:
                raise ExactSequenceFailure(
                    f"Ker Q != Range A at xi = {xi.tolist()}: dims {dims[-1]}, angle {angle:.3e}", xi=xi)
    return ExactSequenceReport(certified=ok, max_angle=worst, dims=dims, worst_xi=worst_xi)


def elliptic_symbol(sys: SymmetricSystem, Q: PolynomialMatrix, d: int, tau: float, xi) -> np.ndarray:
    """l(tau, xi) = (tau - A(xi))**(4d) + Q(xi)^T Q(xi)."""
    A = eval_symbol(sys, xi)
    T = np.linalg.matrix_power(tau * np.eye(sys.r) - A, 4 * d)
    Qx = Q(xi)
    return T + Qx.T @ Qx


@dataclass
class EllipticityReport:
    min_sv_at_tau0: float
    speed_bound_ok: bool
    taus: np.ndarray
    min_sv_by_tau: np.ndarray
    characteristic_taus: list


def check_L_ellipticity(sys: SymmetricSystem, Q: PolynomialMatrix, tau_grid, xi_samples, d: int,
                        v_min: float, margin: float = 0.0, sv_tol: float = 1e-10
                        ) -> EllipticityReport:
    """Smallest singular values of l(tau, xi) on unit xi; report only."""
    taus = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    xis = np.atleast_2d(np.asarray(xi_samples, dtype=float))
    xis = xis / np.linalg.norm(xis, axis=1, keepdims=True)

    def min_sv(tau):
        return min(np.linalg.svd(elliptic_symbol(sys, Q, d, tau, xi), compute_uv=False)[-1]
                   for xi in xis)

    sv0 = min_sv(0.0)
    by_tau = np.array([min_sv(t) for t in taus])
    inside = np.abs(taus) < v_min * (1.0 - margin)
    ok = bool(sv0 > sv_tol and np.all(by_tau[inside] > sv_tol))
    flagged = [float(t) for t, s in zip(taus, by_tau) if s <= sv_tol]
    return EllipticityReport(min_sv_at_tau0=float(sv0), speed_bound_ok=ok, taus=taus,
                             min_sv_by_tau=by_tau, characteristic_taus=flagged)


def certify(sys: SymmetricSystem, samples: int = 1000, n_xi: int = 100, seed: int = 0) -> dict:
    """Full symbol certification, the data behind the ``symbol`` subcommand."""
    data = spectral_data(sys, samples)
    coeffs = char_poly_coeffs(sys, data, seed=seed)
    Q = build_Q(sys, coeffs, data.d0)
    rng = np.random.default_rng(seed)
    xis = rng.standard_normal((n_xi, sys.n))
    xis /= np.linalg.norm(xis, axis=1, keepdims=True)
    seq = verify_exact_sequence(sys, Q, xis, raise_on_failure=False)
    ell = check_L_ellipticity(sys, Q, np.linspace(-0.9, 0.9, 7) * data.v_min, xis[:20], data.d,
                              data.v_min)
    return {
        "d0": data.d0,
        "d": data.d,
        "v_min": data.v_min,
        "v_max": data.v_max,
        "rank_certified": True,
        "samples": int(data.directions.shape[0]),
        "Q_degree": Q.total_degree,
        "cayley_hamilton_residual": cayley_hamilton_residual(sys, Q, data.d0),
        "exact_sequence_certified": seq.certified,
        "exact_sequence_max_angle": seq.max_angle,
        "ellipticity_min_sv": ell.min_sv_at_tau0,
        "speed_bound_ok": ell.speed_bound_ok,
    }
