"""Sparse matrix-valued polynomials in several real variables.

A :class:`PolynomialMatrix` is stored as ``{exponent tuple: coefficient
matrix}``, i.e. ``P(xi) = sum_alpha C_alpha xi**alpha``.  Entry (i, j) of
every coefficient matrix together form the scalar polynomial in that slot,
so the map is the same data as one exponent->coefficient map per entry.
Coefficients at or below ``drop_tol`` in magnitude are pruned after every
arithmetic operation.
"""

from __future__ import annotations

from itertools import combinations_with_replacement
from typing import Iterable, Mapping

import numpy as np

DROP_TOL = 1e-12

Exponent = tuple[int, ...]


def monomials(nvars: int, degree: int) -> list[Exponent]:
    """All exponent vectors of total degree exactly ``degree``."""
    out = []
    for combo in combinations_with_replacement(range(nvars), degree):
        e = [0] * nvars
        for k in combo:
            e[k] += 1
        out.append(tuple(e))
    return out


def _monomial_values(points: np.ndarray, exps: list[Exponent]) -> np.ndarray:
    points = np.atleast_2d(points)
    cols = [np.prod(points ** np.asarray(e), axis=1) for e in exps]
    return np.stack(cols, axis=1) if cols else np.zeros((points.shape[0], 0))


class PolynomialMatrix:
    """Matrix whose entries are real polynomials in ``nvars`` variables."""

    def __init__(self, nvars: int, shape: tuple[int, int],
                 terms: Mapping[Exponent, np.ndarray] | None = None,
                 drop_tol: float = DROP_TOL):
        self.nvars = int(nvars)
        self.shape = (int(shape[0]), int(shape[1]))
        self.drop_tol = drop_tol
        self.terms: dict[Exponent, np.ndarray] = {}
        for exp, coef in (terms or {}).items():
            exp = tuple(int(k) for k in exp)
            if len(exp) != self.nvars:
                raise ValueError(f"exponent {exp} has wrong length for {nvars} variables")
            coef = np.array(coef, dtype=float).reshape(self.shape)
            if exp in self.terms:
                self.terms[exp] = self.terms[exp] + coef
            else:
                self.terms[exp] = coef
        self._prune()

    # construction helpers

    @classmethod
    def zeros(cls, nvars, shape, drop_tol=DROP_TOL):
        return cls(nvars, shape, {}, drop_tol)

    @classmethod
    def constant(cls, nvars, matrix, drop_tol=DROP_TOL):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(nvars, matrix.shape, {(0,) * nvars: matrix}, drop_tol)

    @classmethod
    def identity(cls, nvars, size, drop_tol=DROP_TOL):
        return cls.constant(nvars, np.eye(size), drop_tol)

    @classmethod
    def linear(cls, matrices: Iterable[np.ndarray], drop_tol=DROP_TOL):
        """``sum_j M_j xi_j`` from a list of coefficient matrices."""
        matrices = [np.atleast_2d(np.asarray(m, dtype=float)) for m in matrices]
        n = len(matrices)
        terms = {}
        for j, m in enumerate(matrices):
            e = [0] * n
            e[j] = 1
            terms[tuple(e)] = m
        return cls(n, matrices[0].shape, terms, drop_tol)

    @classmethod
    def scalar(cls, nvars, terms: Mapping[Exponent, float], drop_tol=DROP_TOL):
        return cls(nvars, (1, 1), {e: np.array([[c]]) for e, c in terms.items()}, drop_tol)

    # bookkeeping

    def _prune(self):
        keep = {}
        for exp, coef in self.terms.items():
            coef = np.where(np.abs(coef) > self.drop_tol, coef, 0.0)
            if np.any(coef):
                keep[exp] = coef
        self.terms = keep
        return self

    def copy(self):
        return PolynomialMatrix(self.nvars, self.shape, {e: c.copy() for e, c in self.terms.items()},
                                self.drop_tol)

    @property
    def total_degree(self) -> int:
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def degrees(self) -> set[int]:
        return {sum(e) for e in self.terms}

    def is_homogeneous(self, degree: int | None = None) -> bool:
        degs = self.degrees()
        if not degs:
            return True
        if len(degs) != 1:
            return False
        return degree is None or degs == {degree}

    def is_zero(self) -> bool:
        return not self.terms

    def max_abs_coefficient(self) -> float:
        if not self.terms:
            return 0.0
        return max(float(np.max(np.abs(c))) for c in self.terms.values())

    def entry(self, i: int, j: int) -> dict[Exponent, float]:
        """Scalar polynomial in slot (i, j) as an exponent->coefficient map."""
        return {e: float(c[i, j]) for e, c in self.terms.items() if c[i, j] != 0.0}

    # arithmetic

    def _check_vars(self, other):
        if other.nvars != self.nvars:
            raise ValueError("polynomials in different numbers of variables")

    def __add__(self, other):
        if not isinstance(other, PolynomialMatrix):
            return NotImplemented
        self._check_vars(other)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        terms = {e: c.copy() for e, c in self.terms.items()}
        for e, c in other.terms.items():
            terms[e] = terms[e] + c if e in terms else c.copy()
        return PolynomialMatrix(self.nvars, self.shape, terms, self.drop_tol)

    def __neg__(self):
        return PolynomialMatrix(self.nvars, self.shape, {e: -c for e, c in self.terms.items()},
                                self.drop_tol)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if np.isscalar(other):
            return PolynomialMatrix(self.nvars, self.shape,
                                    {e: c * float(other) for e, c in self.terms.items()},
                                    self.drop_tol)
        if isinstance(other, PolynomialMatrix) and other.shape == (1, 1):
            return other.scale(self)
        return NotImplemented

    __rmul__ = __mul__

    def scale(self, matrix: "PolynomialMatrix") -> "PolynomialMatrix":
        """Multiply ``matrix`` entrywise by this 1x1 (scalar) polynomial."""
        if self.shape != (1, 1):
            raise ValueError("scale() needs a 1x1 polynomial")
        self._check_vars(matrix)
        terms: dict[Exponent, np.ndarray] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in matrix.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                prod = c1[0, 0] * c2
                terms[e] = terms[e] + prod if e in terms else prod
        return PolynomialMatrix(self.nvars, matrix.shape, terms, self.drop_tol)

    def __matmul__(self, other):
        if not isinstance(other, PolynomialMatrix):
            return NotImplemented
        self._check_vars(other)
        if self.shape[1] != other.shape[0]:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        terms: dict[Exponent, np.ndarray] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                prod = c1 @ c2
                terms[e] = terms[e] + prod if e in terms else prod
        return PolynomialMatrix(self.nvars, (self.shape[0], other.shape[1]), terms, self.drop_tol)

    def __pow__(self, k: int):
        if self.shape[0] != self.shape[1]:
            raise ValueError("power of a non-square polynomial matrix")
        out = PolynomialMatrix.identity(self.nvars, self.shape[0], self.drop_tol)
        for _ in range(int(k)):
            out = out @ self
        return out

    @property
    def T(self):
        return PolynomialMatrix(self.nvars, self.shape[::-1], {e: c.T for e, c in self.terms.items()},
                                self.drop_tol)

    # evaluation

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.nvars,):
            raise ValueError(f"expected a point with {self.nvars} coordinates, got shape {xi.shape}")
        out = np.zeros(self.shape)
        for e, c in self.terms.items():
            out += c * np.prod(xi ** np.asarray(e))
        return out

    def evaluate_many(self, points) -> np.ndarray:
        """Values at an (m, nvars) array of points, shape (m, rows, cols)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        exps = list(self.terms)
        if not exps:
            return np.zeros((points.shape[0],) + self.shape)
        vals = _monomial_values(points, exps)
        coefs = np.stack([self.terms[e] for e in exps])
        return np.einsum("pk,kij->pij", vals, coefs)

    def __repr__(self):
        return (f"PolynomialMatrix(nvars={self.nvars}, shape={self.shape}, "
                f"terms={len(self.terms)}, degree={self.total_degree})")


def fit_homogeneous(points: np.ndarray, values: np.ndarray, degree: int) -> dict[Exponent, float]:
    """Least-squares fit of a homogeneous polynomial of known degree."""
    points = np.atleast_2d(points)
    exps = monomials(points.shape[1], degree)
    V = _monomial_values(points, exps)
    coef, *_ = np.linalg.lstsq(V, values, rcond=None)
    return dict(zip(exps, coef))


def eval_scalar(terms: Mapping[Exponent, float], points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    exps = list(terms)
    if not exps:
        return np.zeros(points.shape[0])
    return _monomial_values(points, exps) @ np.array([terms[e] for e in exps])
