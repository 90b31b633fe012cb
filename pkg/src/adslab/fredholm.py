"""Analytic matrix families and their singular sets.

A family ``M(tau) = sum_k C_k (tau - center)**k`` on the disk
``|tau - center| < radius`` is either nowhere invertible or invertible off a
discrete set, where its inverse has a pole with finite-rank principal part.
Near a singular point the Schur complement

    s(tau) = a11 - a12 a22^{-1} a21

of the block form relative to ``ker M(tau0)`` and ``coker M(tau0)`` has the
same singular points as ``M`` in a sub-disk where ``a22`` stays invertible.

Index convention: ``index(M) = codim Range(M) - dim Ker(M)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (BasepointRegular, CircleHitsSingularity, ConfigurationError,
                     TruncationInconclusive)


def index(M, rtol: float = 1e-10) -> int:
    """``(dim_out - rank) - (dim_in - rank)`` at a relative singular-value tolerance."""
    M = np.atleast_2d(np.asarray(M))
    m, n = M.shape
    if M.size == 0:
        return m - n
    s = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(s > rtol * max(s[0], 1e-300))) if s[0] > 0 else 0
    return (m - rank) - (n - rank)


@dataclass
class AnalyticMatrixFamily:
    """Matrix-valued power series about ``center`` with a stated validity disk.

    ``polynomial=True`` means the coefficient list is exact (no truncation).
    Otherwise the last coefficient must satisfy the tail bound
    ``||C_K|| radius**K < tail_tol * max_k ||C_k|| radius**k``.
    """

    coefficients: list
    center: complex = 0.0
    radius: float = 1.0
    polynomial: bool = True
    tail_tol: float = 1e-14

    def __post_init__(self):
        self.coefficients = [np.atleast_2d(np.asarray(c, dtype=complex)) for c in self.coefficients]
        if not self.coefficients:
            raise ConfigurationError("family needs at least one coefficient")
        shape = self.coefficients[0].shape
        if any(c.shape != shape for c in self.coefficients):
            raise ConfigurationError("all coefficients must have the same shape")
        if not self.radius > 0:
            raise ConfigurationError("radius must be positive")
        self.center = complex(self.center)
        if not self.polynomial:
            mags = [np.linalg.norm(c, 2) * self.radius ** k for k, c in enumerate(self.coefficients)]
            if mags[-1] > self.tail_tol * max(mags):
                raise TruncationInconclusive("series tail is not negligible on the stated disk")

    @property
    def dim_out(self) -> int:
        return self.coefficients[0].shape[0]

    @property
    def dim_in(self) -> int:
        return self.coefficients[0].shape[1]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, tau) -> np.ndarray:
        h = complex(tau) - self.center
        out = np.zeros_like(self.coefficients[-1])
        for c in reversed(self.coefficients):
            out = out * h + c
        return out

    def derivative(self, tau) -> np.ndarray:
        h = complex(tau) - self.center
        out = np.zeros_like(self.coefficients[-1])
        for k in range(self.degree, 0, -1):
            out = out * h + k * self.coefficients[k]
        return out

    def inside(self, tau, margin: float = 0.0) -> bool:
        return abs(complex(tau) - self.center) < self.radius * (1 - margin)

    @classmethod
    def from_dict(cls, d: dict) -> "AnalyticMatrixFamily":
        unknown = set(d) - {"coefficients", "coefficients_imag", "center", "radius", "polynomial"}
        if unknown:
            raise ConfigurationError(f"unknown family keys: {sorted(unknown)}")
        re = [np.asarray(c, dtype=float) for c in d["coefficients"]]
        im = d.get("coefficients_imag")
        coeffs = [r + 1j * np.asarray(i, dtype=float) for r, i in zip(re, im)] if im else re
        c = d.get("center", 0.0)
        center = complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
        return cls(coeffs, center, float(d.get("radius", 1.0)), bool(d.get("polynomial", True)))


# -- scalar analytic helpers -----------------------------------------------

def _taylor_fft(f: Callable[[complex], complex], center: complex, rho: float, n: int) -> np.ndarray:
    """Taylor coefficients of scalar ``f`` about ``center`` from ``n`` samples at radius ``rho``."""
    t = 2 * np.pi * np.arange(n) / n
    vals = np.array([f(center + rho * np.exp(1j * x)) for x in t])
    return np.fft.fft(vals) / n / rho ** np.arange(n)


def _cluster(points: Sequence[complex], tol: float) -> list[tuple[complex, int]]:
    out: list[list[complex]] = []
    for p in points:
        for grp in out:
            if abs(np.mean(grp) - p) < tol:
                grp.append(p)
                break
        else:
            out.append([p])
    return [(complex(np.mean(g)), len(g)) for g in out]


def _polish(logderiv: Callable[[complex], complex], tau: complex, mult: int,
            iters: int = 30, tol: float = 1e-15) -> complex:
    """Modified Newton ``tau <- tau - m f/f'`` using ``f'/f``."""
    for _ in range(iters):
        try:
            ld = logderiv(tau)
        except np.linalg.LinAlgError:
            break
        if not np.isfinite(ld) or ld == 0:
            break
        step = mult / ld
        tau = tau - step
        if abs(step) < tol * max(1.0, abs(tau)):
            break
    return complex(tau)


def _matrix_logderiv(F: Callable, dF: Callable) -> Callable[[complex], complex]:
    def ld(tau):
        return complex(np.trace(np.linalg.solve(F(tau), dF(tau))))
    return ld


def _fd(F: Callable, tau: complex, h: float = 1e-5) -> np.ndarray:
    return (F(tau + h) - F(tau - h) - 1j * (F(tau + 1j * h) - F(tau - 1j * h))) / (4 * h)


def _local_zeros(logderiv: Callable[[complex], complex], tau: complex, r: float,
                 nodes: int = 96) -> tuple[int, complex] | None:
    """Zero count and centroid inside ``|z - tau| = r`` by the argument principle.

    Returns None when the count is not close to a non-negative integer.

    The centroid of a split multiple zero is far better conditioned than any
    single member of the cluster.
    """
    t = 2 * np.pi * np.arange(nodes) / nodes
    dz = r * np.exp(1j * t)
    try:
        g = np.array([logderiv(tau + d) for d in dz]) * dz
    except np.linalg.LinAlgError:
        return None
    n0 = np.mean(g)
    n = int(round(n0.real))
    if n < 0 or abs(n0 - n) > 0.05:
        return None
    if n == 0:
        return 0, complex(tau)
    return n, complex(tau + np.mean(g * dz) / n)


@dataclass
class ZeroSet:
    points: list[tuple[complex, int]]
    coefficients: np.ndarray = field(repr=False)


def analytic_zeros(f: Callable[[complex], complex], logderiv: Callable[[complex], complex],
                   center: complex, rho: float, n: int, keep_radius: float,
                   cluster_tol: float = 1e-3) -> ZeroSet:
    """Zeros in ``|tau - center| < keep_radius`` of a scalar analytic function.

    Taylor coefficients from an FFT on the circle of radius ``rho``, roots of
    the truncated polynomial by the companion matrix, multiple roots grouped
    and polished by modified Newton.
    """
    c = _taylor_fft(f, center, rho, n)
    big = np.max(np.abs(c) * rho ** np.arange(n))
    keep = np.nonzero(np.abs(c) * rho ** np.arange(n) > 1e-13 * big)[0]
    if len(keep) == 0:
        return ZeroSet([], c)
    deg = keep[-1]
    poly = c[: deg + 1]
    roots = np.roots(poly[::-1]) + center if deg > 0 else np.array([])
    inside = [r for r in roots if abs(r - center) < keep_radius * 1.05]
    groups = _cluster(inside, cluster_tol * max(1.0, rho))
    pts = []
    for i, (r, m) in enumerate(groups):
        if abs(r - center) >= keep_radius * 1.02:
            continue
        sep = min([abs(r - q) for j, (q, _) in enumerate(groups) if j != i]
                  + [rho - abs(r - center)])
        loc = _local_zeros(logderiv, r, 0.3 * sep)
        if loc is not None:
            m, r = loc
        if m == 0:
            continue
        if m == 1:
            r = _polish(logderiv, r, 1)
        if abs(r - center) < keep_radius:
            pts.append((r, m))
    pts.sort(key=lambda p: (p[0].real, p[0].imag))
    return ZeroSet(pts, c)


def det_coefficients(fam: AnalyticMatrixFamily, n: int | None = None) -> np.ndarray:
    """Taylor coefficients of ``det M`` about the family center."""
    N = fam.dim_in * fam.degree + 1 if fam.polynomial else 64
    n = n or int(2 ** math.ceil(math.log2(max(N + 1, 8)) + 1))
    return _taylor_fft(lambda t: np.linalg.det(fam(t)), fam.center, fam.radius, n)


def companion_oracle(fam: AnalyticMatrixFamily, cluster_tol: float = 1e-3) -> list[tuple[complex, int]]:
    """Roots of the determinant polynomial from its companion matrix.

    Used as an independent check on :func:`classify` for polynomial families.
    Split copies of a multiple root are grouped and replaced by their mean,
    which is accurate to roughly machine precision times the root condition.
    """
    if not fam.polynomial or fam.dim_in != fam.dim_out:
        raise ConfigurationError("oracle needs a square polynomial family")
    c = det_coefficients(fam)
    mag = np.abs(c) * fam.radius ** np.arange(len(c))
    nz = np.nonzero(mag > 1e-13 * mag.max())[0]
    deg = nz[-1]
    if deg == 0:
        return []
    a = c[: deg + 1] / c[deg]
    C = np.zeros((deg, deg), complex)
    C[1:, :-1] = np.eye(deg - 1)
    C[:, -1] = -a[:-1]
    roots = np.linalg.eigvals(C) + fam.center
    pts = [(p, m) for p, m in _cluster(sorted(roots, key=lambda z: (z.real, z.imag)), cluster_tol)
           if abs(p - fam.center) < fam.radius]
    return sorted(pts, key=lambda p: (p[0].real, p[0].imag))


# -- Schur reduction ----------------------------------------------------------

@dataclass
class SchurReduction:
    basepoint: complex
    kernel_basis: np.ndarray
    cokernel_basis: np.ndarray
    range_basis: np.ndarray
    corange_basis: np.ndarray
    family: AnalyticMatrixFamily
    sub_radius: float
    s_coefficients: list = field(default_factory=list, repr=False)

    def blocks(self, tau):
        M = self.family(tau)
        C, Ur, K, Vr = self.cokernel_basis, self.corange_basis, self.kernel_basis, self.range_basis
        h = lambda A, X, B: A.conj().T @ X @ B
        return h(C, M, K), h(C, M, Vr), h(Ur, M, K), h(Ur, M, Vr)

    def s(self, tau) -> np.ndarray:
        a11, a12, a21, a22 = self.blocks(tau)
        if a22.size == 0:
            return a11
        return a11 - a12 @ np.linalg.solve(a22, a21)

    def s_taylor(self, tau) -> np.ndarray:
        h = complex(tau) - self.basepoint
        out = np.zeros_like(self.s_coefficients[-1])
        for c in reversed(self.s_coefficients):
            out = out * h + c
        return out

    def inverse(self, tau) -> np.ndarray:
        """``M(tau)^{-1}`` assembled from the Schur block formula."""
        a11, a12, a21, a22 = self.blocks(tau)
        k = a11.shape[0]
        if a22.size == 0:
            Binv = np.linalg.inv(a11)
        else:
            a22i = np.linalg.inv(a22)
            si = np.linalg.inv(a11 - a12 @ a22i @ a21)
            Binv = np.block([[si, -si @ a12 @ a22i],
                             [-a22i @ a21 @ si, a22i + a22i @ a21 @ si @ a12 @ a22i]])
        Q = np.hstack([self.kernel_basis, self.range_basis])
        P = np.hstack([self.cokernel_basis, self.corange_basis])
        return Q @ Binv @ P.conj().T

    def det_s_zeros(self, keep_fraction: float = 0.5) -> list[tuple[complex, int]]:
        rho = 0.7 * self.sub_radius
        k = self.kernel_basis.shape[1]
        z = analytic_zeros(lambda t: np.linalg.det(self.s(t)),
                           _matrix_logderiv(self.s, lambda t: _fd(self.s, t)),
                           self.basepoint, rho, 64 * max(1, k), keep_fraction * self.sub_radius)
        return z.points


def _zero_distance(f: Callable[[complex], complex], center: complex, radius: float) -> float:
    """Distance from ``center`` to the nearest zero of a polynomial-like ``f`` within ``radius``."""
    c = _taylor_fft(f, center, radius, 128)
    big = np.max(np.abs(c) * radius ** np.arange(len(c)))
    keep = np.nonzero(np.abs(c) * radius ** np.arange(len(c)) > 1e-13 * big)[0]
    if len(keep) == 0 or keep[-1] == 0:
        return radius
    roots = np.roots(c[: keep[-1] + 1][::-1])
    d = [abs(r) for r in roots if abs(r) < radius]
    return min(d) if d else radius


def schur_reduce(fam: AnalyticMatrixFamily, basepoint: complex, sv_tol: float = 1e-10,
                 taylor_order: int = 32) -> SchurReduction:
    """Block form relative to the kernel and cokernel of ``M(basepoint)``."""
    if fam.dim_in != fam.dim_out:
        raise ConfigurationError("schur_reduce needs a square family; use classify for index != 0")
    basepoint = complex(basepoint)
    if not fam.inside(basepoint):
        raise ConfigurationError("basepoint outside the family disk")
    A0 = fam(basepoint)
    U, s, Vh = np.linalg.svd(A0)
    # relative to the family scale: M(basepoint) itself may vanish (tau I at 0)
    scale = max(s[0], max(np.linalg.norm(c, 2) * fam.radius ** k
                          for k, c in enumerate(fam.coefficients)))
    small = s <= sv_tol * max(scale, 1e-300)
    if not small.any():
        raise BasepointRegular(f"M({basepoint}) is invertible")
    K, Vr = Vh[small].conj().T, Vh[~small].conj().T
    C, Ur = U[:, small], U[:, ~small]
    room = fam.radius - abs(basepoint - fam.center)
    red = SchurReduction(basepoint, K, C, Vr, Ur, fam, room)
    if Vr.shape[1]:
        d = _zero_distance(lambda t: np.linalg.det(red.blocks(t)[3]), basepoint, room)
        red.sub_radius = 0.9 * min(d, room)
    # Taylor coefficients of s from the exact s on a circle inside the sub-disk
    rho = 0.8 * red.sub_radius
    n = taylor_order
    t = 2 * np.pi * np.arange(n) / n
    samples = np.array([red.s(basepoint + rho * np.exp(1j * x)) for x in t])
    coeffs = np.fft.fft(samples, axis=0) / n
    red.s_coefficients = [coeffs[k] / rho ** k for k in range(n // 2)]
    return red


# -- classification ---------------------------------------------------------

@dataclass
class Classification:
    kind: str
    points: list = field(default_factory=list)
    schur_agrees: list = field(default_factory=list)

    def as_record(self) -> dict:
        return {"kind": self.kind,
                "points": [{"re": p.real, "im": p.imag, "multiplicity": m} for p, m in self.points],
                "schur_agrees": self.schur_agrees}


def classify(fam: AnalyticMatrixFamily, zero_tol: float = 1e-12, gray: float = 1e-8,
             cross_check: bool = True) -> Classification:
    """Nowhere invertible, or the discrete singular set with multiplicities."""
    if fam.dim_in != fam.dim_out:
        return Classification("nowhere_invertible")
    c = det_coefficients(fam)
    n = fam.dim_in
    scale = max(np.linalg.norm(fam(fam.center + fam.radius * np.exp(1j * t)), 2)
                for t in np.linspace(0, 2 * np.pi, 16, endpoint=False)) ** n
    cmax = float(np.max(np.abs(c) * fam.radius ** np.arange(len(c)))) / max(scale, 1e-300)
    if cmax < zero_tol:
        return Classification("nowhere_invertible")
    if cmax < gray:
        raise TruncationInconclusive(f"determinant coefficients are tiny ({cmax:.2e}) but not "
                                     "below the zero threshold")
    zs = analytic_zeros(lambda t: np.linalg.det(fam(t)), _matrix_logderiv(fam, fam.derivative),
                        fam.center, fam.radius, len(c), fam.radius * 0.999)
    out = Classification("discrete_singular_set", zs.points)
    if cross_check:
        for p, m in zs.points:
            out.schur_agrees.append(schur_cross_check(fam, p, zs.points))
    return out


def schur_cross_check(fam: AnalyticMatrixFamily, tau0: complex, det_points, tol: float = 1e-9,
                      sv_tol: float = 1e-7) -> bool:
    """Zeros of det s near ``tau0`` coincide with the det M zeros there."""
    red = schur_reduce(fam, tau0, sv_tol=sv_tol)
    zs = red.det_s_zeros()
    lim = 0.5 * red.sub_radius
    mine = sorted([(p, m) for p, m in det_points if abs(p - tau0) < lim * 0.98],
                  key=lambda x: (x[0].real, x[0].imag))
    theirs = sorted([(p, m) for p, m in zs if abs(p - tau0) < lim * 0.98],
                    key=lambda x: (x[0].real, x[0].imag))
    if len(mine) != len(theirs):
        return False
    return all(abs(a - b) < tol * max(1.0, abs(a)) and ma == mb
               for (a, ma), (b, mb) in zip(mine, theirs))


# -- principal parts ----------------------------------------------------------

@dataclass
class PrincipalPart:
    point: complex
    coefficients: list
    ranks: list
    pole_order: int
    circle_radius: float


def meromorphic_inverse_data(fam: AnalyticMatrixFamily, tau0: complex, radius: float | None = None,
                             nodes: int = 128, max_order: int | None = None,
                             rel_tol: float = 1e-9, others: Sequence[complex] = ()) -> PrincipalPart:
    """Laurent principal part of ``M^{-1}`` at ``tau0`` by contour quadrature."""
    tau0 = complex(tau0)
    room = fam.radius - abs(tau0 - fam.center)
    others = [o for o in others if abs(o - tau0) > 1e-7]
    dist = min([abs(o - tau0) for o in others] + [room])
    r = radius or 0.3 * dist
    if any(abs(o - tau0) <= r * 1.05 for o in others) or r >= room:
        raise CircleHitsSingularity(f"circle of radius {r} around {tau0} reaches another singularity")
    t = 2 * np.pi * np.arange(nodes) / nodes
    pts = tau0 + r * np.exp(1j * t)
    invs = []
    smin = math.inf
    for z in pts:
        Mz = fam(z)
        sv = np.linalg.svd(Mz, compute_uv=False)
        smin = min(smin, sv[-1] / sv[0])
        invs.append(np.linalg.inv(Mz))
    if smin < 1e-10:
        raise CircleHitsSingularity(f"M is numerically singular on the circle around {tau0}")
    invs = np.array(invs)
    big = max(np.linalg.norm(X, 2) for X in invs)
    max_order = max_order or fam.dim_in * max(fam.degree, 1)
    coeffs, ranks = [], []
    for k in range(1, max_order + 1):
        w = (r * np.exp(1j * t)) ** k / nodes
        A = np.tensordot(w, invs, axes=(0, 0))
        sv = np.linalg.svd(A, compute_uv=False)
        norm = sv / r ** k / big
        coeffs.append(A)
        ranks.append(int(np.sum(norm > rel_tol)))
    order = max([k + 1 for k, rk in enumerate(ranks) if rk > 0], default=0)
    return PrincipalPart(tau0, coeffs[:order], ranks[:order], order, r)


# -- planted families ---------------------------------------------------------

def _polymul(a: list, b: list) -> list:
    out = [np.zeros((a[0].shape[0], b[0].shape[1]), complex) for _ in range(len(a) + len(b) - 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = out[i + j] + x @ y
    return out


def _taylor_shift(coeffs: list, h0: complex, order: int) -> list:
    """Coefficients in powers of ``(tau - h0)`` of a polynomial given about 0."""
    n = len(coeffs)
    out = []
    for j in range(min(order, n)):
        acc = np.zeros_like(coeffs[0])
        for k in range(j, n):
            acc = acc + math.comb(k, j) * h0 ** (k - j) * coeffs[k]
        out.append(acc)
    return out


@dataclass
class PlantedTruth:
    points: list
    orders: list
    multiplicities: list
    principal_ranks: list


def planted_family(rng: np.random.Generator, dim: int, n_points: int, max_order: int = 2,
                   radius: float = 1.0) -> tuple[AnalyticMatrixFamily, PlantedTruth]:
    """``M = U(tau) D(tau) V(tau)`` with unimodular ``U, V`` and planted diagonal factors.

    The principal-part ranks in the truth record are computed from the exact
    Laurent expansion of ``V^{-1} D^{-1} U^{-1}``, not by contour quadrature.
    """
    if n_points > dim:
        raise ConfigurationError("cannot plant more points than the dimension")
    pts: list[complex] = []
    while len(pts) < n_points:
        z = complex(*rng.uniform(-0.7, 0.7, 2)) * radius
        if abs(z) < 0.75 * radius and all(abs(z - p) > 0.25 * radius for p in pts):
            pts.append(z)
    # slot assignment: each point owns one or two diagonal slots with orders
    slots: list[tuple[int, int]] = []  # (point index, order) per slot
    free = list(range(dim))
    rng.shuffle(free)
    for i in range(n_points):
        n_slots = 1 if dim - len(slots) - (n_points - i - 1) < 2 or rng.random() < 0.6 else 2
        for _ in range(n_slots):
            slots.append((i, int(rng.integers(1, max_order + 1))))
    slot_of = {free[j]: slots[j] for j in range(len(slots))}

    def orth():
        q, r = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
        return q * (np.diag(r) / np.abs(np.diag(r)))

    def nil():
        return np.triu(rng.standard_normal((dim, dim)), 1) * 0.5

    O1, O2, N1, N2 = orth(), orth(), nil(), nil()
    Ucoef = [O1, O1 @ N1]
    Vcoef = [np.eye(dim, dtype=complex), N2]
    Vcoef = [c @ O2 for c in Vcoef]
    # diagonal polynomial
    diag_polys = []
    for j in range(dim):
        p = np.array([1.0 + 0j])
        if j in slot_of:
            i, k = slot_of[j]
            for _ in range(k):
                p = np.convolve(p, [-pts[i], 1.0])
        diag_polys.append(p)
    ddeg = max(len(p) for p in diag_polys)
    Dcoef = [np.diag([p[k] if k < len(p) else 0 for p in diag_polys]) for k in range(ddeg)]
    coeffs = _polymul(_polymul(Ucoef, Dcoef), Vcoef)
    fam = AnalyticMatrixFamily(coeffs, 0.0, radius)

    # exact Laurent principal parts at each point
    Uinv_coef = [np.linalg.matrix_power(-N1, j) @ O1.conj().T for j in range(dim)]
    Vinv_coef = [O2.conj().T @ np.linalg.matrix_power(-N2, j) for j in range(dim)]
    ranks, orders, mults = [], [], []
    for i, p in enumerate(pts):
        kmax = max(k for (pi, k) in slots if pi == i)
        mults.append(sum(k for (pi, k) in slots if pi == i))
        orders.append(kmax)
        depth = kmax + dim + 2
        Us = _taylor_shift(Uinv_coef, p, depth)
        Vs = _taylor_shift(Vinv_coef, p, depth)
        # D^{-1} Laurent coefficients about p: index b from -kmax
        Db = {}
        for j in range(dim):
            poly = diag_polys[j]
            if j in slot_of and slot_of[j][0] == i:
                k = slot_of[j][1]
                Db.setdefault(-k, np.zeros((dim, dim), complex))[j, j] += 1.0
            else:
                # regular entry 1/poly(tau) expanded about p
                roots = np.roots(poly[::-1]) if len(poly) > 1 else np.array([])
                ser = np.zeros(depth, complex)
                ser[0] = 1.0
                for rt in roots:
                    # 1/(tau - rt) = -1/(rt - p) * sum ((tau-p)/(rt-p))^n
                    g = np.array([-(1.0 / (rt - p)) * (1.0 / (rt - p)) ** n for n in range(depth)])
                    ser = np.convolve(ser, g)[:depth]
                lead = poly[-1] if len(poly) > 1 else poly[0]
                ser = ser / lead
                for b in range(depth):
                    Db.setdefault(b, np.zeros((dim, dim), complex))[j, j] += ser[b]
        rk = []
        for k in range(1, kmax + 1):
            A = np.zeros((dim, dim), complex)
            for b, Dm in Db.items():
                for a in range(depth):
                    c = -k - a - b
                    if 0 <= c < len(Us) and a < len(Vs):
                        A = A + Vs[a] @ Dm @ Us[c]
            s = np.linalg.svd(A, compute_uv=False)
            rk.append(int(np.sum(s > 1e-9 * max(s[0], 1e-300))) if s[0] > 1e-12 else 0)
        ranks.append(rk)
    return fam, PlantedTruth(pts, orders, mults, ranks)


def planted_demo(count: int = 50, seed: int = 0, dims: tuple[int, int] = (4, 8),
                 max_points: int = 3, max_order: int = 2) -> dict:
    """Classify randomized planted families and compare with their construction."""
    rng = np.random.default_rng(seed)
    records = []
    for j in range(count):
        dim = int(rng.integers(dims[0], dims[1] + 1))
        npts = int(rng.integers(1, max_points + 1))
        fam, truth = planted_family(rng, dim, npts, max_order)
        oracle = companion_oracle(fam)
        cls = classify(fam)
        found = cls.points
        ok_count = len(found) == len(truth.points)
        loc_err = 0.0
        mult_ok = True
        rank_ok = True
        for p, m in zip(truth.points, truth.multiplicities):
            if not found:
                ok_count = False
                break
            q, mq = min(found, key=lambda x: abs(x[0] - p))
            loc_err = max(loc_err, abs(q - p))
            mult_ok &= (mq == m)
            pp = meromorphic_inverse_data(fam, q, others=[x for x, _ in found])
            rank_ok &= (pp.ranks == truth.principal_ranks[truth.points.index(p)])
        oracle_ok = len(oracle) == len(found) and all(
            any(abs(o - q) < 1e-9 and mo == mq for o, mo in oracle) for q, mq in found)
        oracle_err = max(min(abs(o - q) for o, _ in oracle) for q, _ in found) if found and oracle else math.inf
        records.append({"family": j, "dim": dim, "planted": len(truth.points),
                        "found": len(found), "location_error": loc_err,
                        "oracle_error": oracle_err, "multiplicities_ok": bool(mult_ok),
                        "schur_agrees": bool(all(cls.schur_agrees)), "ranks_ok": bool(rank_ok),
                        "passed": bool(ok_count and loc_err < 1e-9 and oracle_ok and mult_ok
                                       and all(cls.schur_agrees) and rank_ok)})
    return {"families": records, "passed": all(r["passed"] for r in records),
            "max_location_error": max(r["location_error"] for r in records)}
