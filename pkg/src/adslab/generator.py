"""Discrete dissipative Maxwell generator on a truncated exterior shell.

Fields are expanded in vector spherical harmonics ``(l, m)``, ``1 <= l <=
L_max``, in both polarizations.  Each (l, m, pol) block carries three radial
unknowns on a staggered grid clustered at the obstacle:

* ``u`` at the nodes ``r_0 = a < ... < r_N = R_max`` (tangential field on
  the toroidal harmonic, times r)
* ``v`` at the half-nodes (tangential field on the poloidal harmonic)
* ``w`` at the nodes (radial field)

In the unperturbed block for TE (``s = +1``) and TM (``s = -1``)::

    lam u = s (v' - c w),   lam v = s u',   lam w = s c u,   c = sqrt(L)/r

with the discrete inner product ``sum wn |u|^2 + sum wh |v|^2 + sum wn |w|^2``
making the interior operator exactly skew.  The inner boundary trace of
``v`` is eliminated through the dissipative condition, the outer end is
reflecting, and a passive damping sponge on ``u`` absorbs outgoing waves.

Shape perturbations enter through a mass matrix (pulled-back permittivity and
permeability ``I + delta K``), giving the pencil ``G x = lam M x``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import harmonics
from .errors import (ConfigurationError, FactorizationSingular, NearSingularSolve, NoConvergence,
                     ResolutionError, UnstableAbsorber)

POLARIZATIONS = ("TE", "TM")
# memory budget for cached sparse factorizations of z M - G
LU_CACHE_BYTES = 2_000_000_000


@dataclass(frozen=True)
class Absorber:
    start: float = 20.0
    sigma_max: float = 2.0
    exponent: float = 2.0


@dataclass(frozen=True)
class Resolution:
    L_max: int = 1
    N_r: int = 400
    R_max: float = 30.0
    absorber: Absorber = field(default_factory=Absorber)
    beta: float = 4.0

    @classmethod
    def from_dict(cls, d: dict) -> "Resolution":
        d = dict(d)
        ab = d.pop("absorber", {})
        unknown = set(d) - {"L_max", "N_r", "R_max", "beta"}
        if unknown:
            raise ConfigurationError(f"unknown resolution keys: {sorted(unknown)}")
        if isinstance(ab, dict):
            bad = set(ab) - {"start", "sigma_max", "exponent"}
            if bad:
                raise ConfigurationError(f"unknown absorber keys: {sorted(bad)}")
            ab = Absorber(**ab)
        return cls(absorber=ab, **d)


@dataclass(frozen=True)
class Problem:
    """Geometry and boundary data.

    ``epsilon`` is a positive number or a list of ``(l, m, c)`` real-harmonic
    coefficients of ``eps(theta, phi)``.  The obstacle is
    ``|x| = radius (1 + delta s(theta, phi))`` with ``s`` given by ``shape``.
    ``speed`` scales every coefficient matrix of the system.
    """

    epsilon: float | tuple = 1.0
    radius: float = 1.0
    delta: float = 0.0
    shape: tuple = ()
    reflecting: bool = False
    speed: float = 1.0

    def __post_init__(self):
        eps = self.epsilon
        if isinstance(eps, (list, tuple)):
            object.__setattr__(self, "epsilon", tuple(tuple(float(x) if i == 2 else int(x)
                                                        for i, x in enumerate(t)) for t in eps))
        elif not (isinstance(eps, (int, float)) and eps > 0):
            raise ConfigurationError("epsilon must be a positive number or a coefficient list")
        else:
            object.__setattr__(self, "epsilon", float(eps))
        object.__setattr__(self, "shape", tuple(tuple(float(x) if i == 2 else int(x)
                                                      for i, x in enumerate(t)) for t in self.shape))
        if not self.radius > 0 or not self.speed > 0:
            raise ConfigurationError("radius and speed must be positive")

    @property
    def constant_epsilon(self) -> bool:
        return isinstance(self.epsilon, float)

    def canonical(self) -> dict:
        d = {"epsilon": self.epsilon, "radius": self.radius, "reflecting": self.reflecting,
             "speed": self.speed}
        if self.delta != 0 and self.shape:
            d["delta"] = self.delta
            d["shape"] = self.shape
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Problem":
        unknown = set(d) - {"epsilon", "radius", "delta", "shape", "reflecting", "speed"}
        if unknown:
            raise ConfigurationError(f"unknown problem keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ContourSpec:
    center: complex
    radius: float
    nodes: int = 32

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError("contour radius must be positive")
        if self.nodes < 8:
            raise ConfigurationError("contour needs at least 8 nodes")
        if complex(self.center).real + self.radius >= 0:
            raise ConfigurationError("contour disk must lie in Re z < 0")

    def points(self, nodes: int | None = None):
        n = nodes or self.nodes
        t = 2 * np.pi * np.arange(n) / n
        return complex(self.center) + self.radius * np.exp(1j * t)


def mapped_grid(a: float, R: float, N: int, beta: float):
    """Nodes and half-nodes of the exponentially clustered staggered grid."""
    s = np.arange(2 * N + 1) / (2 * N)
    g = s if beta == 0 else np.expm1(beta * s) / np.expm1(beta)
    x = a + (R - a) * g
    x[-1] = R
    return x[0::2], x[1::2]


@dataclass
class EigenResult:
    value: complex
    vector: np.ndarray
    residual: float
    accepted: bool


class DiscreteGenerator:
    """Assembled sparse generator with its inner product and metadata."""

    def __init__(self, problem: Problem, resolution: Resolution):
        self.problem = problem
        self.resolution = resolution
        self._validate()
        a, res = problem.radius, resolution
        N = res.N_r
        self.r, self.rh = mapped_grid(a, res.R_max, N, res.beta)
        wn = np.empty(N + 1)
        wn[1:-1] = np.diff(self.rh)
        wn[0] = self.rh[0] - self.r[0]
        wn[-1] = self.r[-1] - self.rh[-1]
        self.wn, self.wh = wn, np.diff(self.r)
        self.lm = harmonics.harmonic_indices(res.L_max)
        self.modes = [(l, m, pol) for (l, m) in self.lm for pol in POLARIZATIONS]
        self.block_size = 3 * N + 2
        self.size = self.block_size * len(self.modes)
        ab = res.absorber
        t = np.clip((self.r - ab.start) / (res.R_max - ab.start), 0.0, None)
        self.sigma = np.where(self.r > ab.start, ab.sigma_max * t ** ab.exponent, 0.0)
        self.weights = np.tile(np.concatenate([wn, self.wh, wn]), len(self.modes))
        self.W = sp.diags(self.weights).tocsc()
        self.parts = self._assemble_parts()
        WG = (self.parts["skew"] + self.parts["boundary"] + self.parts["absorber"]) * problem.speed
        self.WG = WG.tocsc()
        self.G = (sp.diags(1.0 / self.weights) @ self.WG).tocsc()
        self.S = self._mass()
        self.M = None if self.S is None else (sp.diags(1.0 / self.weights) @ self.S).tocsc()
        self.hash = hashlib.sha256(json.dumps({"problem": problem.canonical(),
                                               "resolution": asdict(resolution)},
                                              sort_keys=True).encode()).hexdigest()
        self.known_eigenvalues: list[complex] = []
        self._lu_cache: dict[complex, object] = {}
        self._lu_bytes: dict[complex, int] = {}
        self._lu_entry_bytes: int | None = None

    # -- layout -----------------------------------------------------------

    def block_index(self, l: int, m: int, pol: str) -> int:
        return self.modes.index((l, m, pol))

    def slices(self, block: int):
        N, b0 = self.resolution.N_r, block * self.block_size
        return (slice(b0, b0 + N + 1), slice(b0 + N + 1, b0 + 2 * N + 1),
                slice(b0 + 2 * N + 1, b0 + 3 * N + 2))

    def _validate(self):
        res, a = self.resolution, self.problem.radius
        if res.L_max < 1:
            raise ResolutionError("L_max must be >= 1")
        if res.N_r < 16:
            raise ResolutionError("N_r must be >= 16")
        if not (res.R_max > res.absorber.start > a):
            raise ResolutionError("need R_max > absorber start > radius")
        if res.absorber.sigma_max < 0 or res.absorber.exponent < 0:
            raise UnstableAbsorber("absorber strength and exponent must be non-negative")

    # -- assembly ---------------------------------------------------------

    def _assemble_parts(self):
        N = self.resolution.N_r
        n = self.size
        rows, cols, vals = [], [], []
        arows, avals = [], []
        for b, (l, m, pol) in enumerate(self.modes):
            s = 1.0 if pol == "TE" else -1.0
            su, sv, sw = self.slices(b)
            iu = np.arange(su.start, su.stop)
            iv = np.arange(sv.start, sv.stop)
            iw = np.arange(sw.start, sw.stop)
            cw = math.sqrt(l * (l + 1)) / self.r * self.wn
            # u <- v (both neighbours), v <- u, u <-> w
            rows += [iu[:N], iu[1:], iv, iv, iu, iw]
            cols += [iv, iv, iu[1:], iu[:N], iw, iu]
            vals += [np.full(N, s), np.full(N, -s), np.full(N, s), np.full(N, -s), -s * cw, s * cw]
            arows.append(iu)
            avals.append(-self.sigma * self.wn)
        skew = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, n))
        ai = np.concatenate(arows)
        absorber = sp.csc_matrix((np.concatenate(avals), (ai, ai)), shape=(n, n))
        return {"skew": skew, "boundary": self._boundary(), "absorber": absorber}

    def boundary_blocks(self):
        """Trace maps ``v_a = X u_0`` as (TE<-TE, TE<-TM, TM<-TE, TM<-TM) blocks."""
        k = len(self.lm)
        p = self.problem
        if p.reflecting:
            z = np.zeros((k, k))
            return z, z, z, z
        if p.constant_epsilon:
            e = p.epsilon
            z = np.zeros((k, k))
            return (1 + e) * np.eye(k), z, z, -np.eye(k) / (1 + e)
        deg = 2 * self.resolution.L_max + harmonics.max_degree(p.epsilon) + 4
        quad = harmonics.SphereQuadrature.build(deg)
        eps, _ = harmonics.expand(p.epsilon, quad)
        if eps.min() <= 0:
            raise ConfigurationError("angle-dependent epsilon must be positive on the sphere")
        PP, PS, SP, SS = harmonics.boundary_gram(self.lm, 1.0 + eps, quad)
        T = np.linalg.inv(SS)
        return PP - PS @ T @ SP, -PS @ T, -T @ SP, -T

    def _boundary(self):
        EE, EM, ME, MM = self.boundary_blocks()
        n = self.size
        u0 = {}
        for b, (l, m, pol) in enumerate(self.modes):
            u0[(l, m, pol)] = self.slices(b)[0].start
        te = [u0[(l, m, "TE")] for (l, m) in self.lm]
        tm = [u0[(l, m, "TM")] for (l, m) in self.lm]
        rows, cols, vals = [], [], []
        # TE row gets -v_a(TE), TM row gets +v_a(TM)
        for (ri, sgn, blocks) in ((te, -1.0, (EE, EM)), (tm, 1.0, (ME, MM))):
            for cj, X in zip((te, tm), blocks):
                I, J = np.nonzero(X)
                rows += [ri[i] for i in I]
                cols += [cj[j] for j in J]
                vals += list(sgn * X[I, J])
        return sp.csc_matrix((vals, (rows, cols)), shape=(n, n))

    def _component_map(self, field_name: str):
        """Sparse map from the state to node-major ``[Y rhat, Psi, Phi]`` components."""
        N, k = self.resolution.N_r, len(self.lm)
        rows, cols, vals = [], [], []
        nodes = np.arange(N + 1)
        for b, (l, m, pol) in enumerate(self.modes):
            j = self.lm.index((l, m))
            su, sv, sw = self.slices(b)
            tangential_here = (pol == "TE") == (field_name == "E")
            base = nodes * 3 * k
            if tangential_here:
                rows.append(base + 2 * k + j)
                cols.append(su.start + nodes)
                vals.append(np.ones(N + 1))
            else:
                rows.append(base + j)
                cols.append(sw.start + nodes)
                vals.append(np.ones(N + 1))
                # v averaged onto nodes; one-sided at the two ends
                left = np.clip(nodes - 1, 0, N - 1)
                right = np.clip(nodes, 0, N - 1)
                rows += [base + k + j, base + k + j]
                cols += [sv.start + left, sv.start + right]
                vals += [np.full(N + 1, 0.5), np.full(N + 1, 0.5)]
        return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(3 * k * (N + 1), self.size))

    def _mass(self):
        p = self.problem
        if p.delta == 0 or not p.shape:
            return None
        deg = 2 * self.resolution.L_max + harmonics.max_degree(p.shape) + 4
        quad = harmonics.SphereQuadrature.build(deg)
        K = harmonics.shape_coupling(self.lm, p.shape, quad)
        scale = self.wn * p.radius / self.r
        Kb = sp.kron(sp.diags(scale), sp.csr_matrix(K))
        S = self.W.copy().astype(float)
        for name in ("E", "B"):
            J = self._component_map(name)
            S = S + p.delta * (J.T @ Kb @ J)
        S = 0.5 * (S + S.T)
        return S.tocsc()

    # -- inner products ---------------------------------------------------

    def mass_apply(self, x):
        return x if self.M is None else self.M @ x

    def energy(self, x) -> float:
        """Discrete ``||(E, B)||**2``."""
        if self.S is None:
            return float(np.real(np.vdot(x, self.weights * x)))
        return float(np.real(np.vdot(x, self.S @ x)))

    def inner(self, x, y) -> complex:
        return complex(np.vdot(x, self.weights * y))

    def dissipation_form(self):
        """Symmetric part of W G (equivalently S M^{-1} G) as a sparse matrix."""
        return 0.5 * (self.WG + self.WG.T)

    def is_block_diagonal(self) -> bool:
        A = self.G.tocoo()
        if self.M is not None:
            A = (abs(self.G) + abs(self.M)).tocoo()
        return bool(np.all(A.row // self.block_size == A.col // self.block_size))

    # -- factorizations ---------------------------------------------------

    def shifted(self, z: complex):
        """``z M - G`` as a sparse matrix."""
        Mz = sp.identity(self.size, format="csc") if self.M is None else self.M
        return (z * Mz - self.G).tocsc()

    def factor(self, z: complex):
        z = complex(z)
        lu = self._lu_cache.get(z)
        if lu is None:
            try:
                lu = spla.splu(self.shifted(z).astype(complex))
            except RuntimeError as exc:
                raise FactorizationSingular(f"z M - G is singular at z = {z}") from exc
            if self._lu_entry_bytes is None:
                # complex values plus int32 row indices; fill is nearly z-independent
                self._lu_entry_bytes = 20 * (lu.L.nnz + lu.U.nnz)
            nbytes = self._lu_entry_bytes
            # when full, stop inserting: contour quadrature revisits the same
            # nodes cyclically, where eviction would miss on every access
            if sum(self._lu_bytes.values()) + nbytes <= LU_CACHE_BYTES:
                self._lu_cache[z] = lu
                self._lu_bytes[z] = nbytes
        return lu

    def clear_cache(self):
        self._lu_cache.clear()
        self._lu_bytes.clear()

    def to_coo_text(self) -> str:
        A = self.G.tocoo()
        lines = ["# row col re im"]
        for i, j, v in zip(A.row, A.col, A.data):
            lines.append(f"{i} {j} {float(np.real(v))!r} {float(np.imag(v))!r}")
        return "\n".join(lines) + "\n"


def assemble(problem: Problem | dict, resolution: Resolution | dict) -> DiscreteGenerator:
    if isinstance(problem, dict):
        problem = Problem.from_dict(problem)
    if isinstance(resolution, dict):
        resolution = Resolution.from_dict(resolution)
    return DiscreteGenerator(problem, resolution)


def eigs_near(gen: DiscreteGenerator, target: complex, count: int = 6, accept_tol: float = 1e-8,
              ncv: int | None = None, max_jitter: int = 3, maxiter: int = 600) -> list[EigenResult]:
    """Eigenpairs nearest ``target`` by shift-invert Arnoldi."""
    target = complex(target)
    if target.real >= 0:
        raise ValueError("target must lie in Re z < 0")
    n = gen.size
    count = min(count, n - 2)
    sigma = target
    lu = None
    for attempt in range(max_jitter + 1):
        try:
            lu = spla.splu((gen.shifted(sigma) * -1).astype(complex))
            break
        except RuntimeError:
            sigma = target + 1e-7 * (1 + abs(target)) * (attempt + 1) * (1 + 0.37j)
    if lu is None:
        raise FactorizationSingular(f"G - sigma M is singular near {target}")

    op = spla.LinearOperator((n, n), matvec=lambda x: lu.solve(np.asarray(gen.mass_apply(x), complex)),
                             dtype=complex)
    ncv = ncv or max(3 * count, 30)
    theta = vecs = None
    partial = None
    v0 = np.random.default_rng(7).standard_normal(n) + 0j
    for attempt in range(3):
        try:
            theta, vecs = spla.eigs(op, k=count, which="LM", ncv=min(ncv, n - 1), v0=v0,
                                    maxiter=maxiter)
            break
        except spla.ArpackNoConvergence as exc:
            if len(exc.eigenvalues):
                # the values nearest the shift converge first; a larger basis
                # rarely helps for tight clusters far from the target
                partial = (exc.eigenvalues, exc.eigenvectors)
                break
            ncv *= 2
    if theta is None:
        if partial is None:
            raise NoConvergence(f"shift-invert Arnoldi did not converge near {target}")
        # keep what converged; residuals below decide acceptance
        theta, vecs = partial
    out = []
    for th, v in zip(theta, vecs.T):
        lam = sigma + 1.0 / th
        v = v / np.linalg.norm(v)
        res = float(np.linalg.norm(gen.G @ v - lam * gen.mass_apply(v)))
        ok = res < accept_tol and lam.real <= 1e-8
        out.append(EigenResult(complex(lam), v, res, ok))
        if ok:
            gen.known_eigenvalues.append(complex(lam))
    out.sort(key=lambda e: abs(e.value - target))
    return out


def resolvent_solve(gen: DiscreteGenerator, z: complex, rhs, check: bool = True,
                    cond_limit: float = 1e14):
    """``(z - G)^{-1} rhs`` for the generator ``M^{-1} G``."""
    z = complex(z)
    if check:
        scale = 1.0 + abs(z)
        for lam in gen.known_eigenvalues:
            if abs(z - lam) < 1e-12 * scale:
                raise NearSingularSolve(f"z = {z} coincides with eigenvalue {lam}")
    lu = gen.factor(z)
    b = gen.mass_apply(np.asarray(rhs, dtype=complex))
    x = lu.solve(b)
    if check:
        A = gen.shifted(z)
        r = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
        if r > 1e-10:
            raise NearSingularSolve(f"resolvent residual {r:.2e} at z = {z}")
    return x


def condition_estimate(gen: DiscreteGenerator, z: complex) -> float:
    """One-norm condition estimate of ``z M - G``."""
    A = gen.shifted(z)
    lu = gen.factor(z)
    n = gen.size
    inv = spla.LinearOperator((n, n), matvec=lambda x: lu.solve(np.asarray(x, complex)),
                              rmatvec=lambda x: lu.solve(np.asarray(x, complex), trans="H"),
                              dtype=complex)
    return float(spla.norm(A, 1) * spla.onenormest(inv))


# -- kernel witnesses -------------------------------------------------------

def _bump(r, center, width):
    t = (r - center) / width
    out = np.zeros_like(r)
    inside = np.abs(t) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def gradient_witness(gen: DiscreteGenerator, block: int, center: float, width: float):
    """Discrete gradient field of a radial bump times one harmonic."""
    l, _, _ = gen.modes[block]
    su, sv, sw = gen.slices(block)
    a = gen.problem.radius
    R = gen.resolution.R_max
    half = np.concatenate([[2 * a - gen.rh[0]], gen.rh, [2 * R - gen.rh[-1]]])
    phi = _bump(half, center, width)
    x = np.zeros(gen.size)
    x[sv] = math.sqrt(l * (l + 1)) * phi[1:-1]
    x[sw] = gen.r * np.diff(phi) / gen.wn
    return x


def kernel_witness_check(gen: DiscreteGenerator, count: int = 12, seed: int = 0,
                         tol: float = 1e-6) -> dict:
    """Many independent near-kernel vectors built from compactly supported bumps."""
    rng = np.random.default_rng(seed)
    a = gen.problem.radius
    lo, hi = a, gen.resolution.absorber.start
    ratios, vecs = [], []
    for j in range(count):
        block = j % len(gen.modes)
        width = rng.uniform(0.5, 2.0)
        center = rng.uniform(lo + width + 0.1, hi - width - 0.1)
        x = gradient_witness(gen, block, center, width)
        ratios.append(float(math.sqrt(gen.energy(gen.G @ x) / gen.energy(x))))
        vecs.append(x)
    V = np.array(vecs).T
    gram = V.T @ (gen.weights[:, None] * V)
    d = np.sqrt(np.diag(gram))
    ev = np.linalg.eigvalsh(gram / np.outer(d, d))
    rank = int(np.sum(ev > 1e-10 * ev.max()))
    # a bump that straddles the boundary is not a kernel vector
    edge = gradient_witness(gen, 0, a, 1.0)
    edge_ratio = float(math.sqrt(gen.energy(gen.G @ edge) / gen.energy(edge)))
    return {"ratios": ratios, "max_ratio": max(ratios), "gram_rank": rank, "count": count,
            "passed": bool(max(ratios) < tol and rank == count),
            "boundary_overlap_ratio": edge_ratio}


# -- coercivity diagnostic --------------------------------------------------

def coercivity_diagnostic(gen: DiscreteGenerator, z_list: Sequence[complex] | None = None,
                          kernel_tol: float = 1e-7) -> dict:
    """Smallest singular value of ``G - z`` on the complement of the near-kernel.

    Dense; meant for small resolutions.  Singular values are taken in the
    discrete energy norm.
    """
    if gen.size > 4000:
        raise ResolutionError("coercivity diagnostic is dense; use N_r and L_max giving <= 4000 unknowns")
    if gen.M is not None:
        raise ConfigurationError("coercivity diagnostic supports the unperturbed mass only")
    if z_list is None:
        z_list = [-t for t in (0.01, 0.1, 0.5, 1.0, 2.0)] + [complex(-0.1, s) for s in (0.5, 1.0, 2.0)]
    sq = np.sqrt(gen.weights)
    Gh = (sq[:, None] * gen.G.toarray()) / sq[None, :]
    U, s, Vh = np.linalg.svd(Gh)
    kern = s < kernel_tol * s[0]
    Qc = Vh[~kern].conj().T
    curve = []
    for z in z_list:
        z = complex(z)
        if z.real >= 0:
            raise ValueError("diagnostic requires Re z < 0")
        A = Gh - z * np.eye(gen.size)
        s_full = np.linalg.svd(A, compute_uv=False)[-1]
        s_comp = np.linalg.svd(A @ Qc, compute_uv=False)[-1]
        curve.append({"z": [z.real, z.imag], "sigma_min_on_complement": float(s_comp),
                      "sigma_min_full": float(s_full),
                      "reference_shape": float(abs(z) * (1 + 1 / abs(z.real)))})
    return {"kernel_dimension": int(kern.sum()), "norm": float(s[0]),
            "sigma_min_on_complement": min(c["sigma_min_on_complement"] for c in curve),
            "bound_curve": curve}


# -- sampling closed-form fields -------------------------------------------

def sample_mode(gen: DiscreteGenerator, profile, m: int = 0, discrete_v: bool = True):
    """Grid samples of a closed-form mode profile in block (l, m, pol).

    With ``discrete_v`` the poloidal component is the discrete derivative of
    the sampled ``u`` over ``lam``, which makes the state exactly orthogonal to
    the discrete kernel.
    """
    b = gen.block_index(profile.l, m, profile.polarization)
    su, sv, sw = gen.slices(b)
    x = np.zeros(gen.size, dtype=complex)
    u = profile.u(gen.r)
    x[su] = u
    x[sw] = profile.w(gen.r)
    if discrete_v:
        sgn = 1.0 if profile.polarization == "TE" else -1.0
        x[sv] = sgn * np.diff(u) / gen.wh / profile.lam
    else:
        x[sv] = profile.v(gen.rh)
    return x
