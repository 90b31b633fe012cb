"""Asymptotically disappearing Maxwell modes outside a ball.

Eigenfunctions of ``lam E = curl B, lam B = -curl E`` on ``|x| > a`` with the
dissipative boundary condition ``(1 + eps) E_tan = nu x B_tan`` reduce, per
spherical-harmonic degree ``l`` and polarization, to zeros of one scalar
function of ``lam``.  See ``docs/dispersion.md`` for the derivation and the
orientation of ``nu``.

Conventions
-----------
* ``k = -1j * lam`` so that the radial factor ``exp(1j*k*r) = exp(lam*r)``
  decays for ``Re lam < 0``.
* TE: ``E`` is tangential to spheres.  TM: ``B`` is tangential.
* ``nu = x/|x|`` on the sphere, the orientation for which the condition is
  dissipative (energy flux ``-2 (1 + eps) |E_tan|**2``).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate

from .errors import ConfigurationError, ContourThroughZero, NonConvergence

DEFAULT_REGION = (-5.0, -1e-3, -20.0, 20.0)


def hankel_elem(l: int, x):
    """Spherical Hankel function of the first kind and its derivative.

    Uses the terminating series
    ``h_l(x) = (-i)**(l+1) exp(ix)/x * sum_m i**m (l+m)! / (m! (l-m)! (2x)**m)``.
    """
    if l < 0:
        raise ValueError("degree must be non-negative")
    x = np.asarray(x, dtype=complex)
    if np.any(x == 0):
        raise ValueError("spherical Hankel function is singular at x = 0")

    def h(n):
        s = np.zeros_like(x)
        for m in range(n + 1):
            s = s + (1j ** m) * math.factorial(n + m) / (math.factorial(m) * math.factorial(n - m)) / (2 * x) ** m
        return (-1j) ** (n + 1) * np.exp(1j * x) / x * s

    hl = h(l)
    if l == 0:
        dh = np.exp(1j * x) * (x + 1j) / x ** 2
    else:
        dh = h(l - 1) - (l + 1) / x * hl
    if dh.ndim == 0:
        return complex(hl), complex(dh)
    return hl, dh


@dataclass(frozen=True)
class ModeProblem:
    l: int
    polarization: str
    epsilon: float
    radius: float = 1.0

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 1:
            raise ConfigurationError("harmonic degree l must be an integer >= 1")
        if self.polarization not in ("TE", "TM"):
            raise ConfigurationError("polarization must be 'TE' or 'TM'")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be > 0 (strictly dissipative range)")
        if not self.radius > 0:
            raise ConfigurationError("radius must be > 0")


def _check_decay_branch(lam):
    lam = np.asarray(lam, dtype=complex)
    if np.any(lam == 0):
        raise ValueError("lambda = 0 is excluded")
    if np.any(lam.real >= 0):
        raise ValueError("only the decay branch Re(lambda) < 0 is supported")
    return lam


def dispersion_residual(mode: ModeProblem, lam):
    """Scalar function whose zeros in Re(lam) < 0 are the mode eigenvalues.

    With ``x = k a``:

    * TE: ``(1 + eps) h + i (h/x + h')``
    * TM: ``h + i (1 + eps) (h/x + h')``

    both multiplied by ``i**(l+1) x exp(-ix)``, which has no zeros and makes
    the result equivariant under ``lam -> conj(lam)``.
    """
    lam = _check_decay_branch(lam)
    x = -1j * lam * mode.radius
    h, dh = hankel_elem(mode.l, x)
    eps = mode.epsilon
    trace = h / x + dh
    if mode.polarization == "TE":
        raw = (1 + eps) * h + 1j * trace
    else:
        raw = h + 1j * (1 + eps) * trace
    out = (1j ** (mode.l + 1)) * x * np.exp(-1j * x) * raw
    return complex(out) if np.ndim(out) == 0 else out


def _derivative(mode, lam, step=None):
    h = step if step is not None else 1e-6 * max(1.0, abs(lam))
    return (dispersion_residual(mode, lam + h) - dispersion_residual(mode, lam - h)) / (2 * h)


@dataclass(frozen=True)
class RadialProfile:
    """Closed-form eigenfield of one (l, m = 0, polarization) mode.

    In the reduced variables ``u = r f`` (tangential field along the toroidal
    harmonic), ``v`` (the other tangential field along the poloidal harmonic,
    times r) and ``w`` (radial component times r):

    TE: ``u = A r h_l(k r)``, ``v = u'/lam``, ``w = sqrt(L) u / (lam r)``
    TM: ``u = A r h_l(k r)``, ``v = -u'/lam``, ``w = -sqrt(L) u / (lam r)``
    """

    l: int
    polarization: str
    lam: complex
    radius: float
    amplitude: complex

    @property
    def k(self):
        return -1j * self.lam

    def u(self, r):
        r = np.asarray(r, dtype=float)
        h, _ = hankel_elem(self.l, self.k * r)
        return self.amplitude * r * h

    def du(self, r):
        r = np.asarray(r, dtype=float)
        h, dh = hankel_elem(self.l, self.k * r)
        return self.amplitude * (h + self.k * r * dh)

    def v(self, r):
        sign = 1.0 if self.polarization == "TE" else -1.0
        return sign * self.du(r) / self.lam

    def w(self, r):
        sign = 1.0 if self.polarization == "TE" else -1.0
        L = self.l * (self.l + 1)
        return sign * math.sqrt(L) * self.u(r) / (self.lam * np.asarray(r, dtype=float))

    def hankel_series(self) -> list[complex]:
        """Coefficients ``i**m (l+m)!/(m!(l-m)! 2**m)`` of the series in 1/x."""
        l = self.l
        return [1j ** m * math.factorial(l + m) / (math.factorial(m) * math.factorial(l - m) * 2 ** m)
                for m in range(l + 1)]

    # Cartesian fields with the real zonal harmonic Y_l0

    def _angular(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        ct = x[:, 2] / r
        l = self.l
        N = math.sqrt((2 * l + 1) / (4 * math.pi))
        Pl = legendre.Legendre.basis(l)
        P, dP = N * Pl(ct), N * Pl.deriv()(ct)
        sL = math.sqrt(l * (l + 1))
        tor = dP[:, None] * np.column_stack([x[:, 1], -x[:, 0], np.zeros_like(r)]) / (r * sL)[:, None]
        pol = dP[:, None] * (np.array([0.0, 0.0, 1.0]) - x * (x[:, 2] / r ** 2)[:, None]) / sL
        rad = P[:, None] * x / r[:, None]
        return r, tor, pol, rad

    def fields(self, x):
        """(E, B) at points ``x`` of shape (m, 3)."""
        r, tor, pol, rad = self._angular(x)
        u, v, w = self.u(r), self.v(r), self.w(r)
        tang = (u / r)[:, None] * tor
        other = (w / r)[:, None] * rad + (v / r)[:, None] * pol
        if self.polarization == "TE":
            return tang, other
        return other, tang

    def E(self, x):
        return self.fields(x)[0]

    def B(self, x):
        return self.fields(x)[1]


@dataclass
class ComplexEigenpair:
    lam: complex
    mode: ModeProblem
    radial_profile: RadialProfile
    pde_residual: float = float("nan")
    bc_residual: float = float("nan")
    decay_ok: bool = False
    divergence_residual: float = float("nan")

    def as_record(self) -> dict:
        return {"l": self.mode.l, "pol": self.mode.polarization,
                "re_lambda": self.lam.real, "im_lambda": self.lam.imag,
                "pde_residual": self.pde_residual, "bc_residual": self.bc_residual}


def make_profile(mode: ModeProblem, lam: complex) -> RadialProfile:
    lam = complex(lam)
    k = -1j * lam
    h, _ = hankel_elem(mode.l, k * mode.radius)
    return RadialProfile(mode.l, mode.polarization, lam, mode.radius, 1.0 / (mode.radius * h))


# -- argument principle ------------------------------------------------------

def _edges(rect):
    re0, re1, im0, im1 = rect
    corners = [complex(re0, im0), complex(re1, im0), complex(re1, im1), complex(re0, im1)]
    return [(corners[i], corners[(i + 1) % 4]) for i in range(4)]


def _log_derivative(mode, z):
    return _derivative(mode, z) / dispersion_residual(mode, z)


def _edge_min(mode, a, b, n=256):
    t = np.linspace(0.0, 1.0, n)
    vals = np.abs(dispersion_residual(mode, a + (b - a) * t))
    return float(vals.min()), float(np.median(vals))


def contour_integral(mode, rect, weight=None, epsabs=1e-8):
    """(1/2 pi i) times the boundary integral of weight(z) F'(z)/F(z)."""
    total = 0j
    for a, b in _edges(rect):
        def f(t, a=a, b=b):
            z = a + (b - a) * t
            val = _log_derivative(mode, z) * (b - a)
            if weight is not None:
                val = val * weight(z)
            return np.array([val.real, val.imag])
        res, _ = integrate.quad_vec(f, 0.0, 1.0, epsabs=epsabs, epsrel=1e-8, limit=200)
        total += complex(res[0], res[1])
    return total / (2j * math.pi)


def _guard(mode, rect, zero_tol):
    for a, b in _edges(rect):
        lo, med = _edge_min(mode, a, b)
        if lo < zero_tol * med:
            return False
    return True


def winding_number(mode: ModeProblem, rect, zero_tol: float = 1e-6) -> int:
    """Number of zeros of the dispersion function inside ``rect``."""
    if not _guard(mode, rect, zero_tol):
        raise ContourThroughZero(f"dispersion function nearly vanishes on the boundary of {rect}")
    w = contour_integral(mode, rect)
    n = round(w.real)
    if abs(w - n) > 0.05:
        raise ContourThroughZero(f"winding integral {w:.4f} is not close to an integer on {rect}")
    return int(n)


def _perturbed(rect, attempt, frac=1e-3):
    re0, re1, im0, im1 = rect
    dr, di = (re1 - re0) * frac * attempt, (im1 - im0) * frac * attempt
    return (re0 + 0.5 * dr, re1 - 0.7 * dr, im0 + 0.6 * di, im1 - 0.4 * di)


def newton_polish(mode, lam0, tol=1e-12, maxiter=60):
    lam = complex(lam0)
    for _ in range(maxiter):
        F = dispersion_residual(mode, lam)
        dF = _derivative(mode, lam)
        if dF == 0:
            break
        step = F / dF
        lam = lam - step
        if lam.real >= 0:
            raise NonConvergence(f"Newton left the decay half-plane from {lam0}")
        if abs(step) < 1e-15 * max(1.0, abs(lam)):
            break
    F = dispersion_residual(mode, lam)
    scale = abs(_derivative(mode, lam)) * max(1.0, abs(lam))
    if abs(F) > tol * max(scale, 1e-300):
        raise NonConvergence(f"Newton stalled at {lam} with |F| = {abs(F):.2e}")
    if abs(lam.imag) < 1e-13 * abs(lam):
        lam = complex(lam.real, 0.0)
    return lam


def _search(mode, rect, depth, max_depth, retries, zero_tol, out):
    for attempt in range(retries + 1):
        box = rect if attempt == 0 else _perturbed(rect, attempt)
        try:
            n = winding_number(mode, box, zero_tol)
            break
        except ContourThroughZero:
            if attempt == retries:
                raise
    if n == 0:
        return
    if n == 1 or depth >= max_depth:
        guess = contour_integral(mode, box, weight=lambda z: z) / max(n, 1)
        lam = newton_polish(mode, guess)
        re0, re1, im0, im1 = box
        if not (re0 - 1e-9 <= lam.real <= re1 + 1e-9 and im0 - 1e-9 <= lam.imag <= im1 + 1e-9):
            if depth >= max_depth:
                raise NonConvergence(f"root estimate {lam} escaped its box {box}")
            # the moment estimate was poor; fall through to bisection
        else:
            out.extend([lam] * n)
            return
    re0, re1, im0, im1 = box
    if (re1 - re0) >= (im1 - im0):
        mid = 0.5 * (re0 + re1)
        halves = [(re0, mid, im0, im1), (mid, re1, im0, im1)]
    else:
        mid = 0.5 * (im0 + im1)
        halves = [(re0, re1, im0, mid), (re0, re1, mid, im1)]
    for sub in halves:
        _search(mode, sub, depth + 1, max_depth, retries, zero_tol, out)


def find_roots(mode: ModeProblem, region=DEFAULT_REGION, max_depth: int = 24, retries: int = 4,
               zero_tol: float = 1e-6, verify: bool = True) -> list[ComplexEigenpair]:
    """All zeros of the dispersion function in the rectangle ``(re0, re1, im0, im1)``."""
    re0, re1, im0, im1 = (float(v) for v in region)
    if not (re0 < re1 < 0 and im0 < im1):
        raise ConfigurationError("region must have positive area inside Re(lambda) < 0")
    roots: list[complex] = []
    _search(mode, (re0, re1, im0, im1), 0, max_depth, retries, zero_tol, roots)
    roots = _dedupe(roots)
    if abs(im0 + im1) < 1e-12 * max(1.0, abs(im1)):
        roots = _close_under_conjugation(mode, roots)
    roots.sort(key=lambda z: (z.real, z.imag))
    pairs = []
    for lam in roots:
        pair = ComplexEigenpair(lam, mode, make_profile(mode, lam))
        if verify:
            verify_eigenpair(pair)
        pairs.append(pair)
    return pairs


def _dedupe(roots, tol=1e-9):
    out = []
    for z in roots:
        if all(abs(z - w) > tol * max(1.0, abs(z)) for w in out):
            out.append(z)
        else:
            out.append(z)  # a genuine double root; keep multiplicity
    return out


def _close_under_conjugation(mode, roots, tol=1e-8):
    out = list(roots)
    for z in roots:
        if z.imag != 0 and not any(abs(w - z.conjugate()) < tol * max(1.0, abs(z)) for w in out):
            out.append(newton_polish(mode, z.conjugate()))
    return out


def search_modes(epsilon: float, lmax: int, region=DEFAULT_REGION, radius: float = 1.0,
                 polarizations: Sequence[str] = ("TE", "TM"), threads: int = 1
                 ) -> list[ComplexEigenpair]:
    tasks = [ModeProblem(l, pol, epsilon, radius) for l in range(1, lmax + 1) for pol in polarizations]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda m: find_roots(m, region), tasks))
    else:
        results = [find_roots(m, region) for m in tasks]
    return [p for group in results for p in group]


# -- verification ---------------------------------------------------------

_FD6 = (np.array([-3, -2, -1, 1, 2, 3]), np.array([-1, 9, -45, 45, -9, 1]) / 60.0)


def _jacobian(fun, x, h):
    """d fun_i / d x_j at points x (m, 3) by sixth-order central differences."""
    offs, wts = _FD6
    m = x.shape[0]
    J = np.zeros((m, 3, 3), dtype=complex)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        for o, c in zip(offs, wts):
            J[:, :, j] += c * fun(x + o * e)
        J[:, :, j] /= h
    return J


def _curl_fd(fun, h):
    def curl(x):
        J = _jacobian(fun, x, h)
        return np.stack([J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0], J[:, 1, 0] - J[:, 0, 1]], axis=1)
    return curl


def _probe_points(radius, n_r=12, r_max_factor=10.0):
    rs = radius * np.logspace(0.0, math.log10(r_max_factor), n_r)
    dirs = np.array([[1.0, 1.0, 1.0], [1.0, -2.0, 0.5], [-0.3, 0.8, -1.2]])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return np.concatenate([r * dirs for r in rs])


def pde_residual(profile: RadialProfile, h: float = 2e-3) -> tuple[float, float]:
    """Relative FD residuals of ``curl curl E + lam**2 E`` and of ``div E``."""
    x = _probe_points(profile.radius)
    E = profile.E
    curl = _curl_fd(E, h)
    cc = _curl_fd(curl, h)(x)
    Ex = E(x)
    lam2E = profile.lam ** 2 * Ex
    res = np.linalg.norm(cc + lam2E, axis=1) / (np.linalg.norm(cc, axis=1) + np.linalg.norm(lam2E, axis=1))
    J = _jacobian(E, x, h)
    div = np.abs(np.trace(J, axis1=1, axis2=2)) / np.linalg.norm(J.reshape(len(x), -1), axis=1)
    return float(res.max()), float(div.max())


def boundary_points(radius, n_theta=9, n_phi=12):
    ct, _ = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    C, P = np.meshgrid(ct, phi, indexing="ij")
    S = np.sqrt(1 - C ** 2)
    return radius * np.column_stack([(S * np.cos(P)).ravel(), (S * np.sin(P)).ravel(), C.ravel()])


def bc_residual(profile: RadialProfile, epsilon: float) -> float:
    """max |(1+eps) E_tan - nu x B_tan| / max |E_tan| on the boundary sphere."""
    x = boundary_points(profile.radius)
    nu = x / profile.radius
    E, B = profile.fields(x)
    Et = E - np.sum(E * nu, axis=1)[:, None] * nu
    Bt = B - np.sum(B * nu, axis=1)[:, None] * nu
    res = (1 + epsilon) * Et - np.cross(nu, Bt)
    scale = np.linalg.norm(Et, axis=1).max()
    return float(np.linalg.norm(res, axis=1).max() / scale)


def shell_energy(profile: RadialProfile, R: float) -> float:
    """||(E, B)||**2 over radius <= |x| <= R (unit-normalized harmonic)."""
    f = lambda r: abs(profile.u(r)) ** 2 + abs(profile.v(r)) ** 2 + abs(profile.w(r)) ** 2
    val, _ = integrate.quad(f, profile.radius, R, limit=400, epsrel=1e-12)
    return val


def decay_check(profile: RadialProfile, levels: int = 6) -> dict:
    """Tail-ratio test that the eigenfield is square integrable.

    Shell increments of the energy over consecutive radial windows must shrink
    at least as fast as ``10 * exp(2 Re(lam) * window)`` until they reach
    roundoff relative to the accumulated norm.
    """
    a = profile.radius
    span = 4.0 / max(-profile.lam.real, 1e-3)
    Rs = [a + span * (k + 1) for k in range(levels)]
    norms = [shell_energy(profile, R) for R in Rs]
    incs = np.diff(norms)
    floor = 1e-13 * norms[-1]
    resolved = incs > floor
    expected = math.exp(2 * profile.lam.real * span)
    ratios = [incs[k + 1] / incs[k] for k in range(len(incs) - 1) if resolved[k] and resolved[k + 1]]
    ok = bool(norms[0] > 0 and np.all(incs > -floor) and all(q < 10 * expected for q in ratios))
    return {"converged": ok, "norm_squared": norms[-1], "tail_ratios": ratios,
            "expected_ratio": expected}


def verify_eigenpair(pair: ComplexEigenpair) -> dict:
    lam = pair.lam
    if lam.real >= 0:
        raise ValueError("eigenvalues with Re(lambda) >= 0 are not decaying modes")
    prof = pair.radial_profile
    pde, div = pde_residual(prof)
    bc = bc_residual(prof, pair.mode.epsilon)
    decay = decay_check(prof)
    pair.pde_residual, pair.bc_residual = pde, bc
    pair.divergence_residual = div
    pair.decay_ok = decay["converged"]
    return {"pde_residual": pde, "bc_residual": bc, "divergence_residual": div, "decay_check": decay}
