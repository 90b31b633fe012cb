"""Real scalar and vector spherical harmonics on a product quadrature grid.

For a real orthonormal harmonic ``Y`` of degree ``l`` with ``L = l(l+1)``:

* ``Psi = grad_S Y / sqrt(L)`` (poloidal, tangential)
* ``Phi = rhat x Psi`` (toroidal, tangential)

``{Y rhat, Psi, Phi}`` over all (l, m) is orthonormal on the unit sphere.
Angle-dependent boundary data and shape functions are expanded in the same
real harmonics and given as lists of ``(l, m, coefficient)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import sph_harm_y

Coefficients = Sequence[tuple[int, int, float]]


def real_sph_harm(l: int, m: int, theta, phi):
    """Real orthonormal ``Y_lm`` with its theta and phi derivatives."""
    val, grad = sph_harm_y(l, abs(m), theta, phi, diff_n=1)
    dth, dph = grad[..., 0], grad[..., 1]
    if m == 0:
        return val.real, dth.real, dph.real
    sign = (-1) ** m * math.sqrt(2.0)
    part = np.real if m > 0 else np.imag
    return sign * part(val), sign * part(dth), sign * part(dph)


@dataclass(frozen=True)
class SphereQuadrature:
    """Gauss-Legendre in cos(theta) times the uniform rule in phi."""

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    rhat: np.ndarray
    e_theta: np.ndarray
    e_phi: np.ndarray

    @classmethod
    def build(cls, degree: int) -> "SphereQuadrature":
        """Exact for polynomial integrands of total degree <= ``degree``."""
        n_t = degree // 2 + 2
        n_p = degree + 2
        ct, wt = np.polynomial.legendre.leggauss(n_t)
        ph = 2 * np.pi * np.arange(n_p) / n_p
        T, P = np.meshgrid(np.arccos(ct), ph, indexing="ij")
        W = np.outer(wt, np.full(n_p, 2 * np.pi / n_p))
        T, P, W = T.ravel(), P.ravel(), W.ravel()
        st, ctt, sp, cp = np.sin(T), np.cos(T), np.sin(P), np.cos(P)
        rhat = np.column_stack([st * cp, st * sp, ctt])
        e_t = np.column_stack([ctt * cp, ctt * sp, -st])
        e_p = np.column_stack([-sp, cp, np.zeros_like(P)])
        return cls(T, P, W, rhat, e_t, e_p)

    def integrate(self, values):
        return np.tensordot(values, self.weights, axes=([-1], [0]))


def harmonic_indices(l_max: int) -> list[tuple[int, int]]:
    return [(l, m) for l in range(1, l_max + 1) for m in range(-l, l + 1)]


def vector_harmonics(lm: Sequence[tuple[int, int]], quad: SphereQuadrature):
    """Arrays ``Y`` (k, q), ``Psi`` and ``Phi`` (k, q, 3) at the quadrature nodes."""
    k, q = len(lm), len(quad.weights)
    Y = np.zeros((k, q))
    Psi = np.zeros((k, q, 3))
    Phi = np.zeros((k, q, 3))
    st = np.sin(quad.theta)
    for i, (l, m) in enumerate(lm):
        y, dth, dph = real_sph_harm(l, m, quad.theta, quad.phi)
        sL = math.sqrt(l * (l + 1)) if l > 0 else 1.0
        g = (dth[:, None] * quad.e_theta + (dph / st)[:, None] * quad.e_phi) / sL
        Y[i] = y
        Psi[i] = g
        Phi[i] = np.cross(quad.rhat, g)
    return Y, Psi, Phi


def expand(coeffs: Coefficients, quad: SphereQuadrature):
    """Value and surface gradient of ``sum c Y_lm`` at the quadrature nodes."""
    val = np.zeros(len(quad.weights))
    grad = np.zeros((len(quad.weights), 3))
    st = np.sin(quad.theta)
    for l, m, c in coeffs:
        if abs(m) > l or l < 0:
            raise ValueError(f"invalid harmonic index (l={l}, m={m})")
        y, dth, dph = real_sph_harm(int(l), int(m), quad.theta, quad.phi)
        val += c * y
        grad += c * (dth[:, None] * quad.e_theta + (dph / st)[:, None] * quad.e_phi)
    return val, grad


def max_degree(coeffs: Iterable[tuple[int, int, float]]) -> int:
    return max((int(l) for l, _, _ in coeffs), default=0)


def boundary_gram(lm, weight_values, quad: SphereQuadrature):
    """Gram blocks of ``(1 + eps)`` on the tangential basis ``[Phi; Psi]``.

    Returns ``(M_PP, M_PS, M_SP, M_SS)`` where P = Phi and S = Psi.
    """
    _, Psi, Phi = vector_harmonics(lm, quad)
    w = quad.weights * weight_values

    def gram(A, B):
        return np.einsum("iqc,jqc,q->ij", A, B, w)

    return gram(Phi, Phi), gram(Phi, Psi), gram(Psi, Phi), gram(Psi, Psi)


def shape_coupling(lm, shape: Coefficients, quad: SphereQuadrature):
    """Angular matrix of ``2 s rr^T - (r g^T + g r^T)`` on ``[Y rhat; Psi; Phi]``.

    This is the first-order change of the pulled-back permittivity under the
    radial shift ``x -> x + a delta s(xhat) xhat``, without its ``a/r`` factor.
    Row/column order is component-major: all ``Y rhat``, then all ``Psi``,
    then all ``Phi``.
    """
    Y, Psi, Phi = vector_harmonics(lm, quad)
    s, g = expand(shape, quad)
    rh = quad.rhat
    basis = np.concatenate([Y[:, :, None] * rh[None], Psi, Phi], axis=0)
    Kb = (2 * s[:, None] * np.einsum("qc,jqc->jq", rh, basis)[..., None] * rh[None]
          - np.einsum("qc,jqc->jq", g, basis)[..., None] * rh[None]
          - np.einsum("qc,jqc->jq", rh, basis)[..., None] * g[None])
    return np.einsum("iqc,jqc,q->ij", basis, Kb, quad.weights)
