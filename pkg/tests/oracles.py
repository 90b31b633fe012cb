"""Independent reference computations used by the tests.

Nothing here calls the root finders or solvers under test.
"""

from __future__ import annotations

import numpy as np
from scipy import optimize, special

from adslab.sphere import ModeProblem, dispersion_residual


def hankel_scipy(l: int, x: float):
    """``h_l(x) = j_l(x) + i y_l(x)`` for real ``x > 0`` from scipy."""
    h = special.spherical_jn(l, x) + 1j * special.spherical_yn(l, x)
    dh = special.spherical_jn(l, x, derivative=True) + 1j * special.spherical_yn(l, x, derivative=True)
    return h, dh


def grid_scan_roots(mode: ModeProblem, region, n: int = 2000, refine_tol: float = 1e-14):
    """Roots of the dispersion function by brute force.

    Evaluates ``|F|`` on an ``n x n`` grid, keeps 3x3 local minima in the
    interior (ties kept, so a real root straddled by two grid rows survives),
    and refines each with a derivative-free 2D solve of
    ``(Re F, Im F) = 0`` seeded at the grid minimum.
    """
    re0, re1, im0, im1 = region
    x = np.linspace(re0, re1, n)
    y = np.linspace(im0, im1, n)
    X, Y = np.meshgrid(x, y, indexing="ij")
    F = np.abs(dispersion_residual(mode, X + 1j * Y))
    c = F[1:-1, 1:-1]
    is_min = np.ones_like(c, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            is_min &= c <= F[1 + di:n - 1 + di, 1 + dj:n - 1 + dj]
    hx, hy = x[1] - x[0], y[1] - y[0]
    roots = []
    for i, j in zip(*np.nonzero(is_min)):
        z0 = complex(x[i + 1], y[j + 1])

        def fun(p):
            v = dispersion_residual(mode, complex(p[0], p[1]))
            return [v.real, v.imag]

        sol = optimize.root(fun, [z0.real, z0.imag], method="hybr", tol=refine_tol)
        z = complex(*sol.x)
        if not sol.success or abs(dispersion_residual(mode, z)) > 1e-10:
            continue
        if abs(z - z0) > 3 * max(hx, hy):
            continue
        if not any(abs(z - r) < 1e-9 for r in roots):
            roots.append(z)
    return sorted(roots, key=lambda z: (z.real, z.imag))


def dispersion_polynomial_roots(mode: ModeProblem):
    """Roots from the finite Hankel series: the normalized function is a polynomial in 1/x."""
    l, eps = mode.l, mode.epsilon
    # i^(l+1) x e^{-ix} h_l(x) = sum_m a_m x^{-m},  a_m = i^m (l+m)! / (m! (l-m)! 2^m)
    from math import factorial
    a = np.array([(1j ** m) * factorial(l + m) / (factorial(m) * factorial(l - m) * 2 ** m)
                  for m in range(l + 1)])
    # h' = d/dx[e^{ix}/x * S(1/x)] * prefactor; work with g(x) = x e^{-ix} h (times i^{l+1})
    # h = e^{ix} g / x  =>  h/x + h' = e^{ix} (i g + g') / x,  g' = sum -m a_m x^{-m-1}
    # TE: (1+eps) g + i (i g + g') = eps g + i g'   (times e^{ix}/x, dropped)
    # TM: g + i (1+eps) (i g + g') = -eps g + i (1+eps) g'
    deg = l + 2
    g = np.zeros(deg, complex)
    gp = np.zeros(deg, complex)
    g[: l + 1] = a
    for m in range(l + 1):
        gp[m + 1] += -m * a[m]
    if mode.polarization == "TE":
        poly = eps * g + 1j * gp
    else:
        poly = -eps * g + 1j * (1 + eps) * gp
    # poly in powers of s = 1/x; roots s -> x = 1/s -> lam = i x / a
    coeffs = np.trim_zeros(poly[::-1], "f")
    s = np.roots(coeffs)
    s = s[np.abs(s) > 1e-14]
    lam = 1j / s / mode.radius
    return sorted([complex(z) for z in lam if z.real < 0], key=lambda z: (z.real, z.imag))
