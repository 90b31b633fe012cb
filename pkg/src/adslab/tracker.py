"""Contour spectral projectors and eigenvalue continuation.

The projector onto the spectrum inside a circle ``C`` is

    P = (1 / 2 pi i) oint_C (z - G)^{-1} dz,

approximated by the trapezoid rule and applied to a random probe block, so
only ``rank(P) <= probe width`` is resolved.  For the pencil ``G x = lam M x``
the resolvent is ``(z M - G)^{-1} M``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import (ConfigurationError, ContourNearEigenvalue, PathLost, QuadratureNotConverged)
from .generator import (ContourSpec, DiscreteGenerator, Problem, Resolution, assemble, eigs_near)


@dataclass
class ProjectorResult:
    contour: ContourSpec
    rank: int
    trace: complex
    basis: np.ndarray
    idempotency_error: float
    quadrature_change: float
    nodes_used: int
    singular_values: np.ndarray = field(repr=False, default=None)

    def as_record(self) -> dict:
        return {"center": [self.contour.center.real, self.contour.center.imag],
                "radius": self.contour.radius, "rank": self.rank,
                "trace": [self.trace.real, self.trace.imag],
                "idempotency_error": self.idempotency_error,
                "quadrature_change": self.quadrature_change, "nodes": self.nodes_used}


def _apply_projector(gen: DiscreteGenerator, contour: ContourSpec, Z: np.ndarray, nodes: int,
                     threads: int = 1) -> np.ndarray:
    pts = contour.points(nodes)
    MZ = np.column_stack([gen.mass_apply(Z[:, j]) for j in range(Z.shape[1])]).astype(complex)

    def term(z):
        lu = gen.factor(z)
        return (z - contour.center) * lu.solve(MZ)

    if threads > 1:
        for z in pts:
            gen.factor(z)  # factorize sequentially, solve in parallel
        with ThreadPoolExecutor(threads) as pool:
            terms = list(pool.map(term, pts))
    else:
        terms = [term(z) for z in pts]
    return sum(terms) / nodes


def check_contour(gen: DiscreteGenerator, contour: ContourSpec, count: int = 6,
                  margin: float = 0.1) -> list[complex]:
    """Eigenvalues near the contour; raises if any is within ``margin * radius`` of it."""
    found = [e.value for e in eigs_near(gen, contour.center, count) if e.accepted]
    for lam in found:
        delta = abs(abs(lam - contour.center) - contour.radius)
        if delta < margin * contour.radius:
            raise ContourNearEigenvalue(f"eigenvalue {lam} is {delta:.3g} from the contour",
                                        lam, delta)
    return found


def spectral_projector(gen: DiscreteGenerator, contour: ContourSpec, probe: int = 8,
                       seed: int = 0, check: bool = True, tol: float = 1e-8,
                       max_nodes: int = 1024, threads: int = 1) -> ProjectorResult:
    """Low-rank contour projector with a node-doubling convergence gate."""
    if check:
        check_contour(gen, contour)
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((gen.size, probe)) + 1j * rng.standard_normal((gen.size, probe))
    Z /= np.linalg.norm(Z, axis=0)
    nodes = contour.nodes
    PZ = _apply_projector(gen, contour, Z, nodes, threads)
    change = math.inf
    while True:
        PZ2 = _apply_projector(gen, contour, Z, 2 * nodes, threads)
        scale = max(np.linalg.norm(PZ2), 1.0)
        change = float(np.linalg.norm(PZ2 - PZ) / scale)
        nodes *= 2
        PZ = PZ2
        if change < tol:
            break
        if nodes >= max_nodes:
            raise QuadratureNotConverged(f"trapezoid rule changed by {change:.2e} at {nodes} nodes")
    U, s, _ = np.linalg.svd(PZ, full_matrices=False)
    thresh = max(1e-7 * np.linalg.norm(Z, 2), 1e-8 * (s[0] if len(s) else 0.0))
    rank = int(np.sum(s > thresh))
    if rank == probe:
        raise ConfigurationError(f"projector rank reached the probe width {probe}; increase probe")
    Q = U[:, :rank]
    if rank:
        PQ = _apply_projector(gen, contour, Q, nodes, threads)
        trace = complex(np.trace(Q.conj().T @ PQ))
        PPQ = _apply_projector(gen, contour, PQ, nodes, threads)
        idem = float(np.linalg.norm(PPQ - PQ, 2) / max(np.linalg.norm(PQ, 2), 1e-300))
    else:
        trace = complex(np.trace(Z.conj().T @ PZ) / probe) if probe else 0j
        idem = 0.0
    return ProjectorResult(contour, rank, trace, Q, idem, change, nodes, s)


def projector_product(gen: DiscreteGenerator, c1: ContourSpec, c2: ContourSpec, probe: int = 8,
                      seed: int = 0) -> float:
    """``||P1 P2 Z|| / ||Z||`` for a random probe ``Z``."""
    p2 = spectral_projector(gen, c2, probe=probe, seed=seed, check=False)
    rng = np.random.default_rng(seed + 1)
    Z = rng.standard_normal((gen.size, probe)) + 0j
    P2Z = _apply_projector(gen, c2, Z, p2.nodes_used)
    P1P2Z = _apply_projector(gen, c1, P2Z, max(p2.nodes_used, c1.nodes * 4))
    return float(np.linalg.norm(P1P2Z) / np.linalg.norm(Z))


# -- perturbation paths -----------------------------------------------------

FAMILIES = ("eps_scale", "eps_angle", "shape", "speed")


@dataclass(frozen=True)
class PerturbationPath:
    """``delta -> problem`` with a fixed resolution.

    * ``eps_scale``: ``eps = eps0 (1 + delta)``
    * ``eps_angle``: ``eps = eps0 (1 + delta g)`` with ``g`` a harmonic expansion
    * ``shape``: obstacle ``radius (1 + delta s)``
    * ``speed``: coefficient matrices scaled by ``1 + delta``
    """

    family: str
    base: Problem
    resolution: Resolution
    delta_max: float
    steps: int = 21
    profile: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if not self.base.constant_epsilon:
            raise ConfigurationError("path base problem needs constant epsilon")
        if self.steps < 2 or self.delta_max <= 0:
            raise ConfigurationError("need steps >= 2 and delta_max > 0")
        if self.family in ("eps_angle", "shape") and not self.profile:
            raise ConfigurationError(f"family {self.family} needs a harmonic profile")

    @property
    def deltas(self) -> np.ndarray:
        return np.linspace(0.0, self.delta_max, self.steps)

    def problem_at(self, delta: float) -> Problem:
        b = self.base
        if delta == 0:
            return b
        if self.family == "eps_scale":
            return replace(b, epsilon=b.epsilon * (1 + delta))
        if self.family == "speed":
            return replace(b, speed=b.speed * (1 + delta))
        if self.family == "shape":
            return replace(b, delta=delta, shape=self.profile)
        y00 = math.sqrt(4 * math.pi)
        coeffs = [(0, 0, b.epsilon * y00)] + [(l, m, b.epsilon * delta * c) for l, m, c in self.profile]
        return replace(b, epsilon=tuple(coeffs))

    def generator_at(self, delta: float) -> DiscreteGenerator:
        return assemble(self.problem_at(delta), self.resolution)


@dataclass
class PathPoint:
    delta: float
    value: complex
    residual: float
    rank: int | None = None

    def as_record(self) -> dict:
        return {"delta": self.delta, "re_lambda": self.value.real, "im_lambda": self.value.imag,
                "residual": self.residual, "rank": self.rank}


def _nearest_other(values: Sequence[complex], lam: complex, cluster_tol: float) -> float:
    d = [abs(v - lam) for v in values if abs(v - lam) > cluster_tol]
    return min(d) if d else math.inf


def continue_eigenvalue(path: PerturbationPath, seed: complex, count: int = 6,
                        trust_radius: float = 0.05, contour_radius: float | None = None,
                        min_step: float | None = None, cluster_tol: float = 1e-6,
                        on_step: Callable[[PathPoint], None] | None = None) -> list[PathPoint]:
    """Secant predictor, shift-invert corrector, step halving on large jumps."""
    targets = list(path.deltas)
    min_step = min_step or (path.delta_max / (path.steps - 1)) / 64
    table: list[PathPoint] = []

    def correct(delta, predicted):
        gen = path.generator_at(delta)
        res = [e for e in eigs_near(gen, predicted, count) if e.accepted]
        if not res:
            raise PathLost(f"no accepted eigenvalue near {predicted} at delta = {delta}",
                           table[-1].delta if table else None, table)
        best = min(res, key=lambda e: abs(e.value - predicted))
        others = _nearest_other([e.value for e in res], best.value, cluster_tol)
        rank = None
        if contour_radius:
            c = ContourSpec(best.value, contour_radius)
            rank = spectral_projector(gen, c, check=False).rank
        return PathPoint(float(delta), best.value, best.residual, rank), others

    point, _ = correct(0.0, complex(seed))
    if abs(point.value - seed) > trust_radius:
        raise PathLost(f"seed {seed} has no eigenvalue within the trust radius", 0.0, table)
    table.append(point)
    if on_step:
        on_step(point)
    queue = targets[1:]
    while queue:
        d = queue[0]
        prev = table[-1]
        if len(table) >= 2 and table[-1].delta > table[-2].delta:
            p0, p1 = table[-2], table[-1]
            slope = (p1.value - p0.value) / (p1.delta - p0.delta)
            predicted = p1.value + slope * (d - p1.delta)
        else:
            predicted = prev.value
        point, others = correct(d, predicted)
        jump = abs(point.value - prev.value)
        if abs(point.value - predicted) > trust_radius:
            if (d - prev.delta) > min_step:
                queue.insert(0, 0.5 * (prev.delta + d))
                continue
            raise PathLost(f"corrector moved {abs(point.value - predicted):.3g} from the prediction "
                           f"at delta = {d}", prev.delta, table)
        if jump > 0.3 * others and (d - prev.delta) > min_step:
            queue.insert(0, 0.5 * (prev.delta + d))
            continue
        table.append(point)
        if on_step:
            on_step(point)
        queue.pop(0)
    return table


def distinct_values(values: Sequence[complex], tol: float) -> list[complex]:
    out: list[complex] = []
    for v in sorted(values, key=lambda z: (z.real, z.imag)):
        if all(abs(v - w) > tol for w in out):
            out.append(v)
    return out


def splitting_report(path: PerturbationPath, contour: ContourSpec, count: int = 6,
                     cluster_tol: float = 1e-7, deltas: Sequence[float] | None = None) -> dict:
    """Multiplicity (projector rank) and distinct-eigenvalue count inside a fixed contour."""
    deltas = list(path.deltas if deltas is None else deltas)
    counts, distinct, failures = [], [], None
    rank0 = None
    for d in deltas:
        gen = path.generator_at(d)
        try:
            inside_vals = [v for v in check_contour(gen, contour, count)
                           if abs(v - contour.center) < contour.radius]
            proj = spectral_projector(gen, contour, check=False)
        except ContourNearEigenvalue as exc:
            failures = {"delta": d, "message": str(exc)}
            break
        if rank0 is None:
            rank0 = proj.rank
        counts.append(proj.rank)
        distinct.append(len(distinct_values(inside_vals, cluster_tol * max(1.0, abs(contour.center)))))
    return {"rank0": rank0, "deltas": deltas[:len(counts)], "counts_by_delta": counts,
            "distinct_by_delta": distinct,
            "multiplicity_constant": bool(counts) and all(c == rank0 for c in counts),
            "distinct_bounded": all(k <= (rank0 or 0) for k in distinct),
            "failure": failures}
