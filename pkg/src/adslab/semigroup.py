"""Time evolution ``u(t) = exp(t G) f`` of the discrete dissipative problem.

Crank-Nicolson in the mass-weighted form

    (M - dt/2 G) u^{n+1} = (M + dt/2 G) u^n

is A-stable and reproduces the discrete energy balance exactly:
``E^{n+1} - E^n = 2 dt Re <u^{n+1/2}, W G u^{n+1/2}>`` with
``u^{n+1/2} = (u^n + u^{n+1}) / 2``, split into boundary and absorber parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, StepRejected
from .generator import DiscreteGenerator, _bump, gradient_witness


@dataclass
class SemigroupState:
    t: float
    fields: np.ndarray
    energy: float


@dataclass
class EvolutionTrace:
    times: np.ndarray
    energy: np.ndarray
    boundary_flux: np.ndarray
    absorber_flux: np.ndarray
    dt: float
    states: list[SemigroupState] = field(default_factory=list)
    probes: dict = field(default_factory=dict)

    @property
    def final(self) -> SemigroupState:
        return self.states[-1]

    def table(self):
        """Rows ``(t, energy, boundary_flux, absorber_flux)``; fluxes are per step, at mid-times."""
        bf = np.concatenate([[np.nan], self.boundary_flux])
        af = np.concatenate([[np.nan], self.absorber_flux])
        return np.column_stack([self.times, self.energy, bf, af])


def default_dt(gen: DiscreteGenerator) -> float:
    return float(np.min(gen.wh) / (2.0 * gen.problem.speed))


def evolve(gen: DiscreteGenerator, f, T: float, dt: float | None = None,
           store_every: int | None = None, probe_radius: float | None = None,
           energy_slack: float = 1e-8) -> EvolutionTrace:
    """Integrate to time ``T`` and record energy and fluxes at every step."""
    if not T > 0:
        raise ConfigurationError("T must be positive")
    f = np.asarray(f, dtype=complex)
    if f.shape != (gen.size,):
        raise ConfigurationError(f"initial state has shape {f.shape}, expected ({gen.size},)")
    if not np.all(np.isfinite(f)):
        raise ConfigurationError("initial state is not finite")
    dt = dt or default_dt(gen)
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    dt = T / n_steps
    Mx = sp.identity(gen.size, format="csc") if gen.M is None else gen.M
    lu = spla.splu((Mx - 0.5 * dt * gen.G).tocsc().astype(complex))
    rhs_op = (Mx + 0.5 * dt * gen.G).tocsc()
    Bd = gen.parts["boundary"] * gen.problem.speed
    Ab = gen.parts["absorber"] * gen.problem.speed

    probe_idx = None
    if probe_radius is not None:
        i = int(np.argmin(np.abs(gen.r - probe_radius)))
        probe_idx = i

    times = [0.0]
    energy = [gen.energy(f)]
    bflux, aflux, probe_vals = [], [], []
    states = [SemigroupState(0.0, f.copy(), energy[0])]
    u = f
    if probe_idx is not None:
        probe_vals.append(_probe(gen, u, probe_idx))
    for k in range(1, n_steps + 1):
        un = lu.solve(rhs_op @ u)
        if not np.all(np.isfinite(un)):
            raise StepRejected(f"non-finite state at step {k}")
        mid = 0.5 * (u + un)
        bflux.append(2 * float(np.real(np.vdot(mid, Bd @ mid))))
        aflux.append(2 * float(np.real(np.vdot(mid, Ab @ mid))))
        e = gen.energy(un)
        if e > energy[-1] * (1 + energy_slack) + 1e-300:
            raise StepRejected(f"energy increased at step {k}: {energy[-1]:.6e} -> {e:.6e}")
        u = un
        times.append(k * dt)
        energy.append(e)
        if probe_idx is not None:
            probe_vals.append(_probe(gen, u, probe_idx))
        if store_every and k % store_every == 0:
            states.append(SemigroupState(k * dt, u.copy(), e))
    if states[-1].t != times[-1]:
        states.append(SemigroupState(times[-1], u.copy(), energy[-1]))
    tr = EvolutionTrace(np.array(times), np.array(energy), np.array(bflux), np.array(aflux), dt, states)
    if probe_idx is not None:
        tr.probes = {"radius": float(gen.r[probe_idx]), "amplitude": np.array(probe_vals)}
    return tr


def _u_indices(gen: DiscreteGenerator) -> np.ndarray:
    return np.concatenate([np.arange(gen.slices(b)[0].start, gen.slices(b)[0].stop)
                           for b in range(len(gen.modes))])


def leapfrog_dt(gen: DiscreteGenerator, courant: float = 0.98) -> float:
    """Largest stable staggered step times ``courant``."""
    iu = _u_indices(gen)
    mask = np.zeros(gen.size, bool)
    mask[iu] = True
    iy = np.nonzero(~mask)[0]
    sq = np.sqrt(gen.weights)
    A = sp.diags(sq[iu]) @ gen.G[iu][:, iy] @ sp.diags(1.0 / sq[iy])
    smax = spla.svds(A.tocsc(), k=1, return_singular_vectors=False, random_state=0)[0]
    return float(courant * 2.0 / smax)


def evolve_leapfrog(gen: DiscreteGenerator, f, T: float, dt: float | None = None,
                    probe_radius: float | None = None) -> EvolutionTrace:
    """Explicit staggered leapfrog with the dissipative terms taken implicitly.

    ``u`` lives at integer steps, ``(v, w)`` at half steps.  Only the
    ``u``-``u`` block (boundary trace and sponge) is solved for, so the state
    outside the numerical domain of dependence stays exactly zero.
    Unperturbed mass only.
    """
    if gen.M is not None:
        raise ConfigurationError("leapfrog integrator supports the unperturbed mass only")
    f = np.asarray(f, dtype=complex)
    dt = dt or leapfrog_dt(gen)
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    dt = T / n_steps
    iu = _u_indices(gen)
    mask = np.zeros(gen.size, bool)
    mask[iu] = True
    iy = np.nonzero(~mask)[0]
    G = gen.G.tocsr()
    Duu, Guy, Gyu = G[iu][:, iu], G[iu][:, iy], G[iy][:, iu]
    I = sp.identity(len(iu), format="csc")
    lu = spla.splu((I - 0.5 * dt * Duu).tocsc().astype(complex))
    rhs = (I + 0.5 * dt * Duu).tocsr()
    u, y = f[iu].copy(), f[iy] + 0.5 * dt * (Gyu @ f[iu])
    probe_idx = int(np.argmin(np.abs(gen.r - probe_radius))) if probe_radius is not None else None
    x = f.copy()
    times, energy, probe_vals = [0.0], [gen.energy(f)], []
    if probe_idx is not None:
        probe_vals.append(_probe(gen, x, probe_idx))
    for k in range(1, n_steps + 1):
        u = lu.solve(rhs @ u + dt * (Guy @ y))
        y_next = y + dt * (Gyu @ u)
        x = np.empty(gen.size, dtype=complex)
        x[iu], x[iy] = u, 0.5 * (y + y_next)
        y = y_next
        times.append(k * dt)
        energy.append(gen.energy(x))
        if probe_idx is not None:
            probe_vals.append(_probe(gen, x, probe_idx))
    nan = np.full(n_steps, np.nan)
    tr = EvolutionTrace(np.array(times), np.array(energy), nan, nan, dt,
                        [SemigroupState(times[-1], x, energy[-1])])
    if probe_idx is not None:
        tr.probes = {"radius": float(gen.r[probe_idx]), "amplitude": np.array(probe_vals)}
    return tr


def _probe(gen: DiscreteGenerator, u, i: int) -> float:
    """Pointwise field amplitude at node i (half-node neighbours for v)."""
    N = gen.resolution.N_r
    tot = 0.0
    for b in range(len(gen.modes)):
        su, sv, sw = gen.slices(b)
        tot += abs(u[su][i]) ** 2 + abs(u[sw][i]) ** 2
        tot += abs(u[sv][min(i, N - 1)]) ** 2 + abs(u[sv][max(i - 1, 0)]) ** 2
    return math.sqrt(tot) / gen.r[i]


def energy_flux_audit(trace: EvolutionTrace, rtol: float = 1e-9) -> dict:
    """Check ``dE/dt = boundary flux + absorber flux`` step by step."""
    dE = np.diff(trace.energy) / trace.dt
    fl = trace.boundary_flux + trace.absorber_flux
    scale = max(float(np.max(np.abs(trace.energy))), 1e-300)
    mismatch = float(np.max(np.abs(dE - fl))) / scale if len(dE) else 0.0
    e_mid = 0.5 * (trace.energy[1:] + trace.energy[:-1])
    rate = trace.boundary_flux / np.where(e_mid > 0, e_mid, np.nan)
    return {"balance_mismatch": mismatch, "balance_ok": mismatch < rtol,
            "boundary_flux_max": float(np.max(trace.boundary_flux)) if len(fl) else 0.0,
            "boundary_flux_nonpositive": bool(np.all(trace.boundary_flux <= 1e-14 * scale)),
            "absorber_flux_nonpositive": bool(np.all(trace.absorber_flux <= 1e-14 * scale)),
            "mean_boundary_rate": float(np.nanmean(rate)) if len(rate) else 0.0,
            "boundary_flux_total": float(np.sum(trace.boundary_flux) * trace.dt),
            "absorber_flux_total": float(np.sum(trace.absorber_flux) * trace.dt)}


def shell_data(gen: DiscreteGenerator, a: float, b: float, l: int = 1, m: int = 0, pol: str = "TE"):
    """Smooth compactly supported data in ``a < r < b`` (tangential component only)."""
    if not gen.problem.radius <= a < b:
        raise ConfigurationError("need radius <= a < b")
    blk = gen.block_index(l, m, pol)
    su, _, _ = gen.slices(blk)
    x = np.zeros(gen.size, dtype=complex)
    x[su] = _bump(gen.r, 0.5 * (a + b), 0.5 * (b - a))
    return x / math.sqrt(gen.energy(x))


def remove_kernel_witnesses(gen: DiscreteGenerator, f, n_witness: int = 24, seed: int = 0,
                            witnesses=None):
    """Project ``f`` off the span of gradient witnesses (energy inner product).

    Without explicit ``witnesses``, ``n_witness`` random ones are drawn.
    Returns the projected state and the fraction of the energy removed.
    """
    if witnesses is None:
        rng = np.random.default_rng(seed)
        a, hi = gen.problem.radius, gen.resolution.absorber.start
        witnesses = []
        for j in range(n_witness):
            width = rng.uniform(0.5, 2.0)
            center = rng.uniform(a + width + 0.1, hi - width - 0.1)
            witnesses.append(gradient_witness(gen, j % len(gen.modes), center, width))
    sq = np.sqrt(gen.weights)
    Q, _ = np.linalg.qr(sq[:, None] * np.array(witnesses).T)
    g = sq * np.asarray(f, dtype=complex)
    g = (g - Q @ (Q.T @ g)) / sq
    e0 = gen.energy(f)
    return g, (1.0 - gen.energy(g) / e0) if e0 > 0 else 0.0


def decay_experiment(gen: DiscreteGenerator, f, T: float, dt: float | None = None,
                     n_witness: int = 24, seed: int = 0) -> dict:
    """Energy decay profile of ``f`` after removing its kernel-witness component.

    Only the profile is reported.  Vanishing in finite time cannot be decided
    from a discrete run, so nothing about it is asserted here.
    """
    g, removed = remove_kernel_witnesses(gen, f, n_witness, seed)
    if gen.energy(g) <= 0:
        raise ConfigurationError("data lies in the witness span")
    tr = evolve(gen, g / math.sqrt(gen.energy(g)), T, dt)
    return {"times": tr.times, "energy_ratio": tr.energy / tr.energy[0],
            "kernel_fraction_removed": float(removed), "final_ratio": float(tr.energy[-1] / tr.energy[0]),
            "boundary_loss": float(-tr.boundary_flux.sum() * tr.dt),
            "absorber_loss": float(-tr.absorber_flux.sum() * tr.dt)}


def finite_speed_test(gen: DiscreteGenerator, f, b: float, c: float, T: float | None = None,
                      dt: float | None = None, threshold: float = 1e-8, v_max: float = 1.0,
                      method: str = "leapfrog") -> dict:
    """First time the field at radius ``c`` exceeds ``threshold * ||f||``.

    ``method="leapfrog"`` uses the explicit staggered scheme whose numerical
    domain of dependence is the light cone when the grid is uniform near the
    probe.  ``method="cn"`` uses the implicit scheme of :func:`evolve`, whose
    dispersive precursor travels ahead of the cone; it is kept as a diagnostic.
    """
    if c >= gen.resolution.absorber.start:
        raise ConfigurationError("probe radius must lie before the absorber")
    v = v_max * gen.problem.speed
    T = T or 1.5 * (c - b) / v + 1.0
    if method == "leapfrog":
        tr = evolve_leapfrog(gen, f, T, dt, probe_radius=c)
    elif method == "cn":
        tr = evolve(gen, f, T, dt, probe_radius=c)
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    amp = tr.probes["amplitude"]
    norm = math.sqrt(gen.energy(f))
    hit = np.nonzero(amp > threshold * norm)[0]
    arrival = float(tr.times[hit[0]]) if len(hit) else math.inf
    bound = (c - b) / v - 2 * tr.dt
    return {"arrival": arrival, "bound": bound, "dt": tr.dt, "probe_radius": tr.probes["radius"],
            "method": method, "passed": bool(arrival >= bound)}
