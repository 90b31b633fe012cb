"""Command line entry point: ``adslab <subcommand> [options]``.

Every run writes ``report.json`` and one or more CSV tables into the output
directory (``--output``, else ``$ADSLAB_OUTPUT_DIR``, else ``./adslab-out``).
Exit status is 0 when every check of the run passed, 1 on a computational
failure or a failed check, and 2 on a configuration error.  A run that stops
early still flushes what it has, with ``"status": "FAILED"`` in the report and
an empty ``FAILED`` marker file next to it.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AdslabError, ConfigurationError

OUTPUT_ENV = "ADSLAB_OUTPUT_DIR"
EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(float(x.real)), _jsonable(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _fmt(v) -> str:
    if v is None or (isinstance(v, (float, np.floating)) and math.isnan(v)):
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Run:
    """Collects the report, tables and checks of one invocation."""

    def __init__(self, subcommand: str, outdir: Path, args: dict):
        self.outdir = outdir
        self.report: dict = {"subcommand": subcommand, "version": __version__, "config": args}
        self.checks: dict[str, bool] = {}
        self.tables: list[str] = []

    def check(self, name: str, ok) -> bool:
        self.checks[name] = bool(ok)
        return bool(ok)

    def table(self, name: str, header: list[str], rows) -> None:
        self.outdir.mkdir(parents=True, exist_ok=True)
        path = self.outdir / f"{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.tables.append(path.name)

    def finish(self, error: str | None = None) -> int:
        self.outdir.mkdir(parents=True, exist_ok=True)
        ok = error is None and all(self.checks.values())
        self.report["checks"] = self.checks
        self.report["tables"] = self.tables
        self.report["status"] = "ok" if ok else "FAILED"
        if error:
            self.report["error"] = error
        text = json.dumps(_jsonable(self.report), indent=2, sort_keys=True, allow_nan=False)
        (self.outdir / "report.json").write_text(text + "\n", encoding="utf-8")
        marker = self.outdir / "FAILED"
        if ok:
            marker.unlink(missing_ok=True)
        else:
            marker.write_text("", encoding="utf-8")
        return EXIT_OK if ok else EXIT_FAILED


# -- input parsing ------------------------------------------------------------

def _floats(text: str, n: int | None, name: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise ConfigurationError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigurationError(f"{name}: expected {n} numbers, got {len(vals)}")
    return vals


def _coefficients(text: str, name: str) -> tuple:
    """``"l,m,c;l,m,c"`` into harmonic coefficient triples."""
    out = []
    for part in filter(None, text.split(";")):
        l, m, c = _floats(part, 3, name)
        out.append((int(l), int(m), c))
    return tuple(out)


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: expected a JSON object")
    return doc


_RES_KEYS = {"L_max", "N_r", "R_max", "absorber", "beta"}
_PROBLEM_KEYS = {"epsilon", "radius", "delta", "shape", "reflecting", "speed"}


def _problem_from_input(path: str | None, overrides: dict):
    from .generator import Problem, Resolution

    doc = _load_json(path)
    doc.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(doc) - _RES_KEYS - _PROBLEM_KEYS
    if unknown:
        raise ConfigurationError(f"unknown problem keys: {sorted(unknown)}")
    pdoc = {k: doc[k] for k in _PROBLEM_KEYS if k in doc}
    if isinstance(pdoc.get("epsilon"), list):
        pdoc["epsilon"] = tuple(tuple(t) for t in pdoc["epsilon"])
    if "shape" in pdoc:
        pdoc["shape"] = tuple(tuple(t) for t in pdoc["shape"])
    try:
        problem = Problem.from_dict(pdoc)
        resolution = Resolution.from_dict({k: doc[k] for k in _RES_KEYS if k in doc})
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
    return problem, resolution, doc


def _reference_root(epsilon: float, radius: float, l: int = 1, pol: str = "TE") -> complex:
    """Leading decaying root of the sphere dispersion relation."""
    from .sphere import ModeProblem, find_roots

    roots = find_roots(ModeProblem(l, pol, epsilon, radius), verify=False)
    if not roots:
        raise AdslabError(f"no decaying {pol} mode with l = {l} at epsilon = {epsilon}")
    return max(roots, key=lambda p: p.lam.real).lam


# -- subcommands --------------------------------------------------------------

def cmd_symbol(a, run: Run) -> None:
    from .symbol import bundled_maxwell_path, certify, load_system

    system = load_system(a.input or bundled_maxwell_path())
    rep = certify(system, samples=a.samples, seed=a.seed)
    run.report["certificate"] = rep
    run.check("rank_certified", rep["rank_certified"])
    run.check("exact_sequence_certified", rep["exact_sequence_certified"])
    run.check("cayley_hamilton", rep["cayley_hamilton_residual"] < 1e-9 * a.tol)
    run.check("speed_bound", rep["speed_bound_ok"])
    run.table("symbol", ["quantity", "value [1]"],
              [(k, rep[k]) for k in ("d0", "d", "v_min", "v_max", "exact_sequence_max_angle",
                                     "ellipticity_min_sv", "cayley_hamilton_residual")])


def cmd_ads(a, run: Run) -> None:
    from .sphere import search_modes, verify_eigenpair

    doc = _load_json(a.input)
    unknown = set(doc) - {"epsilon", "lmax", "region", "radius"}
    if unknown:
        raise ConfigurationError(f"unknown ads keys: {sorted(unknown)}")
    eps = a.epsilon if a.epsilon is not None else float(doc.get("epsilon", 1.0))
    lmax = a.lmax if a.lmax is not None else int(doc.get("lmax", 1))
    region = (_floats(a.region, 4, "--region") if a.region
              else list(doc.get("region", [-3.0, -1e-3, -6.0, 6.0])))
    radius = float(doc.get("radius", 1.0))
    if not eps > 0 or lmax < 1:
        raise ConfigurationError("need epsilon > 0 and lmax >= 1")
    pairs = search_modes(eps, lmax, tuple(region), radius, threads=a.threads)
    for p in pairs:
        verify_eigenpair(p)
    pairs.sort(key=lambda p: (p.mode.l, p.mode.polarization, p.lam.real, p.lam.imag))
    records = [p.as_record() for p in pairs]
    run.report.update({"epsilon": eps, "lmax": lmax, "region": region, "radius": radius,
                       "roots": records})
    run.table("roots", ["l [1]", "pol", "re_lambda [c/a]", "im_lambda [c/a]", "pde_residual [1]",
                        "bc_residual [1]"],
              [(r["l"], r["pol"], r["re_lambda"], r["im_lambda"], r["pde_residual"],
                r["bc_residual"]) for r in records])
    run.check("bc_residual", all(p.bc_residual < 1e-10 * a.tol for p in pairs))
    run.check("pde_residual", all(p.pde_residual < 1e-8 * a.tol for p in pairs))
    run.check("decay", all(p.decay_ok for p in pairs))


def cmd_spectrum(a, run: Run) -> None:
    from .generator import ContourSpec, assemble, eigs_near, kernel_witness_check
    from .tracker import spectral_projector

    problem, resolution, _ = _problem_from_input(a.input, {})
    gen = assemble(problem, resolution)
    target = complex(*_floats(a.target, 2, "--target")) if a.target else None
    if target is None:
        target = _reference_root(problem.epsilon, problem.radius) if problem.constant_epsilon else -0.6
    res = eigs_near(gen, target, a.count, accept_tol=1e-8 * a.tol)
    res.sort(key=lambda e: (abs(e.value - target), e.value.real, e.value.imag))
    run.report.update({"hash": gen.hash, "size": gen.size, "target": target})
    run.table("eigenvalues", ["re_lambda [c/a]", "im_lambda [c/a]", "residual [1]", "accepted"],
              [(e.value.real, e.value.imag, e.residual, e.accepted) for e in res])
    run.check("eigenvalue_found", any(e.accepted for e in res))
    if a.contour:
        cre, cim, rad = _floats(a.contour, 3, "--contour")
        proj = spectral_projector(gen, ContourSpec(complex(cre, cim), rad), seed=a.seed,
                                  threads=a.threads)
        run.report["projector"] = proj.as_record()
        run.check("projector_trace_integer",
                  abs(proj.trace - round(proj.trace.real)) < 1e-6 * a.tol)
        run.check("projector_idempotent", proj.idempotency_error < 1e-8 * a.tol)
    if a.kernel:
        kw = kernel_witness_check(gen, seed=a.seed, tol=1e-6 * a.tol)
        run.report["kernel_witnesses"] = {k: kw[k] for k in ("max_ratio", "gram_rank", "count")}
        run.check("kernel_witnesses", kw["passed"])
    if a.export_matrix:
        (run.outdir / "generator_coo.txt").write_text(gen.to_coo_text(), encoding="utf-8")


def cmd_evolve(a, run: Run) -> None:
    from .generator import assemble, sample_mode
    from .semigroup import energy_flux_audit, evolve, finite_speed_test, shell_data
    from .sphere import make_profile, ModeProblem

    problem, resolution, _ = _problem_from_input(a.input, {})
    gen = assemble(problem, resolution)
    run.report["hash"] = gen.hash
    if a.init == "eigenmode":
        if not problem.constant_epsilon:
            raise ConfigurationError("eigenmode initial data needs constant epsilon")
        lam = _reference_root(problem.epsilon, problem.radius)
        f = sample_mode(gen, make_profile(ModeProblem(1, "TE", problem.epsilon, problem.radius), lam))
        f = f / math.sqrt(gen.energy(f))
        run.report["lambda"] = lam
    else:
        sa, sb = _floats(a.shell, 2, "--shell")
        f = shell_data(gen, sa, sb)
    tr = evolve(gen, f, a.T, a.dt)
    audit = energy_flux_audit(tr, rtol=1e-9 * a.tol)
    run.report.update({"dt": tr.dt, "steps": len(tr.times) - 1, "audit": audit})
    run.table("energy", ["t [a/c]", "energy [1]", "boundary_flux [c/a]", "absorber_flux [c/a]"],
              tr.table().tolist())
    run.check("energy_monotone", bool(np.all(np.diff(tr.energy) <= 1e-8 * tr.energy[:-1])))
    run.check("energy_balance", audit["balance_ok"])
    if a.init == "eigenmode":
        ratio = np.sqrt(tr.energy / tr.energy[0])
        expect = np.exp(lam.real * tr.times)
        mismatch = float(np.max(np.abs(ratio / expect - 1)))
        run.report["decay_mismatch"] = mismatch
        run.check("decay_rate", mismatch < 0.01 * a.tol)
    elif a.probe is not None:
        # leapfrog only respects the light cone on a uniform grid
        if resolution.beta != 0:
            gen = assemble(problem, replace(resolution, beta=0.0))
            f = shell_data(gen, sa, sb)
        fs = finite_speed_test(gen, f, sb, a.probe)
        run.report["finite_speed"] = fs
        run.check("finite_speed", fs["passed"])


def cmd_perturb(a, run: Run) -> None:
    from .generator import ContourSpec
    from .tracker import PerturbationPath, continue_eigenvalue, spectral_projector

    problem, resolution, _ = _problem_from_input(a.input, {})
    profile = _coefficients(a.profile, "--profile") if a.profile else ()
    path = PerturbationPath(a.family, problem, resolution, a.delta_max, a.steps, profile)
    seed_lam = (complex(*_floats(a.seed_lambda, 2, "--seed-lambda")) if a.seed_lambda
                else _reference_root(problem.epsilon, problem.radius))
    rows = []

    def record(pt):
        rank = None
        if a.rank:
            gen = path.generator_at(pt.delta)
            rad = a.contour_radius or 0.1 * abs(pt.value)
            rank = spectral_projector(gen, ContourSpec(pt.value, rad), seed=a.seed, check=False,
                                      threads=a.threads).rank
        pt.rank = rank
        rows.append(pt)

    try:
        continue_eigenvalue(path, seed_lam, on_step=record)
    finally:
        run.table("path", ["delta [1]", "re_lambda [c/a]", "im_lambda [c/a]", "rank [1]"],
                  [(p.delta, p.value.real, p.value.imag, p.rank) for p in rows])
        run.report["path"] = {"family": a.family, "profile": profile, "points": [p.as_record() for p in rows]}
    jumps = [abs(q.value - p.value) for p, q in zip(rows, rows[1:])]
    run.report["max_jump"] = max(jumps, default=0.0)
    run.check("path_resolved", max(jumps, default=0.0) < 0.05)
    if a.rank and rows:
        # the contour follows one eigenvalue, so split partners may leave it
        run.check("rank_bounded", all(1 <= p.rank <= rows[0].rank for p in rows))


def cmd_fredholm(a, run: Run) -> None:
    from .fredholm import AnalyticMatrixFamily, classify, meromorphic_inverse_data, planted_demo

    if a.demo:
        res = planted_demo(a.count, seed=a.seed)
        fams = res["families"]
        run.report.update({"demo": True, "count": a.count, "max_location_error": res["max_location_error"]})
        run.table("demo", ["family", "dim [1]", "planted [1]", "found [1]", "location_error [1]",
                           "oracle_error [1]", "multiplicities_ok", "schur_agrees", "ranks_ok",
                           "passed"],
                  [(r["family"], r["dim"], r["planted"], r["found"], r["location_error"],
                    r["oracle_error"], r["multiplicities_ok"], r["schur_agrees"], r["ranks_ok"],
                    r["passed"]) for r in fams])
        run.check("planted_families", res["passed"])
        return
    doc = _load_json(a.family)
    fam = AnalyticMatrixFamily.from_dict(doc)
    cls = classify(fam)
    run.report["classification"] = cls.as_record()
    rows = []
    pts = [p for p, _ in cls.points]
    for p, m in cls.points:
        pp = meromorphic_inverse_data(fam, p, others=pts)
        rows.append((p.real, p.imag, m, pp.pole_order, " ".join(str(r) for r in pp.ranks)))
    run.table("singular_set", ["re_tau [1]", "im_tau [1]", "multiplicity [1]", "pole_order [1]",
                               "principal_ranks [1]"], rows)
    run.check("schur_cross_check", all(cls.schur_agrees))


COMMANDS = {"symbol": cmd_symbol, "ads": cmd_ads, "spectrum": cmd_spectrum,
            "evolve": cmd_evolve, "perturb": cmd_perturb, "fredholm": cmd_fredholm}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input description file (JSON)")
    common.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV} or ./adslab-out)")
    common.add_argument("--seed", type=int, default=0, help="seed for all randomized sampling")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--tol", type=float, default=1.0, help="scale factor for all check tolerances")

    p = _Parser(prog="adslab", description="Dissipative exterior problems: symbols, decaying "
                                           "modes, spectra, evolution and Fredholm families.")
    p.add_argument("--version", action="version", version=f"adslab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("symbol", parents=[common], help="certify a symmetric hyperbolic symbol")
    s.add_argument("--samples", type=int, default=1000)

    s = sub.add_parser("ads", parents=[common], help="decaying modes of the dissipative sphere")
    s.add_argument("--epsilon", type=float)
    s.add_argument("--lmax", type=int)
    s.add_argument("--region", help="re0,re1,im0,im1")

    s = sub.add_parser("spectrum", parents=[common], help="eigenvalues of the discrete generator")
    s.add_argument("--target", help="re,im shift (default: leading sphere mode)")
    s.add_argument("--count", type=int, default=6)
    s.add_argument("--contour", help="re,im,radius for a spectral projector")
    s.add_argument("--kernel", action="store_true", help="also check discrete kernel witnesses")
    s.add_argument("--export-matrix", action="store_true", help="write the generator as COO text")

    s = sub.add_parser("evolve", parents=[common], help="time evolution with energy audit")
    s.add_argument("--init", choices=("eigenmode", "shell"), default="eigenmode")
    s.add_argument("--T", type=float, default=5.0)
    s.add_argument("--dt", type=float)
    s.add_argument("--shell", default="2,3", help="a,b support of shell data")
    s.add_argument("--probe", type=float, help="probe radius for the finite-speed check")

    s = sub.add_parser("perturb", parents=[common], help="continue an eigenvalue along a path")
    s.add_argument("--family", required=True, choices=("eps_scale", "eps_angle", "shape", "speed"))
    s.add_argument("--delta-max", type=float, required=True)
    s.add_argument("--steps", type=int, default=21)
    s.add_argument("--profile", help="harmonic profile 'l,m,c;l,m,c' for eps_angle and shape")
    s.add_argument("--seed-lambda", help="re,im starting eigenvalue (default: leading sphere mode)")
    s.add_argument("--rank", action=argparse.BooleanOptionalAction, default=True,
                   help="projector rank at every path point")
    s.add_argument("--contour-radius", type=float)

    s = sub.add_parser("fredholm", parents=[common], help="analytic matrix family lab")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--demo", action="store_true", help="planted-family classification demo")
    g.add_argument("--family", help="family file with a list of coefficient matrices")
    s.add_argument("--count", type=int, default=50)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    outdir = Path(args.output or os.environ.get(OUTPUT_ENV) or "adslab-out")
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("output", "threads")}
    run = Run(args.command, outdir, config)
    try:
        if args.threads < 1 or not args.tol > 0:
            raise ConfigurationError("need --threads >= 1 and --tol > 0")
        COMMANDS[args.command](args, run)
    except ConfigurationError as exc:
        print(f"adslab: configuration error: {exc}", file=sys.stderr)
        run.finish(f"configuration error: {exc}")
        return EXIT_CONFIG
    except (AdslabError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"adslab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return run.finish(f"{type(exc).__name__}: {exc}")
    code = run.finish()
    if code:
        failed = [k for k, v in run.checks.items() if not v]
        print(f"adslab: failed checks: {', '.join(failed)}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
