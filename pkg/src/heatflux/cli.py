"""Command-line front end.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error.
Data goes to files under ``--outdir``; stdout carries a short summary.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import ALL_CHECKS, random_model, run_checks
from .generator import decay_rates, generator_for
from .heat import (SIGN_CONVENTION, InapplicableRegime, forward_distribution, heat_support,
                   reverse_distribution)
from .io import Emitter
from .model import SCHEMA_EXCERPT, ModelError, check_density, gibbs_populations, load_model, validate_model
from .propagator import evolve_density, evolve_populations, propagator, scaled_tau_grid
from .reports import HeatfluxError
from .trajectory import default_workers, empirical_conditional, empirical_heat_distribution, oracle_compare

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
VERIFY_CHECKS = ("fr", "db", "tail", "spectral", "powersym", "firstlaw")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heatflux", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"heatflux {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(p):
        p.add_argument("--config", required=True, type=Path, help="model config (JSON)")
        p.add_argument("--outdir", type=Path, default=Path("."), help="directory for output files")
        return p

    with_config(sub.add_parser("validate", help="check model invariants"))
    with_config(sub.add_parser("dump", help="write A, R, gamma, omega as CSV"))

    p = with_config(sub.add_parser("evolve", help="evolve populations or a density matrix"))
    p.add_argument("--tau", type=_nonneg_float, required=True)
    p.add_argument("--initial", default="thermal",
                   help="'thermal' (Gibbs at beta_S) or a JSON file with 'populations' or 'density'")

    p = with_config(sub.add_parser("heatdist", help="exact heat distribution at one tau"))
    p.add_argument("--tau", type=_nonneg_float, required=True)
    p.add_argument("--heat-tol", type=float, default=None, help="heat binning tolerance")
    p.add_argument("--tol", type=float, default=1e-9)

    p = with_config(sub.add_parser("verify", help="run checks and write a JSON report"))
    p.add_argument("--checks", default=None,
                   help=f"comma list from {','.join(VERIFY_CHECKS)} (default: all applicable)")
    p.add_argument("--tau-grid", default=None, help="comma list of times (default 0.1,0.5,1,2,5 scaled)")
    p.add_argument("--scaled", action="store_true", help="interpret --tau-grid in units of 1/||A||_inf")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--s-max", type=int, default=10)

    p = with_config(sub.add_parser("sample", help="Monte Carlo trajectories"))
    p.add_argument("--trajectories", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tau", type=_nonneg_float, required=True)
    p.add_argument("--compare", action="store_true", help="z-score report against exact values")
    p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("ensemble", help="randomized property sweep")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seeds", type=int, required=True)
    p.add_argument("--first-seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--outdir", type=Path, default=Path("."))
    return parser


def _nonneg_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value >= 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be a finite nonnegative number: {text!r}")
    return value


def _float_list(text, flag):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None


def _load(args):
    try:
        text = args.config.read_text()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {args.config}: {exc.strerror}") from None
    return load_model(text), json.loads(text)


def _identity(args, config) -> dict:
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
             if k not in ("outdir", "config", "threads")}
    return {"config": config, "flags": flags, "tool_version": __version__}


def cmd_validate(args):
    spec, config = _load(args)
    report = validate_model(spec)
    out = Emitter(args.outdir, _identity(args, config))
    out.json("validation.json", {"schema_version": 1, "report": report.to_dict()})
    out.manifest()
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_dump(args):
    spec, config = _load(args)
    gen = generator_for(spec)
    table = decay_rates(gen.rate_matrix, spec)
    D = spec.dimension
    rows = [(m + 1, n + 1, gen.a_matrix[m, n], gen.rate_matrix.rates[m, n], table.gamma[m, n],
             table.omega[m, n]) for m in range(D) for n in range(D)]
    out = Emitter(args.outdir, _identity(args, config))
    out.csv("generator.csv", ["m", "n", "A", "R", "gamma", "omega"], rows,
            {"beta_B": spec.beta_B, "convention": "R[m,n] is the rate into m from n; A = diag(escape) - R"})
    out.manifest()
    print(f"wrote generator.csv ({D}x{D}), ||A||_inf = {gen.norm:.6g}")
    return EXIT_OK


def cmd_evolve(args):
    spec, config = _load(args)
    gen = generator_for(spec)
    P = propagator(gen, spec, args.tau)
    out = Emitter(args.outdir, _identity(args, config))
    header = {"tau": args.tau, "beta_S": spec.beta_S, "beta_B": spec.beta_B, "initial": args.initial}
    E = spec.bare_energies
    if args.initial == "thermal":
        v0 = gibbs_populations(E, spec.beta_S)
        kind = "populations"
    else:
        try:
            data = json.loads(Path(args.initial).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"--initial: cannot load {args.initial}: {exc}") from None
        if "populations" in data:
            v0, kind = np.asarray(data["populations"], dtype=float), "populations"
        elif "density" in data:
            d = data["density"]
            rho0 = np.asarray(d["real"], dtype=float) + 1j * np.asarray(d.get("imag", 0.0), dtype=float)
            rho0 = check_density(rho0, spec.dimension)
            kind = "density"
        else:
            raise UsageError("--initial: JSON must contain 'populations' or 'density'")
    if kind == "populations":
        vt = evolve_populations(P, v0)
        rows = [(m + 1, E[m], v0[m], vt[m]) for m in range(len(E))]
        out.csv("evolve.csv", ["m", "energy", "p_initial", "p_tau"], rows, header)
        summary = f"mean energy {E @ v0:.6g} -> {E @ vt:.6g}"
    else:
        rho = evolve_density(rho0, spec, gen, args.tau, P)
        D = spec.dimension
        rows = [(m + 1, n + 1, rho[m, n].real, rho[m, n].imag) for m in range(D) for n in range(D)]
        out.csv("evolve.csv", ["m", "n", "re", "im"], rows, header)
        summary = f"trace {np.trace(rho).real:.12g}"
    out.manifest()
    print(f"wrote evolve.csv ({kind}); {summary}")
    return EXIT_OK


def cmd_heatdist(args):
    spec, config = _load(args)
    gen = generator_for(spec)
    P = propagator(gen, spec, args.tau)
    support = heat_support(spec, args.heat_tol)
    fwd = forward_distribution(spec, P, support)
    rev = reverse_distribution(spec, P, support)
    dbeta = spec.delta_beta
    rows = []
    worst = 0.0
    for q, mf, mr in zip(support.values, fwd.mass, rev.mass):
        if mf == 0 and mr == 0:
            continue
        expected = q * dbeta
        if mf > 1e-300 and mr > 1e-300:
            log_ratio = math.log(mf) - math.log(mr)
            residual = log_ratio - expected
            worst = max(worst, abs(residual))
        else:
            log_ratio = residual = float("nan")
        rows.append((q, mf, mr, log_ratio, expected, residual))
    out = Emitter(args.outdir, _identity(args, config))
    out.csv("heatdist.csv",
            ["Q", "mass_forward", "mass_reverse", "log_ratio", "expected_log_ratio", "residual"], rows,
            {"tau": args.tau, "beta_S": spec.beta_S, "beta_B": spec.beta_B, "tol": args.tol,
             "heat_tol": support.tol, "sign_convention": SIGN_CONVENTION})
    out.manifest()
    print(f"wrote heatdist.csv ({len(rows)} rows); max |log-ratio residual| {worst:.3e}")
    return EXIT_OK if worst < args.tol else EXIT_FAIL


def cmd_verify(args):
    spec, config = _load(args)
    if args.checks is None:
        checks = [c for c in VERIFY_CHECKS if c != "tail" or spec.delta_beta >= 0]
    else:
        checks = [c.strip() for c in args.checks.split(",") if c.strip()]
        unknown = sorted(set(checks) - set(VERIFY_CHECKS))
        if unknown:
            raise UsageError(f"--checks: unknown check(s) {','.join(unknown)}; "
                             f"choose from {','.join(VERIFY_CHECKS)}")
    if "tail" in checks and spec.delta_beta < 0:
        raise InapplicableRegime("inapplicable regime: requires beta_S >= beta_B")
    gen = generator_for(spec)
    if args.tau_grid is None:
        taus = scaled_tau_grid(gen)
    else:
        taus = _float_list(args.tau_grid, "--tau-grid")
        if any(t < 0 for t in taus):
            raise UsageError("--tau-grid: times must be nonnegative")
        if args.scaled:
            taus = scaled_tau_grid(gen, taus)
    run = run_checks(spec, taus, checks, tol=args.tol, s_max=args.s_max)
    out = Emitter(args.outdir, _identity(args, config))
    reports = [r.to_dict() for r in run.reports]
    worst = _worst(run.reports)
    out.json("verify.json", {"schema_version": 1, "passed": run.passed, "checks": checks,
                             "taus": taus, "tol": args.tol, "sign_convention": SIGN_CONVENTION,
                             "worst": worst, "reports": reports})
    out.manifest()
    for r in run.reports:
        if not r.passed:
            print(r.summary())
    status = "PASS" if run.passed else "FAIL"
    print(f"{status}: {len(run.reports)} reports over {len(taus)} tau values")
    return EXIT_OK if run.passed else EXIT_FAIL


def cmd_sample(args):
    spec, config = _load(args)
    if args.trajectories < 1000:
        raise UsageError("--trajectories: must be >= 1000")
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed: must be an unsigned 64-bit integer")
    workers = args.threads if args.threads is not None else default_workers()
    gen = generator_for(spec)
    support = heat_support(spec)
    est = empirical_conditional(gen.rate_matrix, args.tau, args.trajectories, args.seed, workers)
    heat = empirical_heat_distribution(spec, gen.rate_matrix, args.tau, args.trajectories, args.seed,
                                       support, workers)
    out = Emitter(args.outdir, _identity(args, config))
    header = {"tau": args.tau, "trajectories": args.trajectories, "seed": args.seed,
              "beta_S": spec.beta_S, "beta_B": spec.beta_B}
    D = spec.dimension
    rows = [(n + 1, m + 1, int(est.batch.counts[n, m]), est.probs[n, m], est.stderr[n, m])
            for m in range(D) for n in range(D)]
    out.csv("sample_conditional.csv", ["n", "m", "count", "p_empirical", "stderr"], rows, header)
    rows = [(q, mass, err) for q, mass, err in zip(support.values, heat.mass, heat.stderr)]
    out.csv("sample_heat.csv", ["Q", "mass_empirical", "stderr"], rows,
            dict(header, sign_convention=SIGN_CONVENTION))
    code = EXIT_OK
    if args.compare:
        P = propagator(gen, spec, args.tau)
        cond = oracle_compare(P, est)
        cond.name = "oracle conditional"
        hrep = oracle_compare(forward_distribution(spec, P, support), heat)
        hrep.name = "oracle heat"
        passed = cond.passed and hrep.passed
        out.json("sample_compare.json", {"schema_version": 1, "passed": passed,
                                         "reports": [cond.to_dict(), hrep.to_dict()]})
        print(cond.summary())
        print(hrep.summary())
        code = EXIT_OK if passed else EXIT_FAIL
    out.manifest()
    print(f"sampled {args.trajectories} trajectories per start level and {args.trajectories} heat paths")
    return code


def cmd_ensemble(args):
    if args.dim < 2 or args.seeds < 1:
        raise UsageError("--dim must be >= 2 and --seeds >= 1")
    results = []
    passed = True
    all_reports = []
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        spec = random_model(args.dim, seed)
        checks = [c for c in ALL_CHECKS if c != "tail" or spec.delta_beta >= 0]
        run = run_checks(spec, None, checks, tol=args.tol)
        all_reports.extend(run.reports)
        passed &= run.passed
        results.append({"seed": seed, "passed": run.passed, "beta_S": spec.beta_S,
                        "beta_B": spec.beta_B, "failed": [r.name for r in run.reports if not r.passed]})
    out = Emitter(args.outdir, {"flags": {k: (str(v) if isinstance(v, Path) else v)
                                          for k, v in sorted(vars(args).items()) if k != "outdir"},
                                "tool_version": __version__})
    out.json("ensemble.json", {"schema_version": 1, "passed": passed, "dim": args.dim,
                               "worst": _worst(all_reports), "models": results})
    out.manifest()
    n_ok = sum(r["passed"] for r in results)
    print(f"{'PASS' if passed else 'FAIL'}: {n_ok}/{len(results)} models passed all checks")
    return EXIT_OK if passed else EXIT_FAIL


def _worst(reports):
    failing = [r for r in reports if not r.passed]
    pool = failing or reports
    best = None
    for r in pool:
        w = r.worst()
        if w is None:
            continue
        key = abs(w.residual) / w.tolerance if w.tolerance else abs(w.residual)
        if best is None or key > best[0]:
            best = (key, r.name, w)
    if best is None:
        return None
    return {"report": best[1], **best[2].to_dict()}


COMMANDS = {
    "validate": cmd_validate,
    "dump": cmd_dump,
    "evolve": cmd_evolve,
    "heatdist": cmd_heatdist,
    "verify": cmd_verify,
    "sample": cmd_sample,
    "ensemble": cmd_ensemble,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ModelError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        print(f"expected schema:\n{SCHEMA_EXCERPT}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, InapplicableRegime) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HeatfluxError as exc:
        print(f"check failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
