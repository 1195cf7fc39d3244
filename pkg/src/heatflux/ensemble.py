"""Random model ensembles and the combined check runner used by ``verify``/``ensemble``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .generator import generator_for, spectral_report
from .heat import (detailed_balance_check, forward_distribution, fr_check, heat_support,
                   mean_heat, tail_bound_check)
from .model import ModelSpec, make_model, random_coupling
from .propagator import (DEFAULT_TAU_GRID, path_agreement, power_symmetry_check, propagator,
                         scaled_tau_grid, stochastic_report, taylor_propagator)
from .reports import VerificationReport

ALL_CHECKS = ("fr", "db", "tail", "spectral", "powersym", "firstlaw", "stochastic")


def random_model(dim: int, seed: int, beta_range=(0.2, 3.0), coupling_range=(0.1, 1.0),
                 gap_range=(0.1, 1.0), cold_system: bool = False) -> ModelSpec:
    """Reproducible random model: gaps, temperatures and couplings drawn from ``seed``.

    With ``cold_system`` the two temperatures are ordered so beta_S >= beta_B.
    """
    rng = np.random.default_rng([seed, dim])
    energies = np.concatenate([[0.0], np.cumsum(rng.uniform(*gap_range, size=dim - 1))])
    beta_S, beta_B = rng.uniform(*beta_range, size=2)
    if cold_system and beta_S < beta_B:
        beta_S, beta_B = beta_B, beta_S
    C = random_coupling(dim, int(rng.integers(2**63)), *coupling_range)
    return make_model(energies, beta_S, beta_B, C)


@dataclass
class CheckRun:
    spec: ModelSpec
    taus: list[float]
    reports: list[VerificationReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


def run_checks(spec: ModelSpec, taus=None, checks=ALL_CHECKS, tol: float = 1e-9,
               s_max: int = 10, taylor: bool = True) -> CheckRun:
    """Run the requested checks on every tau; one report per (check, tau).

    ``taus`` defaults to the standard grid in units of 1/||A||_inf. The
    detailed-balance check runs on both propagator routes when ``taylor``.
    """
    gen = generator_for(spec)
    if taus is None:
        taus = scaled_tau_grid(gen, DEFAULT_TAU_GRID)
    run = CheckRun(spec, list(taus))
    support = heat_support(spec) if {"fr", "tail", "firstlaw"} & set(checks) else None
    if "spectral" in checks:
        run.reports.append(spectral_report(gen, spec))
    if "powersym" in checks:
        rep = power_symmetry_check(gen, spec, s_max=s_max)
        run.reports.append(rep)
    for tau in taus:
        P = propagator(gen, spec, tau)
        tag = f" tau={tau:.6g}"
        if "stochastic" in checks:
            run.reports.append(_tagged(stochastic_report(P, spec, gen), tag))
        if "fr" in checks:
            run.reports.append(_tagged(fr_check(spec, P, support, tol), tag))
        if "db" in checks:
            run.reports.append(_tagged(detailed_balance_check(P, spec, tol), tag))
            if taylor and tau > 0:
                T = taylor_propagator(gen.a_matrix, tau)
                rep = detailed_balance_check(T, spec, tol)
                rep.name = "db taylor"
                run.reports.append(_tagged(rep, tag))
                run.reports.append(_tagged(path_agreement(P, gen, tol), tag))
        if "tail" in checks or "firstlaw" in checks:
            fwd = forward_distribution(spec, P, support)
            if "tail" in checks:
                run.reports.append(_tagged(tail_bound_check(fwd, spec), tag))
            if "firstlaw" in checks:
                run.reports.append(_tagged(mean_heat(fwd, spec, P).report, tag))
    return run


def _tagged(report: VerificationReport, tag: str) -> VerificationReport:
    report.name += tag
    return report
