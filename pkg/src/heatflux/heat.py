"""Two-point heat statistics and the fluctuation-relation checks.

Sign convention throughout: Q = E_n - E_m for a transition m -> n is the
heat ABSORBED by the system from the bath, measured with bare energies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelSpec, gibbs_populations
from .propagator import StochasticMatrix
from .reports import HeatfluxError, VerificationReport

SIGN_CONVENTION = "Q = E0[final] - E0[initial] (heat absorbed by the system from the bath)"
UNDERFLOW = 1e-300


class AmbiguousBinning(HeatfluxError):
    pass


class InapplicableRegime(HeatfluxError):
    pass


@dataclass(frozen=True, eq=False)
class HeatSupport:
    values: np.ndarray
    pairs: list[list[tuple[int, int]]]
    tol: float
    # bin_index[m, n] is the support index of the gap E_n - E_m
    bin_index: np.ndarray

    def index_of(self, q: float) -> int:
        i = int(np.argmin(np.abs(self.values - q)))
        if abs(self.values[i] - q) > self.tol:
            raise KeyError(q)
        return i


@dataclass(eq=False)
class HeatDistribution:
    support: HeatSupport
    mass: np.ndarray
    tau: float
    direction: str = "forward"
    stderr: np.ndarray | None = None
    n_samples: int | None = None

    def at(self, q: float) -> float:
        return float(self.mass[self.support.index_of(q)])


def heat_support(spec: ModelSpec, tol: float | None = None) -> HeatSupport:
    """Bin all D^2 gaps E_n - E_m into tol-separated heat values.

    Nonnegative gaps are clustered (consecutive sorted gaps closer than tol
    join a bin) and mirrored, so the support is exactly symmetric about 0.
    """
    E = np.asarray(spec.bare_energies, dtype=float)
    D = len(E)
    if tol is None:
        tol = 1e-9 * float(E.max() - E.min())
    if not tol > 0:
        raise ValueError("tol must be positive")

    up = sorted(((E[n] - E[m], m, n) for m in range(D) for n in range(D) if n > m),
                key=lambda t: t[0])
    clusters: list[list[tuple[float, int, int]]] = []
    for gap in up:
        if clusters and gap[0] - clusters[-1][-1][0] <= tol:
            clusters[-1].append(gap)
        else:
            clusters.append([gap])
    centers = [float(np.mean([g[0] for g in c])) for c in clusters]
    for lo, hi in zip(centers, centers[1:]):
        if hi - lo < 10 * tol:
            raise AmbiguousBinning(f"ambiguous binning: heat values {lo!r} and {hi!r} are closer "
                                   f"than 10*tol = {10 * tol!r}")
    if centers and centers[0] < 10 * tol:
        raise AmbiguousBinning(f"ambiguous binning: gap {centers[0]!r} is within 10*tol of 0")

    k = len(clusters)
    values = np.array([-c for c in reversed(centers)] + [0.0] + centers)
    pairs: list[list[tuple[int, int]]] = [[] for _ in range(2 * k + 1)]
    bin_index = np.empty((D, D), dtype=int)
    for m in range(D):
        pairs[k].append((m, m))
        bin_index[m, m] = k
    for j, cluster in enumerate(clusters):
        for _, m, n in cluster:
            pairs[k + 1 + j].append((m, n))
            bin_index[m, n] = k + 1 + j
            pairs[k - 1 - j].append((n, m))
            bin_index[n, m] = k - 1 - j
    return HeatSupport(values, pairs, float(tol), bin_index)


def _masses(joint: np.ndarray, support: HeatSupport) -> np.ndarray:
    mass = np.zeros(len(support.values))
    np.add.at(mass, support.bin_index.ravel(), joint.ravel())
    return mass


def forward_joint(spec: ModelSpec, p: StochasticMatrix) -> np.ndarray:
    """joint[m, n] = p_m(beta_S) * P[n, m]: start in m, end in n."""
    pS = gibbs_populations(spec.bare_energies, spec.beta_S)
    return pS[:, None] * p.entries.T


def forward_distribution(spec: ModelSpec, p: StochasticMatrix, support: HeatSupport) -> HeatDistribution:
    """P(+Q, tau): mass of absorbing heat Q."""
    return HeatDistribution(support, _masses(forward_joint(spec, p), support), p.tau, "forward")


def reverse_distribution(spec: ModelSpec, p: StochasticMatrix, support: HeatSupport) -> HeatDistribution:
    """P(-Q, tau) indexed by Q: sum over pairs (m, n) in bin Q of p_n P[m, n]."""
    joint = forward_joint(spec, p)
    # pair (m, n) in bin Q contributes joint[n, m]
    return HeatDistribution(support, _masses(joint.T, support), p.tau, "reverse")


def fr_check(spec: ModelSpec, p: StochasticMatrix, support: HeatSupport,
             tol: float = 1e-9) -> VerificationReport:
    """Pairwise and aggregated log-residuals of the heat fluctuation relation."""
    report = VerificationReport("fr", tolerances={"log_residual": tol, "underflow": UNDERFLOW})
    E = spec.bare_energies
    dbeta = spec.delta_beta
    joint = forward_joint(spec, p)
    D = len(E)
    for m in range(D):
        for n in range(D):
            if m == n:
                continue
            a, b = joint[m, n], joint[n, m]
            if a <= UNDERFLOW or b <= UNDERFLOW:
                report.skipped.append(f"pair ({m + 1},{n + 1}) zero/underflowed mass")
                continue
            Q = E[n] - E[m]
            r = math.log(a) - math.log(b) - Q * dbeta
            report.add(f"pair ({m + 1},{n + 1}) Q={Q:.6g}", math.log(a) - math.log(b),
                       Q * dbeta, residual=r, tol=tol)
    mass = _masses(joint, support)
    k = len(support.values) // 2
    for j in range(k + 1, len(support.values)):
        Q = support.values[j]
        a, b = mass[j], mass[2 * k - j]
        if a <= UNDERFLOW or b <= UNDERFLOW:
            report.skipped.append(f"Q={Q:.6g} zero/underflowed mass")
            continue
        r = math.log(a) - math.log(b) - Q * dbeta
        report.add(f"aggregated Q={Q:.6g}", math.log(a) - math.log(b), Q * dbeta, residual=r, tol=tol)
    return report


def detailed_balance_check(p: StochasticMatrix | np.ndarray, spec: ModelSpec,
                           tol: float = 1e-9) -> VerificationReport:
    """log P_nm - log P_mn + beta_B (E_n - E_m) for every m != n."""
    P = p.entries if isinstance(p, StochasticMatrix) else np.asarray(p)
    E = spec.bare_energies
    report = VerificationReport("db", tolerances={"log_residual": tol, "underflow": UNDERFLOW})
    D = len(E)
    for m in range(D):
        for n in range(D):
            if m == n:
                continue
            if P[n, m] <= UNDERFLOW or P[m, n] <= UNDERFLOW:
                report.skipped.append(f"({n + 1},{m + 1}) zero/underflowed entry")
                continue
            r = math.log(P[n, m]) - math.log(P[m, n]) + spec.beta_B * (E[n] - E[m])
            report.add(f"({n + 1},{m + 1})", math.log(P[n, m]) - math.log(P[m, n]),
                       -spec.beta_B * (E[n] - E[m]), residual=r, tol=tol)
    return report


def tail_bound_check(forward: HeatDistribution, spec: ModelSpec, q_grid=None,
                     slack: float = 1e-12) -> VerificationReport:
    """Cumulative mass up to q <= 0 against exp(q * delta_beta)."""
    dbeta = spec.delta_beta
    if dbeta < 0:
        raise InapplicableRegime("inapplicable regime: requires beta_S >= beta_B")
    values = forward.support.values
    if q_grid is None:
        q_grid = values[values <= 0]
    report = VerificationReport("tail", tolerances={"slack": slack})
    cumulative = np.cumsum(forward.mass)
    for q in q_grid:
        if q > 0:
            raise ValueError("tail bound grid must be <= 0")
        idx = np.searchsorted(values, q + forward.support.tol, side="right")
        cum = float(cumulative[idx - 1]) if idx > 0 else 0.0
        bound = math.exp(q * dbeta)
        margin = bound - cum
        report.add(f"q={q:.6g}", cum, bound, residual=margin, ok=margin >= -slack)
    return report


@dataclass
class MeanHeat:
    mean: float
    energy_change: float
    residual: float
    sign_ok: bool
    report: VerificationReport = field(repr=False)


def mean_heat(forward: HeatDistribution, spec: ModelSpec | None = None,
              p: StochasticMatrix | None = None, tol: float = 1e-12) -> MeanHeat:
    """<Q> = sum Q mass(Q), checked against the change in mean bare energy.

    The energy change is computed by evolving the beta_S populations with
    ``p`` directly, not through the heat distribution.
    """
    from .propagator import evolve_populations

    mean = float(np.dot(forward.support.values, forward.mass))
    report = VerificationReport("firstlaw", tolerances={"residual": tol, "sign": tol})
    if spec is None or p is None:
        return MeanHeat(mean, math.nan, math.nan, True, report)
    E = spec.bare_energies
    p0 = gibbs_populations(E, spec.beta_S)
    vt = evolve_populations(p, p0)
    change = float(E @ vt - E @ p0)
    residual = mean - change
    report.add("<Q> vs energy change", mean, change, residual=residual, tol=tol)
    sign_ok = True
    if spec.delta_beta >= 0:
        sign_ok = mean >= -tol
        report.add("<Q> >= 0 when delta_beta >= 0", mean, 0.0, residual=min(mean, 0.0), ok=sign_ok)
    return MeanHeat(mean, change, residual, sign_ok, report)
