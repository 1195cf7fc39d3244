"""Population propagator expm(-tau A), density-matrix evolution, power symmetry.

Two independent routes to expm(-tau A) live here:

* :func:`propagator` -- eigen-decomposition of the symmetric form
  ``B A B^-1 = U diag(lam) U^T`` (the production path);
* :func:`taylor_propagator` -- scaled Taylor series with squaring, applied
  to the entrywise nonnegative shifted matrix ``c I - A``. It never touches
  the eigen-decomposition and is used as an oracle.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .generator import Generator, decay_rates, symmetric_eigh, symmetrize
from .model import ModelSpec, check_density, check_populations
from .reports import HeatfluxError, VerificationReport

NEGATIVE_CLAMP = 1e-12
COLUMN_SUM_TOL = 1e-8
DEFAULT_TAU_GRID = (0.1, 0.5, 1.0, 2.0, 5.0)


class PropagatorError(HeatfluxError):
    pass


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Column-stochastic P with P[n, m] = p(n, tau | m, 0)."""

    entries: np.ndarray
    tau: float

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]


def propagator(gen: Generator, spec: ModelSpec, tau: float) -> StochasticMatrix:
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    D = gen.a_matrix.shape[0]
    if tau == 0:
        return StochasticMatrix(np.eye(D), 0.0)
    form = symmetrize(gen, spec)
    lam, U = symmetric_eigh(form)
    # round-off can push the zero mode slightly negative
    lam = np.maximum(lam, 0.0)
    S = (U * np.exp(-tau * lam)) @ U.T
    S = (S + S.T) / 2
    b = form.weights
    P = S * b[None, :] / b[:, None]
    return StochasticMatrix(_clean_stochastic(P), float(tau))


def _clean_stochastic(P: np.ndarray) -> np.ndarray:
    if P.min() < -NEGATIVE_CLAMP:
        raise PropagatorError(f"propagator not stochastic: entry {P.min():.3e} < -{NEGATIVE_CLAMP}")
    dev = np.max(np.abs(P.sum(axis=0) - 1))
    if dev > COLUMN_SUM_TOL:
        raise PropagatorError(f"propagator not stochastic: column-sum deviation {dev:.3e}")
    if P.min() < 0:
        P = np.where(P < 0, 0.0, P)
        P = P / P.sum(axis=0, keepdims=True)
    return P


def taylor_propagator(a_matrix: np.ndarray, tau: float, terms: int = 40) -> np.ndarray:
    """expm(-tau A) by scaling-and-squaring a truncated Taylor series.

    With c = max diagonal of A, ``-tau A = -tau c I + tau (c I - A)`` and the
    second matrix is entrywise nonnegative, so every series term and every
    squaring step is a sum of nonnegative numbers and small entries keep
    their relative accuracy.
    """
    A = np.asarray(a_matrix, dtype=float)
    D = A.shape[0]
    if tau == 0:
        return np.eye(D)
    c = float(np.max(np.diag(A), initial=0.0))
    X = tau * (c * np.eye(D) - A)
    X = np.where(X < 0, 0.0, X)  # off-diagonal -A >= 0; guards -0.0 and round-off
    norm = float(np.abs(X).sum(axis=0).max())
    squarings = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    scale = 2.0 ** squarings
    Y = X / scale
    term = np.eye(D)
    total = np.eye(D)
    for k in range(1, terms + 1):
        term = term @ Y / k
        total = total + term
    total *= math.exp(-tau * c / scale)
    for _ in range(squarings):
        total = total @ total
    return total


def propagator_grid(gen: Generator, spec: ModelSpec, taus, workers: int = 1) -> list[StochasticMatrix]:
    """Propagators for a tau grid, returned in grid order."""
    taus = list(taus)
    if workers <= 1:
        return [propagator(gen, spec, t) for t in taus]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: propagator(gen, spec, t), taus))


def scaled_tau_grid(gen: Generator, grid=DEFAULT_TAU_GRID) -> list[float]:
    """Grid given in units of 1/||A||_inf converted to absolute times."""
    norm = gen.norm
    if norm == 0:
        return [float(t) for t in grid]
    return [float(t) / norm for t in grid]


def evolve_populations(p: StochasticMatrix, v0) -> np.ndarray:
    v0 = np.asarray(v0, dtype=float)
    if v0.shape != (p.dimension,):
        raise ValueError(f"dimension mismatch: populations {v0.shape} vs propagator {p.entries.shape}")
    check_populations(v0, p.dimension, tol=1e-10)
    if p.tau == 0:
        return v0.copy()
    v = p.entries @ v0
    return v


def evolve_density(rho0, spec: ModelSpec, gen: Generator, tau: float,
                   p: StochasticMatrix | None = None) -> np.ndarray:
    """Exact Lindblad evolution for this model class.

    Populations follow the propagator; each coherence evolves on its own as
    ``rho_mn(tau) = exp(-(i omega_mn + gamma_mn) tau) rho_mn(0)``.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    rho0 = check_density(rho0, spec.dimension)
    if tau == 0:
        return rho0.copy()
    if p is None:
        p = propagator(gen, spec, tau)
    table = decay_rates(gen.rate_matrix, spec)
    factor = np.exp(-(1j * table.omega + table.gamma) * tau)
    rho = factor * rho0
    np.fill_diagonal(rho, p.entries @ np.real(np.diag(rho0)))
    return rho


def power_symmetry_check(gen: Generator, spec: ModelSpec, s_max: int = 10,
                         tau: float | None = None, tol: float = 1e-10,
                         db_tol: float = 1e-9) -> VerificationReport:
    """Weighted matrix powers exp(beta_B (E_n - E_m)/2) (A^s)_nm must be symmetric.

    When ``tau`` is given, also checks the propagator-level ratio
    P_nm / P_mn = exp(-beta_B (E_n - E_m)) on the Taylor route.
    """
    if s_max < 1:
        raise ValueError("s_max must be >= 1")
    report = VerificationReport("powersym", tolerances={"power_asymmetry": tol})
    E = spec.bare_energies
    half = np.exp(spec.beta_B * (E[:, None] - E[None, :]) / 2)
    A = gen.a_matrix
    power = np.eye(len(E))
    for s in range(1, s_max + 1):
        power = power @ A
        M = power * half
        scale = np.max(np.abs(M))
        asym = float(np.max(np.abs(M - M.T)) / scale) if scale > 0 else 0.0
        report.add(f"s={s}", asym, 0.0, residual=asym, tol=tol)
    if tau is not None:
        P = taylor_propagator(A, tau)
        report.tolerances["taylor_detailed_balance"] = db_tol
        for n in range(len(E)):
            for m in range(len(E)):
                if m == n:
                    continue
                if P[n, m] <= 1e-300 or P[m, n] <= 1e-300:
                    report.skipped.append(f"taylor ({n + 1},{m + 1}) underflow")
                    continue
                r = math.log(P[n, m]) - math.log(P[m, n]) + spec.beta_B * (E[n] - E[m])
                report.add(f"taylor tau={tau:g} ({n + 1},{m + 1})", P[n, m] / P[m, n],
                           math.exp(-spec.beta_B * (E[n] - E[m])), residual=r, tol=db_tol)
    return report


def path_agreement(p: StochasticMatrix, gen: Generator, tol: float = 1e-9) -> VerificationReport:
    """Eigen route vs Taylor route: max |P_eig - P_taylor| / max |P_taylor|."""
    report = VerificationReport("path agreement", tolerances={"relative": tol})
    T = taylor_propagator(gen.a_matrix, p.tau)
    dev = float(np.max(np.abs(p.entries - T)) / np.max(np.abs(T)))
    report.add(f"tau={p.tau:g}", dev, 0.0, residual=dev, tol=tol)
    return report


def stochastic_report(p: StochasticMatrix, spec: ModelSpec, gen: Generator,
                      tol: float = 1e-10, semigroup_tol: float = 1e-9) -> VerificationReport:
    """Column sums, nonnegativity, bath-Gibbs stationarity and semigroup law."""
    from .model import gibbs_populations

    report = VerificationReport("stochastic",
                                tolerances={"column_sum": tol, "stationary": tol, "semigroup": semigroup_tol})
    P = p.entries
    dev = float(np.max(np.abs(P.sum(axis=0) - 1)))
    report.add("column sums", dev, 0.0, residual=dev, tol=tol)
    report.add("nonnegative", P.min(), residual=min(P.min(), 0.0), ok=P.min() >= -NEGATIVE_CLAMP)
    g = gibbs_populations(spec.bare_energies, spec.beta_B)
    sdev = float(np.max(np.abs(P @ g - g)))
    report.add("Gibbs(beta_B) fixed", sdev, 0.0, residual=sdev, tol=tol)
    if p.tau > 0:
        half = propagator(gen, spec, p.tau / 2).entries
        third = propagator(gen, spec, p.tau / 3).entries
        two_thirds = propagator(gen, spec, 2 * p.tau / 3).entries
        d1 = float(np.max(np.abs(half @ half - P)))
        d2 = float(np.max(np.abs(third @ two_thirds - P)))
        report.add("semigroup tau/2+tau/2", d1, 0.0, residual=d1, tol=semigroup_tol)
        report.add("semigroup tau/3+2tau/3", d2, 0.0, residual=d2, tol=semigroup_tol)
    return report
