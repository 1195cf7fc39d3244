"""Jump rates, the population generator A, dephasing rates and spectral checks.

Conventions: ``R[m, n]`` is the rate into level m from level n, and
``A[m, n] = -R[m, n]`` off the diagonal with ``A[m, m]`` the total escape
rate out of m, so populations evolve as ``v(t) = expm(-t A) v(0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelSpec, OVERFLOW_LIMIT, gibbs_populations
from .reports import HeatfluxError, VerificationReport


@dataclass(frozen=True, eq=False)
class RateMatrix:
    rates: np.ndarray

    @property
    def escape(self) -> np.ndarray:
        """Total escape rate out of each level (column sums)."""
        return self.rates.sum(axis=0)


@dataclass(frozen=True, eq=False)
class Generator:
    a_matrix: np.ndarray
    rate_matrix: RateMatrix

    @property
    def norm(self) -> float:
        """Infinity norm of A, the natural rate scale of the model."""
        return float(np.abs(self.a_matrix).sum(axis=1).max())


@dataclass(frozen=True, eq=False)
class DephasingTable:
    gamma: np.ndarray
    omega: np.ndarray


@dataclass(frozen=True, eq=False)
class SymmetricForm:
    sym: np.ndarray
    weights: np.ndarray


@dataclass
class SpectralReport(VerificationReport):
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stationary: np.ndarray = field(default_factory=lambda: np.zeros(0))


def jump_rates(spec: ModelSpec) -> RateMatrix:
    """R[m, n] = C[m, n] * exp(-beta_B (E_m - E_n) / 2) for m != n."""
    E = spec.bare_energies
    C = np.array(spec.coupling, dtype=float)
    np.fill_diagonal(C, 0.0)
    R = C * np.exp(-spec.beta_B * (E[:, None] - E[None, :]) / 2)
    np.fill_diagonal(R, 0.0)
    return RateMatrix(R)


def build_generator(rates: RateMatrix) -> Generator:
    R = rates.rates
    A = -R.copy()
    np.fill_diagonal(A, R.sum(axis=0))
    return Generator(A, rates)


def decay_rates(rates: RateMatrix, spec: ModelSpec) -> DephasingTable:
    """Coherence decay gamma[m, n] = (escape_m + escape_n)/2 and Bohr frequencies.

    omega uses the effective energies; the diagonal of gamma is zero by
    convention.
    """
    esc = rates.escape
    gamma = (esc[:, None] + esc[None, :]) / 2
    np.fill_diagonal(gamma, 0.0)
    E = spec.energies_eff
    omega = E[:, None] - E[None, :]
    return DephasingTable(gamma, omega)


def symmetrize(gen: Generator, spec: ModelSpec) -> SymmetricForm:
    """Similarity transform B A B^-1 with B = diag(exp(beta_B E / 2)).

    Detailed balance makes the result symmetric, with off-diagonal entries
    equal to -C. Energies are assumed shifted to start at zero.
    """
    E = spec.bare_energies
    exponent = spec.beta_B * (E - E.min()) / 2
    if exponent.max(initial=0.0) > OVERFLOW_LIMIT / 2:
        raise HeatfluxError("overflow guard violated: beta_B * (E_max - E_min) exceeds "
                            f"{OVERFLOW_LIMIT}")
    b = np.exp(exponent)
    sym = b[:, None] * gen.a_matrix / b[None, :]
    return SymmetricForm(sym, b)


def symmetric_eigh(form: SymmetricForm) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of the symmetric form, eigenvalues ascending."""
    S = (form.sym + form.sym.T) / 2
    return np.linalg.eigh(S)


def stationary_state(form: SymmetricForm, evals=None, evecs=None) -> np.ndarray:
    """lambda = 0 eigenvector mapped back through B^-1, sign-fixed, summing to 1."""
    if evecs is None:
        evals, evecs = symmetric_eigh(form)
    u = evecs[:, 0]
    v = u / form.weights
    if v.sum() < 0:
        v = -v
    return v / v.sum()


def spectral_report(gen: Generator, spec: ModelSpec, tol: float = 1e-10) -> SpectralReport:
    form = symmetrize(gen, spec)
    evals, evecs = symmetric_eigh(form)
    scale = gen.norm
    report = SpectralReport("spectral", eigenvalues=evals)
    report.tolerances.update(zero_eigenvalue=tol * scale, stationary=tol)

    report.add("eigenvalues real", 0.0, ok=True)
    lam1 = float(evals[0])
    report.add("lambda_1 = 0", lam1, 0.0, residual=lam1, tol=tol * scale)
    report.add("eigenvalues nonnegative", lam1, residual=min(lam1, 0.0),
               ok=lam1 >= -tol * scale)
    if len(evals) > 1:
        lam2 = float(evals[1])
        ok = lam2 > tol * scale
        label = "spectral gap" if ok else "degenerate stationary state"
        report.add(label, lam2, residual=lam2, ok=ok)
    if scale > 0:
        pi = stationary_state(form, evals, evecs)
        g = gibbs_populations(spec.bare_energies, spec.beta_B)
        dev = float(np.max(np.abs(pi - g)))
        report.stationary = pi
        report.add("stationary = Gibbs(beta_B)", dev, 0.0, residual=dev, tol=tol)
    return report


def generator_for(spec: ModelSpec) -> Generator:
    return build_generator(jump_rates(spec))
