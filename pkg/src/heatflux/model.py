"""Physical model: spectrum, temperatures, couplings, thermal populations.

Energies are stored shifted so that the lowest bare level sits at zero.
Everything downstream depends only on energy differences, and the shift
keeps the ``exp(+beta*E/2)`` symmetrization weights finite.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .reports import HeatfluxError, VerificationReport

# beta * (E_max - E_min) above this leaves the double exponent range
OVERFLOW_LIMIT = 300.0

SCHEMA_EXCERPT = """\
{
  "dimension": 2,
  "energies": [0.0, 1.0],
  "effective_energies": [0.0, 1.0],        (optional)
  "beta_S": 2.0,
  "beta_B": 1.0,
  "coupling": {"type": "explicit", "matrix": [[0, 1], [1, 0]]}
           | {"type": "uniform", "value": 1.0}
           | {"type": "random", "seed": 42, "low": 0.1, "high": 1.0}
}"""


class ModelError(HeatfluxError, ValueError):
    """Invalid model input. ``field`` names the offending config field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Bare spectrum, optional effective spectrum, temperatures and couplings.

    Construct through :func:`make_model` or :func:`load_model` to get the
    energy shift and validation; the bare constructor performs neither so
    that invalid models can be built for testing the checks themselves.
    """

    bare_energies: np.ndarray
    beta_S: float
    beta_B: float
    coupling: np.ndarray
    effective_energies: np.ndarray | None = None

    @property
    def dimension(self) -> int:
        return len(self.bare_energies)

    @property
    def energies_eff(self) -> np.ndarray:
        if self.effective_energies is None:
            return self.bare_energies
        return self.effective_energies

    @property
    def delta_beta(self) -> float:
        return self.beta_S - self.beta_B

    def to_dict(self) -> dict:
        out = {
            "dimension": self.dimension,
            "energies": self.bare_energies.tolist(),
            "beta_S": self.beta_S,
            "beta_B": self.beta_B,
            "coupling": {"type": "explicit", "matrix": self.coupling.tolist()},
        }
        if self.effective_energies is not None:
            out["effective_energies"] = self.effective_energies.tolist()
        return out


def make_model(energies, beta_S, beta_B, coupling, effective_energies=None) -> ModelSpec:
    """Build a validated, energy-shifted ModelSpec.

    ``coupling`` is a D x D array; its diagonal is ignored (with a warning
    if nonzero). Raises :class:`ModelError` naming the offending field.
    """
    energies = np.asarray(energies, dtype=float)
    if energies.ndim != 1:
        raise ModelError("energies", "must be a flat list of reals")
    if not np.all(np.isfinite(energies)):
        raise ModelError("energies", "must be finite")
    C = np.array(coupling, dtype=float)
    if C.shape != (len(energies), len(energies)):
        raise ModelError("coupling", f"shape {C.shape} does not match dimension {len(energies)}")
    if np.any(np.diag(C) != 0):
        warnings.warn("coupling diagonal entries are ignored", stacklevel=2)
        np.fill_diagonal(C, 0.0)

    eff = None
    if effective_energies is not None:
        eff = np.asarray(effective_energies, dtype=float)
        if eff.shape != energies.shape:
            raise ModelError("effective_energies", "length does not match energies")
        if not np.all(np.isfinite(eff)):
            raise ModelError("effective_energies", "must be finite")
        eff = eff - eff.min() if len(eff) else eff

    shifted = energies - energies.min() if len(energies) else energies
    spec = ModelSpec(shifted, float(beta_S), float(beta_B), C, eff)
    report = validate_model(spec)
    for item in report.items:
        if not item.passed:
            raise ModelError(_FIELD_OF_CHECK.get(item.label, "model"), item.label)
    return spec


def load_model(config_text: str) -> ModelSpec:
    """Parse a JSON config document into a validated ModelSpec."""
    try:
        cfg = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ModelError("config", f"parse failure: {exc}") from None
    if not isinstance(cfg, dict):
        raise ModelError("config", "top level must be an object")
    return model_from_dict(cfg)


def model_from_dict(cfg: dict) -> ModelSpec:
    for key in ("energies", "beta_S", "beta_B", "coupling"):
        if key not in cfg:
            raise ModelError(key, "missing required field")
    energies = _float_list(cfg["energies"], "energies")
    dim = cfg.get("dimension", len(energies))
    if not isinstance(dim, int) or isinstance(dim, bool):
        raise ModelError("dimension", "must be an integer")
    if dim != len(energies):
        raise ModelError("dimension", f"{dim} does not match {len(energies)} energies")
    beta_S = _positive_float(cfg["beta_S"], "beta_S")
    beta_B = _positive_float(cfg["beta_B"], "beta_B")
    eff = cfg.get("effective_energies")
    if eff is not None:
        eff = _float_list(eff, "effective_energies")
    C = coupling_from_config(cfg["coupling"], dim)
    return make_model(energies, beta_S, beta_B, C, eff)


def coupling_from_config(cfg, dim: int) -> np.ndarray:
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ModelError("coupling", "must be an object with a 'type' field")
    kind = cfg["type"]
    if kind == "explicit":
        try:
            C = np.array(cfg["matrix"], dtype=float)
        except (KeyError, TypeError, ValueError):
            raise ModelError("coupling.matrix", "must be a D x D array of numbers") from None
        if C.shape != (dim, dim):
            raise ModelError("coupling.matrix", f"shape {C.shape} does not match dimension {dim}")
        return C
    if kind == "uniform":
        value = _positive_float(cfg.get("value"), "coupling.value")
        C = np.full((dim, dim), value)
        np.fill_diagonal(C, 0.0)
        return C
    if kind == "random":
        seed = cfg.get("seed")
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ModelError("coupling.seed", "must be an unsigned 64-bit integer")
        low = _positive_float(cfg.get("low"), "coupling.low")
        high = _positive_float(cfg.get("high"), "coupling.high")
        if high < low:
            raise ModelError("coupling.high", "must be >= low")
        return random_coupling(dim, seed, low, high)
    raise ModelError("coupling.type", f"unknown coupling type {kind!r}")


def random_coupling(dim: int, seed: int, low: float, high: float) -> np.ndarray:
    """Uniform(low, high) entries symmetrized as (X + X^T)/2, zero diagonal."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(low, high, size=(dim, dim))
    C = (X + X.T) / 2
    np.fill_diagonal(C, 0.0)
    return C


def gibbs_populations(energies, beta: float) -> np.ndarray:
    """Thermal populations exp(-beta*E_m)/Z, max-shifted against overflow."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    E = np.asarray(energies, dtype=float)
    w = np.exp(-beta * (E - E.min()))
    return w / w.sum()


def check_populations(v, dim: int | None = None, tol: float = 1e-12) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or (dim is not None and len(v) != dim):
        raise ModelError("populations", f"expected a vector of length {dim}")
    if np.any(v < 0):
        raise ModelError("populations", "entries must be nonnegative")
    if abs(v.sum() - 1) > tol:
        raise ModelError("populations", f"sum {v.sum()!r} differs from 1")
    return v


def check_density(rho, dim: int | None = None) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or (dim is not None and rho.shape[0] != dim):
        raise ModelError("density", f"expected a {dim} x {dim} matrix")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise ModelError("density", "not Hermitian")
    if abs(np.trace(rho) - 1) > 1e-12:
        raise ModelError("density", "trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ModelError("density", "not positive semidefinite")
    return rho


_FIELD_OF_CHECK = {
    "dimension": "dimension",
    "degenerate spectrum": "energies",
    "energies not increasing": "energies",
    "beta_S positive": "beta_S",
    "beta_B positive": "beta_B",
    "coupling asymmetry": "coupling",
    "coupling negative": "coupling",
    "coupling graph disconnected": "coupling",
    "overflow guard": "energies",
    "effective_energies length": "effective_energies",
}


def validate_model(spec: ModelSpec) -> VerificationReport:
    """Check every ModelSpec invariant; failures become report entries."""
    report = VerificationReport("model validation")
    E = np.asarray(spec.bare_energies, dtype=float)
    D = len(E)
    report.add("dimension", D, 2, residual=0.0, ok=D >= 2)

    gaps = np.diff(E) if D >= 2 else np.array([1.0])
    min_gap = float(gaps.min()) if len(gaps) else 1.0
    n_distinct = len(np.unique(E))
    report.add("degenerate spectrum", n_distinct, D, residual=D - n_distinct, ok=n_distinct == D)
    report.add("energies not increasing", min_gap, residual=min(min_gap, 0.0), ok=not np.any(gaps < 0))

    report.add("beta_S positive", spec.beta_S, ok=spec.beta_S > 0)
    report.add("beta_B positive", spec.beta_B, ok=spec.beta_B > 0)

    C = np.asarray(spec.coupling, dtype=float)
    if C.shape != (D, D):
        report.add("coupling shape", C.shape[0], D, ok=False)
        return report
    asym = float(np.max(np.abs(C - C.T))) if D else 0.0
    report.add("coupling asymmetry", asym, 0.0, residual=asym, ok=asym == 0.0)
    off = C[~np.eye(D, dtype=bool)]
    min_off = float(off.min()) if off.size else 0.0
    report.add("coupling negative", min_off, residual=min(min_off, 0.0), ok=min_off >= 0)
    n_comp = connected_components((C > 0) | (C.T > 0), directed=False)[0] if D else 0
    report.add("coupling graph disconnected", n_comp, 1, residual=n_comp - 1, ok=n_comp == 1)

    span = float(E.max() - E.min()) if D else 0.0
    worst_exponent = max(abs(spec.beta_S), abs(spec.beta_B)) * span
    report.add("overflow guard", worst_exponent, OVERFLOW_LIMIT,
               residual=max(worst_exponent - OVERFLOW_LIMIT, 0.0), ok=worst_exponent <= OVERFLOW_LIMIT)
    if spec.effective_energies is not None:
        n_eff = len(spec.effective_energies)
        report.add("effective_energies length", n_eff, D, residual=n_eff - D, ok=n_eff == D)
    report.tolerances["coupling asymmetry"] = 0.0
    report.tolerances["overflow exponent"] = OVERFLOW_LIMIT
    return report


def _float_list(value, name) -> list[float]:
    if not isinstance(value, list):
        raise ModelError(name, "must be an array of numbers")
    out = []
    for x in value:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ModelError(name, f"non-numeric entry {x!r}")
        out.append(float(x))
    return out


def _positive_float(value, name) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelError(name, "must be a number")
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ModelError(name, "non-positive temperature" if name.startswith("beta") else "must be > 0")
    return value
