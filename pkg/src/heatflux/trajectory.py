"""Gillespie sampling of the population jump process as an independent oracle.

Each trajectory is identified by (master_seed, stream, index). The stream
is the starting level for conditional-probability runs and ``HEAT_STREAM``
for heat runs, where draw 0 picks the initial level. A jump step consumes
two draws (waiting time, then target), so the scalar :func:`sample_path`
and the vectorized batch sampler produce identical paths.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .generator import RateMatrix
from .heat import HeatDistribution, HeatSupport, heat_support
from .model import ModelSpec, gibbs_populations
from .propagator import StochasticMatrix
from .reports import VerificationReport
from .rng import CounterStream, stream_keys, uniforms

HEAT_STREAM = 2**32
CHUNK = 1 << 16


def default_workers() -> int:
    value = os.environ.get("HEATFLUX_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return 1


def sample_path(rates: RateMatrix, m0: int, tau: float, rng_stream) -> int:
    """Final level of one exact jump-process path started in ``m0``.

    ``rng_stream`` needs a ``random()`` method returning floats in [0, 1).
    """
    cumR = np.cumsum(rates.rates, axis=0)
    D = cumR.shape[0]
    state, t = m0, 0.0
    if tau <= 0:
        return state
    while True:
        rate = cumR[-1, state]
        if rate <= 0:
            return state
        t += -math.log1p(-rng_stream.random()) / rate
        if t > tau:
            return state
        x = rng_stream.random() * rate
        state = min(int(np.count_nonzero(cumR[:, state] <= x)), D - 1)


def _final_states(R: np.ndarray, starts: np.ndarray, keys: np.ndarray, tau: float,
                  counter0: int = 0) -> np.ndarray:
    """Vectorized version of :func:`sample_path` over many trajectories."""
    cumR = np.cumsum(R, axis=0)
    esc = cumR[-1]
    D = R.shape[0]
    state = starts.copy()
    if tau <= 0:
        return state
    t = np.zeros(len(state))
    active = np.arange(len(state))
    counter = counter0
    while active.size:
        s = state[active]
        rate = esc[s]
        moving = rate > 0
        active, s, rate = active[moving], s[moving], rate[moving]
        if not active.size:
            break
        u = uniforms(keys[active], counter)
        t[active] += -np.log1p(-u) / rate
        jumping = t[active] <= tau
        active, s, rate = active[jumping], s[jumping], rate[jumping]
        if not active.size:
            break
        x = uniforms(keys[active], counter + 1) * rate
        target = np.count_nonzero(cumR[:, s].T <= x[:, None], axis=1)
        state[active] = np.minimum(target, D - 1)
        counter += 2
    return state


@dataclass(eq=False)
class TrajectoryBatch:
    n_traj: int
    master_seed: int
    tau: float
    counts: np.ndarray  # counts[n, m]: started in m, ended in n


@dataclass(eq=False)
class ConditionalEstimate:
    probs: np.ndarray
    stderr: np.ndarray
    batch: TrajectoryBatch

    @property
    def n_samples(self) -> int:
        return self.batch.n_traj


def _chunks(n: int, size: int):
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _run_chunks(job, n: int, workers: int, chunk: int):
    spans = _chunks(n, chunk)
    if workers <= 1:
        return [job(lo, hi) for lo, hi in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda span: job(*span), spans))


def simulate_counts(rates: RateMatrix, tau: float, n_traj: int, master_seed: int,
                    workers: int | None = None, chunk: int = CHUNK) -> TrajectoryBatch:
    R = rates.rates
    D = R.shape[0]
    workers = default_workers() if workers is None else workers
    counts = np.zeros((D, D), dtype=np.int64)
    for m in range(D):
        def job(lo, hi, m=m):
            keys = stream_keys(master_seed, m, np.arange(lo, hi, dtype=np.uint64))
            final = _final_states(R, np.full(hi - lo, m), keys, tau)
            return np.bincount(final, minlength=D)

        for part in _run_chunks(job, n_traj, workers, chunk):
            counts[:, m] += part
    return TrajectoryBatch(n_traj, master_seed, float(tau), counts)


def empirical_conditional(rates: RateMatrix, tau: float, n_traj: int, master_seed: int,
                          workers: int | None = None, chunk: int = CHUNK) -> ConditionalEstimate:
    """Empirical p(n, tau | m, 0) from n_traj paths per starting level."""
    if n_traj < 1000:
        raise ValueError("n_traj must be >= 1000")
    batch = simulate_counts(rates, tau, n_traj, master_seed, workers, chunk)
    probs = batch.counts / n_traj
    stderr = np.sqrt(probs * (1 - probs) / n_traj)
    return ConditionalEstimate(probs, stderr, batch)


def empirical_heat_distribution(spec: ModelSpec, rates: RateMatrix, tau: float, n_traj: int,
                                master_seed: int, support: HeatSupport | None = None,
                                workers: int | None = None, chunk: int = CHUNK) -> HeatDistribution:
    """Two-point heat histogram: initial level ~ Gibbs(beta_S), Q = E0[final] - E0[initial]."""
    if n_traj < 1000:
        raise ValueError("n_traj must be >= 1000")
    if support is None:
        support = heat_support(spec)
    R = rates.rates
    D = R.shape[0]
    cdf = np.cumsum(gibbs_populations(spec.bare_energies, spec.beta_S))
    workers = default_workers() if workers is None else workers
    n_bins = len(support.values)

    def job(lo, hi):
        keys = stream_keys(master_seed, HEAT_STREAM, np.arange(lo, hi, dtype=np.uint64))
        u0 = uniforms(keys, 0)
        starts = np.minimum(np.searchsorted(cdf, u0, side="right"), D - 1)
        final = _final_states(R, starts, keys, tau, counter0=1)
        return np.bincount(support.bin_index[starts, final], minlength=n_bins)

    counts = np.zeros(n_bins, dtype=np.int64)
    for part in _run_chunks(job, n_traj, workers, chunk):
        counts += part
    mass = counts / n_traj
    stderr = np.sqrt(mass * (1 - mass) / n_traj)
    return HeatDistribution(support, mass, float(tau), "forward", stderr, n_traj)


def sample_heat_path(spec: ModelSpec, rates: RateMatrix, tau: float, master_seed: int, index: int) -> float:
    """Heat recorded by a single trajectory of :func:`empirical_heat_distribution`."""
    stream = CounterStream(master_seed, HEAT_STREAM, index)
    cdf = np.cumsum(gibbs_populations(spec.bare_energies, spec.beta_S))
    m = min(int(np.searchsorted(cdf, stream.random(), side="right")), len(cdf) - 1)
    n = sample_path(rates, m, tau, stream)
    return float(spec.bare_energies[n] - spec.bare_energies[m])


def oracle_compare(exact, empirical, z_max: float = 5.0, z_warn: float = 3.0,
                   max_fraction: float = 0.01) -> VerificationReport:
    """Per-entry z-scores of an empirical estimate against exact values.

    sigma comes from the exact probability: sqrt(p (1 - p) / N). Passes when
    every |z| < z_max and fewer than ``max_fraction`` of entries exceed z_warn.
    """
    if isinstance(exact, StochasticMatrix):
        p_exact = exact.entries
        p_emp, N, tau = empirical.probs, empirical.n_samples, empirical.batch.tau
        labels = [f"p({n + 1}|{m + 1})" for n in range(p_exact.shape[0]) for m in range(p_exact.shape[1])]
    elif isinstance(exact, HeatDistribution):
        p_exact, p_emp, N, tau = exact.mass, empirical.mass, empirical.n_samples, empirical.tau
        labels = [f"Q={q:.6g}" for q in exact.support.values]
    else:
        raise TypeError("exact must be a StochasticMatrix or HeatDistribution")
    if p_exact.shape != p_emp.shape:
        raise ValueError(f"shape mismatch: {p_exact.shape} vs {p_emp.shape}")
    if not math.isclose(tau, exact.tau, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError(f"tau mismatch: {exact.tau} vs {tau}")

    z = z_scores(p_exact, p_emp, N)
    report = VerificationReport("oracle", tolerances={"z_max": z_max, "z_warn": z_warn,
                                                      "max_fraction": max_fraction})
    for label, pe, pm, zi in zip(labels, p_exact.ravel(), p_emp.ravel(), z.ravel()):
        report.add(label, pm, pe, residual=zi, ok=abs(zi) < z_max)
    frac = float(np.mean(np.abs(z) > z_warn))
    report.add(f"fraction |z| > {z_warn:g}", frac, 0.0, residual=frac, ok=frac < max_fraction)
    return report


def z_scores(p_exact, p_emp, N: int) -> np.ndarray:
    p_exact = np.asarray(p_exact, dtype=float)
    diff = np.asarray(p_emp, dtype=float) - p_exact
    sigma = np.sqrt(np.clip(p_exact * (1 - p_exact), 0.0, None) / N)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, diff / sigma, np.where(diff == 0, 0.0, np.inf * np.sign(diff)))
    return z
