"""Heat-exchange statistics for thermalizing Markovian open quantum systems."""

__version__ = "0.1.0"

from .generator import (DephasingTable, Generator, RateMatrix, SymmetricForm, build_generator,
                        decay_rates, generator_for, jump_rates, spectral_report, symmetrize)
from .heat import (HeatDistribution, HeatSupport, detailed_balance_check, forward_distribution,
                   fr_check, heat_support, mean_heat, reverse_distribution, tail_bound_check)
from .model import ModelError, ModelSpec, gibbs_populations, load_model, make_model, validate_model
from .propagator import (StochasticMatrix, evolve_density, evolve_populations, power_symmetry_check,
                         propagator, taylor_propagator)
from .reports import CheckItem, HeatfluxError, VerificationReport
from .trajectory import (empirical_conditional, empirical_heat_distribution, oracle_compare,
                         sample_path)

__all__ = [
    "CheckItem", "DephasingTable", "Generator", "HeatDistribution", "HeatSupport", "HeatfluxError",
    "ModelError", "ModelSpec", "RateMatrix", "StochasticMatrix", "SymmetricForm", "VerificationReport",
    "build_generator", "decay_rates", "detailed_balance_check", "empirical_conditional",
    "empirical_heat_distribution", "evolve_density", "evolve_populations", "forward_distribution",
    "fr_check", "generator_for", "gibbs_populations", "heat_support", "jump_rates", "load_model",
    "make_model", "mean_heat", "oracle_compare", "power_symmetry_check", "propagator",
    "reverse_distribution", "sample_path", "spectral_report", "symmetrize", "tail_bound_check",
    "taylor_propagator", "validate_model",
]
