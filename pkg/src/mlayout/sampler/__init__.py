"""MCMC samplers and convergence diagnostics."""

from .diagnostics import Diagnostics, diagnose, ess_bulk, split_rhat
from .nuts import NUTS, DualAveraging, sample
from .rwm import sample_rwm
from .trace import SamplerConfig, Trace, chain_rng, derive_seed


def run(density, config: SamplerConfig | None = None, **kwargs) -> Trace:
    """Dispatch on ``config.algorithm``."""
    config = config or SamplerConfig()
    if config.algorithm == "rwm":
        return sample_rwm(density, config, **kwargs)
    return sample(density, config, **kwargs)


__all__ = [
    "Diagnostics",
    "DualAveraging",
    "NUTS",
    "SamplerConfig",
    "Trace",
    "chain_rng",
    "derive_seed",
    "diagnose",
    "ess_bulk",
    "run",
    "sample",
    "sample_rwm",
    "split_rhat",
]
