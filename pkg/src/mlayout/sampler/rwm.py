"""Adaptive random-walk Metropolis, a gradient-free cross-check."""

from __future__ import annotations

import math

import numpy as np

from ..errors import MlayoutError
from .nuts import initial_point
from .trace import SamplerConfig, Trace, chain_rng

TARGET_ACCEPT = 0.234


def _logp(density, theta) -> float:
    if not np.all(np.isfinite(theta)):
        return -math.inf
    try:
        lp = density(theta)[0]
    except MlayoutError:
        return -math.inf
    return lp if math.isfinite(lp) else -math.inf


def run_chain(density, dim, config: SamplerConfig, chain: int, *, prior_sampler=None,
              unconstrain=None, constrain=None):
    rng = chain_rng(config.seed, chain)
    theta, logp, _ = initial_point(density, dim, rng, prior_sampler, unconstrain)
    log_scale = math.log(2.38 / math.sqrt(dim))
    diag = np.ones(dim)
    half = config.tune // 2
    history = []

    def step(theta, logp):
        prop = theta + math.exp(log_scale) * diag * rng.standard_normal(dim)
        lp = _logp(density, prop)
        a = math.exp(min(0.0, lp - logp)) if math.isfinite(lp) else 0.0
        if rng.uniform() < a:
            return prop, lp, a
        return theta, logp, a

    for it in range(config.tune):
        theta, logp, a = step(theta, logp)
        log_scale += (a - TARGET_ACCEPT) / (it + 1) ** 0.6
        if it >= config.tune // 5:
            history.append(theta)
        if it + 1 == half and len(history) > 10:
            diag = np.sqrt(np.array(history).var(axis=0, ddof=1) + 1e-8)
            log_scale = math.log(2.38 / math.sqrt(dim))
            history = []

    draws = np.empty((config.draws, dim))
    accept = np.empty(config.draws)
    for i in range(config.draws):
        theta, logp, accept[i] = step(theta, logp)
        draws[i] = theta
    if constrain is not None:
        draws = constrain(draws)
    return draws, accept, math.exp(log_scale)


def sample_rwm(density, config: SamplerConfig | None = None, *, names=None, dim=None,
               prior_sampler=None, unconstrain=None, constrain=None, layout_name=None) -> Trace:
    config = config or SamplerConfig(algorithm="rwm")
    if hasattr(density, "priors"):
        names = names or list(density.names)
        prior_sampler = prior_sampler or density.sample_prior
        unconstrain = unconstrain or density.unconstrain
        constrain = constrain or density.constrain
        layout_name = layout_name or density.layout.name
    dim = dim or len(names)
    names = names or [f"x{j}" for j in range(dim)]
    out = [run_chain(density, dim, config, c, prior_sampler=prior_sampler,
                     unconstrain=unconstrain, constrain=constrain)
           for c in range(config.chains)]
    shape = (config.chains, config.draws)
    return Trace(
        names=list(names),
        draws=np.stack([o[0] for o in out]),
        divergent=np.zeros(shape, dtype=bool),
        tree_depth=np.zeros(shape, dtype=np.int64),
        accept_stat=np.stack([o[1] for o in out]),
        step_size=np.array([o[2] for o in out]),
        algorithm="rwm",
        layout_name=layout_name,
    )
