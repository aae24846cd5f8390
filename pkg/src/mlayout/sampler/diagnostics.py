"""Rank-normalised split R-hat and bulk effective sample size."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import SingleChain
from .trace import Trace


@dataclass(frozen=True)
class Diagnostics:
    names: list
    rhat: np.ndarray | None
    ess_bulk: np.ndarray
    divergence_count: int

    def to_dict(self) -> dict:
        return {
            "rhat": None if self.rhat is None else {n: _finite_or_none(v) for n, v in zip(self.names, self.rhat)},
            "ess_bulk": {n: _finite_or_none(v) for n, v in zip(self.names, self.ess_bulk)},
            "divergences": int(self.divergence_count),
        }


def _finite_or_none(v):
    v = float(v)
    return v if np.isfinite(v) else None


def _split(x: np.ndarray) -> np.ndarray:
    """Split each chain in half: ``(chains, n)`` to ``(2 chains, n // 2)``."""
    n = x.shape[1] // 2
    return np.concatenate([x[:, :n], x[:, x.shape[1] - n:]], axis=0)


def _rank_normalize(x: np.ndarray) -> np.ndarray:
    r = stats.rankdata(x, method="average").reshape(x.shape)
    return stats.norm.ppf((r - 0.375) / (x.size + 0.25))


def _rhat(x: np.ndarray) -> float:
    _, n = x.shape
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    if W <= 0:
        return np.nan
    return float(np.sqrt(((n - 1) / n * W + B / n) / W))


def split_rhat(x) -> float:
    """Max of bulk and folded rank-normalised split R-hat for ``(chains, draws)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise SingleChain("R-hat needs at least two chains")
    if x.shape[1] < 4:
        return np.nan
    s = _split(x)
    bulk = _rhat(_rank_normalize(s))
    folded = _rhat(_rank_normalize(np.abs(s - np.median(s))))
    return float(np.nanmax([bulk, folded])) if np.isfinite([bulk, folded]).any() else np.nan


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    m = 2 ** int(np.ceil(np.log2(2 * n)))
    c = x - x.mean(axis=-1, keepdims=True)
    f = np.fft.rfft(c, n=m, axis=-1)
    return np.fft.irfft(f * np.conj(f), n=m, axis=-1)[..., :n] / n


def ess(x) -> float:
    """Effective sample size with Geyer's initial monotone sequence."""
    x = np.asarray(x, dtype=float)
    m, n = x.shape
    if n < 4:
        return np.nan
    acov = _autocov(x)
    mean_var = acov[:, 0].mean() * n / (n - 1)
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if var_plus <= 0:
        return np.nan
    rho = np.zeros(n)
    rho[0] = 1.0
    even, odd = 1.0, 1.0 - (mean_var - acov[:, 1].mean()) / var_plus
    rho[1] = odd
    t = 1
    while t < n - 3 and even + odd > 0:
        even = 1.0 - (mean_var - acov[:, t + 1].mean()) / var_plus
        odd = 1.0 - (mean_var - acov[:, t + 2].mean()) / var_plus
        if even + odd >= 0:
            rho[t + 1], rho[t + 2] = even, odd
        t += 2
    max_t = t - 2
    if even > 0:
        rho[max_t + 1] = even
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = rho[t + 2] = (rho[t - 1] + rho[t]) / 2.0
        t += 2
    total = m * n
    tau = -1.0 + 2.0 * rho[: max_t + 1].sum() + rho[max_t + 1: max_t + 2].sum()
    tau = max(tau, 1.0 / np.log10(total))
    return float(total / tau)


def ess_bulk(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    s = _split(x) if x.shape[1] >= 4 else x
    value = ess(_rank_normalize(s))
    return float(min(value, x.size)) if np.isfinite(value) else value


def diagnose(trace: Trace) -> Diagnostics:
    """Per-parameter R-hat (absent for one chain), bulk ESS and divergences."""
    k = trace.draws.shape[-1]
    if trace.n_chains >= 2:
        rhat = np.array([split_rhat(trace.draws[:, :, j]) for j in range(k)])
    else:
        rhat = None
    ess_b = np.array([ess_bulk(trace.draws[:, :, j]) for j in range(k)])
    return Diagnostics(list(trace.names), rhat, ess_b, trace.divergence_count)
