"""Per-agent profile inference: density, sampler run, summary."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import sampler as S
from .density import DEFAULT_NU_MODE, DensityFn, compute_nu
from .dsl import format_number
from .errors import EmptyOutcomes
from .layout import ValidatedLayout
from .table import InstanceTable


@dataclass(frozen=True)
class ParamSummary:
    name: str
    kind: str
    mean: float
    sd: float
    q05: float
    q95: float
    range: tuple[float, float]
    prior: str

    def normalized_mean(self) -> float:
        lo, hi = self.range
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
            return float("nan")
        return (self.mean - lo) / (hi - lo)

    def to_dict(self) -> dict:
        lo, hi = self.range
        return {
            "kind": self.kind,
            "mean": self.mean,
            "sd": self.sd,
            "q05": self.q05,
            "q95": self.q95,
            "range": [lo if math.isfinite(lo) else None, hi if math.isfinite(hi) else None],
            "prior": self.prior,
        }


@dataclass
class CognitiveProfile:
    """Posterior summary of capabilities, biases and robustness."""

    layout: str
    params: list[ParamSummary]
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> ParamSummary:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def means(self) -> dict[str, float]:
        return {p.name: p.mean for p in self.params}

    def normalized_means(self) -> dict[str, float]:
        return {p.name: p.normalized_mean() for p in self.params}

    def to_dict(self) -> dict:
        return {
            "layout": self.layout,
            "parameters": {p.name: p.to_dict() for p in self.params},
            "diagnostics": self.diagnostics,
            "config": self.config,
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=False, allow_nan=False) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def summarize(trace: S.Trace, layout: ValidatedLayout | None = None, *,
              diagnostics: bool = True, config: dict | None = None) -> CognitiveProfile:
    """Moments and 5%/95% quantiles over all retained draws, pooled across chains."""
    pooled = trace.pooled()
    params = []
    for j, name in enumerate(trace.names):
        x = pooled[:, j]
        if layout is not None:
            node = layout.node(name)
            kind, rng, prior = node.kind.value, node.bounds, node.prior.dsl(format_number)
        else:
            kind, rng, prior = "parameter", (-math.inf, math.inf), ""
        q05, q95 = np.quantile(x, [0.05, 0.95])
        mean = float(np.mean(x))
        # a constant trace must summarise to exactly its value
        if np.all(x == x[0]):
            mean, q05, q95 = float(x[0]), float(x[0]), float(x[0])
        params.append(ParamSummary(name, kind, mean, float(np.std(x)), float(q05), float(q95),
                                   tuple(map(float, rng)), prior))
    diag = {}
    if diagnostics and trace.n_draws >= 4:
        diag = S.diagnose(trace).to_dict()
        diag["warnings"] = list(trace.warnings)
        diag["step_size"] = [float(s) for s in trace.step_size]
    elif diagnostics:
        diag = {"divergences": trace.divergence_count}
    return CognitiveProfile(trace.layout_name or (layout.name if layout else ""), params, diag, config or {})


def infer_profile(layout: ValidatedLayout, table: InstanceTable, config: S.SamplerConfig | None = None, *,
                  nu_mode: str = DEFAULT_NU_MODE, nu: float | None = None,
                  backend: str = "auto") -> tuple[CognitiveProfile, S.Trace]:
    """Sample the posterior of one agent's profile.

    Parameters
    ----------
    layout : ValidatedLayout
    table : InstanceTable
        Must include outcomes and every meta-feature column.
    config : SamplerConfig, optional
    nu_mode : str
        How the noise-fallback constant is estimated from the outcomes.
    nu : float, optional
        Explicit constant; overrides ``nu_mode``.

    Returns
    -------
    (CognitiveProfile, Trace)
    """
    config = config or S.SamplerConfig()
    if not table.has_outcomes:
        raise EmptyOutcomes("inference needs outcomes")
    table.design_matrix(layout)  # raises MissingColumn / ValueOutOfRange early
    nu_value = float(nu) if nu is not None else compute_nu(table.outcomes, nu_mode)
    density = DensityFn(layout, table, nu_value, backend=backend)
    trace = S.run(density, config)
    echo = {
        "nu_mode": "explicit" if nu is not None else nu_mode,
        "nu": nu_value,
        "n_instances": len(table),
        "success_rate": table.success_rate(),
        **config.to_dict(),
    }
    return summarize(trace, layout, config=echo), trace


def profiles_frame(profiles: dict) -> pd.DataFrame:
    """One row per agent; mean and sd per parameter plus the success rate."""
    rows = []
    for agent, prof in profiles.items():
        row = {"agent": agent}
        for p in prof.params:
            row[f"{p.name}_mean"] = p.mean
            row[f"{p.name}_sd"] = p.sd
        row["success_rate"] = prof.config.get("success_rate", float("nan"))
        rows.append(row)
    return pd.DataFrame(rows)
