"""End-to-end synthetic benchmark over the object-permanence battery."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from . import synthetic as Syn
from .density import DEFAULT_NU_MODE
from .dsl import load_layout
from .errors import SubsetEmpty
from .evaluation import evaluate_split, rmse_profiles, split
from .layout import uniform_over_range
from .sampler import SamplerConfig, derive_seed

log = logging.getLogger(__name__)

BRIER_COLUMNS = ["ML BS", "Agg BS", "ML Cal", "Agg Cal", "ML Ref", "Agg Ref"]


@dataclass
class BenchResult:
    brier: pd.DataFrame
    rmse: pd.DataFrame
    inferred: pd.DataFrame
    truth: pd.DataFrame
    profiles: dict


def _fmt(df: pd.DataFrame, path: Path, index: bool = False) -> None:
    df.to_csv(path, index=index, float_format="%.17g", lineterminator="\n")


def op_suite(out_dir: str | Path | None = None, *, seed: int = 0, agents=None, counts: dict | None = None,
             config: SamplerConfig | None = None, test_frac: float = 0.2, nu_mode: str = DEFAULT_NU_MODE,
             uniform_priors=(), layout="op", backend: str = "auto") -> BenchResult:
    """Generate instances, simulate agents, infer profiles and score them.

    Each agent gets one train/test split; the profile is inferred on the
    training part and both predictors are scored on the test part.  All
    sub-seeds derive from ``seed`` by purpose string.
    """
    config = config or SamplerConfig()
    agents = sorted(Syn.AGENTS) if agents is None else [Syn.agent(a).id for a in agents]
    counts = dict(Syn.DEFAULT_COUNTS if counts is None else counts)
    lay = load_layout(layout)
    if uniform_priors:
        lay = uniform_over_range(lay, uniform_priors)
    inst_seed = derive_seed(seed, "instances")
    table = Syn.gen_op_instances(counts, inst_seed)
    truth = Syn.ground_truth(agents)

    rows, inferred, profiles = [], {}, {}
    for a in agents:
        spec = Syn.agent(a)
        data = table.with_outcomes(Syn.simulate_agent(a, table, derive_seed(seed, f"agent:{a}")))
        train, test = split(data, test_frac, derive_seed(seed, f"split:{a}"))
        cfg = SamplerConfig(**{**config.to_dict(), "seed": derive_seed(seed, f"infer:{a}")})
        m, g, nu, prof, trace = evaluate_split(lay, train, test, cfg, nu_mode, backend)
        log.info("agent %d: ML %.4f Agg %.4f divergences %d", a, m.brier, g.brier, trace.divergence_count)
        profiles[a] = prof
        norm = prof.normalized_means()
        inferred[a] = {k: norm[k] for k in Syn.ABILITIES if k in norm}
        rows.append({"agent": a, "class": spec.cls, "included": spec.included,
                     "ML BS": m.brier, "Agg BS": g.brier, "ML Cal": m.calibration, "Agg Cal": g.calibration,
                     "ML Ref": m.refinement, "Agg Ref": g.refinement, "nu": nu,
                     "success_rate": data.success_rate(), "divergences": trace.divergence_count})

    brier_df = pd.DataFrame(rows)
    inferred_df = pd.DataFrame.from_dict(inferred, orient="index")
    inferred_df.index.name = "agent"
    abilities = [c for c in Syn.ABILITIES if c in inferred_df.columns]
    rmse_rows = []
    for label, subset in (("overall", agents), ("included", [a for a in agents if a in Syn.INCLUDED])):
        try:
            r = rmse_profiles(inferred_df, truth[abilities], subset)
        except SubsetEmpty:
            continue
        rmse_rows.append({"subset": label, "agents": len(subset), **r})
    rmse_df = pd.DataFrame(rmse_rows)
    result = BenchResult(brier_df, rmse_df, inferred_df, truth, profiles)

    if out_dir is not None:
        out = Path(out_dir)
        (out / "profiles").mkdir(parents=True, exist_ok=True)
        table.to_csv(out / "instances.csv")
        Syn.write_meta(out / "meta.json", counts=counts, seed=inst_seed,
                       extra={"bench_seed": int(seed), "agents": agents, "test_frac": test_frac,
                              "nu_mode": nu_mode, "uniform_priors": list(uniform_priors),
                              "sampler": config.to_dict()})
        _fmt(truth, out / "ground_truth.csv", index=True)
        for a, prof in profiles.items():
            prof.to_json(out / "profiles" / f"agent_{a:02d}.json")
        _fmt(brier_df, out / "brier.csv")
        _fmt(inferred_df, out / "inferred.csv", index=True)
        _fmt(rmse_df, out / "rmse.csv")
        summary = {"agents": agents, "mean_ML_BS": float(brier_df["ML BS"].mean()),
                   "mean_Agg_BS": float(brier_df["Agg BS"].mean())}
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return result
