"""Forward prediction, baselines, Brier scoring, RMSE, splits and grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import program as P
from .density import DEFAULT_NU_MODE, evaluate_table
from .errors import (
    EmptyOutcomes,
    LayoutMismatch,
    LengthMismatch,
    SubsetEmpty,
    TooFewInstances,
    UnknownDimension,
)
from .layout import ValidatedLayout
from .sampler import SamplerConfig, Trace, derive_seed
from .table import InstanceTable

DRAW_CHUNK = 256
GROUP_DECIMALS = 6


@dataclass(frozen=True)
class PredictionSet:
    p: np.ndarray
    source: str
    ids: np.ndarray | None = None

    def __len__(self):
        return len(self.p)


def predict(layout: ValidatedLayout, trace: Trace, table: InstanceTable, nu: float, *,
            chunk: int = DRAW_CHUNK) -> PredictionSet:
    """Posterior-predictive success probability per instance.

    The probability is the mean over retained draws of the observed node's
    Bernoulli parameter, with ``nu`` the constant estimated on training data.
    """
    if list(trace.names) != layout.parameter_names or (
            trace.layout_name is not None and trace.layout_name != layout.name):
        raise LayoutMismatch(
            f"trace parameters {trace.names} do not match layout {layout.name!r} "
            f"parameters {layout.parameter_names}")
    X = table.design_matrix(layout)
    prog = P.compile_layout(layout)
    draws = trace.pooled()
    total = np.zeros(X.shape[0])
    obs = layout.observed.name
    for start in range(0, draws.shape[0], chunk):
        block = draws[start:start + chunk]
        vals = evaluate_table(layout, block, X, nu, program=prog)
        total += vals[obs].sum(axis=0)
    return PredictionSet(total / draws.shape[0], "posterior-predictive", table.ids)


@dataclass(frozen=True)
class AggregateBaseline:
    """Constant predictor at the training success rate."""

    rate: float

    def predict(self, n_or_table) -> PredictionSet:
        n = n_or_table if isinstance(n_or_table, int) else len(n_or_table)
        ids = None if isinstance(n_or_table, int) else n_or_table.ids
        return PredictionSet(np.full(n, self.rate), "aggregate-baseline", ids)


def aggregate_baseline(train_outcomes) -> AggregateBaseline:
    y = np.asarray(train_outcomes, dtype=float)
    if y.size == 0:
        raise EmptyOutcomes("aggregate baseline needs at least one outcome")
    return AggregateBaseline(float(y.mean()))


@dataclass(frozen=True)
class BrierReport:
    brier: float
    calibration: float
    refinement: float
    n: int

    def to_dict(self) -> dict:
        return {"brier": self.brier, "calibration": self.calibration,
                "refinement": self.refinement, "n": self.n}


def brier(preds, outcomes) -> BrierReport:
    """Brier score with the value-grouped calibration/refinement split.

    Instances are grouped by prediction rounded to six decimals.  For each
    group ``k`` with ``n_k`` members, mean forecast ``p_k`` and observed rate
    ``o_k``, calibration is ``sum(n_k / n * (p_k - o_k)**2)`` and refinement
    ``sum(n_k / n * o_k * (1 - o_k))``.
    """
    p = np.asarray(getattr(preds, "p", preds), dtype=float).reshape(-1)
    y = np.asarray(outcomes, dtype=float).reshape(-1)
    if p.shape != y.shape:
        raise LengthMismatch(f"{p.size} predictions for {y.size} outcomes")
    if p.size == 0:
        raise LengthMismatch("brier score needs at least one instance")
    n = p.size
    score = float(np.mean((p - y) ** 2))
    _, inverse, counts = np.unique(np.round(p, GROUP_DECIMALS), return_inverse=True, return_counts=True)
    p_bar = np.bincount(inverse, weights=p) / counts
    o_bar = np.bincount(inverse, weights=y) / counts
    w = counts / n
    cal = float(np.sum(w * (p_bar - o_bar) ** 2))
    ref = float(np.sum(w * o_bar * (1.0 - o_bar)))
    return BrierReport(score, cal, ref, n)


def _as_frame(x) -> pd.DataFrame:
    return x if isinstance(x, pd.DataFrame) else pd.DataFrame.from_dict(x, orient="index")


def rmse_profiles(inferred, truth, subset=None) -> dict[str, float]:
    """Per-ability RMSE between normalised inferred means and ground truth.

    ``inferred`` and ``truth`` are frames (or nested mappings) indexed by
    agent with one column per ability; only shared abilities are scored.
    """
    inf, tru = _as_frame(inferred), _as_frame(truth)
    agents = list(tru.index if subset is None else subset)
    agents = [a for a in agents if a in inf.index and a in tru.index]
    if not agents:
        raise SubsetEmpty("no agents to score")
    abilities = [c for c in tru.columns if c in inf.columns]
    diff = inf.loc[agents, abilities].astype(float) - tru.loc[agents, abilities].astype(float)
    return {a: float(np.sqrt(np.mean(diff[a].to_numpy() ** 2))) for a in abilities}


def n_test_for(n: int, frac: float) -> int:
    """``round(n * frac)`` with ties rounded down, at least one."""
    return max(1, math.ceil(n * frac - 0.5))


def split(table: InstanceTable, test_frac: float = 0.2, seed: int = 0) -> tuple[InstanceTable, InstanceTable]:
    if not 0.0 < test_frac < 1.0:
        raise ValueError("test_frac must lie in (0, 1)")
    n = len(table)
    n_test = n_test_for(n, test_frac)
    if n_test >= n:
        raise TooFewInstances(f"{n} instances leave no training data at test_frac={test_frac}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**64 - 1)])))
    perm = rng.permutation(n)
    test_idx, train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    return table.take(train_idx), table.take(test_idx)


@dataclass
class RepeatReport:
    model: list[BrierReport] = field(default_factory=list)
    aggregate: list[BrierReport] = field(default_factory=list)
    nu: list[float] = field(default_factory=list)
    nu_mode: str = DEFAULT_NU_MODE

    @staticmethod
    def _mean(reports, attr):
        return float(np.mean([getattr(r, attr) for r in reports]))

    def to_dict(self) -> dict:
        out = {"repeats": len(self.model), "nu_mode": self.nu_mode}
        for label, reps in (("ML", self.model), ("Agg", self.aggregate)):
            out[f"{label} BS"] = self._mean(reps, "brier")
            out[f"{label} Cal"] = self._mean(reps, "calibration")
            out[f"{label} Ref"] = self._mean(reps, "refinement")
        out["per_repeat"] = [
            {"ML": m.to_dict(), "Agg": a.to_dict(), "nu": nu}
            for m, a, nu in zip(self.model, self.aggregate, self.nu)
        ]
        return out

    @property
    def model_brier(self) -> float:
        return self._mean(self.model, "brier")

    @property
    def aggregate_brier(self) -> float:
        return self._mean(self.aggregate, "brier")


def evaluate_split(layout, train: InstanceTable, test: InstanceTable, config: SamplerConfig,
                   nu_mode: str = DEFAULT_NU_MODE, backend: str = "auto"):
    """Fit on ``train``, score both predictors on ``test``.

    Returns ``(model_report, aggregate_report, nu, profile, trace)``.
    """
    from .inference import infer_profile

    profile, trace = infer_profile(layout, train, config, nu_mode=nu_mode, backend=backend)
    nu = profile.config["nu"]
    p_model = predict(layout, trace, test.without_outcomes(), nu)
    p_agg = aggregate_baseline(train.outcomes).predict(test)
    return brier(p_model, test.outcomes), brier(p_agg, test.outcomes), nu, profile, trace


def repeat_eval(layout: ValidatedLayout, table: InstanceTable, frac: float = 0.2, repeats: int = 15,
                seed: int = 0, config: SamplerConfig | None = None, nu_mode: str = DEFAULT_NU_MODE,
                backend: str = "auto") -> RepeatReport:
    """Mean Brier of the layout and the aggregate baseline over repeated splits.

    Each repeat draws a fresh split, re-infers the profile on its training
    part and estimates the noise constant from the training outcomes only.
    """
    if not table.has_outcomes:
        raise EmptyOutcomes("evaluation needs outcomes")
    config = config or SamplerConfig()
    report = RepeatReport(nu_mode=nu_mode)
    for r in range(repeats):
        train, test = split(table, frac, derive_seed(seed, f"split:{r}"))
        cfg = SamplerConfig(**{**config.to_dict(), "seed": derive_seed(seed, f"infer:{r}")})
        m, a, nu, _, _ = evaluate_split(layout, train, test, cfg, nu_mode, backend)
        report.model.append(m)
        report.aggregate.append(a)
        report.nu.append(nu)
    return report


# -- characteristic grids ---------------------------------------------------
@dataclass(frozen=True)
class GridTable:
    x_dim: str
    y_dim: str
    x_edges: np.ndarray
    y_edges: np.ndarray
    rate: np.ndarray  # (bins_x, bins_y); nan where empty
    count: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for i in range(len(self.x_edges) - 1):
            for j in range(len(self.y_edges) - 1):
                rows.append({
                    "x_bin": i, "y_bin": j,
                    "x_lo": self.x_edges[i], "x_hi": self.x_edges[i + 1],
                    "y_lo": self.y_edges[j], "y_hi": self.y_edges[j + 1],
                    "rate": self.rate[i, j], "count": int(self.count[i, j]),
                })
        return pd.DataFrame(rows)

    def to_csv(self, path: str | Path) -> None:
        # empty cells serialise as an empty field
        self.to_frame().to_csv(path, index=False, na_rep="", lineterminator="\n")


def _bin(values: np.ndarray, lo: float, hi: float, bins: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(lo, hi, bins + 1)
    if hi <= lo:
        return edges, np.zeros(len(values), dtype=int)
    idx = np.floor((values - lo) / (hi - lo) * bins).astype(int)
    return edges, np.clip(idx, 0, bins - 1)


def characteristic_grid(table: InstanceTable, dim_x: str, dim_y: str, bins_x: int = 5, bins_y: int = 5,
                        layout: ValidatedLayout | None = None) -> GridTable:
    """Success rate and count per cell of an equal-width 2-D binning.

    Bin ranges come from the layout's declared meta-feature ranges when a
    layout is given, otherwise from the observed data.
    """
    if not table.has_outcomes:
        raise EmptyOutcomes("grid needs outcomes")
    if bins_x < 1 or bins_y < 1:
        raise ValueError("bins must be >= 1")
    cols = []
    for dim, bins in ((dim_x, bins_x), (dim_y, bins_y)):
        if dim not in table.columns:
            raise UnknownDimension(f"no dimension {dim!r} in the table")
        v = pd.to_numeric(pd.Series(table.column(dim)), errors="coerce").to_numpy(float)
        if layout is not None and dim in layout.by_name and layout.node(dim).range is not None:
            lo, hi = layout.node(dim).range
        else:
            lo, hi = (float(np.nanmin(v)), float(np.nanmax(v))) if len(v) else (0.0, 1.0)
        cols.append(_bin(v, lo, hi, bins))
    (xe, xi), (ye, yi) = cols
    count = np.zeros((bins_x, bins_y), dtype=int)
    wins = np.zeros((bins_x, bins_y))
    np.add.at(count, (xi, yi), 1)
    np.add.at(wins, (xi, yi), table.outcomes)
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(count > 0, wins / np.maximum(count, 1), np.nan)
    return GridTable(dim_x, dim_y, xe, ye, rate, count)
