"""Instance tables: per-instance meta-feature values plus optional outcomes."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from .errors import LengthMismatch, MissingColumn, ValueOutOfRange
from .layout import ValidatedLayout

OUTCOME = "success"
ID = "instance_id"
RANGE_TOL = 1e-9


class InstanceTable:
    """Meta-feature columns and, for inference, a binary outcome vector.

    Parameters
    ----------
    frame : DataFrame or mapping
        One column per feature.  Columns the layout does not use are kept
        (paradigm labels and out-of-layout features travel with the rows).
    outcomes : array-like of {0, 1}, optional
        Absent for prediction-only tables.
    ids : array-like, optional
        Instance identifiers; defaults to ``0..N-1``.
    """

    def __init__(self, frame, outcomes=None, ids=None):
        frame = pd.DataFrame(frame).reset_index(drop=True)
        if OUTCOME in frame.columns:
            if outcomes is None:
                outcomes = frame[OUTCOME].to_numpy()
            frame = frame.drop(columns=OUTCOME)
        if ID in frame.columns:
            if ids is None:
                ids = frame[ID].to_numpy()
            frame = frame.drop(columns=ID)
        self.frame = frame
        n = len(frame)
        if outcomes is not None:
            y = np.asarray(outcomes, dtype=float).reshape(-1)
            if y.shape[0] != n:
                raise LengthMismatch(f"{y.shape[0]} outcomes for {n} instances")
            if not np.all((y == 0) | (y == 1)):
                raise ValueOutOfRange("outcomes must be 0 or 1")
            outcomes = y.astype(np.int8)
        self.outcomes = outcomes
        self.ids = np.arange(n) if ids is None else np.asarray(ids)
        if len(self.ids) != n:
            raise LengthMismatch(f"{len(self.ids)} ids for {n} instances")

    def __len__(self) -> int:
        return len(self.frame)

    def __repr__(self):
        kind = "with outcomes" if self.has_outcomes else "prediction-only"
        return f"InstanceTable(n={len(self)}, columns={list(self.frame.columns)}, {kind})"

    @property
    def n(self) -> int:
        return len(self)

    @property
    def has_outcomes(self) -> bool:
        return self.outcomes is not None

    @property
    def columns(self) -> list[str]:
        return list(self.frame.columns)

    def column(self, name: str) -> np.ndarray:
        if name not in self.frame.columns:
            raise MissingColumn(name)
        return self.frame[name].to_numpy()

    def take(self, idx) -> "InstanceTable":
        idx = np.asarray(idx, dtype=int)
        y = None if self.outcomes is None else self.outcomes[idx]
        return InstanceTable(self.frame.iloc[idx], y, self.ids[idx])

    def with_outcomes(self, outcomes) -> "InstanceTable":
        return InstanceTable(self.frame, outcomes, self.ids)

    def without_outcomes(self) -> "InstanceTable":
        return InstanceTable(self.frame, None, self.ids)

    def success_rate(self) -> float:
        if not self.has_outcomes or len(self) == 0:
            return float("nan")
        return float(np.mean(self.outcomes))

    def design_matrix(self, layout: ValidatedLayout, *, check: bool = True) -> np.ndarray:
        """``(N, M)`` float matrix of the layout's meta-features, in declaration order."""
        feats = layout.meta_features
        X = np.empty((len(self), len(feats)), dtype=float)
        for j, node in enumerate(feats):
            col = pd.to_numeric(pd.Series(self.column(node.name)), errors="coerce").to_numpy(float)
            if check:
                _check_values(node, col)
            X[:, j] = col
        return np.ascontiguousarray(X)

    def to_frame(self) -> pd.DataFrame:
        out = self.frame.copy()
        out.insert(0, ID, self.ids)
        if self.has_outcomes:
            out[OUTCOME] = self.outcomes.astype(int)
        return out

    def to_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")

    @classmethod
    def read_csv(cls, path: str | Path) -> "InstanceTable":
        return cls(pd.read_csv(path, float_precision="round_trip"))


def _check_values(node, col: np.ndarray) -> None:
    if not np.all(np.isfinite(col)):
        raise ValueOutOfRange(f"column {node.name!r} has missing or non-numeric values")
    lo, hi = node.range
    if node.levels is not None:
        levels = np.asarray(node.levels)
        ok = np.any(np.abs(col[:, None] - levels[None, :]) <= RANGE_TOL, axis=1)
        if not ok.all():
            bad = col[~ok][0]
            raise ValueOutOfRange(f"column {node.name!r} has value {bad} outside set {list(node.levels)}")
    elif np.any(col < lo - RANGE_TOL) or np.any(col > hi + RANGE_TOL):
        bad = col[(col < lo - RANGE_TOL) | (col > hi + RANGE_TOL)][0]
        raise ValueOutOfRange(f"column {node.name!r} has value {bad} outside [{lo}, {hi}]")
