"""Scikit-learn style estimators over instance tables."""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .density import DEFAULT_NU_MODE, parse_nu_mode
from .dsl import load_layout
from .evaluation import aggregate_baseline, brier, predict
from .inference import infer_profile
from .layout import ValidatedLayout, uniform_over_range
from .sampler import SamplerConfig
from .table import OUTCOME, InstanceTable


def check_instance_table(X, y=None, *, require_outcomes: bool = False) -> InstanceTable:
    """Coerce ``X`` (table or frame) and optional ``y`` into an ``InstanceTable``.

    Outcomes in ``y`` take precedence over a ``success`` column in ``X``.
    """
    if isinstance(X, InstanceTable):
        table = X
    elif isinstance(X, pd.DataFrame):
        table = InstanceTable(X)
    elif isinstance(X, dict):
        table = InstanceTable(pd.DataFrame(X))
    else:
        raise TypeError(f"expected an InstanceTable or DataFrame, got {type(X).__name__}")
    if y is not None:
        table = table.with_outcomes(np.asarray(y).reshape(-1))
    if require_outcomes and not table.has_outcomes:
        raise ValueError(f"outcomes are required: pass y or a {OUTCOME!r} column")
    return table


def resolve_layout(layout, uniform_priors=()) -> ValidatedLayout:
    layout = load_layout(layout)
    return uniform_over_range(layout, uniform_priors) if uniform_priors else layout


class MeasurementLayoutClassifier(ClassifierMixin, BaseEstimator):
    """Bayesian measurement-layout model of one agent.

    ``fit`` samples the posterior of the cognitive profile from observed
    outcomes; ``predict_proba`` averages the observed node over draws.

    Parameters
    ----------
    layout : str, path or layout
        Builtin name (``"aaio"``, ``"op"``), ``.mlayout`` path or layout object.
    chains, tune, draws, target_accept, max_treedepth, algorithm, seed
        Sampler settings.
    nu_mode : str
        Noise-fallback constant estimation: ``one-minus-mean``, ``mean``
        or ``fixed:<x>``.
    uniform_priors : tuple of str
        Parameters whose priors are replaced by a uniform over their range.
    backend : {"auto", "numpy", "numba"}
    """

    def __init__(self, layout="aaio", *, chains=2, tune=1000, draws=1000, target_accept=0.8,
                 max_treedepth=10, algorithm="nuts", nu_mode=DEFAULT_NU_MODE, seed=0,
                 uniform_priors=(), backend="auto"):
        self.layout = layout
        self.chains = chains
        self.tune = tune
        self.draws = draws
        self.target_accept = target_accept
        self.max_treedepth = max_treedepth
        self.algorithm = algorithm
        self.nu_mode = nu_mode
        self.seed = seed
        self.uniform_priors = uniform_priors
        self.backend = backend

    def _config(self) -> SamplerConfig:
        return SamplerConfig(chains=self.chains, tune=self.tune, draws=self.draws,
                             target_accept=self.target_accept, max_treedepth=self.max_treedepth,
                             seed=self.seed, algorithm=self.algorithm)

    def fit(self, X, y=None):
        table = check_instance_table(X, y, require_outcomes=True)
        parse_nu_mode(self.nu_mode)
        self.layout_ = resolve_layout(self.layout, tuple(self.uniform_priors))
        self.profile_, self.trace_ = infer_profile(self.layout_, table, self._config(),
                                                   nu_mode=self.nu_mode, backend=self.backend)
        self.nu_ = float(self.profile_.config["nu"])
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = len(self.layout_.meta_features)
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "trace_")
        table = check_instance_table(X)
        p = predict(self.layout_, self.trace_, table.without_outcomes(), self.nu_).p
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int8)

    def brier_report(self, X, y=None):
        table = check_instance_table(X, y, require_outcomes=True)
        return brier(self.predict_proba(table)[:, 1], table.outcomes)


class AggregateBaselineClassifier(ClassifierMixin, BaseEstimator):
    """Predicts the training success rate for every instance."""

    def fit(self, X, y=None):
        table = check_instance_table(X, y, require_outcomes=True)
        self.baseline_ = aggregate_baseline(table.outcomes)
        self.rate_ = self.baseline_.rate
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "baseline_")
        p = self.baseline_.predict(len(check_instance_table(X))).p
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int8)

    def brier_report(self, X, y=None):
        table = check_instance_table(X, y, require_outcomes=True)
        return brier(self.predict_proba(table)[:, 1], table.outcomes)
