"""Unconstrained log-posterior of a layout given an instance table."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, expit

from . import _jit
from . import program as P
from .errors import EmptyOutcomes, NonFiniteNode
from .layout import NodeKind, ValidatedLayout
from .priors import constrain, inverse_transform, transform, unconstrain
from .table import RANGE_TOL, InstanceTable

__all__ = [
    "DensityFn",
    "NodeRangeWarning",
    "compute_nu",
    "eval_nodes",
    "evaluate_table",
    "inverse_transform",
    "log_posterior",
    "parse_nu_mode",
    "transform",
]

NU_MODES = ("one-minus-mean", "mean")
DEFAULT_NU_MODE = "one-minus-mean"
# below this many instances the numpy tape beats kernel compilation
JIT_MIN_ROWS = 40


class NodeRangeWarning(UserWarning):
    """A derived node left its declared range."""


def parse_nu_mode(mode: str) -> tuple[str, float | None]:
    if mode in NU_MODES:
        return mode, None
    if mode.startswith("fixed:"):
        try:
            value = float(mode[len("fixed:"):])
        except ValueError:
            raise ValueError(f"bad nu mode {mode!r}") from None
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"fixed nu must lie in [0, 1], got {value}")
        return "fixed", value
    raise ValueError(f"unknown nu mode {mode!r}; use one-minus-mean, mean or fixed:<x>")


def compute_nu(outcomes, mode: str = DEFAULT_NU_MODE) -> float:
    """Noise-fallback constant.

    The default is ``1 - mean(outcomes)``; ``mean`` uses the success rate itself
    and ``fixed:x`` a given constant.
    """
    kind, value = parse_nu_mode(mode)
    if kind == "fixed":
        return value
    y = np.asarray(outcomes, dtype=float)
    if y.size == 0:
        raise EmptyOutcomes("cannot estimate nu from an empty outcome vector")
    m = float(np.mean(y))
    return 1.0 - m if kind == "one-minus-mean" else m


@dataclass(frozen=True)
class _PriorBlock:
    """Vectorised log prior plus log-Jacobian on the unconstrained scale."""

    bounded: np.ndarray
    a: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    width: np.ndarray
    log_norm: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    @classmethod
    def build(cls, priors):
        k = len(priors)
        bounded = np.array([p.bounded for p in priors], dtype=bool)
        a, b, lo, width, mu, sigma = (np.zeros(k) for _ in range(6))
        for j, p in enumerate(priors):
            if p.bounded:
                a[j], b[j] = p.alpha, p.beta
                lo[j], width[j] = p.lo, p.hi - p.lo
            else:
                mu[j], sigma[j] = p.mu, p.sigma
        log_norm = np.where(bounded, betaln(np.where(bounded, a, 1), np.where(bounded, b, 1)),
                            np.log(np.where(bounded, 1, sigma)) + 0.5 * math.log(2 * math.pi))
        return cls(bounded, a, b, lo, width, log_norm, mu, sigma)

    def __call__(self, u):
        """Return ``(x, dx/du, log prior + log |J|, its gradient)``."""
        s = expit(u)
        ls, lsm = -np.logaddexp(0.0, -u), -np.logaddexp(0.0, u)
        z = np.where(self.bounded, 0.0, (u - self.mu) / np.where(self.bounded, 1.0, self.sigma))
        lp = np.where(self.bounded, self.a * ls + self.b * lsm, -0.5 * z * z) - self.log_norm
        glp = np.where(self.bounded, self.a * (1.0 - s) - self.b * s,
                       -z / np.where(self.bounded, 1.0, self.sigma))
        x = np.where(self.bounded, self.lo + self.width * s, u)
        dx = np.where(self.bounded, self.width * s * (1.0 - s), 1.0)
        return x, dx, float(np.sum(lp)), glp


class DensityFn:
    """Log-posterior over unconstrained profile parameters.

    Parameters
    ----------
    layout : ValidatedLayout
    table : InstanceTable
        Must carry outcomes; an empty table gives the prior alone.
    nu : float
        Noise-fallback constant substituted for ``nu`` in expressions.
    backend : {"auto", "numpy", "numba"}
        ``auto`` uses the compiled kernel for tables of
        ``JIT_MIN_ROWS`` rows or more.

    Calling the object maps ``theta`` to ``(logp, grad)``.  It holds no
    mutable state, so concurrent calls are safe.
    """

    def __init__(self, layout: ValidatedLayout, table: InstanceTable, nu: float, backend: str = "auto"):
        if not table.has_outcomes:
            raise EmptyOutcomes("inference needs a table with a 'success' column")
        self.layout = layout
        self.nu = float(nu)
        self.program = P.compile_layout(layout)
        self.X = table.design_matrix(layout)
        self.y = np.ascontiguousarray(table.outcomes, dtype=float)
        self.names = layout.parameter_names
        self.priors = [n.prior for n in layout.parameters]
        self._prior = _PriorBlock.build(self.priors)
        if backend == "auto":
            backend = "numba" if _jit.available() and len(self.y) >= JIT_MIN_ROWS else "numpy"
        if backend not in ("numpy", "numba"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self._kernel = _jit.get_kernel(self.program) if backend == "numba" else None

    @property
    def n_params(self) -> int:
        return len(self.names)

    @property
    def n(self) -> int:
        return len(self.y)

    def loglik(self, x) -> tuple[float, np.ndarray]:
        """Log-likelihood and gradient at constrained parameters ``x``."""
        x = np.asarray(x, dtype=float)
        if self._kernel is not None:
            ll, g, bad = _jit.run_kernel(self._kernel, x, self.X, self.y, self.nu)
            if bad >= 0:
                vals = P.forward(self.program, x, self.X[bad:bad + 1], self.nu)
                P.check_finite(self.program, vals, self.layout)
                raise NonFiniteNode(self.program.observed)
            return float(ll), g
        return P.loglik_grad(self.program, x, self.X, self.y, self.nu, self.layout)

    def __call__(self, theta) -> tuple[float, np.ndarray]:
        u = np.asarray(theta, dtype=float)
        x, dx, lp, glp = self._prior(u)
        ll, gx = self.loglik(x)
        return ll + lp, gx * dx + glp

    def log_prior(self, theta) -> float:
        return self._prior(np.asarray(theta, dtype=float))[2]

    def constrain(self, theta) -> np.ndarray:
        return constrain(self.priors, theta)

    def unconstrain(self, x) -> np.ndarray:
        return unconstrain(self.priors, x)

    def sample_prior(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([p.sample(rng) for p in self.priors], dtype=float)


def log_posterior(density: DensityFn, theta) -> tuple[float, np.ndarray]:
    return density(theta)


def _param_vector(layout: ValidatedLayout, theta) -> np.ndarray:
    if isinstance(theta, dict):
        return np.array([float(theta[name]) for name in layout.parameter_names])
    return np.asarray(theta, dtype=float)


def evaluate_table(layout: ValidatedLayout, theta, table_or_X, nu: float, *,
                   check_ranges: bool = True, program: P.Program | None = None) -> dict:
    """Every node over a whole table at constrained parameters.

    ``theta`` is a mapping or a vector of shape ``(P,)`` or ``(D, P)``.  The
    observed node's entry is the clamped Bernoulli parameter.
    """
    prog = program or P.compile_layout(layout)
    X = table_or_X.design_matrix(layout) if isinstance(table_or_X, InstanceTable) else np.asarray(table_or_X, float)
    x = _param_vector(layout, theta)
    vals = P.forward(prog, x, X, nu)
    P.check_finite(prog, vals, layout)
    shape = (x.shape[0], X.shape[0]) if x.ndim == 2 else (X.shape[0],)
    out = {}
    for name in layout.order:
        out[name] = np.broadcast_to(np.asarray(vals[prog.node_slots[name]], dtype=float), shape)
    obs = layout.observed.name
    if check_ranges:
        _warn_ranges(layout, out)
    out[obs] = P.clamp(out[obs])
    return out


def _warn_ranges(layout: ValidatedLayout, values: dict) -> None:
    for node in layout.of_kind(NodeKind.DERIVED):
        if node.range is None:
            continue
        lo, hi = node.range
        v = values[node.name]
        if np.any(v < lo - RANGE_TOL) or np.any(v > hi + RANGE_TOL):
            warnings.warn(f"node {node.name!r} left its declared range [{lo}, {hi}]",
                          NodeRangeWarning, stacklevel=3)


def eval_nodes(layout: ValidatedLayout, theta, row, nu: float = 0.5) -> dict[str, float]:
    """All node values for one instance.

    ``row`` maps meta-feature names to values.  The observed node maps to the
    clamped Bernoulli parameter.
    """
    X = np.array([[float(row[n.name]) for n in layout.meta_features]])
    vals = evaluate_table(layout, theta, X, nu)
    return {name: float(v[0]) for name, v in vals.items()}

