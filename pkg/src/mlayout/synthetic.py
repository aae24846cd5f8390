"""Synthetic instance generators and simulated agents.

Object-permanence instances come in four paradigms (cup, grid, cv, basic),
each split into instances that need object permanence and controls that do
not.  Thirty rule-based agents produce pass/fail outcomes on those tables,
and :func:`simulate_from_profile` draws outcomes from a layout's own forward
model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from .density import DEFAULT_NU_MODE, evaluate_table, parse_nu_mode
from .errors import RangeViolation, UnknownAgent
from .layout import ValidatedLayout
from .table import InstanceTable

RULES_VERSION = "1"
PARADIGMS = ("cup", "grid", "cv", "basic")
#: (requires OP, controls) per paradigm
DEFAULT_COUNTS = {"cup": (359, 239), "grid": (191, 239), "cv": (36, 1195), "basic": (0, 521)}
LAYOUT_FEATURES = (
    "rampPresence", "lavaPresence", "platformPresence", "goalDistance", "goalSize",
    "rightleftPosition", "occluderPresence", "timeUnderOcc", "numberOfPositions",
)
EXTRA_FEATURES = ("rewardVisibility", "transparentWalls", "occluderRedness",
                  "occluderGreenness", "occluderBlueness")
ABILITIES = ("OPAbility", "flatNavAbility", "visualAbility", "lavaAbility",
             "platformAbility", "rampAbility", "memoryAbility")


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**64 - 1), *stream])))


def scale_counts(total: int, counts: dict | None = None) -> dict:
    """Rescale per-paradigm counts to roughly ``total`` instances, keeping proportions."""
    counts = counts or DEFAULT_COUNTS
    grand = sum(a + b for a, b in counts.values())
    return {k: (round(a * total / grand), round(b * total / grand)) for k, (a, b) in counts.items()}


def _block(rng: np.random.Generator, paradigm: str, n: int, op: bool) -> pd.DataFrame:
    if n == 0:
        return pd.DataFrame()
    d = {
        "paradigm": np.full(n, paradigm),
        "requiresOP": np.full(n, int(op)),
        "goalDistance": rng.uniform(0.0, 56.0, n),
        "goalSize": rng.uniform(0.5, 4.0, n),
        "rightleftPosition": rng.choice([-1, 0, 1], n).astype(float),
        "transparentWalls": rng.integers(0, 2, n),
    }
    half = lambda: rng.integers(0, 2, n).astype(float)  # noqa: E731
    if paradigm == "cup":
        d.update(numberOfPositions=np.full(n, 3.0), rampPresence=np.ones(n),
                 platformPresence=np.zeros(n), lavaPresence=half())
    elif paradigm == "grid":
        d.update(numberOfPositions=rng.choice([4.0, 8.0, 12.0], n), rampPresence=np.ones(n),
                 platformPresence=np.ones(n), lavaPresence=half())
    elif paradigm == "cv":
        d.update(numberOfPositions=np.full(n, 2.0), rampPresence=half(),
                 platformPresence=np.ones(n), lavaPresence=half())
    else:
        d.update(numberOfPositions=np.ones(n), rampPresence=half(),
                 platformPresence=np.zeros(n), lavaPresence=half())
    if op:
        d.update(
            occluderPresence=np.ones(n),
            timeUnderOcc=4.0 - rng.uniform(0.0, 4.0, n),  # in (0, 4]
            occluderRedness=rng.integers(0, 256, n),
            occluderGreenness=rng.integers(0, 256, n),
            occluderBlueness=rng.integers(0, 256, n),
            rewardVisibility=np.zeros(n, dtype=int),
        )
    else:
        zeros = np.zeros(n, dtype=int)
        d.update(occluderPresence=np.zeros(n), timeUnderOcc=np.zeros(n), occluderRedness=zeros,
                 occluderGreenness=zeros, occluderBlueness=zeros, rewardVisibility=np.ones(n, dtype=int))
    d["deflected"] = (rng.integers(0, 2, n) if (paradigm == "cv" and op) else np.zeros(n, dtype=int))
    return pd.DataFrame(d)


def gen_op_instances(counts: dict | None = None, seed: int = 0) -> InstanceTable:
    """Object-permanence instances, deterministic per ``(counts, seed)``.

    ``counts`` maps paradigm to ``(n_requiring_op, n_controls)``; omitted
    paradigms get no instances.  Defaults reproduce the battery composition.
    """
    counts = DEFAULT_COUNTS if counts is None else counts
    blocks = []
    for k, paradigm in enumerate(PARADIGMS):
        n_op, n_ctl = counts.get(paradigm, (0, 0))
        if n_op < 0 or n_ctl < 0:
            raise ValueError("counts must be >= 0")
        rng = _rng(seed, k)
        blocks += [_block(rng, paradigm, int(n_op), True), _block(rng, paradigm, int(n_ctl), False)]
    frame = pd.concat([b for b in blocks if len(b)], ignore_index=True)
    cols = ["paradigm", "requiresOP", "deflected", *LAYOUT_FEATURES, *EXTRA_FEATURES]
    return InstanceTable(frame[cols])


def gen_aaio_instances(n: int = 69, seed: int = 0) -> InstanceTable:
    """Uniform draws over the four navigation/visual meta-features."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed, 1000)
    return InstanceTable({
        "rewardSize": rng.uniform(0.0, 1.9, n),
        "rewardDistance": rng.uniform(0.0, 5.3, n),
        "rewardBehind": rng.choice([0.0, 0.5, 1.0], n),
        "XPos": rng.choice([-1.0, 0.0, 1.0], n),
    })


# -- agents -----------------------------------------------------------------
@dataclass(frozen=True)
class AgentSpec:
    id: int
    cls: str
    description: str
    rule: Callable[[pd.DataFrame], np.ndarray]
    truth: dict
    included: bool


def _const(p):
    return lambda f: np.full(len(f), p)


def _col(f, name):
    return f[name].to_numpy(float)


def _op(f):
    return f["requiresOP"].to_numpy() == 1


def _par(f, *names):
    return np.isin(f["paradigm"].to_numpy(), names)


def _lava(f):
    return _col(f, "lavaPresence") == 1


def _occ(f):
    return _col(f, "occluderPresence") == 1


def _deflected_cv(f):
    return _par(f, "cv") & _op(f) & (f["deflected"].to_numpy() == 1)


def _agent4(f):
    return np.where(_lava(f) | _par(f, "grid"), 0.15 * 0.3, 0.15)


def _agent10(f):
    grid_op = _par(f, "grid") & _op(f)
    dist = np.minimum(0.6 + 0.1 * np.floor(_col(f, "goalDistance") / 8.0), 0.95)
    return np.where(_lava(f), 0.5, np.where(grid_op, dist, 0.8))


def _agent11(f):
    s = _col(f, "goalSize")
    return np.select([s < 1.0, s < 1.5, s < 2.0, s < 2.5, s < 3.0], [0.1, 0.3, 0.5, 0.7, 0.8], 0.9)


def _side(right, left, centre):
    def rule(f):
        x = _col(f, "rightleftPosition")
        return np.select([x > 0, x < 0], [right, left], centre)
    return rule


def _agent14(f):
    n = _col(f, "numberOfPositions")
    return np.where(_op(f), np.maximum(0.95 - 0.1 * (n - 1.0), 0.2), 0.95)


def _agent17(f):
    t = _col(f, "timeUnderOcc")
    return np.where(t <= 1.0, 0.95, np.maximum(0.95 - 0.3 * (t - 1.0), 0.1))


def _agent18(f):
    other = _col(f, "numberOfPositions") - 1.0
    p = np.select([other > 10, other >= 5, other >= 3], [0.3, 0.6, 0.75], 0.95)
    return np.where(_op(f), p, 0.95)


def _context(paradigms, p_in, p_out):
    def rule(f):
        return np.where(_par(f, "basic", *paradigms), p_in, p_out)
    return rule


def _truth(**overrides):
    base = {a: 1.0 for a in ABILITIES}
    base.update(overrides)
    return base


_ALL = lambda v: {a: v for a in ABILITIES}  # noqa: E731

_AGENTS: list[AgentSpec] = [
    AgentSpec(1, "Reference", "passes every instance", _const(1.0), _ALL(1.0), True),
    AgentSpec(2, "Reference", "passes with probability 0.5", _const(0.5), _ALL(0.5), True),
    AgentSpec(3, "Reference", "passes with probability 0.1", _const(0.1), _ALL(0.0), True),
    AgentSpec(4, "Reference", "random walker: 0.15, times 0.3 with lava or on grid tasks", _agent4, _ALL(0.0), True),
    AgentSpec(5, "Reference", "passes with probability 0.9", _const(0.9), _ALL(1.0), True),
    AgentSpec(6, "AchillesHeel", "0.95 unless lava (0.1)",
              lambda f: np.where(_lava(f), 0.1, 0.95), _truth(lavaAbility=0.0), True),
    AgentSpec(7, "AchillesHeel", "0.95 unless lava or an occluder with redness over 200 (0.1)",
              lambda f: np.where(_lava(f) | (_occ(f) & (_col(f, "occluderRedness") > 200)), 0.1, 0.95),
              _truth(lavaAbility=0.0), False),
    AgentSpec(8, "AchillesHeel", "0.95 unless an occluder with greenness over 200 (0.1)",
              lambda f: np.where(_occ(f) & (_col(f, "occluderGreenness") > 200), 0.1, 0.95), _truth(), False),
    AgentSpec(9, "AchillesHeel", "0.95 unless a ramp is present (0.1)",
              lambda f: np.where(_col(f, "rampPresence") == 1, 0.1, 0.95), _truth(rampAbility=0.0), True),
    AgentSpec(10, "AchillesHeel", "lava 0.5; grid OP distance schedule; otherwise 0.8",
              _agent10, _truth(lavaAbility=0.5), False),
    AgentSpec(11, "AchillesHeel", "goal-size step function from 0.1 to 0.9", _agent11,
              _truth(visualAbility=3.5 / 6.0), True),
    AgentSpec(12, "AchillesHeel", "right 0.95, left 0.3, centre 0.6", _side(0.95, 0.3, 0.6), _truth(), True),
    AgentSpec(13, "AchillesHeel", "left 0.95, right 0.3, centre 0.6", _side(0.3, 0.95, 0.6), _truth(), True),
    AgentSpec(14, "AchillesHeel", "confused by many similar positions on OP tasks", _agent14,
              _truth(OPAbility=22.0 / 48.4), True),
    AgentSpec(15, "Fraudster", "last-seen location: fails deflected cv OP instances, passes the rest",
              lambda f: np.where(_deflected_cv(f), 0.0, 1.0), _truth(OPAbility=0.0), False),
    AgentSpec(16, "Fraudster", "last-seen location: 0.25 on deflected cv OP instances, 0.95 otherwise",
              lambda f: np.where(_deflected_cv(f), 0.25, 0.95), _truth(OPAbility=0.0), False),
    AgentSpec(17, "AchillesHeel", "low memory: decays with time under occlusion", _agent17,
              _truth(memoryAbility=2.5 / 4.4), True),
    AgentSpec(18, "AchillesHeel", "confused by more alternative positions", _agent18,
              _truth(OPAbility=44.0 / 48.4), True),
]
for _i, (_pars, _p_in, _p_out) in enumerate([
    (("cv",), 1.0, 0.0), (("cv",), 0.75, 0.1),
    (("grid",), 1.0, 0.0), (("grid",), 0.75, 0.1),
    (("cup",), 1.0, 0.0), (("cup",), 0.75, 0.1),
    (("cv", "grid"), 1.0, 0.0), (("cv", "grid"), 0.75, 0.1),
    (("cup", "grid"), 1.0, 0.0), (("cup", "grid"), 0.75, 0.1),
    (("cv", "cup"), 1.0, 0.0), (("cv", "cup"), 0.75, 0.1),
]):
    _AGENTS.append(AgentSpec(
        19 + _i, "ContextSpecific",
        f"basic and {'+'.join(_pars)} tasks at {_p_in}, other paradigms at {_p_out}",
        _context(_pars, _p_in, _p_out), _truth(OPAbility=0.5), False))

AGENTS: dict[int, AgentSpec] = {a.id: a for a in _AGENTS}
INCLUDED = tuple(a.id for a in _AGENTS if a.included)


def agent(agent_id: int) -> AgentSpec:
    try:
        return AGENTS[int(agent_id)]
    except (KeyError, ValueError, TypeError):
        raise UnknownAgent(f"no agent {agent_id!r}; ids run from 1 to {len(AGENTS)}") from None


def pass_probability(agent_id: int, table: InstanceTable) -> np.ndarray:
    p = np.asarray(agent(agent_id).rule(table.frame), dtype=float)
    return np.clip(p, 0.0, 1.0)


def simulate_agent(agent_id: int, table: InstanceTable, seed: int = 0) -> np.ndarray:
    """Bernoulli outcomes from one agent's rule."""
    p = pass_probability(agent_id, table)
    return (_rng(seed, 2000 + int(agent_id)).uniform(size=len(p)) < p).astype(np.int8)


def ground_truth(agent_ids=None) -> pd.DataFrame:
    """Normalised true abilities per agent.

    A rule maps to the normalised demand at which its pass probability
    crosses 0.5; always-pass and never-pass rules map to 1 and 0.
    """
    ids = list(AGENTS) if agent_ids is None else [agent(a).id for a in agent_ids]
    rows = [{"agent": a, "class": AGENTS[a].cls, "included": AGENTS[a].included, **AGENTS[a].truth}
            for a in ids]
    return pd.DataFrame(rows).set_index("agent")


def _check_profile(layout: ValidatedLayout, theta) -> np.ndarray:
    if isinstance(theta, dict):
        missing = [n for n in layout.parameter_names if n not in theta]
        if missing:
            raise RangeViolation(f"profile lacks parameters {missing}")
        x = np.array([float(theta[n]) for n in layout.parameter_names])
    else:
        x = np.asarray(theta, dtype=float)
    if x.shape != (len(layout.parameter_names),):
        raise RangeViolation(f"expected {len(layout.parameter_names)} parameter values, got shape {x.shape}")
    for value, node in zip(x, layout.parameters):
        lo, hi = node.bounds
        if not (lo <= value <= hi):
            raise RangeViolation(f"{node.name}={value} lies outside [{lo}, {hi}]")
    return x


def forward_probability(layout: ValidatedLayout, theta, table: InstanceTable, nu: float | None = None,
                        nu_mode: str = DEFAULT_NU_MODE) -> tuple[np.ndarray, float]:
    """Per-instance success probability at a fixed profile, and the ``nu`` used.

    Without an explicit ``nu`` the constant is chosen self-consistently: it
    equals what ``nu_mode`` would estimate from the expected outcomes.
    """
    x = _check_profile(layout, theta)
    X = table.design_matrix(layout)
    obs = layout.observed.name

    def q(v):
        return evaluate_table(layout, x, X, v, check_ranges=False)[obs]

    if nu is None:
        kind, fixed = parse_nu_mode(nu_mode)
        if kind == "fixed":
            nu = fixed
        else:
            target = (lambda m: 1.0 - m) if kind == "one-minus-mean" else (lambda m: m)
            g = lambda v: v - target(float(np.mean(q(v))))  # noqa: E731
            lo, hi = g(0.0), g(1.0)
            nu = 0.0 if lo >= 0 else 1.0 if hi <= 0 else brentq(g, 0.0, 1.0, xtol=1e-12)
    return q(float(nu)), float(nu)


def simulate_from_profile(layout: ValidatedLayout, theta, table: InstanceTable, seed: int = 0,
                          nu: float | None = None, nu_mode: str = DEFAULT_NU_MODE) -> np.ndarray:
    """Bernoulli outcomes from the layout's forward model at a fixed profile."""
    p, _ = forward_probability(layout, theta, table, nu, nu_mode)
    return (_rng(seed, 3000).uniform(size=len(p)) < p).astype(np.int8)


def write_meta(path: str | Path, *, counts: dict, seed: int, extra: dict | None = None) -> None:
    meta = {
        "generator": "op-instances",
        "counts": {k: list(v) for k, v in counts.items()},
        "seed": int(seed),
        "agent_rules_version": RULES_VERSION,
        "rule_decisions": {
            "4": "0.15, times 0.3 when lava is present or on grid tasks",
            "10": "grid OP tasks: min(0.6 + 0.1 * floor(goalDistance / 8), 0.95)",
            "11": "goalSize < 1: 0.1, < 1.5: 0.3, < 2: 0.5, < 2.5: 0.7, < 3: 0.8, else 0.9",
            "14": "OP tasks: max(0.95 - 0.1 * (numberOfPositions - 1), 0.2), else 0.95",
            "15-16": "fail on cv OP instances flagged 'deflected'",
            "17": "timeUnderOcc <= 1: 0.95, else max(0.95 - 0.3 * (timeUnderOcc - 1), 0.1)",
        },
        "truth_convention": "normalised demand at which pass probability crosses 0.5; 1 or 0 for always or never",
        **(extra or {}),
    }
    Path(path).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
