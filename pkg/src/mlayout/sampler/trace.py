"""Sampler configuration and the trace container."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

ALGORITHMS = ("nuts", "rwm")


@dataclass(frozen=True)
class SamplerConfig:
    """Settings shared by both samplers.

    Defaults are two chains of 1000 tuning and 1000 retained iterations.
    """

    chains: int = 2
    tune: int = 1000
    draws: int = 1000
    target_accept: float = 0.8
    max_treedepth: int = 10
    seed: int = 0
    algorithm: str = "nuts"

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.tune < 1 or self.draws < 1:
            raise ValueError("tune and draws must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.max_treedepth < 1:
            raise ValueError("max_treedepth must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")

    def to_dict(self) -> dict:
        return asdict(self)


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    """Independent counter-based stream for one chain."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(chain)])
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, purpose: str) -> int:
    """Stable 63-bit sub-seed for a named purpose."""
    h = hashlib.blake2b(f"{int(seed)}:{purpose}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "little") >> 1


@dataclass
class Trace:
    """Retained draws in constrained space.

    ``draws`` has shape ``(chains, draws, params)``; tuning iterations are
    never stored.
    """

    names: list[str]
    draws: np.ndarray
    divergent: np.ndarray
    tree_depth: np.ndarray
    accept_stat: np.ndarray
    step_size: np.ndarray
    algorithm: str = "nuts"
    warnings: list[str] = field(default_factory=list)
    layout_name: str | None = None

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]

    @property
    def divergences(self) -> np.ndarray:
        return self.divergent.sum(axis=1)

    @property
    def divergence_count(self) -> int:
        return int(self.divergent.sum())

    def pooled(self) -> np.ndarray:
        """``(chains * draws, params)`` view, chain-major."""
        return self.draws.reshape(-1, self.draws.shape[-1])

    def param(self, name: str) -> np.ndarray:
        return self.draws[..., self.names.index(name)]

    def to_frame(self) -> pd.DataFrame:
        c, d, _ = self.draws.shape
        df = pd.DataFrame(self.pooled(), columns=self.names)
        df.insert(0, "draw", np.tile(np.arange(d), c))
        df.insert(0, "chain", np.repeat(np.arange(c), d))
        df["divergent"] = self.divergent.reshape(-1).astype(int)
        df["tree_depth"] = self.tree_depth.reshape(-1)
        return df

    def to_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    @classmethod
    def from_frame(cls, df: pd.DataFrame, layout_name: str | None = None) -> "Trace":
        names = [c for c in df.columns if c not in ("chain", "draw", "divergent", "tree_depth")]
        chains = int(df["chain"].max()) + 1
        draws = len(df) // chains
        arr = df[names].to_numpy(float).reshape(chains, draws, len(names))
        div = df["divergent"].to_numpy(bool).reshape(chains, draws) if "divergent" in df else np.zeros((chains, draws), bool)
        depth = df["tree_depth"].to_numpy(int).reshape(chains, draws) if "tree_depth" in df else np.zeros((chains, draws), int)
        return cls(names, arr, div, depth, np.full((chains, draws), np.nan), np.full(chains, np.nan),
                   layout_name=layout_name)

    @classmethod
    def read_csv(cls, path: str | Path, layout_name: str | None = None) -> "Trace":
        return cls.from_frame(pd.read_csv(path, float_precision="round_trip"), layout_name)

    def tobytes(self) -> bytes:
        return self.draws.tobytes() + self.divergent.tobytes() + self.tree_depth.tobytes()
