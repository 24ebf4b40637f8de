"""Replication machinery: per-replicate random streams, pooled moments and
block-parallel execution.

Replicate ``r`` of a run with master seed ``s`` always draws from the same
Philox stream, keyed by ``SeedSequence(s, spawn_key=(r,))``.  Replicates are
grouped into fixed-size blocks whose statistics are merged in block order, so
results do not depend on how many worker processes computed the blocks.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np

BLOCK_SIZE = 64

# spawn-key namespace for seeds derived from a master seed (kept away from
# the replicate indices, which are small non-negative integers)
_DERIVED_KEY = 2**31


class NumericalError(ArithmeticError):
    """A simulated loss or statistic came out non-finite."""


def check_seed(seed) -> int:
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return seed


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for replicate ``index`` of master ``seed``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Integer seed for an independent sub-experiment labelled by ``key``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=(_DERIVED_KEY, *map(int, key)))
    hi, lo = ss.generate_state(2, dtype=np.uint64)
    return (int(hi) << 64) | int(lo)


def config_digest(**params: Any) -> str:
    """Stable short hash of a parameter mapping."""
    blob = json.dumps(params, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RunningStats:
    """Count, mean and sum of squared deviations, merged with Chan's update."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, values) -> "RunningStats":
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0:
            return cls()
        mean = float(v.mean())
        return cls(int(v.size), mean, float(((v - mean) ** 2).sum()))

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.count == 0:
            return RunningStats(self.count, self.mean, self.m2)
        if self.count == 0:
            return RunningStats(other.count, other.mean, other.m2)
        n = self.count + other.count
        d = other.mean - self.mean
        mean = self.mean + d * other.count / n
        m2 = self.m2 + other.m2 + d * d * self.count * other.count / n
        return RunningStats(n, mean, m2)

    def push(self, values) -> "RunningStats":
        merged = self.merge(RunningStats.of(values))
        self.count, self.mean, self.m2 = merged.count, merged.mean, merged.m2
        return self

    @property
    def var(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else math.nan

    @property
    def sd(self) -> float:
        return math.sqrt(self.var)

    @property
    def se(self) -> float:
        return self.sd / math.sqrt(self.count) if self.count > 1 else math.nan


def merge_all(stats: Iterable[RunningStats]) -> RunningStats:
    out = RunningStats()
    for s in stats:
        out = out.merge(s)
    return out


def block_ranges(reps: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int]]:
    return [(a, min(a + block_size, reps)) for a in range(0, reps, block_size)]


def _call_block(args):
    func, start, stop = args
    return func(start, stop)


def run_blocks(
    func: Callable[[int, int], Any],
    reps: int,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> list:
    """Evaluate ``func(start, stop)`` over all replicate blocks, in block order.

    ``func`` must be picklable when ``workers > 1`` (a module-level function
    or a ``functools.partial`` of one).
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    blocks = block_ranges(reps, block_size)
    if workers <= 1 or len(blocks) == 1:
        return [func(a, b) for a, b in blocks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call_block, [(func, a, b) for a, b in blocks]))


def seeds_for_grid(seed: int, size: int) -> Sequence[int]:
    """Seeds for the points of a parameter grid; the first point keeps ``seed``."""
    return [check_seed(seed)] + [derive_seed(seed, j) for j in range(1, size)]
