"""Seeded observation streams for a contiguous range of replicates."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ._kernels import neumaier_cumsum
from .engine import replicate_rng
from .model import FamilySpec


class Trajectory:
    """Sufficient statistics ``phi`` and their running sums for replicates
    ``start .. stop-1`` of master ``seed``, grown lazily in time.

    Arrays have shape (reps, n) for one-dimensional families and
    (reps, n, k) otherwise.  Replicate ``r`` reads only its own stream, so
    any block decomposition of the replicates yields the same values.

    With ``prior_sd`` set, each replicate first draws its own mean
    ``mu_r ~ N(0, prior_sd^2)`` from its stream and ``mu`` is ignored.
    """

    def __init__(
        self,
        family: FamilySpec,
        mu=None,
        seed: int = 0,
        start: int = 0,
        stop: Optional[int] = None,
        prior_sd: Optional[float] = None,
    ):
        stop = start + 1 if stop is None else stop
        if stop <= start:
            raise ValueError("empty replicate range")
        self.family = family
        self.seed = seed
        self.start, self.stop = start, stop
        self._rngs = [replicate_rng(seed, r) for r in range(start, stop)]
        k = family.k
        reps = stop - start
        if prior_sd is not None:
            if not family.gaussian:
                raise ValueError("a Gaussian prior on mu needs a Gaussian family")
            draws = [prior_sd * g.standard_normal(k) for g in self._rngs]
            self.mu = np.array([d[0] for d in draws]) if k == 1 else np.array(draws)
        else:
            if mu is None:
                raise ValueError("mu is required without a prior")
            family.check_mu(mu)
            shape = (reps,) if k == 1 else (reps, k)
            self.mu = np.broadcast_to(np.asarray(mu, dtype=float), shape).copy()
        self._tail = () if k == 1 else (k,)
        self._phi = np.empty((reps, 0) + self._tail)
        self._sums = np.empty((reps, 0) + self._tail)
        self._carry = np.zeros((reps, k))
        self._comp = np.zeros((reps, k))
        self.n = 0

    @property
    def reps(self) -> int:
        return self.stop - self.start

    @property
    def phi(self) -> np.ndarray:
        return self._phi[:, : self.n]

    @property
    def sums(self) -> np.ndarray:
        return self._sums[:, : self.n]

    def extend(self, n: int) -> "Trajectory":
        """Make at least ``n`` observations available."""
        if n <= self.n:
            return self
        extra = n - self.n
        new = np.stack(
            [self.family.sample(mu, g, extra) for mu, g in zip(self.mu, self._rngs)]
        ).astype(float)
        flat = new.reshape(self.reps, extra, -1)
        new_sums = neumaier_cumsum(flat, self._carry, self._comp).reshape(new.shape)
        if self._phi.shape[1] < n:
            cap = max(n, 2 * self._phi.shape[1])
            self._phi = _grow(self._phi, self.n, cap)
            self._sums = _grow(self._sums, self.n, cap)
        self._phi[:, self.n : n] = new
        self._sums[:, self.n : n] = new_sums
        self.n = n
        return self


def _grow(arr: np.ndarray, used: int, cap: int) -> np.ndarray:
    out = np.empty((arr.shape[0], cap) + arr.shape[2:])
    out[:, :used] = arr[:, :used]
    return out


def prefix_sums(prefix) -> np.ndarray:
    """Compensated running sums of a single prefix (time on axis 0)."""
    x = np.asarray(prefix, dtype=float)
    flat = x.reshape(1, x.shape[0], -1)
    m = flat.shape[2]
    return neumaier_cumsum(flat, np.zeros((1, m)), np.zeros((1, m))).reshape(x.shape)
