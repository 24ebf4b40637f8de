"""Choosing between the point model ``{mu0}`` and the full Gaussian location
model by a penalized likelihood-ratio statistic, then estimating within the
chosen model.

For unit-variance Gaussian data the likelihood-ratio statistic is
``2 (loglik_1 - loglik_0) = n (xbar - mu0)^2``.  AIC compares it with 2 and
BIC with ``ln n``.  Other criteria plug in by subclassing :class:`Selector`
and overriding :meth:`Selector.penalty`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Optional, Sequence

import numpy as np

from .engine import RunningStats, merge_all, run_blocks, seeds_for_grid
from .estimators import MLE, Estimator, _check_prefix
from .model import FamilySpec, RateFn, gaussian
from .trajectory import Trajectory, prefix_sums
from .risk import _SCAN_CHUNK, _sq_loss


@dataclass(frozen=True)
class SelectionOutcome:
    chosen: str  # "M0" or "M1"
    statistic: float
    penalty: float
    post_estimate: float


class Selector:
    """Selects M1 when ``n (xbar - mu0)^2`` exceeds :meth:`penalty`."""

    name = "selector"

    def penalty(self, ns) -> np.ndarray:
        raise NotImplementedError

    def select_many(self, means, ns, mu0: float = 0.0):
        """Boolean "M1 chosen" for MLEs ``means`` (reps, m) at sample sizes ``ns``."""
        ns = np.asarray(ns, dtype=float)
        stat = ns * (means - mu0) ** 2
        return stat > self.penalty(ns), stat

    def select(self, prefix, n: Optional[int] = None, mu0: float = 0.0) -> SelectionOutcome:
        prefix, n = _check_prefix(prefix, n)
        xbar = float(prefix_sums(prefix)[-1] / n)
        stat = n * (xbar - mu0) ** 2
        pen = float(self.penalty(np.array([n], dtype=float))[0])
        m1 = stat > pen
        return SelectionOutcome("M1" if m1 else "M0", stat, pen, xbar if m1 else float(mu0))


class AIC(Selector):
    name = "aic"

    def penalty(self, ns):
        return np.full(np.shape(ns), 2.0)


class BIC(Selector):
    """Penalty ``ln n``; undefined at n = 1 unless ``allow_n1`` (then the
    zero penalty picks M1 whenever the statistic is positive)."""

    name = "bic"

    def __init__(self, allow_n1: bool = False):
        self.allow_n1 = allow_n1

    def penalty(self, ns):
        ns = np.asarray(ns, dtype=float)
        if not self.allow_n1 and np.any(ns < 2):
            raise ValueError("BIC selection needs n >= 2")
        return np.log(ns)


def aic_select(prefix, n: Optional[int] = None, mu0: float = 0.0) -> SelectionOutcome:
    return AIC().select(prefix, n, mu0)


def bic_select(prefix, n: Optional[int] = None, mu0: float = 0.0) -> SelectionOutcome:
    return BIC().select(prefix, n, mu0)


SELECTORS = {"aic": AIC, "bic": BIC}


def get_selector(name: str) -> Selector:
    if name not in SELECTORS:
        raise ValueError(f"unknown selector {name!r}; valid ids: {sorted(SELECTORS)}")
    return SELECTORS[name]()


class PostSelectionEstimator(Estimator):
    """``mu0`` when the selector keeps M0, otherwise the MLE.

    BIC is evaluated with its zero penalty at n = 1 so the estimator is
    defined along whole paths.
    """

    def __init__(self, selector: Selector, mu0: float = 0.0):
        if isinstance(selector, BIC):
            selector = BIC(allow_n1=True)
        self.selector = selector
        self.mu0 = float(mu0)
        self.name = f"post_{selector.name}"

    def validate(self, family):
        if not family.gaussian or family.k != 1:
            raise ValueError("post-selection estimation is defined for the 1-d Gaussian family")

    def at(self, phi, sums, ns, mu=None):
        means = MLE().at(phi, sums, ns)
        m1, _ = self.selector.select_many(means, ns, self.mu0)
        return np.where(m1, means, self.mu0)


@dataclass
class DilemmaRow:
    """Risks of the post-selection estimator at one (mu, n)."""

    selector: str
    mu: float
    n: int
    p_select_m1: RunningStats
    risk: RunningStats
    strong: RunningStats
    rate: str
    seed: int

    @property
    def reps(self) -> int:
        return self.risk.count


def _dilemma_block(family, mu, est, rate, n_grid, seed, start, stop):
    n_last = int(n_grid[-1])
    traj = Trajectory(family, mu, seed, start, stop).extend(n_last)
    at_n = est.at(traj.phi, traj.sums, n_grid, mu=traj.mu)
    loss = _sq_loss(at_n, traj.mu) / rate(n_grid)
    m1, _ = est.selector.select_many(MLE().at(traj.phi, traj.sums, n_grid), n_grid, est.mu0)
    sup = np.zeros(traj.reps)
    strong = np.empty((traj.reps, n_grid.size))
    h = 0
    for lo in range(1, n_last + 1, _SCAN_CHUNK):
        ns = np.arange(lo, min(lo + _SCAN_CHUNK, n_last + 1))
        ratio = _sq_loss(est.at(traj.phi, traj.sums, ns), traj.mu) / rate(ns)
        run = np.maximum(np.maximum.accumulate(ratio, axis=1), sup[:, None])
        while h < n_grid.size and n_grid[h] <= ns[-1]:
            strong[:, h] = run[:, n_grid[h] - lo]
            h += 1
        sup = run[:, -1]
    return [
        (RunningStats.of(m1[:, j]), RunningStats.of(loss[:, j]), RunningStats.of(strong[:, j]))
        for j in range(n_grid.size)
    ]


def post_selection_risk(
    selector: Selector,
    mu_grid: Sequence[float],
    rate: RateFn,
    n_grid: Sequence[int],
    reps: int,
    seed: int,
    mu0: float = 0.0,
    workers: int = 1,
    family: Optional[FamilySpec] = None,
) -> list[DilemmaRow]:
    """Selection frequency, standard risk and strong risk (sup over n' <= n)
    of the post-selection estimator at every (mu, n).

    All sample sizes for one mean are read off the same replicates.
    """
    family = family or gaussian()
    est = PostSelectionEstimator(selector, mu0)
    est.validate(family)
    if reps < 2:
        raise ValueError("reps must be at least 2")
    ns = np.asarray(sorted(set(int(n) for n in n_grid)), dtype=np.int64)
    if ns.size == 0 or ns[0] < 1:
        raise ValueError("n grid must be non-empty and positive")
    grid = [float(m) for m in mu_grid]
    if not grid:
        raise ValueError("empty mu grid")
    rows = []
    for mu, s in zip(grid, seeds_for_grid(seed, len(grid))):
        family.check_mu(mu)
        blocks = run_blocks(partial(_dilemma_block, family, mu, est, rate, ns, s), reps, workers)
        for j, n in enumerate(ns):
            p, r, st = (merge_all(b[j][i] for b in blocks) for i in range(3))
            rows.append(DilemmaRow(selector.name, mu, int(n), p, r, st, rate.name, s))
    return rows

