"""Monte Carlo estimates of loss-to-rate risks.

Four functionals share the replication machinery of :mod:`timerobust.engine`:

* ``standard_risk``: ``E |mu - est_n|^2 / rate(n)`` at a fixed n,
* ``weak_risk``: the same at the stopping time of a rule,
* ``strong_risk``: ``E max_{n<=N} |mu - est_n|^2 / rate(n)``,
* ``bayes_risk``: ``weak_risk`` with ``mu`` drawn per replicate from a
  centred normal prior.

Every estimate records its seed and a digest of its parameters; with the
same seed, all functionals see the same observation streams, so their
results can be compared pairwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np

from .adversaries import StoppingRule
from .engine import NumericalError, RunningStats, config_digest, merge_all, run_blocks, seeds_for_grid
from .estimators import Estimator
from .model import FamilySpec, RateFn
from .trajectory import Trajectory

# time steps per vectorized chunk when scanning a path for its sup
_SCAN_CHUNK = 8192


@dataclass
class RiskEstimate:
    """Mean and standard error of a per-replicate loss ratio."""

    functional: str
    mean: float
    se: float
    reps: int
    cap_hits: int
    conditional_mean: float
    seed: int
    config_digest: str
    n: int
    labels: dict = field(default_factory=dict)
    losses: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def cap_rate(self) -> float:
        return self.cap_hits / self.reps


def _sq_loss(est, mu) -> np.ndarray:
    """Squared Euclidean error; ``est`` is (reps, m[, k]), ``mu`` (reps[, k])."""
    mu = np.asarray(mu, dtype=float)
    d = est - mu.reshape((mu.shape[0], 1) + mu.shape[1:])
    out = d**2 if d.ndim == 2 else (d**2).sum(axis=-1)
    if not np.all(np.isfinite(out)):
        raise NumericalError("estimator produced a non-finite loss")
    return out


def _finish(functional, blocks, reps, seed, n, labels, keep_losses) -> RiskEstimate:
    """Merge per-block (stats, cond_stats, cap_hits, losses) tuples."""
    stats = merge_all(b[0] for b in blocks)
    cond = merge_all(b[1] for b in blocks)
    caps = sum(b[2] for b in blocks)
    digest = config_digest(functional=functional, n=n, reps=reps, seed=seed, **labels)
    losses = np.concatenate([b[3] for b in blocks]) if keep_losses else None
    return RiskEstimate(
        functional,
        stats.mean,
        stats.se,
        reps,
        caps,
        cond.mean if cond.count else float("nan"),
        seed,
        digest,
        n,
        labels,
        losses,
    )


def _labels(family, mu, estimator, rate, rule=None, **extra) -> dict:
    out = {
        "family": family.name,
        "mu": None if mu is None else np.asarray(mu, dtype=float).tolist(),
        "estimator": estimator.name,
        "rate": rate.name,
    }
    if rule is not None:
        out["rule"] = rule.name
    out.update(extra)
    return out


def _check_common(family, estimator, reps, mu=None):
    if reps < 2:
        raise ValueError("reps must be at least 2")
    estimator.validate(family)
    if mu is not None:
        family.check_mu(mu)


# --------------------------------------------------------------------------
# fixed n


def _standard_block(family, mu, estimator, rate, n, seed, start, stop):
    traj = Trajectory(family, mu, seed, start, stop).extend(n)
    est = estimator.at(traj.phi, traj.sums, np.array([n]), mu=traj.mu)
    loss = _sq_loss(est, traj.mu)[:, 0] / rate(n)
    st = RunningStats.of(loss)
    return st, st, 0, loss


def standard_risk(
    family: FamilySpec,
    mu,
    estimator: Estimator,
    rate: RateFn,
    n: int,
    reps: int,
    seed: int,
    workers: int = 1,
    keep_losses: bool = False,
) -> RiskEstimate:
    """``E |mu - est_n|^2 / rate(n)``."""
    if n < 1:
        raise ValueError("n must be positive")
    _check_common(family, estimator, reps, mu)
    func = partial(_standard_block, family, mu, estimator, rate, int(n), seed)
    blocks = run_blocks(func, reps, workers)
    return _finish("standard", blocks, reps, seed, int(n), _labels(family, mu, estimator, rate), keep_losses)


# --------------------------------------------------------------------------
# stopping rules


def _stopped_block(family, mu, prior_sd, estimator, rule, rate, reveal_mu, seed, start, stop):
    traj = Trajectory(family, mu, seed, start, stop, prior_sd=prior_sd)
    res = rule.stop_times(traj, mu=traj.mu if reveal_mu else None)
    est = estimator.at_each(traj.phi, traj.sums, res.tau, mu=traj.mu)
    loss = _sq_loss(est[:, None], traj.mu)[:, 0] / rate(res.tau)
    return RunningStats.of(loss), RunningStats.of(loss[res.triggered]), res.cap_hits, loss


def _check_rule(rule, family, reveal_mu):
    rule.validate(family)
    if rule.needs_true_mu and not reveal_mu and rule.mu is None:
        raise ValueError(f"rule {rule.name} needs the true mean, which was withheld")


def weak_risk(
    family: FamilySpec,
    mu,
    estimator: Estimator,
    rule: StoppingRule,
    rate: RateFn,
    reps: int,
    seed: int,
    workers: int = 1,
    reveal_mu: bool = True,
    keep_losses: bool = False,
) -> RiskEstimate:
    """``E |mu - est_tau|^2 / rate(tau)`` for the stopping time of ``rule``.

    ``reveal_mu=False`` withholds the true mean from the rule.
    ``conditional_mean`` averages over the replicates where the rule
    triggered before its cap.
    """
    _check_common(family, estimator, reps, mu)
    _check_rule(rule, family, reveal_mu)
    func = partial(_stopped_block, family, mu, None, estimator, rule, rate, reveal_mu, seed)
    blocks = run_blocks(func, reps, workers)
    labels = _labels(family, mu, estimator, rate, rule)
    return _finish("weak", blocks, reps, seed, rule.nmax, labels, keep_losses)


def bayes_risk(
    family: FamilySpec,
    prior_sd: float,
    estimator: Estimator,
    rule: StoppingRule,
    rate: RateFn,
    reps: int,
    seed: int,
    workers: int = 1,
    keep_losses: bool = False,
) -> RiskEstimate:
    """Weak risk averaged over ``mu ~ N(0, prior_sd^2)``, one draw per replicate."""
    if prior_sd <= 0:
        raise ValueError("prior_sd must be positive")
    if not family.gaussian:
        raise ValueError("bayes_risk needs a Gaussian family")
    _check_common(family, estimator, reps)
    _check_rule(rule, family, True)
    func = partial(_stopped_block, family, None, prior_sd, estimator, rule, rate, True, seed)
    blocks = run_blocks(func, reps, workers)
    labels = _labels(family, None, estimator, rate, rule, prior_sd=prior_sd)
    return _finish("bayes", blocks, reps, seed, rule.nmax, labels, keep_losses)


# --------------------------------------------------------------------------
# in-path sup over a horizon


@dataclass
class StrongCurve:
    """Strong risks at nested horizons computed on the same replicates.

    ``increments[j]`` pools the paired differences between horizons j+1 and j.
    """

    horizons: np.ndarray
    estimates: list
    increments: list

    def increment_z(self, j: int) -> float:
        """Paired increment between horizons j+1 and j in standard errors."""
        inc = self.increments[j]
        return inc.mean / inc.se if inc.se > 0 else (np.inf if inc.mean > 0 else 0.0)


def _strong_block(family, mu, estimator, rate, weight, horizons, seed, start, stop):
    traj = Trajectory(family, mu, seed, start, stop).extend(int(horizons[-1]))
    sup = np.zeros(traj.reps)
    at_h = np.empty((traj.reps, horizons.size))
    h = 0
    for lo in range(1, int(horizons[-1]) + 1, _SCAN_CHUNK):
        ns = np.arange(lo, min(lo + _SCAN_CHUNK, int(horizons[-1]) + 1))
        ratio = _sq_loss(estimator.at(traj.phi, traj.sums, ns, mu=traj.mu), traj.mu) / rate(ns)
        if weight is not None:
            ratio = ratio * weight(ns)
        run = np.maximum.accumulate(ratio, axis=1)
        np.maximum(run, sup[:, None], out=run)
        while h < horizons.size and horizons[h] <= ns[-1]:
            at_h[:, h] = run[:, horizons[h] - lo]
            h += 1
        sup = run[:, -1]
    stats = [RunningStats.of(at_h[:, j]) for j in range(horizons.size)]
    incs = [RunningStats.of(at_h[:, j + 1] - at_h[:, j]) for j in range(horizons.size - 1)]
    return stats, incs, at_h


def strong_risk_curve(
    family: FamilySpec,
    mu,
    estimator: Estimator,
    rate: RateFn,
    horizons: Sequence[int],
    reps: int,
    seed: int,
    workers: int = 1,
    weight: Optional[Callable] = None,
    keep_losses: bool = False,
) -> StrongCurve:
    """``E max_{n<=N} w(n) |mu - est_n|^2 / rate(n)`` for every N in ``horizons``.

    One pass over each path serves all horizons.  ``weight`` (default 1)
    multiplies the loss ratio before the sup, e.g. a
    :class:`~timerobust.estimators.DyadicWeight`.
    """
    hs = np.asarray(sorted(set(int(h) for h in horizons)), dtype=np.int64)
    if hs.size == 0 or hs[0] < 1:
        raise ValueError("horizons must be positive")
    _check_common(family, estimator, reps, mu)
    func = partial(_strong_block, family, mu, estimator, rate, weight, hs, seed)
    blocks = run_blocks(func, reps, workers)
    labels = _labels(family, mu, estimator, rate)
    if weight is not None:
        labels["weight"] = repr(weight) if not hasattr(weight, "alpha") else f"dyadic_pi:{weight.alpha:g}"
    estimates = []
    for j, N in enumerate(hs):
        st = merge_all(b[0][j] for b in blocks)
        digest = config_digest(functional="strong", n=int(N), reps=reps, seed=seed, **labels)
        losses = np.concatenate([b[2][:, j] for b in blocks]) if keep_losses else None
        estimates.append(
            RiskEstimate("strong", st.mean, st.se, reps, 0, st.mean, seed, digest, int(N), labels, losses)
        )
    incs = [merge_all(b[1][j] for b in blocks) for j in range(hs.size - 1)]
    return StrongCurve(hs, estimates, incs)


def strong_risk(
    family: FamilySpec,
    mu,
    estimator: Estimator,
    rate: RateFn,
    N: int,
    reps: int,
    seed: int,
    workers: int = 1,
    keep_losses: bool = False,
) -> RiskEstimate:
    """``E max_{n<=N} |mu - est_n|^2 / rate(n)``."""
    return strong_risk_curve(
        family, mu, estimator, rate, [N], reps, seed, workers, keep_losses=keep_losses
    ).estimates[0]


# --------------------------------------------------------------------------
# sup over a finite grid of means


@dataclass
class Sweep:
    grid: list
    estimates: list
    argmax: int

    @property
    def argmax_mu(self):
        return self.grid[self.argmax]

    @property
    def max(self) -> RiskEstimate:
        return self.estimates[self.argmax]


def mu_sweep(risk_op: Callable, mu_grid: Sequence, seed: int, **kwargs) -> Sweep:
    """Run ``risk_op(mu=..., seed=..., **kwargs)`` at every grid point.

    Grid points get independent seeds; the first keeps ``seed`` so a
    one-point sweep reproduces the plain call.
    """
    grid = list(mu_grid)
    if not grid:
        raise ValueError("empty mu grid")
    seeds = seeds_for_grid(seed, len(grid))
    estimates = [risk_op(mu=mu, seed=s, **kwargs) for mu, s in zip(grid, seeds)]
    means = [e.mean for e in estimates]
    return Sweep(grid, estimates, int(np.argmax(means)))



# --------------------------------------------------------------------------
# trigger statistics of a rule


@dataclass
class TriggerReport:
    """Stopping times of a rule and the loss ratio of an estimator at them."""

    rule: str
    tau: np.ndarray
    triggered: np.ndarray
    postcondition: np.ndarray
    risk: RiskEstimate

    @property
    def trigger_rate(self) -> float:
        return float(self.triggered.mean())

    @property
    def postcondition_rate(self) -> float:
        """Fraction of triggered replicates whose event holds at tau (should be 1)."""
        return float(self.postcondition[self.triggered].mean()) if self.triggered.any() else float("nan")


def _trigger_block(family, mu, estimator, rule, rate, seed, start, stop):
    traj = Trajectory(family, mu, seed, start, stop)
    res = rule.stop_times(traj)
    est = estimator.at_each(traj.phi, traj.sums, res.tau, mu=traj.mu)
    loss = _sq_loss(est[:, None], traj.mu)[:, 0] / rate(res.tau)
    post = rule.holds_at(traj, res.tau) if rule.has_trigger else np.ones(traj.reps, bool)
    return (
        RunningStats.of(loss),
        RunningStats.of(loss[res.triggered]),
        res.cap_hits,
        loss,
        res.tau,
        res.triggered,
        post,
    )


def trigger_report(
    family: FamilySpec,
    mu,
    estimator: Estimator,
    rule: StoppingRule,
    rate: RateFn,
    reps: int,
    seed: int,
    workers: int = 1,
) -> TriggerReport:
    """Run ``rule`` with the true mean revealed; same seeds as :func:`weak_risk`."""
    _check_common(family, estimator, reps, mu)
    _check_rule(rule, family, True)
    blocks = run_blocks(partial(_trigger_block, family, mu, estimator, rule, rate, seed), reps, workers)
    risk = _finish("weak", blocks, reps, seed, rule.nmax, _labels(family, mu, estimator, rate, rule), True)
    cat = lambda i: np.concatenate([b[i] for b in blocks])  # noqa: E731
    return TriggerReport(rule.name, cat(4), cat(5), cat(6), risk)
