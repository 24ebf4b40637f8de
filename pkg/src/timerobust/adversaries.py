"""Stopping rules for the weakly adversarial setting.

A rule stops at the first ``n`` in ``(n0, nmax)`` at which its trigger event
holds, and at the hard cap ``nmax`` otherwise (a cap hit).  Events are
evaluated on batches of paths; the single-path :meth:`StoppingRule.decide`
runs the same code on a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .estimators import Estimator, PosteriorMean, get_estimator
from .model import FamilySpec, rate_f
from .trajectory import Trajectory, prefix_sums

DEFAULT_N0 = 27
DEFAULT_NMAX = 10**5
_FIRST_CHUNK = 1024


def _sq_dist(a, b) -> np.ndarray:
    d = a - b
    return d**2 if d.ndim == 2 else (d**2).sum(axis=-1)


def _mu_grid(mu, reps: int, ndim: int) -> np.ndarray:
    """Per-replicate mean broadcastable against (reps, m[, k]) estimates."""
    mu = np.asarray(mu, dtype=float)
    if ndim == 2:
        return np.broadcast_to(mu, (reps,)).reshape(reps, 1)
    return np.broadcast_to(mu, (reps, mu.shape[-1])).reshape(reps, 1, -1)


@dataclass
class StopResult:
    tau: np.ndarray
    triggered: np.ndarray

    @property
    def cap_hits(self) -> int:
        return int((~self.triggered).sum())


class StoppingRule:
    """Base class.  Subclasses set ``needs_true_mu`` and implement :meth:`events`."""

    name = "rule"
    needs_true_mu = False
    has_trigger = True
    n0 = 0
    nmax = DEFAULT_NMAX
    mu = None  # bound true mean, if any

    def validate(self, family: FamilySpec) -> None:
        pass

    def events(self, phi, sums, ns, mu=None) -> np.ndarray:
        """Boolean (reps, len(ns)): does the trigger event hold after n steps?"""
        raise NotImplementedError

    def _resolve_mu(self, mu):
        if not self.needs_true_mu:
            return None
        if self.mu is not None:
            return self.mu
        if mu is None:
            raise ValueError(f"rule {self.name} needs the true mean, which was withheld")
        return mu

    def decide(self, prefix, n: int, mu=None) -> bool:
        """Stop after ``n`` observations of ``prefix``?  Assumes no earlier stop."""
        prefix = np.asarray(prefix, dtype=float)[:n]
        if prefix.shape[0] < n:
            raise ValueError("prefix shorter than n")
        if n >= self.nmax:
            return True
        if n <= self.n0:
            return False
        mu = self._resolve_mu(mu)
        mu_b = None if mu is None else np.asarray(mu, dtype=float)[None]
        ev = self.events(prefix[None], prefix_sums(prefix)[None], np.array([n]), mu_b)
        return bool(ev[0, 0])

    def stop_times(self, traj: Trajectory, mu=None) -> StopResult:
        """First trigger times for every replicate of ``traj`` (extending it as needed).

        ``mu`` defaults to the trajectory's true means for rules that need them.
        """
        if self.needs_true_mu and mu is None and self.mu is None:
            mu = traj.mu
        mu = self._resolve_mu(mu)
        mu = None if mu is None else np.broadcast_to(np.asarray(mu, dtype=float), traj.mu.shape)
        reps = traj.reps
        tau = np.full(reps, self.nmax, dtype=np.int64)
        triggered = np.zeros(reps, dtype=bool)
        lo = self.n0 + 1
        hi = min(self.nmax - 1, max(2 * self.n0, _FIRST_CHUNK))
        while lo <= hi:
            traj.extend(hi)
            pending = ~triggered
            rows = np.flatnonzero(pending)
            ns = np.arange(lo, hi + 1)
            ev = self.events(
                traj.phi[rows], traj.sums[rows], ns, None if mu is None else mu[rows]
            )
            hit = ev.any(axis=1)
            first = ev.argmax(axis=1)
            tau[rows[hit]] = ns[first[hit]]
            triggered[rows[hit]] = True
            if triggered.all():
                break
            lo, hi = hi + 1, min(self.nmax - 1, 2 * hi)
        traj.extend(int(tau.max()))
        return StopResult(tau, triggered)

    def holds_at(self, traj: Trajectory, tau, mu=None) -> np.ndarray:
        """Whether the trigger event holds for replicate r after ``tau[r]`` steps."""
        if self.needs_true_mu and mu is None and self.mu is None:
            mu = traj.mu
        mu = self._resolve_mu(mu)
        mu = None if mu is None else np.broadcast_to(np.asarray(mu, dtype=float), traj.mu.shape)
        tau = np.asarray(tau, dtype=np.int64)
        out = np.zeros(tau.shape, dtype=bool)
        for n in np.unique(tau):
            rows = np.flatnonzero(tau == n)
            ev = self.events(traj.phi[rows], traj.sums[rows], np.array([n]), None if mu is None else mu[rows])
            out[rows] = ev[:, 0]
        return out

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class FixedStop(StoppingRule):
    """Always stops after ``n`` observations."""

    has_trigger = False

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("fixed stopping time must be positive")
        self.n = self.nmax = self.n0 = int(n)
        self.name = f"fixed:{self.n}"

    def decide(self, prefix, n, mu=None):
        return n >= self.n

    def stop_times(self, traj, mu=None):
        traj.extend(self.n)
        return StopResult(np.full(traj.reps, self.n, dtype=np.int64), np.ones(traj.reps, bool))


def _check_window(c, n0, nmax):
    if c <= 0:
        raise ValueError("c must be positive")
    if n0 < 0 or nmax <= n0:
        raise ValueError("need 0 <= n0 < nmax")


class LilStop(StoppingRule):
    """Stops once the posterior mean is at least ``sqrt(c f(n))`` from the truth."""

    needs_true_mu = True

    def __init__(self, mu=None, c: float = 0.1, n0: int = DEFAULT_N0, nmax: int = DEFAULT_NMAX):
        _check_window(c, n0, nmax)
        self.mu, self.c, self.n0, self.nmax = mu, float(c), int(n0), int(nmax)
        self.name = f"lil:{self.c:g},{self.n0},{self.nmax}"

    def validate(self, family):
        PosteriorMean().validate(family)

    def events(self, phi, sums, ns, mu=None):
        post = PosteriorMean().at(phi, sums, ns)
        return _sq_dist(_mu_grid(mu, phi.shape[0], post.ndim), post) >= self.c * rate_f(ns)


class GapStop(StoppingRule):
    """Stops once ``estimator`` is at least ``sqrt(c f(n)/2)`` from the posterior mean."""

    def __init__(self, estimator: Estimator, c: float = 0.1, n0: int = DEFAULT_N0, nmax: int = DEFAULT_NMAX):
        _check_window(c, n0, nmax)
        self.estimator, self.c, self.n0, self.nmax = estimator, float(c), int(n0), int(nmax)
        self.name = f"gap:{estimator.name},{self.c:g},{self.n0},{self.nmax}"

    def validate(self, family):
        PosteriorMean().validate(family)
        self.estimator.validate(family)

    def events(self, phi, sums, ns, mu=None):
        post = PosteriorMean().at(phi, sums, ns)
        est = self.estimator.at(phi, sums, ns)
        return _sq_dist(post, est) >= 0.5 * self.c * rate_f(ns)


class CappedStop(StoppingRule):
    """Stops at the first n in (n0, n1) where both the LIL and gap events hold; else at n1."""

    needs_true_mu = True

    def __init__(self, estimator: Estimator, mu=None, c: float = 0.1, n0: int = DEFAULT_N0, n1: int = 1000):
        _check_window(c, n0, n1)
        self.estimator, self.mu, self.c = estimator, mu, float(c)
        self.n0, self.nmax = int(n0), int(n1)
        self.name = f"capped:{self.c:g},{self.n0},{self.nmax}"

    @property
    def n1(self) -> int:
        return self.nmax

    def validate(self, family):
        PosteriorMean().validate(family)
        self.estimator.validate(family)

    def events(self, phi, sums, ns, mu=None):
        post = PosteriorMean().at(phi, sums, ns)
        est = self.estimator.at(phi, sums, ns)
        f = rate_f(ns)
        lil = _sq_dist(_mu_grid(mu, phi.shape[0], post.ndim), post) >= self.c * f
        gap = _sq_dist(post, est) >= 0.5 * self.c * f
        return lil & gap


def fixed_stop(n: int) -> FixedStop:
    return FixedStop(n)


def lil_stop(mu=None, c: float = 0.1, n0: int = DEFAULT_N0, nmax: int = DEFAULT_NMAX) -> LilStop:
    return LilStop(mu, c, n0, nmax)


def gap_stop(estimator: Estimator, c: float = 0.1, n0: int = DEFAULT_N0, nmax: int = DEFAULT_NMAX) -> GapStop:
    return GapStop(estimator, c, n0, nmax)


def capped_stop(mu, estimator: Estimator, c: float = 0.1, n0: int = DEFAULT_N0, n1: int = 1000) -> CappedStop:
    return CappedStop(estimator, mu, c, n0, n1)


RULE_FORMS = ["fixed:N", "lil:c,n0,nmax", "gap:estimator,c,n0,nmax", "capped:c,n0,n1"]


def parse_rule(
    text: str,
    estimator: Optional[Estimator] = None,
    c: float = 0.1,
    n0: int = DEFAULT_N0,
    nmax: int = DEFAULT_NMAX,
    n1: int = 1000,
) -> StoppingRule:
    """Rule from its config string; ``capped`` uses ``estimator`` (default MLE)
    for its gap event.  Omitted trailing fields take the keyword defaults.
    """
    kind, _, rest = text.partition(":")
    args = [a.strip() for a in rest.split(",")] if rest else []
    try:
        if kind == "fixed" and len(args) == 1:
            return FixedStop(_as_int(args[0]))
        if kind == "lil" and len(args) <= 3:
            vals = _fill(args, [c, n0, nmax])
            return LilStop(None, vals[0], _as_int(vals[1]), _as_int(vals[2]))
        if kind == "gap" and 1 <= len(args) <= 4:
            vals = _fill(args[1:], [c, n0, nmax])
            return GapStop(get_estimator(args[0]), vals[0], _as_int(vals[1]), _as_int(vals[2]))
        if kind == "capped" and len(args) <= 3:
            vals = _fill(args, [c, n0, n1])
            est = estimator or get_estimator("mle")
            return CappedStop(est, None, vals[0], _as_int(vals[1]), _as_int(vals[2]))
    except ValueError as exc:
        raise ValueError(f"bad rule {text!r}: {exc}") from None
    raise ValueError(f"unknown rule {text!r}; valid forms: {RULE_FORMS}")


def _as_int(v) -> int:
    f = float(v)
    if not f.is_integer():
        raise ValueError(f"expected an integer, got {v}")
    return int(f)


def _fill(args, defaults):
    vals = [float(a) for a in args]
    return vals + defaults[len(vals):]
