"""Estimators as maps from a prefix of sufficient statistics to an estimate.

Every estimator exposes two views of the same map:

* ``est(prefix, n)`` for a single path (time on axis 0), and
* ``est.at(phi, sums, ns)`` for a batch of paths (time on axis 1), returning
  the estimates after each of the sample sizes in ``ns``.

The batch view receives the running sums as well so sum-based estimators
avoid re-reducing the prefix.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .model import FamilySpec, rate_f
from .trajectory import prefix_sums


def _time_shape(ns: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Reshape sample sizes to broadcast against (reps, m[, k]) arrays."""
    return ns.reshape((1, ns.size) + (1,) * (ref.ndim - 2))


def _check_prefix(prefix, n):
    prefix = np.asarray(prefix, dtype=float)
    if prefix.ndim == 0:
        prefix = prefix.reshape(1)
    n = prefix.shape[0] if n is None else int(n)
    if n < 1:
        raise ValueError("estimators need at least one observation")
    if n > prefix.shape[0]:
        raise ValueError(f"n={n} exceeds prefix length {prefix.shape[0]}")
    return prefix[:n], n


def dyadic_length(ns):
    """Largest power of two not exceeding each n."""
    ns = np.asarray(ns, dtype=np.int64)
    if np.any(ns < 1):
        raise ValueError("n must be positive")
    p = np.left_shift(np.int64(1), np.floor(np.log2(ns)).astype(np.int64))
    p = np.where(p > ns, p // 2, p)
    return np.where(2 * p <= ns, 2 * p, p)


class Estimator:
    """Base class; subclasses implement :meth:`at`."""

    name = "estimator"
    uses_truth = False

    def prefix_length(self, n: int) -> int:
        """Number of leading observations the estimate after ``n`` may depend on."""
        return n

    def validate(self, family: FamilySpec) -> None:
        """Raise if the estimator is undefined for ``family``."""

    def at(self, phi, sums, ns, mu=None) -> np.ndarray:
        raise NotImplementedError

    def estimate(self, prefix, n: Optional[int] = None):
        prefix, n = _check_prefix(prefix, n)
        out = self.at(prefix[None], prefix_sums(prefix)[None], np.array([n]))[0, 0]
        return float(out) if np.ndim(out) == 0 else out

    __call__ = estimate

    def at_each(self, phi, sums, ns, mu=None) -> np.ndarray:
        """Estimate for replicate r after ``ns[r]`` observations."""
        ns = np.asarray(ns, dtype=np.int64)
        out = np.empty((phi.shape[0],) + phi.shape[2:])
        for n in np.unique(ns):
            rows = ns == n
            sub_mu = None if mu is None else mu[rows]
            out[rows] = self.at(phi[rows], sums[rows], np.array([n]), mu=sub_mu)[:, 0]
        return out

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class MLE(Estimator):
    """Average of the sufficient statistics."""

    name = "mle"

    def at(self, phi, sums, ns, mu=None):
        ns = np.asarray(ns, dtype=np.int64)
        return sums[:, ns - 1] / _time_shape(ns, sums)


class PosteriorMean(Estimator):
    """Posterior mean under a standard normal prior: ``n/(n+1)`` times the MLE."""

    name = "posterior_mean"

    def validate(self, family):
        if not family.gaussian:
            raise ValueError(f"posterior mean is defined for Gaussian families, not {family.name}")

    def at(self, phi, sums, ns, mu=None):
        ns = np.asarray(ns, dtype=np.int64)
        t = _time_shape(ns, sums)
        return (t / (t + 1.0)) * (sums[:, ns - 1] / t)


class Dyadic(Estimator):
    """Base estimator applied to the first ``2**floor(log2 n)`` observations."""

    def __init__(self, base: Estimator):
        self.base = base
        self.name = f"dyadic:{base.name}"

    def prefix_length(self, n):
        return int(dyadic_length(n))

    def validate(self, family):
        self.base.validate(family)

    def at(self, phi, sums, ns, mu=None):
        return self.base.at(phi, sums, dyadic_length(ns), mu=mu)


class Constant(Estimator):
    """Ignores the data."""

    def __init__(self, value, name: Optional[str] = None):
        self.value = np.asarray(value, dtype=float)
        self.name = name or f"constant:{value}"

    def prefix_length(self, n):
        return 0

    def at(self, phi, sums, ns, mu=None):
        shape = (phi.shape[0], len(ns)) + phi.shape[2:]
        return np.broadcast_to(self.value, shape).copy()


class Oracle(Estimator):
    """Returns the true mean of each replicate (a zero-loss reference)."""

    name = "oracle"
    uses_truth = True

    def prefix_length(self, n):
        return 0

    def at(self, phi, sums, ns, mu=None):
        if mu is None:
            raise ValueError("the oracle estimator needs the true mean")
        mu = np.asarray(mu, dtype=float)
        shape = (phi.shape[0], len(ns)) + phi.shape[2:]
        return np.broadcast_to(mu.reshape((mu.shape[0], 1) + mu.shape[1:]), shape).copy()

    def estimate(self, prefix, n=None):
        raise ValueError("the oracle estimator needs the true mean")


class Offset(Estimator):
    """``base + offset(n)``: a deliberately biased estimator."""

    def __init__(self, base: Estimator, offset: Callable, name: Optional[str] = None):
        self.base = base
        self.offset = offset
        self.name = name or f"offset:{base.name}"

    def validate(self, family):
        self.base.validate(family)

    def at(self, phi, sums, ns, mu=None):
        ns = np.asarray(ns, dtype=np.int64)
        est = self.base.at(phi, sums, ns, mu=mu)
        return est + _time_shape(np.asarray(self.offset(ns), dtype=float), est)


class LilOffset:
    """``n -> sqrt(c * f(n))``; picklable offset for :class:`Offset`."""

    def __init__(self, c: float):
        self.c = c

    def __call__(self, ns):
        return np.sqrt(self.c * rate_f(ns))


class FunctionEstimator(Estimator):
    """User plug-in ``func(prefix, n) -> estimate``.

    ``prefix_length`` declares how many leading observations ``func`` reads
    after ``n`` steps (default: all of them).
    """

    def __init__(self, func: Callable, name: str = "plugin", prefix_length: Optional[Callable] = None):
        self.func = func
        self.name = name
        self._prefix_length = prefix_length

    def prefix_length(self, n):
        return n if self._prefix_length is None else int(self._prefix_length(n))

    def estimate(self, prefix, n=None):
        prefix, n = _check_prefix(prefix, n)
        return self.func(prefix, n)

    __call__ = estimate

    def at(self, phi, sums, ns, mu=None):
        ns = np.asarray(ns, dtype=np.int64)
        out = np.empty((phi.shape[0], ns.size) + phi.shape[2:])
        for r in range(phi.shape[0]):
            for j, n in enumerate(ns):
                out[r, j] = self.func(phi[r, :n], int(n))
        return out


# --------------------------------------------------------------------------
# functional API


def mle(prefix, n: Optional[int] = None):
    """Average of the first ``n`` sufficient statistics."""
    return MLE().estimate(prefix, n)


def posterior_mean(prefix, n: Optional[int] = None, family: Optional[FamilySpec] = None):
    """Standard-normal-prior posterior mean of a Gaussian location parameter."""
    est = PosteriorMean()
    if family is not None:
        est.validate(family)
    return est.estimate(prefix, n)


def dyadic(base: Estimator, prefix, n: Optional[int] = None):
    return Dyadic(base).estimate(prefix, n)


def pi_weight(j, alpha: float, n_terms: int):
    """Weight ``(j+1)^(-1-alpha)`` normalized over ``j = 0 .. n_terms-1``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if n_terms < 1:
        raise ValueError("n_terms must be positive")
    j = np.asarray(j)
    if np.any(j < 0) or np.any(j >= n_terms):
        raise ValueError(f"j must lie in [0, {n_terms})")
    norm = math.fsum((i + 1.0) ** (-1.0 - alpha) for i in range(n_terms))
    out = (j + 1.0) ** (-1.0 - alpha) / norm
    return float(out) if np.ndim(out) == 0 else out


class DyadicWeight:
    """``n -> pi(floor(log2 n))`` normalized over the horizon's dyadic levels."""

    def __init__(self, alpha: float, horizon: int):
        self.alpha = alpha
        self.horizon = int(horizon)
        self.n_terms = int(math.floor(math.log2(self.horizon))) + 1

    def __call__(self, ns):
        levels = np.log2(dyadic_length(ns)).round().astype(np.int64)
        return pi_weight(levels, self.alpha, self.n_terms)


def get_estimator(name: str) -> Estimator:
    """Estimator by config id: ``mle``, ``posterior_mean``, ``dyadic:<base>``."""
    simple = {"mle": MLE, "posterior_mean": PosteriorMean}
    if name in simple:
        return simple[name]()
    if name.startswith("dyadic:"):
        return Dyadic(get_estimator(name.split(":", 1)[1]))
    valid = sorted(simple) + [f"dyadic:{b}" for b in sorted(simple)]
    raise ValueError(f"unknown estimator {name!r}; valid ids: {valid}")
