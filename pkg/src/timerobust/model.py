"""Exponential families in mean-value parametrization, rate functions and the
sub-Gaussian envelope ``E exp(eta.(phi(X) - mu)) <= exp(sigma |eta|^2 / 2)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Optional

import numpy as np
from scipy.special import expit, logit

from .engine import replicate_rng


# --------------------------------------------------------------------------
# rate functions


@dataclass(frozen=True)
class RateFn:
    """A positive rate ``n -> rate(n)``, vectorized over integer arrays."""

    name: str
    func: Callable

    def __call__(self, n):
        out = self.func(np.asarray(n, dtype=float))
        return float(out) if np.ndim(out) == 0 else out


def _loglog_rate(n):
    m = np.maximum(n, 3.0)
    return np.where(n < 3, 1.0, np.log(np.log(m)) / m)


def _inverse_rate(n):
    return 1.0 / n


def _log_rate(n):
    m = np.maximum(n, 2.0)
    return np.where(n < 2, 1.0, np.log(m) / m)


def _unit_rate(n):
    return np.ones_like(n)


def rate_f(n):
    """``ln(ln n)/n`` for n >= 3 and 1 for n in {1, 2}."""
    if np.any(np.asarray(n) < 1):
        raise ValueError("rate_f is defined for n >= 1")
    return RATES["f_loglog"](n)


RATES = {
    "f_loglog": RateFn("f_loglog", _loglog_rate),
    "g_1_over_n": RateFn("g_1_over_n", _inverse_rate),
    "g_log_over_n": RateFn("g_log_over_n", _log_rate),
    "one": RateFn("one", _unit_rate),
}


def get_rate(name: str) -> RateFn:
    try:
        return RATES[name]
    except KeyError:
        raise ValueError(f"unknown rate {name!r}; valid ids: {sorted(RATES)}") from None


# --------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box; bounds may be infinite."""

    lo: tuple
    hi: tuple

    @classmethod
    def interval(cls, lo: float, hi: float, k: int = 1) -> "Box":
        return cls((float(lo),) * k, (float(hi),) * k)

    @property
    def k(self) -> int:
        return len(self.lo)

    @property
    def bounded(self) -> bool:
        return all(map(math.isfinite, self.lo + self.hi))

    def contains(self, x) -> bool:
        x = np.broadcast_to(np.asarray(x, dtype=float), (self.k,))
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def strictly_inside(self, other: "Box") -> bool:
        return all(a > b for a, b in zip(self.lo, other.lo)) and all(
            a < b for a, b in zip(self.hi, other.hi)
        )


@dataclass(frozen=True)
class FamilySpec:
    """An exponential family ``p(x) = r(x) exp(theta.phi(x) - psi(theta))``.

    ``sigma``/``delta`` are constants for which the envelope holds on
    ``param_set`` for every ``|eta|^2 <= delta``.
    """

    name: str
    k: int
    suff_stat: Callable
    mean_link: Callable
    canonical_link: Callable
    sampler: Callable
    fisher: Callable
    sigma: float
    delta: float
    param_set: Box
    closure: Box
    canonical_domain: Box
    log_mgf_centered: Optional[Callable] = None
    gaussian: bool = False
    constant_fisher: Optional[float] = None
    variance: Optional[Callable] = field(default=None, compare=False)

    def contains(self, mu) -> bool:
        return self.param_set.contains(mu)

    def check_mu(self, mu) -> None:
        mu_arr = np.asarray(mu, dtype=float)
        if self.k > 1 and mu_arr.shape not in ((), (self.k,)):
            raise ValueError(f"{self.name}: mean parameter must have {self.k} coordinates")
        if not np.all(np.isfinite(mu_arr)) or not self.contains(mu_arr):
            raise ValueError(f"{self.name}: mean parameter {mu} outside M={self.param_set}")

    def sample(self, mu, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` sufficient-statistic values, shape (n,) or (n, k)."""
        return self.suff_stat(self.sampler(mu, rng, n))

    def with_delta(self, delta: float, sigma: Optional[float] = None) -> "FamilySpec":
        return replace(self, delta=float(delta), sigma=self.sigma if sigma is None else sigma)


def _identity(x):
    return x


def _gaussian_sampler(mu, rng, n, k=1):
    if k == 1:
        return mu + rng.standard_normal(n)
    return np.asarray(mu, dtype=float) + rng.standard_normal((n, k))


def _bernoulli_sampler(mu, rng, n):
    return (rng.random(n) < mu).astype(float)


def _unit_fisher(theta, k=1):
    return 1.0 if k == 1 else np.eye(k)


def _bernoulli_fisher(theta):
    p = expit(theta)
    return p * (1.0 - p)


def _gaussian_log_mgf(mu, eta):
    eta = np.asarray(eta, dtype=float)
    return 0.5 * float(np.dot(eta.ravel(), eta.ravel()))


def _bernoulli_log_mgf(mu, eta):
    eta = float(np.asarray(eta).ravel()[0])
    return float(np.logaddexp(math.log1p(-mu) - eta * mu, math.log(mu) + eta * (1.0 - mu)))


def _gaussian_variance(mu, k=1):
    return float(k)


def _bernoulli_variance(mu):
    return mu * (1.0 - mu)


def gaussian(delta: float = 1.0) -> FamilySpec:
    """N(mu, 1) location family; the envelope holds with sigma = 1 for any delta."""
    real = Box.interval(-math.inf, math.inf)
    return FamilySpec(
        name="gaussian",
        k=1,
        suff_stat=_identity,
        mean_link=_identity,
        canonical_link=_identity,
        sampler=_gaussian_sampler,
        fisher=_unit_fisher,
        sigma=1.0,
        delta=float(delta),
        param_set=real,
        closure=real,
        canonical_domain=real,
        log_mgf_centered=_gaussian_log_mgf,
        gaussian=True,
        constant_fisher=1.0,
        variance=_gaussian_variance,
    )


def product_gaussian(k: int, delta: float = 1.0) -> FamilySpec:
    """k independent N(mu_j, 1) coordinates."""
    if k < 1:
        raise ValueError("k must be positive")
    if k == 1:
        return gaussian(delta)
    real = Box.interval(-math.inf, math.inf, k)
    return FamilySpec(
        name=f"product_gaussian:{k}",
        k=k,
        suff_stat=_identity,
        mean_link=_identity,
        canonical_link=_identity,
        sampler=partial(_gaussian_sampler, k=k),
        fisher=partial(_unit_fisher, k=k),
        sigma=1.0,
        delta=float(delta),
        param_set=real,
        closure=real,
        canonical_domain=real,
        log_mgf_centered=_gaussian_log_mgf,
        gaussian=True,
        constant_fisher=1.0,
        variance=partial(_gaussian_variance, k=k),
    )


def bernoulli(param_set: tuple = (0.01, 0.99), delta: float = 0.01) -> FamilySpec:
    """Bernoulli(p) with M a closed sub-interval of (0, 1); sigma from :func:`sigma_of`."""
    lo, hi = map(float, param_set)
    if not 0.0 < lo < hi < 1.0:
        raise ValueError(f"Bernoulli parameter set must satisfy 0 < lo < hi < 1, got {param_set}")
    fam = FamilySpec(
        name="bernoulli",
        k=1,
        suff_stat=_identity,
        mean_link=expit,
        canonical_link=logit,
        sampler=_bernoulli_sampler,
        fisher=_bernoulli_fisher,
        sigma=math.nan,
        delta=float(delta),
        param_set=Box.interval(lo, hi),
        closure=Box.interval(0.0, 1.0),
        canonical_domain=Box.interval(-math.inf, math.inf),
        log_mgf_centered=_bernoulli_log_mgf,
        variance=_bernoulli_variance,
    )
    return replace(fam, sigma=sigma_of(fam, fam.param_set, delta))


def get_family(name: str) -> FamilySpec:
    """Family by config identifier: ``gaussian``, ``bernoulli``, ``product_gaussian:k``."""
    if name == "gaussian":
        return gaussian()
    if name == "bernoulli":
        return bernoulli()
    if name.startswith("product_gaussian:"):
        try:
            k = int(name.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad family id {name!r}") from None
        return product_gaussian(k)
    raise ValueError(
        f"unknown family {name!r}; valid ids: ['bernoulli', 'gaussian', 'product_gaussian:<k>']"
    )


# --------------------------------------------------------------------------
# envelope constants


def _max_fisher(family: FamilySpec, lo: np.ndarray, hi: np.ndarray, points: int) -> float:
    axes = [np.linspace(a, b, points) for a, b in zip(lo, hi)]
    best = -math.inf
    for theta in itertools.product(*axes):
        info = family.fisher(theta[0] if family.k == 1 else np.array(theta))
        val = float(info) if np.ndim(info) == 0 else float(np.linalg.eigvalsh(info)[-1])
        best = max(best, val)
    return best


def sigma_of(family: FamilySpec, param_set: Box, delta: float, rtol: float = 0.01) -> float:
    """Envelope constant: sup of the Fisher information over the canonical
    image of ``param_set`` enlarged by ``sqrt(delta)`` in every coordinate.

    The grid is doubled until the sup moves by less than ``rtol``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if family.constant_fisher is not None:
        return float(family.constant_fisher)
    if not param_set.bounded or not param_set.strictly_inside(family.closure):
        raise ValueError(f"{family.name}: M={param_set} must be a compact box inside int(M-bar)")
    radius = math.sqrt(delta)
    lo = np.array([family.canonical_link(v) for v in param_set.lo], dtype=float) - radius
    hi = np.array([family.canonical_link(v) for v in param_set.hi], dtype=float) + radius
    dom = family.canonical_domain
    if np.any(lo <= np.array(dom.lo)) or np.any(hi >= np.array(dom.hi)):
        raise ValueError(
            f"{family.name}: enlarged canonical set [{lo}, {hi}] leaves the canonical domain"
        )
    points = 17
    current = _max_fisher(family, lo, hi, points)
    while True:
        points = 2 * points - 1
        refined = _max_fisher(family, lo, hi, points)
        if abs(refined - current) <= rtol * abs(refined) or points > 2**16:
            return refined
        current = refined


@dataclass(frozen=True)
class EnvelopeCheck:
    passed: bool
    estimate: float
    bound: float
    rel_error: float
    method: str


def envelope_check(
    family: FamilySpec,
    mu,
    eta,
    reps: Optional[int] = None,
    seed: int = 0,
    method: str = "auto",
) -> EnvelopeCheck:
    """Estimate ``E exp(eta.(phi(X)-mu))`` and compare with ``exp(sigma |eta|^2/2)``.

    ``method="auto"`` uses the closed-form moment generating function when
    the family has one; ``"mc"`` averages ``reps`` draws.  The check passes
    if the estimate is at most the bound inflated by three relative
    standard errors.
    """
    family.check_mu(mu)
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if eta.shape != (family.k,):
        raise ValueError(f"eta must have {family.k} coordinates")
    sq = float(eta @ eta)
    if sq > family.delta * (1 + 1e-12):
        raise ValueError(f"|eta|^2 = {sq} exceeds delta = {family.delta}")
    bound = math.exp(family.sigma * sq / 2.0)

    if method == "auto":
        method = "exact" if family.log_mgf_centered is not None else "mc"
    if method == "exact":
        est, rel = math.exp(family.log_mgf_centered(mu, eta)), 0.0
    elif method == "mc":
        if reps is None or reps < 2:
            raise ValueError("Monte Carlo envelope check needs reps >= 2")
        phi = family.sample(mu, replicate_rng(seed, 0), reps)
        centered = phi - np.asarray(mu, dtype=float)
        vals = np.exp(centered @ eta if family.k > 1 else centered * eta[0])
        est = float(vals.mean())
        rel = float(vals.std(ddof=1) / math.sqrt(reps) / est)
    else:
        raise ValueError(f"unknown method {method!r}")
    return EnvelopeCheck(est <= bound * (1 + 3 * rel), est, bound, rel, method)
