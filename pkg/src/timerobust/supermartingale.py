"""Finite-time law-of-the-iterated-logarithm machinery.

The test supermartingale is a discrete mixture over exponential tilts,

    Z_n = sum_i gamma_i exp(eta_i t_n - n sigma k eta_i^2 / 2),
    gamma_i = 1/(i(i+1)),   eta_i = c0 sqrt(log(i(i+1)) / e^i),

where ``t_n = rho . S_n`` is the projection of the centered running sum on
a sign vector ``rho``.  One mixture is kept for every sign vector
(``+rho`` and ``-rho`` for each ``rho`` with first coordinate +1), so for
k = 1 both the upper (``+S_n``) and lower (``-S_n``) mixtures are available.

Components beyond an adaptive truncation index are summed to second order
from precomputed tail moments; the neglected remainder is below 1e-12 of
``Z_n`` (see ``_kernels.TAIL_X``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .engine import RunningStats, merge_all, run_blocks
from .estimators import Estimator
from .model import FamilySpec, RateFn
from .trajectory import Trajectory, prefix_sums

TABLE_SIZE = 400

_I = np.arange(1, TABLE_SIZE + 1, dtype=float)
LOG_GAMMA = -np.log(_I * (_I + 1.0))
ETA_UNIT = np.sqrt(np.log(_I * (_I + 1.0))) * np.exp(-_I / 2.0)
_GAMMA = np.exp(LOG_GAMMA)
# TAILS[p, m] = sum_{i > m} gamma_i * eta_unit_i**p
TAILS = np.array(
    [np.append(np.cumsum((_GAMMA * ETA_UNIT**p)[::-1])[::-1], 0.0) for p in range(5)]
)
# the weight tail is known in closed form (telescoping), beyond the table too
TAILS[0] = 1.0 / np.arange(1, TABLE_SIZE + 2)
# largest eta_unit_i^2 over i (attained at i = 1)
_ETA_UNIT_SQ_MAX = float(np.max(ETA_UNIT**2))


def lil_prior(i: int, c0: float) -> tuple[float, float]:
    """Mixture weight ``gamma_i`` and tilt ``eta_i`` of component ``i``."""
    if i < 1:
        raise ValueError("mixture components are indexed from 1")
    if c0 <= 0:
        raise ValueError("c0 must be positive")
    w = i * (i + 1.0)
    return 1.0 / w, c0 * math.sqrt(math.log(w)) * math.exp(-i / 2.0)


def admissible_c0(delta: float, k: int = 1) -> float:
    """Supremum of c0 values for which every tilt lies in the delta-ball.

    Combines ``c0 < delta/k`` with the exact ball condition
    ``c0^2 max_i log(i(i+1)) e^-i <= delta/k``.
    """
    return min(delta / k, math.sqrt(delta / k / _ETA_UNIT_SQ_MAX))


def _sign_vectors(k: int) -> np.ndarray:
    half = [(1,) + rest for rest in itertools.product((1, -1), repeat=k - 1)]
    return np.array(half + [tuple(-v for v in r) for r in half], dtype=float)


@dataclass(frozen=True)
class MixtureSpec:
    """Mixture parameters; ``signs`` rows are the sign vectors of the mixtures."""

    c0: float
    sigma: float
    delta: float
    k: int = 1
    signs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if min(self.c0, self.sigma, self.delta) <= 0 or self.k < 1:
            raise ValueError("c0, sigma, delta and k must be positive")
        if self.c0 >= admissible_c0(self.delta, self.k):
            raise ValueError(
                f"c0={self.c0} not admissible for delta={self.delta}, k={self.k}: "
                f"need c0 < {admissible_c0(self.delta, self.k):.6g}"
            )
        object.__setattr__(self, "signs", _sign_vectors(self.k))

    @classmethod
    def for_family(cls, family: FamilySpec, c0: Optional[float] = None) -> "MixtureSpec":
        if c0 is None:
            c0 = 0.99 * admissible_c0(family.delta, family.k)
        return cls(c0=c0, sigma=family.sigma, delta=family.delta, k=family.k)

    @property
    def n_mixtures(self) -> int:
        return 2**self.k

    @property
    def sigma_eff(self) -> float:
        return self.sigma * self.k


# --------------------------------------------------------------------------
# reference evaluation (numpy)


def truncation_index(t_abs: float, n: int, spec: MixtureSpec) -> int:
    """Explicit components needed at (|t|, n) before the first-order tail."""
    m = 8 + (math.ceil(math.log(n)) if n > 1 else 0)
    while m < TABLE_SIZE - 1:
        e = spec.c0 * ETA_UNIT[m]
        if e * (t_abs + 0.5 * n * spec.sigma_eff * e) <= _kernels.TAIL_X:
            break
        m += 1
    return m


def log_mixture(t, n: int, spec: MixtureSpec, i_max: Optional[int] = None) -> np.ndarray:
    """log Z_n for projected sums ``t`` (any shape) after ``n`` steps."""
    t = np.asarray(t, dtype=float)
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return np.zeros_like(t)
    if i_max is None:
        i_max = truncation_index(float(np.max(np.abs(t), initial=0.0)), n, spec)
    if not 1 <= i_max < TABLE_SIZE:
        raise ValueError(f"i_max must lie in [1, {TABLE_SIZE})")
    eta = spec.c0 * ETA_UNIT[:i_max]
    half_ns = 0.5 * n * spec.sigma_eff
    terms = LOG_GAMMA[:i_max] - half_ns * eta**2 + np.multiply.outer(t, eta)
    # second-order expansion of sum_{i > i_max} gamma_i exp(eta_i t - b eta_i^2)
    c0, b = spec.c0, half_ns
    tp = TAILS[:, i_max]
    tail = (
        tp[0]
        + t * c0 * tp[1]
        - b * c0**2 * tp[2]
        + 0.5 * (t**2 * c0**2 * tp[2] - 2 * b * t * c0**3 * tp[3] + b**2 * c0**4 * tp[4])
    )
    return logsumexp(np.concatenate([terms, np.log(tail)[..., None]], axis=-1), axis=-1)


@dataclass
class SupermartingaleState:
    """Running state of all sign mixtures for one path."""

    spec: MixtureSpec
    mu: np.ndarray
    n: int = 0
    s: np.ndarray = None
    comp: np.ndarray = None
    logz: np.ndarray = None
    logz_sup: np.ndarray = None

    @classmethod
    def start(cls, spec: MixtureSpec, mu) -> "SupermartingaleState":
        mu = np.broadcast_to(np.asarray(mu, dtype=float), (spec.k,)).copy()
        zeros = np.zeros(spec.n_mixtures)
        return cls(spec, mu, 0, np.zeros(spec.k), np.zeros(spec.k), zeros, zeros.copy())

    @property
    def S(self) -> np.ndarray:
        return self.s + self.comp

    @property
    def projections(self) -> np.ndarray:
        return self.spec.signs @ self.S

    @property
    def Z(self) -> np.ndarray:
        return np.exp(self.logz)


def z_update(state: SupermartingaleState, x) -> SupermartingaleState:
    """Advance by one sufficient-statistic value ``x`` (scalar or length k)."""
    x = np.broadcast_to(np.asarray(x, dtype=float), (state.spec.k,))
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite observation {x}")
    v = x - state.mu
    u = state.s + v
    big = np.abs(state.s) >= np.abs(v)
    state.comp = state.comp + np.where(big, (state.s - u) + v, (v - u) + state.s)
    state.s = u
    state.n += 1
    state.logz = np.array(
        [float(log_mixture(t, state.n, state.spec)) for t in state.projections]
    )
    state.logz_sup = np.maximum(state.logz_sup, state.logz)
    return state


def evalue(state: SupermartingaleState, mixture: int = 0) -> float:
    """``sup_{m<=n} sqrt(Z_m) / 2`` (the sup includes ``Z_0 = 1``)."""
    return math.exp(0.5 * state.logz_sup[mixture]) / 2.0


def pvalue(state: SupermartingaleState, mixture: int = 0) -> float:
    """``1 / sup_{m<=n} Z_m``, clamped to (0, 1]."""
    return min(1.0, max(math.exp(-state.logz_sup[mixture]), np.finfo(float).tiny))


# --------------------------------------------------------------------------
# batch evaluation (compiled)


@dataclass
class MixtureScan:
    """Arrays of shape (reps, n_mixtures, n_checkpoints) / (reps, n_mixtures)."""

    checkpoints: np.ndarray
    logz: np.ndarray
    logsup_at: np.ndarray
    logsup: np.ndarray

    def evalues(self, mixture: int = 0) -> np.ndarray:
        return np.exp(0.5 * self.logsup_at[:, mixture]) / 2.0

    def pvalues(self, mixture: int = 0) -> np.ndarray:
        return np.clip(np.exp(-self.logsup[:, mixture]), np.finfo(float).tiny, 1.0)


def scan_mixtures(phi, mu, spec: MixtureSpec, checkpoints=None) -> MixtureScan:
    """Track every sign mixture along a batch of paths ``phi`` (reps, N[, k])."""
    phi = np.asarray(phi, dtype=float)
    reps, n_steps = phi.shape[:2]
    if checkpoints is None:
        checkpoints = [n_steps]
    ck = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if ck[0] < 1 or ck[-1] > n_steps:
        raise ValueError(f"checkpoints must lie in [1, {n_steps}]")
    mu = np.asarray(mu, dtype=float)
    if spec.k == 1:
        centered = (phi - mu.reshape(-1, 1) if mu.ndim else phi - mu)[..., None]
    else:
        centered = phi - (mu[:, None, :] if mu.ndim == 2 else mu)
    half = spec.n_mixtures // 2
    logz = np.empty((reps, spec.n_mixtures, ck.size))
    logsup_at = np.empty_like(logz)
    logsup = np.empty((reps, spec.n_mixtures))
    for j, rho in enumerate(spec.signs[:half]):
        d = np.ascontiguousarray(centered @ rho)
        lz, ls_at, ls = _kernels.mixture_scan(
            d, spec.c0, spec.sigma_eff, LOG_GAMMA, ETA_UNIT, TAILS, ck
        )
        for side, idx in enumerate((j, j + half)):
            logz[:, idx] = lz[:, side]
            logsup_at[:, idx] = ls_at[:, side]
            logsup[:, idx] = ls[:, side]
    return MixtureScan(ck, logz, logsup_at, logsup)


@dataclass
class SupermartingaleCheck:
    """Per-checkpoint means of Z_n and of the running E-value, plus the
    final-horizon p-values of every replicate."""

    mu: object
    checkpoints: np.ndarray
    z_stats: list
    evalue_stats: list
    pvalues: np.ndarray
    reps: int
    seed: int

    def rows(self) -> list[dict]:
        return [
            {
                "n": int(n),
                "mean_Z": z.mean,
                "se_Z": z.se,
                "mean_evalue": e.mean,
                "se_evalue": e.se,
            }
            for n, z, e in zip(self.checkpoints, self.z_stats, self.evalue_stats)
        ]

    def pvalue_cdf(self, alphas: Sequence[float]) -> np.ndarray:
        return np.array([np.mean(self.pvalues <= a) for a in alphas])


def _check_block(family, mu, spec, checkpoints, mixture, seed, start, stop):
    traj = Trajectory(family, mu, seed, start, stop).extend(int(max(checkpoints)))
    scan = scan_mixtures(traj.phi, traj.mu, spec, checkpoints)
    z = np.exp(scan.logz[:, mixture])
    e = scan.evalues(mixture)
    return (
        [RunningStats.of(z[:, c]) for c in range(z.shape[1])],
        [RunningStats.of(e[:, c]) for c in range(e.shape[1])],
        scan.pvalues(mixture),
    )


def supermartingale_check(
    family: FamilySpec,
    mu,
    checkpoints: Sequence[int],
    reps: int,
    seed: int,
    spec: Optional[MixtureSpec] = None,
    mixture: int = 0,
    workers: int = 1,
) -> SupermartingaleCheck:
    """Monte Carlo means of ``Z_n`` and ``sup_{m<=n} sqrt(Z_m)/2`` under ``mu``."""
    if reps < 2:
        raise ValueError("reps must be at least 2")
    family.check_mu(mu)
    spec = spec or MixtureSpec.for_family(family)
    ck = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    func = partial(_check_block, family, mu, spec, ck, mixture, seed)
    blocks = run_blocks(func, reps, workers)
    z_stats = [merge_all(b[0][c] for b in blocks) for c in range(ck.size)]
    e_stats = [merge_all(b[1][c] for b in blocks) for c in range(ck.size)]
    pvals = np.concatenate([b[2] for b in blocks])
    return SupermartingaleCheck(mu, ck, z_stats, e_stats, pvals, reps, seed)


def conditional_check(
    family: FamilySpec,
    mu,
    history,
    draws: int,
    rng: np.random.Generator,
    spec: Optional[MixtureSpec] = None,
    mixture: int = 0,
) -> tuple[float, float, float]:
    """One-step supermartingale check after a fixed ``history``.

    Returns ``(Z_{n-1}, mean Z_n, se)`` over ``draws`` fresh observations.
    """
    spec = spec or MixtureSpec.for_family(family)
    history = np.asarray(history, dtype=float)
    n_prev = history.shape[0]
    mu_vec = np.broadcast_to(np.asarray(mu, dtype=float), (spec.k,))
    centered = (history - mu).reshape(n_prev, spec.k)
    s_prev = prefix_sums(centered)[-1] if n_prev else np.zeros(spec.k)
    rho = spec.signs[mixture]
    z_prev = float(np.exp(log_mixture(rho @ s_prev, n_prev, spec)))
    nxt = family.sample(mu, rng, draws).reshape(draws, spec.k) - mu_vec
    t = (s_prev + nxt) @ rho
    z = np.exp(log_mixture(t, n_prev + 1, spec))
    return z_prev, float(z.mean()), float(z.std(ddof=1) / math.sqrt(draws))


# --------------------------------------------------------------------------
# explicit constants


@dataclass(frozen=True)
class LilConstants:
    c: float
    K1: float
    K2: float
    threshold: float

    @property
    def ceiling(self) -> float:
        """``2 c^-2 exp(K1 + K2 c^2) + (2 K2 c^2 + 3) / (2c)``: bound on
        ``E sup_{n>27} |S_n|^2 / (n log log n)``."""
        c = self.c
        return 2.0 / c**2 * math.exp(self.K1 + self.K2 * c**2) + (2 * self.K2 * c**2 + 3) / (2 * c)


def lil_constants(k: int, sigma: float, delta: float) -> LilConstants:
    """Constants of the exponential-moment bound on the normalized LIL sup."""
    if k <= 0 or sigma <= 0 or delta <= 0:
        raise ValueError("k, sigma and delta must be positive")
    K1 = 1.5 + (k + 1) * math.log(2.0)
    K2 = 18.0 * sigma * k
    c = min(2 * math.sqrt(2) * delta / k, 1 / math.sqrt(K2))
    return LilConstants(c, K1, K2, (2 * K2 * c**2 + 3) / (2 * c))


def small_n_constant(variance_trace: float) -> float:
    """``4 sum_{m<=27} E|S_m|^2`` for i.i.d. increments with the given total variance."""
    return 4.0 * variance_trace * sum(range(1, 28))


def strong_sup_ratio(prefix, mu, estimator: Estimator, rate: RateFn, N: Optional[int] = None) -> float:
    """``max_{n<=N} |mu - estimate_n|^2 / rate(n)`` along one path."""
    prefix = np.asarray(prefix, dtype=float)
    N = prefix.shape[0] if N is None else int(N)
    if N < 1 or N > prefix.shape[0]:
        raise ValueError(f"N must lie in [1, {prefix.shape[0]}]")
    ns = np.arange(1, N + 1)
    est = estimator.at(prefix[None, :N], prefix_sums(prefix[:N])[None], ns, mu=np.asarray(mu, dtype=float)[None])[0]
    err = est - np.asarray(mu, dtype=float)
    loss = err**2 if err.ndim == 1 else (err**2).sum(axis=-1)
    if not np.all(np.isfinite(loss)):
        raise ValueError("estimator produced a non-finite estimate")
    return float(np.max(loss / rate(ns)))
