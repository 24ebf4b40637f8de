"""Reduced-scale invariant checks behind ``timerobust selftest``.

Each check runs in a second or two and prints one PASS/FAIL line.
"""

from __future__ import annotations

import math
import sys

import numpy as np

from .adversaries import FixedStop, LilStop
from .engine import replicate_rng
from .estimators import MLE, PosteriorMean
from .model import envelope_check, gaussian, get_rate, rate_f
from .risk import standard_risk, strong_risk_curve, weak_risk
from .selection import AIC, post_selection_risk
from .supermartingale import MixtureSpec, log_mixture, supermartingale_check


def _rate_values(seed):
    return rate_f(1) == 1.0 and rate_f(2) == 1.0 and math.isclose(rate_f(10), math.log(math.log(10)) / 10)


def _envelope(seed):
    return all(envelope_check(gaussian(), mu, eta).passed for mu in (-5.0, 0.0, 3.0) for eta in (-1.0, 0.5))


def _posterior_identity(seed):
    x = replicate_rng(seed, 0).standard_normal(50)
    return all(np.isclose(PosteriorMean()(x, n), n / (n + 1) * MLE()(x, n), rtol=1e-15) for n in (1, 7, 50))


def _expected_z(seed):
    chk = supermartingale_check(gaussian(), 0.0, [1, 10, 100], 512, seed)
    return all(z.mean <= 1 + 3 * z.se for z in chk.z_stats)


def _truncation(seed):
    spec = MixtureSpec.for_family(gaussian())
    t = np.array([-300.0, -3.0, 0.0, 2.0, 250.0])
    return np.max(np.abs(log_mixture(t, 5000, spec) - log_mixture(t, 5000, spec, i_max=300))) < 1e-9


def _fixed_is_standard(seed):
    g, one = gaussian(), get_rate("one")
    a = standard_risk(g, 0.0, MLE(), one, 20, 128, seed)
    b = weak_risk(g, 0.0, MLE(), FixedStop(20), one, 128, seed)
    return a.mean == b.mean and a.se == b.se


def _lil_postcondition(seed):
    from .risk import trigger_report

    rep = trigger_report(gaussian(), 0.0, PosteriorMean(), LilStop(None, 0.1, 27, 2000), get_rate("f_loglog"), 128, seed)
    return rep.postcondition_rate == 1.0


def _strong_monotone(seed):
    c = strong_risk_curve(gaussian(), 0.0, MLE(), get_rate("f_loglog"), [10, 100, 1000], 128, seed)
    means = [e.mean for e in c.estimates]
    return means[0] <= means[1] <= means[2]


def _aic_rate(seed):
    row = post_selection_risk(AIC(), [0.0], get_rate("one"), [100], 2000, seed)[0]
    p = 0.157299
    return abs(row.p_select_m1.mean - p) <= 4 * math.sqrt(p * (1 - p) / 2000)


def _parallel(seed):
    g, f = gaussian(), get_rate("f_loglog")
    a = standard_risk(g, 0.0, MLE(), f, 30, 200, seed, workers=1)
    b = standard_risk(g, 0.0, MLE(), f, 30, 200, seed, workers=2)
    return (a.mean, a.se) == (b.mean, b.se)


CHECKS = [
    ("rate function values", _rate_values),
    ("Gaussian envelope", _envelope),
    ("posterior mean identity", _posterior_identity),
    ("E[Z_n] <= 1", _expected_z),
    ("mixture truncation", _truncation),
    ("fixed rule equals standard risk", _fixed_is_standard),
    ("LIL stop postcondition", _lil_postcondition),
    ("strong risk monotone in N", _strong_monotone),
    ("AIC selection frequency", _aic_rate),
    ("serial/parallel equivalence", _parallel),
]


def run_selftest(seed: int = 0, out=None) -> bool:
    out = out or sys.stdout
    ok = True
    for name, check in CHECKS:
        try:
            passed = bool(check(seed))
            detail = ""
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f" ({type(exc).__name__}: {exc})"
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}{detail}", file=out)
    return ok
