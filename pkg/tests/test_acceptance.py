"""End-to-end acceptance checks at desk scale.

Each test records a one-line verdict through the ``criterion`` fixture; the
verdicts are printed in the pytest terminal summary.  Module-scoped fixtures
share the expensive simulations between criteria that read the same runs.
"""

import math

import numpy as np
import pytest
from scipy.stats import chi2

from timerobust import cli
from timerobust.adversaries import LilStop
from timerobust.estimators import MLE, Dyadic, DyadicWeight, PosteriorMean
from timerobust.model import gaussian, get_rate, rate_f
from timerobust.risk import bayes_risk, standard_risk, strong_risk_curve, trigger_report, weak_risk
from timerobust.adversaries import FixedStop
from timerobust.selection import AIC, BIC, post_selection_risk
from timerobust.supermartingale import MixtureSpec, conditional_check, lil_constants, supermartingale_check

pytestmark = pytest.mark.slow

G = gaussian()
F = get_rate("f_loglog")
REPS = 10**4


@pytest.fixture(scope="module")
def evalue_runs():
    return {
        mu: supermartingale_check(G, mu, [10**4], REPS, seed=101 + i) for i, mu in enumerate((0.0, 1.0, -5.0))
    }


def test_evalue_bound(evalue_runs, criterion):
    parts, ok = [], True
    for mu, chk in evalue_runs.items():
        e = chk.evalue_stats[-1]
        good = e.mean <= 1 + 3 * e.se
        ok &= good
        parts.append(f"mu={mu:g}: {e.mean:.4f}+-{e.se:.4f}")
    criterion(1, ok, "E sup sqrt(Z)/2 <= 1+3SE; " + ", ".join(parts))
    assert ok


def test_pvalue_superuniform(evalue_runs, criterion):
    alphas = [0.01, 0.05, 0.1, 0.5]
    parts, ok = [], True
    for mu, chk in evalue_runs.items():
        cdf = chk.pvalue_cdf(alphas)
        for a, p in zip(alphas, cdf):
            ok &= p <= a + 3 * math.sqrt(a * (1 - a) / REPS)
        parts.append(f"mu={mu:g}: " + "/".join(f"{p:.4f}" for p in cdf))
    criterion(2, ok, "P(V<=a) at a=0.01/0.05/0.1/0.5; " + ", ".join(parts))
    assert ok


def test_marginal_and_conditional_supermartingale(criterion):
    ok, worst = True, -math.inf
    for mu in (0.0, 2.0, -7.0):
        chk = supermartingale_check(G, mu, [1, 10, 100, 1000], REPS, seed=202)
        for z in chk.z_stats:
            ok &= z.mean <= 1 + 3 * z.se
            worst = max(worst, (z.mean - 1) / z.se if z.se > 0 else -math.inf)
    rng = np.random.default_rng(303)
    spec = MixtureSpec.for_family(G)
    cond_ok, worst_cond = True, -math.inf
    for _ in range(20):
        mu = float(rng.uniform(-5, 5))
        n = int(rng.integers(1, 300))
        history = rng.normal(mu + rng.normal(0, 0.2), 1.0, n)
        z_prev, z_next, se = conditional_check(G, mu, history, 10**4, rng, spec)
        cond_ok &= z_next <= z_prev + 3 * se
        worst_cond = max(worst_cond, (z_next - z_prev) / se)
    ok &= cond_ok
    criterion(
        3, ok,
        f"max (E Z_n - 1)/SE = {worst:.2f}; 20 histories, max (E[Z_n|F] - Z_n-1)/SE = {worst_cond:.2f}",
    )
    assert ok


@pytest.fixture(scope="module")
def strong_curves():
    hs = [10**3, 10**4, 10**5]
    return {
        name: strong_risk_curve(G, 0.0, MLE(), get_rate(name), hs, 10**3, seed=3)
        for name in ("f_loglog", "g_1_over_n")
    }


def test_strong_risk_bounded_under_loglog_rate(strong_curves, criterion):
    c = strong_curves["f_loglog"]
    m = [e.mean for e in c.estimates]
    ceiling = lil_constants(1, 1.0, 1.0).ceiling
    inc1, inc2 = c.increments
    a = m[0] <= m[1] <= m[2]
    b = max(m) < ceiling
    cc = inc2.mean < inc1.mean
    ok = a and b and cc
    criterion(
        4, ok,
        f"means {m[0]:.3f}/{m[1]:.3f}/{m[2]:.3f} < ceiling {ceiling:.0f}; "
        f"increments {inc1.mean:.4f} then {inc2.mean:.4f}",
    )
    assert ok


def test_strong_risk_diverges_without_loglog(strong_curves, criterion):
    c = strong_curves["g_1_over_n"]
    m = [e.mean for e in c.estimates]
    z = [c.increment_z(j) for j in range(2)]
    ok = all(v > 3 for v in z)
    criterion(5, ok, f"means {m[0]:.3f}/{m[1]:.3f}/{m[2]:.3f}; paired increment z {z[0]:.1f}, {z[1]:.1f}")
    assert ok


def test_lil_rule_forces_loglog_loss(criterion):
    rule = LilStop(None, 0.1, 27, 10**5)
    rep = trigger_report(G, 0.0, PosteriorMean(), rule, F, 10**3, seed=404)
    r = rep.risk
    ok = (
        rep.trigger_rate >= 0.5
        and rep.postcondition_rate == 1.0
        and r.mean >= 0.1 * rep.trigger_rate - 3 * r.se
    )
    criterion(
        6, ok,
        f"trigger rate {rep.trigger_rate:.3f}, postcondition {rep.postcondition_rate:.3f}, "
        f"weak risk {r.mean:.3f}+-{r.se:.3f}",
    )
    assert ok


def test_dyadic_weighted_sup_bounded(criterion):
    hs = [2**10, 2**14, 2**17]
    c = strong_risk_curve(
        G, 0.0, Dyadic(MLE()), get_rate("g_1_over_n"), hs, 10**3, seed=505, weight=DyadicWeight(1.0, 2**17)
    )
    m = [e.mean for e in c.estimates]
    ratio = max(m) / min(m)
    ok = ratio < 2
    criterion(7, ok, f"weighted sup means {m[0]:.4f}/{m[1]:.4f}/{m[2]:.4f}, max/min {ratio:.4f}")
    assert ok


def test_analytic_risks(criterion):
    one = get_rate("one")
    s = standard_risk(G, 0.0, MLE(), one, 10, 10**5, seed=606)
    b = bayes_risk(G, 1.0, PosteriorMean(), FixedStop(9), one, 10**5, seed=607)
    ok = abs(s.mean - 0.1) <= 3 * s.se and abs(b.mean - 0.1) <= 3 * b.se
    criterion(8, ok, f"standard {s.mean:.5f}+-{s.se:.5f}, bayes {b.mean:.5f}+-{b.se:.5f} (target 0.1)")
    assert ok


def test_aic_bic_selection_frequencies(criterion):
    ns = [10**2, 10**3, 10**4]
    rate = get_rate("one")
    aic = [r.p_select_m1.mean for r in post_selection_risk(AIC(), [0.0], rate, ns, 10**4, seed=707)]
    bic = [r.p_select_m1.mean for r in post_selection_risk(BIC(), [0.0], rate, ns, 10**4, seed=708)]
    ok = (
        all(abs(p - 0.157) <= 0.02 for p in aic)
        and bic[0] > bic[1] > bic[2]
        and bic[2] <= 0.01
    )
    criterion(
        9, ok,
        "AIC " + "/".join(f"{p:.4f}" for p in aic) + f" (chi2 tail {chi2.sf(2, 1):.4f}); "
        "BIC " + "/".join(f"{p:.4f}" for p in bic),
    )
    assert ok


def test_cli_determinism(tmp_path, capsys, criterion):
    base = ["risk", "--mu-grid", "0,0.5", "--horizon", "100,2000", "--reps", "500", "--seed", "11"]
    runs = {}
    for tag, workers in (("a", "1"), ("b", "1"), ("w8", "8")):
        path = tmp_path / f"{tag}.csv"
        assert cli.main(base + ["--workers", workers, "--out", str(path)]) == 0
        runs[tag] = path.read_bytes()
    weak = ["adversary-demo", "--nmax", "5000", "--reps", "300", "--seed", "12"]
    w1 = cli.main(weak + ["--workers", "1"]), capsys.readouterr().out
    w8 = cli.main(weak + ["--workers", "8"]), capsys.readouterr().out
    ok = runs["a"] == runs["b"] and runs["a"] == runs["w8"] and w1 == w8
    criterion(10, ok, "repeat run byte-identical; workers 1 vs 8 identical for strong and weak runs")
    assert ok
