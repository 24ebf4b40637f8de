"""Why optional stopping costs a ln ln n factor.

A stopping rule that knows the truth waits until the posterior mean is at
least sqrt(c f(n)) away from it.  By the law of the iterated logarithm that
moment comes almost surely, so the loss at the stopping time, normalized by
f(n) = ln ln n / n, stays above c.  The same estimator at fixed n has
normalized loss shrinking like 1 / ln ln n.
"""

from timerobust import (
    FixedStop,
    PosteriorMean,
    gaussian,
    get_rate,
    lil_stop,
    standard_risk,
    trigger_report,
)

fam, est, f = gaussian(), PosteriorMean(), get_rate("f_loglog")
reps = 500

print("fixed sample size (normalized by ln ln n / n):")
for n in (100, 1000, 10_000):
    r = standard_risk(fam, 0.0, est, f, n, reps, seed=1)
    print(f"  n={n:>6}  risk {r.mean:.3f} +- {r.se:.3f}")

print("\nLIL stopping rule, c = 0.1, stop window (27, 1e5):")
rep = trigger_report(fam, 0.0, est, lil_stop(c=0.1, nmax=10**5), f, reps, seed=1)
print(f"  triggered on {rep.trigger_rate:.1%} of paths, median stop at n = {int(sorted(rep.tau)[reps // 2])}")
print(f"  loss bound holds at the stop on {rep.postcondition_rate:.1%} of triggered paths")
print(f"  weak risk {rep.risk.mean:.3f} +- {rep.risk.se:.3f}  (certified floor 0.1 x trigger rate)")

fixed = trigger_report(fam, 0.0, est, FixedStop(1000), f, reps, seed=1).risk
print(f"\nsame paths, stopped at n=1000 regardless: {fixed.mean:.3f} +- {fixed.se:.3f}")
