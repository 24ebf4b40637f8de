"""Strong risk of the Gaussian MLE: bounded at rate ln ln n / n, unbounded at 1/n.

The strong adversary takes the worst point of the whole path up to N.  With
the ln ln n / n normalization the expected worst ratio levels off; with 1/n
it keeps growing like ln ln N.  One pass per path serves every horizon, so
the increments below are paired and their standard errors are honest.
"""

from timerobust import MLE, gaussian, get_rate, lil_constants, strong_risk_curve

horizons = [10**2, 10**3, 10**4, 10**5]
fam = gaussian()
print(f"closed-form ceiling for the ln ln n / n case: {lil_constants(1, 1.0, 1.0).ceiling:.0f}\n")
for name in ("f_loglog", "g_1_over_n"):
    curve = strong_risk_curve(fam, 0.0, MLE(), get_rate(name), horizons, reps=500, seed=7)
    print(name)
    for N, est in zip(horizons, curve.estimates):
        print(f"  N={N:>6}  strong risk {est.mean:7.3f} +- {est.se:.3f}")
    for j, inc in enumerate(curve.increments):
        print(f"  increment {horizons[j]:>5} -> {horizons[j + 1]:>6}: {inc.mean:.3f}  (z = {curve.increment_z(j):.1f})")
    print()
