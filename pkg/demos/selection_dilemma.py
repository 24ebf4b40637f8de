"""AIC keeps picking the wrong model; BIC pays for consistency in risk.

At the point model mu = 0, AIC chooses the larger model with a fixed
probability near P(chi2_1 > 2) ~ 0.157 at every n, while BIC's probability
vanishes.  The price of BIC shows up at small alternatives of size about
sqrt(ln n / n), where it keeps choosing the point model and its risk
relative to 1/n grows with n.
"""

from timerobust import AIC, BIC, get_rate, post_selection_risk

ns = [100, 1000, 10_000]
rate = get_rate("g_1_over_n")
for sel in (AIC(), BIC()):
    print(sel.name.upper())
    print(f"  {'mu':>6} " + " ".join(f"{'n=' + str(n):>18}" for n in ns))
    rows = post_selection_risk(sel, [0.0, 0.03, 0.1, 0.3], rate, ns, reps=2000, seed=3)
    for mu in sorted({r.mu for r in rows}):
        cells = [r for r in rows if r.mu == mu]
        text = " ".join(f"P={r.p_select_m1.mean:.3f} R={r.risk.mean:6.2f}" for r in cells)
        print(f"  {mu:>6.2f} {text}")
    print()
