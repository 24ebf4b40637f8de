"""Monitor a Gaussian stream with the LIL mixture supermartingale.

Under the null the running E-value rarely crosses 1/alpha, however long we
watch.  Under a small shift it eventually does, and the crossing time grows
roughly like (ln ln 1/eps) / eps^2 as the shift eps shrinks.
"""

import numpy as np

from timerobust import MixtureSpec, gaussian, scan_mixtures

ALPHA, HORIZON, REPS = 0.05, 20_000, 400
fam = gaussian()
spec = MixtureSpec.for_family(fam)
rng = np.random.default_rng(1)

print(f"c0 = {spec.c0:.3f}; reject when sup sqrt(Z)/2 >= {1 / ALPHA:g}\n")
print(f"{'true shift':>10}  {'rejected':>8}  {'median time':>11}")
for shift in (0.0, 0.05, 0.1, 0.2):
    x = rng.normal(shift, 1.0, size=(REPS, HORIZON))
    # test mu = 0 with both sign mixtures; take the larger E-value
    scan = scan_mixtures(x, np.zeros(REPS), spec, checkpoints=np.arange(100, HORIZON + 1, 100))
    e = np.maximum(scan.evalues(0), scan.evalues(1))
    crossed = e >= 1 / ALPHA
    hit = crossed.any(axis=1)
    when = np.where(hit, (crossed.argmax(axis=1) + 1) * 100, np.nan)
    med = f"{np.nanmedian(when):.0f}" if hit.any() else "-"
    print(f"{shift:>10.2f}  {hit.mean():>8.3f}  {med:>11}")
