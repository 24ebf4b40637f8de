"""Compiled inner loops (numba).  Callers in the package wrap these; nothing
here validates its inputs."""

import math

import numpy as np
from numba import njit

# mixture components i > I are folded into a second-order tail once
# x = eta_{I+1} * (|t| + n*sigma*eta_{I+1}/2) drops below this; the
# remainder is then below x^3 e^(2x) / 6 < 1e-12 relative to Z
TAIL_X = 1e-4
# components more than this many nats below the largest are not exponentiated
LOG_CUTOFF = 40.0


@njit(cache=True)
def neumaier_cumsum(x, s0, c0):
    """Compensated running sums of ``x`` (reps, N, m) along axis 1.

    ``s0``/``c0`` (reps, m) carry the sum and compensation from an earlier
    chunk; they are updated in place.
    """
    reps, n, m = x.shape
    out = np.empty_like(x)
    for r in range(reps):
        for j in range(m):
            s = s0[r, j]
            c = c0[r, j]
            for t in range(n):
                v = x[r, t, j]
                u = s + v
                if abs(s) >= abs(v):
                    c += (s - u) + v
                else:
                    c += (v - u) + s
                s = u
                out[r, t, j] = s + c
            s0[r, j] = s
            c0[r, j] = c
    return out


@njit(cache=True)
def truncation_index(t_abs, n, c0, sigma_eff, eta_unit):
    """Number of explicit mixture components used at (|t|, n)."""
    floor = 8
    if n > 1:
        floor += int(math.ceil(math.log(n)))
    i = floor
    last = eta_unit.shape[0] - 1
    while i < last:
        e = c0 * eta_unit[i]
        if e * (t_abs + 0.5 * n * sigma_eff * e) <= TAIL_X:
            break
        i += 1
    return i


@njit(cache=True)
def log_mixture_pair(t, n, c0, sigma_eff, log_gamma, eta_unit, tails, buf_p, buf_m, i_max):
    """log Z for the +t and -t mixtures at step n.

    ``i_max <= 0`` selects the adaptive truncation index.
    """
    if n == 0:
        return 0.0, 0.0
    if i_max > 0:
        m = i_max
    else:
        m = truncation_index(abs(t), n, c0, sigma_eff, eta_unit)
    half_ns = 0.5 * n * sigma_eff
    mp = -np.inf
    mm = -np.inf
    for j in range(m):
        e = c0 * eta_unit[j]
        base = log_gamma[j] - half_ns * e * e
        et = e * t
        buf_p[j] = base + et
        buf_m[j] = base - et
        if buf_p[j] > mp:
            mp = buf_p[j]
        if buf_m[j] > mm:
            mm = buf_m[j]
    # sum_{i>m} gamma_i (1 + x + x^2/2) with x = +-eta t - b eta^2
    c2 = c0 * c0
    b = half_ns
    even = 1.0 / (m + 1) - b * c2 * tails[2, m] + 0.5 * (
        t * t * c2 * tails[2, m] + b * b * c2 * c2 * tails[4, m]
    )
    odd = t * c0 * tails[1, m] - b * t * c2 * c0 * tails[3, m]
    tp = math.log(even + odd)
    tm = math.log(even - odd)
    if tp > mp:
        mp = tp
    if tm > mm:
        mm = tm
    sp = math.exp(tp - mp)
    sm = math.exp(tm - mm)
    for j in range(m):
        v = buf_p[j] - mp
        if v > -LOG_CUTOFF:
            sp += math.exp(v)
        v = buf_m[j] - mm
        if v > -LOG_CUTOFF:
            sm += math.exp(v)
    return mp + math.log(sp), mm + math.log(sm)


@njit(cache=True)
def mixture_scan(d, c0, sigma_eff, log_gamma, eta_unit, tails, checkpoints):
    """Run both sign mixtures along each row of increments ``d`` (reps, N).

    Returns log Z at the checkpoints, the running sup of log Z (sup includes
    Z_0 = 1) at the checkpoints, and the sup over the whole row.  Axis 1 of
    the outputs indexes the sign (+, -).
    """
    reps, n_steps = d.shape
    nck = checkpoints.shape[0]
    logz_ck = np.empty((reps, 2, nck))
    logsup_ck = np.empty((reps, 2, nck))
    logsup = np.empty((reps, 2))
    buf_p = np.empty(eta_unit.shape[0])
    buf_m = np.empty(eta_unit.shape[0])
    for r in range(reps):
        s = 0.0
        c = 0.0
        sup_p = 0.0
        sup_m = 0.0
        k = 0
        for n in range(1, n_steps + 1):
            v = d[r, n - 1]
            u = s + v
            if abs(s) >= abs(v):
                c += (s - u) + v
            else:
                c += (v - u) + s
            s = u
            lp, lm = log_mixture_pair(
                s + c, n, c0, sigma_eff, log_gamma, eta_unit, tails, buf_p, buf_m, 0
            )
            if lp > sup_p:
                sup_p = lp
            if lm > sup_m:
                sup_m = lm
            while k < nck and checkpoints[k] == n:
                logz_ck[r, 0, k] = lp
                logz_ck[r, 1, k] = lm
                logsup_ck[r, 0, k] = sup_p
                logsup_ck[r, 1, k] = sup_m
                k += 1
        logsup[r, 0] = sup_p
        logsup[r, 1] = sup_m
    return logz_ck, logsup_ck, logsup
