"""Compiled inner loops shared by the renewal and transfer recursions.

Everything here is deliberately branch-simple so numba emits tight scalar
code.  All reductions run in a fixed serial order, which makes every result
reproducible bit for bit regardless of how the caller schedules work.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

LN2 = math.log(2.0)


@njit(cache=True)
def renewal_mass_rec(masses: np.ndarray, N: int) -> np.ndarray:
    """Return u[0..N] with u(m) = sum_j masses[j] * u(m-j), u(0) = 1.

    masses[0] must be 0; support is 1..len(masses)-1.  Linear domain: the
    inputs here are sub-probability weights, never log weights.
    """
    n_max = masses.shape[0] - 1
    u = np.empty(N + 1)
    u[0] = 1.0
    for m in range(1, N + 1):
        jmax = min(m, n_max)
        acc = 0.0
        for j in range(1, jmax + 1):
            acc += masses[j] * u[m - j]
        u[m] = acc
    return u


@njit(cache=True)
def forward_logz(log_masses: np.ndarray, sufmax_log: np.ndarray,
                 weights: np.ndarray, N: int) -> np.ndarray:
    """Pinned-endpoint forward recursion, logZ[0..N].

    logZ[m] = weights[m] + logsumexp_{n<m}(logZ[n] + log_masses[m-n]).

    The sum runs in the linear domain on y[n] = Z[n] * 2**-shift: one
    multiply-add per term instead of one exp, which is what makes the
    near-critical regime (where no term can be skipped) affordable.  The
    shared exponent shift moves only by exact powers of two, applied to
    the whole readable window whenever the newest entry leaves
    [2**-500, 2**500], so no rescale ever rounds.  Anything that
    underflows during a rescale sits at least e**-340 below the window
    maximum, far beneath the e**-60 skip threshold a log-domain scan
    would apply.

    The scan over n runs newest-to-oldest and stops once the prefix
    maximum of y times the suffix maximum of the masses proves the
    remaining terms cannot move the accumulator by one part in 1e16:
    results match a full scan to machine precision.
    """
    n_max = log_masses.shape[0] - 1
    kern = np.exp(log_masses)
    sufkern = np.exp(sufmax_log)
    logZ = np.empty(N + 1)
    y = np.empty(N + 1)
    pref = np.empty(N + 1)
    logZ[0] = 0.0
    y[0] = 1.0
    pref[0] = 1.0
    shift = 0
    for m in range(1, N + 1):
        lo = m - min(m, n_max)
        acc = 0.0
        n = m - 1
        while n >= lo:
            if pref[n] * sufkern[m - n] < acc * 1e-20:
                break
            acc += y[n] * kern[m - n]
            n -= 1
        ym = np.exp(weights[m]) * acc
        y[m] = ym
        logZ[m] = np.log(ym) + LN2 * shift
        pref[m] = max(pref[m - 1], ym)
        if ym > 0.0 and not (2.0 ** -500 < ym < 2.0 ** 500):
            k = int(np.floor(np.log2(ym)))
            start = max(0, m + 1 - n_max)
            for j in range(start, m + 1):
                y[j] = math.ldexp(y[j], -k)
                pref[j] = math.ldexp(pref[j], -k)
            shift += k
    return logZ


@njit(cache=True)
def backward_logz(log_masses: np.ndarray, sufmax_log: np.ndarray,
                  weights: np.ndarray, N: int) -> np.ndarray:
    """Mirror of forward_logz, conditioning on a contact at each site.

    logB[m] = logsumexp_{g}(log_masses[g] + weights[m+g] + logB[m+g]),
    logB[N] = 0.  logB[m] is the log weight of the segment (m, N] given a
    contact at m, with the endpoint pinned at N.  Linear-domain core with
    a shared power-of-two exponent, exactly as in forward_logz; here the
    scaled entries are x[j] = exp(weights[j]) * B[j] * 2**-shift, the
    factor every later site consumes.
    """
    n_max = log_masses.shape[0] - 1
    kern = np.exp(log_masses)
    sufkern = np.exp(sufmax_log)
    logB = np.empty(N + 1)
    x = np.empty(N + 1)
    suf = np.empty(N + 1)
    logB[N] = 0.0
    x[N] = np.exp(weights[N])
    suf[N] = x[N]
    shift = 0
    for m in range(N - 1, -1, -1):
        gmax = min(N - m, n_max)
        acc = 0.0
        g = 1
        while g <= gmax:
            if suf[m + g] * sufkern[g] < acc * 1e-20:
                break
            acc += kern[g] * x[m + g]
            g += 1
        logB[m] = np.log(acc) + LN2 * shift
        xm = np.exp(weights[m]) * acc
        x[m] = xm
        suf[m] = max(suf[m + 1], xm)
        if xm > 0.0 and not (2.0 ** -500 < xm < 2.0 ** 500):
            k = int(np.floor(np.log2(xm)))
            end = min(N, m + n_max - 1)
            for j in range(m, end + 1):
                x[j] = math.ldexp(x[j], -k)
                suf[j] = math.ldexp(suf[j], -k)
            shift += k
    return logB


@njit(cache=True)
def sample_path_rec(logZ: np.ndarray, log_masses: np.ndarray,
                    weights: np.ndarray, uniforms: np.ndarray,
                    out: np.ndarray) -> int:
    """Draw one contact set from the Gibbs law by backward gap sampling.

    Starting from m = N, the previous contact n is drawn with probability
    exp(logZ[n] + log_masses[m-n] + weights[m] - logZ[m]).  The cumulative
    scan walks n downward from m-1 and stops at the drawn uniform, so the
    expected work per step is one typical gap length.  out receives the
    contacts in decreasing order; the return value is their count.
    uniforms must hold at least as many entries as the path has contacts.
    """
    n_max = log_masses.shape[0] - 1
    N = logZ.shape[0] - 1
    m = N
    k = 0
    while m > 0:
        u = uniforms[k]
        base = weights[m] - logZ[m]
        lo = m - min(m, n_max)
        acc = 0.0
        n = m - 1
        chosen = lo  # rounding fallback: residual mass sits at the far end
        while n >= lo:
            acc += np.exp(logZ[n] + log_masses[m - n] + base)
            if acc >= u:
                chosen = n
                break
            n -= 1
        m = chosen
        out[k] = m
        k += 1
    return k
