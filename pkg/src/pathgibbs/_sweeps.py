"""Compiled Metropolis sweep kernels.

One sweep proposes 2N moves drawn from the configured mix:
single-site Gaussian steps, exact free-bridge block resampling (accepted on
the pair+mass difference only, the kinetic part cancels), and endpoint
redraws from the free conditional of the last bond.

Kernel lookups use per-lag linear interpolation on a uniform radius grid
(w_lag[j, k] = W(k*dr, eps*j)); radii past the last node clamp to it and
are counted. The np.random.Generator argument keeps each chain on its own
replayable stream.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _wlook(w_lag, j, r, inv_dr, clamp):
    pos = r * inv_dr
    idx = int(pos)
    last = w_lag.shape[1] - 1
    if idx >= last:
        clamp[0] += 1
        return w_lag[j, last]
    frac = pos - idx
    return (1.0 - frac) * w_lag[j, idx] + frac * w_lag[j, idx + 1]


@njit(cache=True, nogil=True)
def _pair_delta_site(x, i, new, w_lag, inv_dr, J, clamp):
    """Sum over partners of W(new - x_n) - W(x_i - x_n) at site i."""
    S = x.shape[0]
    d = x.shape[1]
    lo = i - J
    if lo < 0:
        lo = 0
    hi = i + J
    if hi > S - 1:
        hi = S - 1
    acc = 0.0
    for n in range(lo, hi + 1):
        if n == i:
            continue
        j = n - i if n > i else i - n
        rn = 0.0
        ro = 0.0
        for c in range(d):
            dn = new[c] - x[n, c]
            do = x[i, c] - x[n, c]
            rn += dn * dn
            ro += do * do
        acc += _wlook(w_lag, j, np.sqrt(rn), inv_dr, clamp) - _wlook(
            w_lag, j, np.sqrt(ro), inv_dr, clamp
        )
    return acc


@njit(cache=True, nogil=True)
def _pair_delta_block(x, a, buf, w_lag, inv_dr, J, clamp):
    """Pair-energy change when block rows a..a+Lb-1 are replaced by buf."""
    S = x.shape[0]
    d = x.shape[1]
    lb = buf.shape[0]
    acc = 0.0
    for m in range(lb):
        s = a + m
        lo = s - J
        if lo < 0:
            lo = 0
        hi = s + J
        if hi > S - 1:
            hi = S - 1
        for n in range(lo, hi + 1):
            if n == s:
                continue
            inside = a <= n < a + lb
            if inside and n < s:
                continue  # counted from the smaller block index
            j = n - s if n > s else s - n
            rn = 0.0
            ro = 0.0
            for c in range(d):
                xn_new = buf[n - a, c] if inside else x[n, c]
                dn = buf[m, c] - xn_new
                do = x[s, c] - x[n, c]
                rn += dn * dn
                ro += do * do
            acc += _wlook(w_lag, j, np.sqrt(rn), inv_dr, clamp) - _wlook(
                w_lag, j, np.sqrt(ro), inv_dr, clamp
            )
    return acc


@njit(cache=True, nogil=True)
def run_sweeps(
    x,
    n_sweeps,
    eps,
    kappa,
    p_site,
    p_bridge,
    sigma_site,
    has_pair,
    w_lag,
    inv_dr,
    J,
    starts,
    buf,
    newbuf,
    prop,
    acc,
    clamp,
    rng,
):
    """Advance x in place by n_sweeps sweeps; accumulate move statistics.

    prop/acc are int64[3] counters indexed (site, bridge, endpoint).
    buf is an (L_b, d) workspace, newbuf a (d,) workspace.
    """
    S = x.shape[0]
    d = x.shape[1]
    N = (S - 1) // 2
    lb = buf.shape[0]
    eps2 = eps * eps
    sqeps = np.sqrt(eps)
    ka = kappa * eps
    n_starts = starts.shape[0]

    for _ in range(n_sweeps):
        for _ in range(S - 1):
            u = rng.random()
            if u < p_site:
                # single-site Gaussian proposal
                prop[0] += 1
                k = rng.integers(0, S - 1)
                i = k if k < N else k + 1
                for c in range(d):
                    newbuf[c] = x[i, c] + sigma_site * rng.standard_normal()
                dh = 0.0
                for nb in (i - 1, i + 1):
                    if 0 <= nb < S:
                        for c in range(d):
                            dn = newbuf[c] - x[nb, c]
                            do = x[i, c] - x[nb, c]
                            dh += (dn * dn - do * do) / (2.0 * eps)
                if ka > 0.0:
                    for c in range(d):
                        dh += 0.5 * ka * (newbuf[c] * newbuf[c] - x[i, c] * x[i, c])
                if has_pair:
                    dh += eps2 * _pair_delta_site(x, i, newbuf, w_lag, inv_dr, J, clamp)
                if dh <= 0.0 or rng.random() < np.exp(-dh):
                    acc[0] += 1
                    for c in range(d):
                        x[i, c] = newbuf[c]
            elif u < p_site + p_bridge:
                # exact free-bridge block resample between fixed anchors
                prop[1] += 1
                a = starts[rng.integers(0, n_starts)]
                for c in range(d):
                    newbuf[c] = x[a - 1, c]  # running previous point
                for m in range(lb):
                    rem = lb + 1 - m
                    sdev = np.sqrt(eps * (rem - 1.0) / rem)
                    for c in range(d):
                        mean = newbuf[c] + (x[a + lb, c] - newbuf[c]) / rem
                        buf[m, c] = mean + sdev * rng.standard_normal()
                    for c in range(d):
                        newbuf[c] = buf[m, c]
                dh = 0.0
                if ka > 0.0:
                    for m in range(lb):
                        for c in range(d):
                            dh += 0.5 * ka * (
                                buf[m, c] * buf[m, c] - x[a + m, c] * x[a + m, c]
                            )
                if has_pair:
                    dh += eps2 * _pair_delta_block(x, a, buf, w_lag, inv_dr, J, clamp)
                if dh <= 0.0 or rng.random() < np.exp(-dh):
                    acc[1] += 1
                    for m in range(lb):
                        for c in range(d):
                            x[a + m, c] = buf[m, c]
            else:
                # endpoint redraw from the free conditional of its bond
                prop[2] += 1
                if rng.random() < 0.5:
                    i, nb = 0, 1
                else:
                    i, nb = S - 1, S - 2
                for c in range(d):
                    newbuf[c] = x[nb, c] + sqeps * rng.standard_normal()
                dh = 0.0
                if ka > 0.0:
                    for c in range(d):
                        dh += 0.5 * ka * (newbuf[c] * newbuf[c] - x[i, c] * x[i, c])
                if has_pair:
                    dh += eps2 * _pair_delta_site(x, i, newbuf, w_lag, inv_dr, J, clamp)
                if dh <= 0.0 or rng.random() < np.exp(-dh):
                    acc[2] += 1
                    for c in range(d):
                        x[i, c] = newbuf[c]
