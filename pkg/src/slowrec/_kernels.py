"""Compiled one-step laws and trajectory loops.

Models are passed as ``(kind, params)``: an integer family code and a float64
parameter vector (layouts below). All randomness comes from the numpy
``Generator`` handed in, so a trajectory is a pure function of its stream.

    POWER      [c, gamma, d, noise]        noise 0 = gaussian, 1 = two-point
    BESSEL     [delta]
    GWI        [c, offspring]              offspring 0 = geometric, 1 = poisson
    STATEDEP   [c, m, p0, p1, pm]          base law on {0, 1, m}
    NONMARKOV  [K]
    LATTICE    [c, gamma, d, cap]          cap < 0 means no upper reflection
"""

import math

import numba as nb
import numpy as np

POWER, BESSEL, GWI, STATEDEP, NONMARKOV, LATTICE = 0, 1, 2, 3, 4, 5


@nb.njit(cache=True, nogil=True)
def lattice_row(c, gamma, d, x):
    """Jump size and up/down probabilities of the three-point lattice walk."""
    if x <= 0.0:
        return 1.0, 0.5, 0.0
    m = c * x ** gamma
    v = d * x ** (1.0 + gamma)
    h = max(1.0, math.ceil(math.sqrt(v)))
    spread = v / (h * h)
    tilt = m / h
    up = 0.5 * (spread + tilt)
    down = 0.5 * (spread - tilt)
    if down < 0.0:
        down = 0.0
        up = min(tilt, 1.0)
    return h, up, down


@nb.njit(cache=True, nogil=True)
def _lattice_move(x, h, up, down, cap, u):
    if u < up:
        y = x + h
        return cap if cap >= 0.0 and y > cap else y
    if u < up + down:
        y = x - h
        return y if y > 0.0 else 0.0
    return x


@nb.njit(cache=True, nogil=True)
def _step_markov(kind, p, x, rng):
    if kind == POWER:
        if x <= 0.0:
            return 0.0
        sigma = math.sqrt(p[2] * x ** (1.0 + p[1]))
        if p[3] == 0.0:
            noise = sigma * rng.standard_normal()
        else:
            noise = sigma if rng.random() < 0.5 else -sigma
        y = x + p[0] * x ** p[1] + noise
        return y if y > 0.0 else 0.0
    if kind == BESSEL:
        if x <= 0.0:
            return 1.0
        up = 0.5 * (1.0 - p[0] / (2.0 * x))
        return x + 1.0 if rng.random() < up else x - 1.0
    if kind == GWI:
        n = int(x)
        if p[1] == 0.0:
            kids = rng.negative_binomial(n, 0.5) if n > 0 else 0
        else:
            kids = rng.poisson(float(n)) if n > 0 else 0
        return float(kids + rng.poisson(p[0]))
    if kind == STATEDEP:
        n = int(x)
        if n <= 0:
            return 0.0
        m, p1, pm = p[1], p[3], p[4]
        big = rng.binomial(n, pm) if pm > 0.0 else 0
        rest = n - big
        ones = 0
        if rest > 0 and pm < 1.0:
            q = p1 / (1.0 - pm)
            if q >= 1.0:
                ones = rest
            elif q > 0.0:
                ones = rng.binomial(rest, q)
        # every individual adds floor(c/x) children, plus one more w.p. frac(c/x)
        r = p[0] / x
        k = math.floor(r)
        extra = n * k
        fr = r - k
        if fr > 0.0:
            extra += rng.binomial(n, fr)
        return ones + m * big + extra
    if kind == LATTICE:
        h, up, down = lattice_row(p[0], p[1], p[2], x)
        return _lattice_move(x, h, up, down, p[3], rng.random())
    return np.nan


@nb.njit(cache=True, nogil=True)
def _nonmarkov_parts(p, hist, n, rng):
    """Draw ``(K * sqrt(R_n), x)`` for the history-dependent walk."""
    x = hist[n]
    j = int(rng.random() * (n + 1))
    if j > n:
        j = n
    xj = hist[j]
    denom = x + xj
    if denom <= 0.0:
        r = 0.0
    elif rng.random() < 0.5:
        r = x * x / denom
    else:
        r = x * xj / denom
    return p[0] * math.sqrt(r), x


@nb.njit(cache=True, nogil=True)
def step(kind, p, hist, n, rng):
    """Sample ``X_{n+1}`` given ``hist[0..n]``."""
    if kind == NONMARKOV:
        if hist[n] <= 0.0:
            return 0.0
        amp, x = _nonmarkov_parts(p, hist, n, rng)
        eps = 1.0 if rng.random() < 0.5 else -1.0
        y = x + 1.0 + eps * amp
        return y if y > 0.0 else 0.0
    return _step_markov(kind, p, hist[n], rng)


@nb.njit(cache=True, nogil=True)
def hitting_time(kind, p, x0, threshold, horizon, rng, hist):
    """First ``n >= 1`` with ``X_n <= threshold``, or -1 if censored.

    ``hist`` must hold ``horizon + 1`` values for the history-dependent walk
    and may have length 1 otherwise.
    """
    x = x0
    hist[0] = x0
    for n in range(1, horizon + 1):
        if kind == NONMARKOV:
            x = step(kind, p, hist, n - 1, rng)
            hist[n] = x
        else:
            x = _step_markov(kind, p, x, rng)
        if x <= threshold:
            return n
    return -1


@nb.njit(cache=True, nogil=True)
def trajectory(kind, p, hist, steps, rng):
    """Fill ``hist[1..steps]`` from ``hist[0]``."""
    for n in range(steps):
        hist[n + 1] = step(kind, p, hist, n, rng)


@nb.njit(cache=True, nogil=True)
def pinned_samples(kind, p, hist, n, rng, out):
    """Independent draws of ``X_{n+1}`` from the pinned history ``hist[0..n]``."""
    for i in range(out.shape[0]):
        out[i] = step(kind, p, hist, n, rng)


@nb.njit(cache=True, nogil=True)
def pinned_pairs(kind, p, hist, n, rng, out_a, out_b):
    """Pairs of draws of ``X_{n+1}`` from a pinned history.

    For laws with symmetric centred noise (power drift, the history-dependent
    walk) the pair shares everything but the sign of the noise. The +-1 and
    lattice walks use antithetic uniforms ``u`` and ``1 - u``. Either way both
    members have the exact one-step law and the pair mean cancels most of the
    noise. Other laws yield two independent draws.
    """
    x = hist[n]
    for i in range(out_a.shape[0]):
        if kind == POWER and x > 0.0:
            sigma = math.sqrt(p[2] * x ** (1.0 + p[1]))
            if p[3] == 0.0:
                noise = sigma * rng.standard_normal()
            else:
                noise = sigma if rng.random() < 0.5 else -sigma
            base = x + p[0] * x ** p[1]
            a, b = base + noise, base - noise
            out_a[i] = a if a > 0.0 else 0.0
            out_b[i] = b if b > 0.0 else 0.0
        elif kind == NONMARKOV and x > 0.0:
            amp, _ = _nonmarkov_parts(p, hist, n, rng)
            a, b = x + 1.0 + amp, x + 1.0 - amp
            out_a[i] = a if a > 0.0 else 0.0
            out_b[i] = b if b > 0.0 else 0.0
        elif kind == BESSEL and x > 0.0:
            up = 0.5 * (1.0 - p[0] / (2.0 * x))
            u = rng.random()
            out_a[i] = x + 1.0 if u < up else x - 1.0
            out_b[i] = x + 1.0 if 1.0 - u < up else x - 1.0
        elif kind == LATTICE and x > 0.0:
            h, up, down = lattice_row(p[0], p[1], p[2], x)
            u = rng.random()
            out_a[i] = _lattice_move(x, h, up, down, p[3], u)
            out_b[i] = _lattice_move(x, h, up, down, p[3], 1.0 - u)
        else:
            out_a[i] = step(kind, p, hist, n, rng)
            out_b[i] = step(kind, p, hist, n, rng)
