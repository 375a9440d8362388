"""Survival-curve estimation and pinned-state drift checks by simulation."""

import enum
import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ConfigError
from .io import SURVIVAL_COLUMNS, canonical_json, csv_text, write_csv
from .models import history_buffer
from .rng import stream

Z95 = 1.96
BAND = 3.0
MIN_DRIFT_SAMPLES = 10**5
CHUNK = 2048


def default_grid(horizon, points=40, start=10):
    """Geometric integer grid from ``start`` to ``horizon``.

    Rounding can merge neighbours at the low end, so fewer than ``points``
    values may come back.
    """
    horizon = int(horizon)
    start = min(int(start), horizon)
    g = np.unique(np.rint(np.geomspace(start, horizon, points)).astype(np.int64))
    return g[(g >= 1) & (g <= horizon)]


def fingerprint(model, cfg, trajectories, n_grid):
    doc = {
        "model": model.to_dict(),
        "x0": float(cfg.x0), "A": float(cfg.A), "horizon": int(cfg.horizon),
        "seed": int(cfg.seed), "trajectories": int(trajectories),
        "n_grid": [int(n) for n in n_grid],
    }
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


@dataclass
class SurvivalEstimate:
    """Empirical ``P(tau_A > n)`` on an integer grid.

    ``survivors`` holds the integer tallies; ``surv`` is derived from them.
    Exact (oracle) curves set ``trajectories`` to None and put their
    truncation bound in ``ci_half_width``.
    """

    n_grid: np.ndarray
    surv: np.ndarray
    ci_half_width: np.ndarray
    trajectories: object
    censored: int
    horizon: int
    fingerprint: str = ""
    survivors: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_counts(cls, n_grid, survivors, trajectories, censored, horizon, fp=""):
        survivors = np.asarray(survivors, dtype=np.int64)
        p = survivors / float(trajectories)
        ci = Z95 * np.sqrt(p * (1.0 - p) / trajectories)
        return cls(np.asarray(n_grid, dtype=np.int64), p, ci, int(trajectories),
                   int(censored), int(horizon), fp, survivors)

    @property
    def censored_fraction(self):
        if not self.trajectories:
            return 0.0
        return self.censored / self.trajectories

    def rows(self):
        t = None if self.trajectories is None else int(self.trajectories)
        for n, s, c in zip(self.n_grid, self.surv, self.ci_half_width):
            yield int(n), float(s), float(c), t, int(self.censored)

    def to_csv_text(self):
        return csv_text(SURVIVAL_COLUMNS, self.rows())

    def to_csv(self, path):
        return write_csv(path, SURVIVAL_COLUMNS, self.rows())

    def summary(self):
        return {
            "fingerprint": self.fingerprint,
            "trajectories": self.trajectories,
            "censored": self.censored,
            "censored_fraction": self.censored_fraction,
            "horizon": self.horizon,
            "grid_points": int(len(self.n_grid)),
            **self.meta,
        }


def _check_grid(n_grid, horizon):
    if n_grid is None:
        return default_grid(horizon)
    g = np.asarray(n_grid, dtype=np.int64).ravel()
    if g.size == 0:
        raise ConfigError("empty n_grid")
    if np.any(np.diff(g) <= 0):
        raise ConfigError("n_grid must be strictly increasing")
    if g[0] < 1 or g[-1] > horizon:
        raise ConfigError(f"n_grid must lie in [1, {horizon}]")
    return g


def _run_chunk(kind, params, x0, A, horizon, seed, hist_len, taus, lo, hi):
    hist = np.empty(hist_len)
    for i in range(lo, hi):
        taus[i] = K.hitting_time(kind, params, x0, A, horizon, stream(seed, i), hist)


def hitting_times(model, cfg, trajectories, n_threads=1):
    """Hitting times for stream ids ``0..trajectories-1``; -1 marks censoring.

    Slot ``i`` is written only by stream ``i``, so the array does not
    depend on ``n_threads``.
    """
    if trajectories < 1:
        raise ConfigError("trajectories must be >= 1")
    if not cfg.x0 > cfg.A:
        raise ConfigError("hitting-time runs need x0 > A")
    hist_len = history_buffer(model, cfg.horizon).size
    taus = np.empty(int(trajectories), dtype=np.int64)
    args = (model.kind, model.params(), float(cfg.x0), float(cfg.A), int(cfg.horizon),
            int(cfg.seed), hist_len, taus)
    bounds = [(lo, min(lo + CHUNK, trajectories)) for lo in range(0, trajectories, CHUNK)]
    n_threads = max(1, int(n_threads or 1))
    if n_threads == 1:
        for lo, hi in bounds:
            _run_chunk(*args, lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            for f in [pool.submit(_run_chunk, *args, lo, hi) for lo, hi in bounds]:
                f.result()
    return taus


def survival_from_times(taus, n_grid, horizon, fp=""):
    taus = np.asarray(taus, dtype=np.int64)
    censored = int(np.count_nonzero(taus < 0))
    done = np.sort(taus[taus >= 0])
    # tau > n  <=>  not hit by step n
    hit_by = np.searchsorted(done, n_grid, side="right")
    survivors = taus.size - hit_by
    return SurvivalEstimate.from_counts(n_grid, survivors, taus.size, censored, horizon, fp)


def estimate_survival(model, cfg, trajectories, n_grid=None, n_threads=1):
    """Monte Carlo estimate of ``P(tau_A > n)`` over ``n_grid``.

    Trajectory ``i`` uses stream ``(cfg.seed, i)``. Censored runs count as
    surviving at every grid point. The result is bit-identical for any
    ``n_threads``.
    """
    grid = _check_grid(n_grid, cfg.horizon)
    taus = hitting_times(model, cfg, int(trajectories), n_threads)
    return survival_from_times(taus, grid, cfg.horizon,
                               fingerprint(model, cfg, trajectories, grid))


class Verdict(str, enum.Enum):
    NEGATIVE = "NEGATIVE"
    POSITIVE = "POSITIVE"
    INCONCLUSIVE = "INCONCLUSIVE"


def sign_verdict(mean, se, band=BAND):
    if mean + band * se < 0:
        return Verdict.NEGATIVE
    if mean - band * se > 0:
        return Verdict.POSITIVE
    return Verdict.INCONCLUSIVE


@dataclass
class DriftCheckReport:
    """Per pinned state: mean one-step change of a test function and its SE.

    For transformed checks ``mean``/``stderr`` refer to ``G`` and ``mean2``/
    ``stderr2`` to ``G**2``; ``C`` and ``D`` are the smallest constants with
    ``m1 >= -C`` and ``m2 <= D * G(x)`` over the grid at the 3-SE band.
    """

    x_grid: np.ndarray
    alpha: object
    function: str
    mean: np.ndarray
    stderr: np.ndarray
    verdicts: list
    samples: int
    mean2: np.ndarray = None
    stderr2: np.ndarray = None
    y: np.ndarray = None
    C: float = None
    D: float = None
    lower_uniform: bool = None
    upper_uniform: bool = None

    def to_dict(self):
        d = {
            "function": self.function,
            "alpha": self.alpha,
            "samples": self.samples,
            "x": [float(v) for v in self.x_grid],
            "mean": [float(v) for v in self.mean],
            "stderr": [float(v) for v in self.stderr],
            "verdict": [v.value for v in self.verdicts],
        }
        if self.mean2 is not None:
            d.update({
                "G": [float(v) for v in self.y],
                "mean_sq": [float(v) for v in self.mean2],
                "stderr_sq": [float(v) for v in self.stderr2],
                "C": self.C, "D": self.D,
                "lower_uniform": self.lower_uniform,
                "upper_uniform": self.upper_uniform,
            })
        return d


def _pinned_draws(model, x, n, rng):
    """``n`` pairs of next states from the pinned state ``x``."""
    a = np.empty(n)
    b = np.empty(n)
    hist = np.full(1, float(x))
    K.pinned_pairs(model.kind, model.params(), hist, 0, rng, a, b)
    return a, b


def sample_increments(model, x, samples, seed=0, history=None):
    """Independent draws of ``X_1 - x`` from a pinned state (or history).

    Raises
    ------
    ValueError
        If ``samples`` is not positive.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    hist = np.full(1, float(x)) if history is None else np.asarray(history, dtype=float)
    out = np.empty(int(samples))
    K.pinned_samples(model.kind, model.params(), hist, hist.size - 1, stream(seed), out)
    return out - hist[-1]


def _pair_stats(values_a, values_b):
    pm = 0.5 * (values_a + values_b)
    return float(pm.mean()), float(pm.std(ddof=1) / math.sqrt(pm.size))


def check_drift_power(model, alpha, x_grid, samples=10**6, seed=0):
    """Sign of ``E[X_1**alpha - x**alpha | X_0 = x]`` at pinned states.

    ``samples`` draws are taken per state as ``samples // 2`` pairs; for
    laws with symmetric noise each pair shares its noise magnitude with
    opposite signs (see ``_kernels.pinned_pairs``), so the pair mean is
    still unbiased. The standard error is taken over pair means.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    xs = np.asarray(x_grid, dtype=float)
    pairs = max(2, int(samples) // 2)
    means, ses, verdicts = [], [], []
    for j, x in enumerate(xs):
        a, b = _pinned_draws(model, x, pairs, stream(seed, j))
        # expm1 form avoids cancellation in X_1**alpha - x**alpha
        va = np.expm1(alpha * np.log(a / x, where=a > 0, out=np.full_like(a, -np.inf))) * x**alpha
        vb = np.expm1(alpha * np.log(b / x, where=b > 0, out=np.full_like(b, -np.inf))) * x**alpha
        m, se = _pair_stats(va, vb)
        means.append(m)
        ses.append(se)
        verdicts.append(sign_verdict(m, se))
    return DriftCheckReport(xs, float(alpha), "power", np.array(means), np.array(ses),
                            verdicts, 2 * pairs)


def check_drift_transformed(model, engine, x_grid, samples=10**6, seed=0):
    """First and second moments of the one-step change of ``G(X)``.

    States below 1 are mapped to ``G = 0`` (``G`` is only defined on
    ``[1, inf)``).
    """
    xs = np.asarray(x_grid, dtype=float)
    pairs = max(2, int(samples) // 2)
    m1, s1, m2, s2, ys, verdicts = [], [], [], [], [], []
    for j, x in enumerate(xs):
        y = engine.G(x)
        a, b = _pinned_draws(model, x, pairs, stream(seed, j))
        da = engine.G_many(np.maximum(a, 1.0)) - y
        db = engine.G_many(np.maximum(b, 1.0)) - y
        mean1, se1 = _pair_stats(da, db)
        # G1^2 - y^2 = d (2 y + d), computed without cancellation
        mean2, se2 = _pair_stats(da * (2 * y + da), db * (2 * y + db))
        m1.append(mean1); s1.append(se1); m2.append(mean2); s2.append(se2); ys.append(y)
        verdicts.append(sign_verdict(mean1, se1))
    m1, s1, m2, s2, ys = map(np.array, (m1, s1, m2, s2, ys))
    lower = -(m1 - BAND * s1)
    upper = (m2 + BAND * s2) / ys
    C = float(max(0.0, lower.max()))
    D = float(upper.max())
    # on a finite grid "uniform" can only mean: no growth toward large x beyond noise
    # plus a rounding floor: G differences lose ~eps * G(x) absolute accuracy
    slack1 = BAND * np.hypot(s1[1:], s1[:-1]) + 1e3 * np.finfo(float).eps * ys[1:]
    lower_uniform = bool(np.isfinite(C) and np.all(-m1[1:] <= -m1[:-1] + slack1))
    slack2 = BAND * np.hypot(s2[1:] / ys[1:], s2[:-1] / ys[:-1])
    upper_uniform = bool(np.isfinite(D) and m2[-1] / ys[-1] <= np.max(m2[:-1] / ys[:-1]) + slack2[-1]) \
        if len(xs) > 1 else bool(np.isfinite(D))
    return DriftCheckReport(xs, None, "G", m1, s1, verdicts, 2 * pairs,
                            mean2=m2, stderr2=s2, y=ys, C=C, D=D,
                            lower_uniform=lower_uniform, upper_uniform=upper_uniform)


def locate_drift_threshold(model, decades=(1, 2, 3, 4, 5, 6), samples=10**6, seed=0):
    """Smallest ``10**k`` where the ``alpha = (1 - theta) / 2`` check is NEGATIVE.

    Returns None when no decade qualifies.
    """
    theta = float(model.theta)
    if not 0.0 <= theta < 1.0:
        return None
    alpha = (1.0 - theta) / 2.0
    for k in decades:
        x = 10.0**k
        if check_drift_power(model, alpha, [x], samples, seed).verdicts[0] is Verdict.NEGATIVE:
            return x
    return None


def default_threads():
    return max(1, min(8, os.cpu_count() or 1))


def agreement_with_exact(est, exact, k=3.0):
    """Per grid point: is ``|surv - exact| <= k * half_width``?

    The half-width is the larger of the estimate's own and the binomial
    half-width at the exact value. The latter keeps the test meaningful
    where every simulated run survived (own half-width 0) while the exact
    value sits a rounding error below 1.
    """
    p = np.asarray(exact, dtype=float)
    t = est.trajectories
    null_hw = Z95 * np.sqrt(np.clip(p * (1.0 - p), 0.0, None) / t)
    hw = np.maximum(est.ci_half_width, null_hw)
    return np.abs(est.surv - p) <= k * hw + 4 * np.finfo(float).eps
