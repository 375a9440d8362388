"""Log-log tail fits of survival curves and the bracket verdict."""

import enum
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as sps
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

from .errors import InsufficientPointsError

MIN_POINTS = 5
MIN_EXPECTED_SURVIVORS = 50


@dataclass
class TailFit:
    """OLS fit of ``log surv = intercept - slope * log n``."""

    slope: float
    intercept: float
    window: tuple
    stderr: float
    points_used: int
    min_surv_used: float

    def to_dict(self):
        d = asdict(self)
        d["window"] = [int(v) for v in self.window]
        return d


class TailExponentRegressor(BaseEstimator, RegressorMixin):
    """Power-law decay exponent of ``y`` against ``x`` by log-log OLS.

    ``predict`` returns ``exp(intercept) * x ** -slope_``.
    """

    def __init__(self, min_points=MIN_POINTS):
        self.min_points = min_points

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_2d=False)
        X = np.ravel(X)
        if X.size < self.min_points:
            raise InsufficientPointsError(
                f"need at least {self.min_points} points, got {X.size}")
        if np.any(X <= 0) or np.any(y <= 0):
            raise ValueError("log-log fit needs positive x and y")
        res = sps.linregress(np.log(X), np.log(y))
        self.slope_ = -float(res.slope)
        self.intercept_ = float(res.intercept)
        # linregress divides by n - 2; an exact power law gives 0
        self.stderr_ = float(res.stderr) if np.isfinite(res.stderr) else 0.0
        self.n_points_ = int(X.size)
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        X = np.ravel(np.asarray(X, dtype=float))
        return np.exp(self.intercept_ - self.slope_ * np.log(X))


def usable_mask(est, window=None):
    """Grid points fit for regression.

    Positive survival and at least 50 survivors for simulated curves. A
    point is also dropped when fewer than 50 of its survivors go on to hit
    before the horizon: its value is then dominated by censored runs and
    says nothing about the tail (an all-censored run leaves no points).
    """
    n = np.asarray(est.n_grid)
    s = np.asarray(est.surv, dtype=float)
    mask = s > 0
    if est.trajectories:
        survivors = np.rint(s * est.trajectories)
        mask &= survivors >= MIN_EXPECTED_SURVIVORS
        mask &= survivors - est.censored >= MIN_EXPECTED_SURVIVORS
    if window is not None:
        lo, hi = window
        mask &= (n >= lo) & (n <= hi)
    return mask


def default_window(est, level=0.5):
    """``(n_lo, n_hi)`` from the first grid point with ``surv <= level`` to the end.

    Before that point most runs have not had time to reach the target set
    and the curve is still flat, which drags a log-log slope toward 0.
    Falls back to the whole grid if survival never drops that far.
    """
    n = np.asarray(est.n_grid)
    below = np.flatnonzero(np.asarray(est.surv) <= level)
    lo = n[below[0]] if below.size else n[0]
    return int(lo), int(n[-1])


def fit_tail(est, window=None):
    """Tail exponent of a survival curve over ``window = (n_lo, n_hi)``.

    Raises
    ------
    InsufficientPointsError
        Fewer than five usable grid points in the window.
    """
    mask = usable_mask(est, window)
    n = np.asarray(est.n_grid, dtype=float)[mask]
    s = np.asarray(est.surv, dtype=float)[mask]
    if n.size < MIN_POINTS:
        raise InsufficientPointsError(
            f"only {n.size} usable points in window {window}; need {MIN_POINTS}")
    reg = TailExponentRegressor().fit(n, s)
    return TailFit(reg.slope_, reg.intercept_, (int(n[0]), int(n[-1])), reg.stderr_,
                   int(n.size), float(s.min()))


class Sandwich(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    MARGINAL = "MARGINAL"


def sandwich_verdict(fit, bracket, k=2.0):
    """Compare ``slope +- k * stderr`` with the open interval ``bracket``."""
    lo, hi = sorted(bracket)
    a, b = fit.slope - k * fit.stderr, fit.slope + k * fit.stderr
    if lo < a and b < hi:
        return Sandwich.PASS
    if b <= lo or a >= hi:
        return Sandwich.FAIL
    return Sandwich.MARGINAL
