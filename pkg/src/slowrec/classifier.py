"""Recurrence regimes, tail-exponent brackets and convergence rates."""

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import OrderingError, WindowError
from .transforms import DriftSpec, make_engine

LIMIT_GRID = (1e3, 1e4, 1e5, 1e6)
BRACKET_WINDOW = (1e3, 1e6)
CLOSED_FORM_TOL = 1e-9
NUMERIC_TOL = 1e-2


class Regime(str, enum.Enum):
    TRANSIENT = "transient"
    NULL_RECURRENT = "null_recurrent"
    POSITIVE_RECURRENT = "positive_recurrent"
    BOUNDARY_UNTREATED = "boundary_untreated"
    NOT_APPLICABLE = "not_applicable"


class LimitEstimate(NamedTuple):
    """A limit ``x -> inf`` with the evidence behind it."""

    value: float
    converged: bool
    method: str
    samples: tuple = ()

    def __float__(self):
        return float(self.value)


def _numeric_limit(fn, grid=LIMIT_GRID, rel=0.01):
    vals = tuple(float(fn(x)) for x in grid)
    last, prev = vals[-1], vals[-2]
    converged = abs(last - prev) <= rel * max(abs(last), 1e-300)
    return LimitEstimate(last, converged, "numeric", vals)


def numeric_theta(model, grid=LIMIT_GRID):
    """``2 x g(x) / sigma2(x)`` evaluated on a geometric grid."""
    return _numeric_limit(lambda x: 2.0 * x * model.g(x) / model.variance(x), grid)


def numeric_lambda(drift, grid=LIMIT_GRID):
    """``1 - g'(x) x / g(x)`` evaluated on a geometric grid."""
    return _numeric_limit(lambda x: 1.0 - drift.derivative(x) * x / drift(x), grid)


def compute_theta(model):
    """Closed-form ``theta = lim 2 x g(x) / sigma2(x)`` for a model family."""
    try:
        return LimitEstimate(float(model.theta), True, "closed_form")
    except NotImplementedError:
        return numeric_theta(model)


def compute_lambda(drift):
    """``lambda`` with ``g'(x) x / g(x) -> 1 - lambda``.

    Accepts a :class:`DriftSpec` or a model.
    """
    if not isinstance(drift, DriftSpec):
        drift = drift.drift()
    if drift.family == "power":
        return LimitEstimate(1.0 - drift.gamma, True, "closed_form")
    return numeric_lambda(drift)


def classify(theta, lam, tol=CLOSED_FORM_TOL):
    """Recurrence regime from ``theta`` and ``lambda``.

    ``lambda == 1 - theta`` and ``theta == 1`` (within ``tol``) are reported as
    untreated boundaries rather than guessed.
    """
    theta, lam = float(theta), float(lam)
    if theta > 1.0 + tol:
        return Regime.TRANSIENT
    if abs(theta - 1.0) <= tol or abs(lam - (1.0 - theta)) <= tol:
        return Regime.BOUNDARY_UNTREATED
    if lam > 1.0 - theta:
        return Regime.NULL_RECURRENT
    return Regime.POSITIVE_RECURRENT


def predict_bracket(engine, theta, alpha, beta, window=BRACKET_WINDOW):
    """Tail-exponent bracket ``(lo, hi)`` implied by ``C_b/ell_b <= P(tau > n) <= C_a/ell_a``.

    ``lo`` is the log-log slope of ``ell_alpha`` and ``hi`` that of
    ``ell_beta`` over ``window``; asymptotically ``(alpha, beta) / lambda``.
    """
    if not 0.0 < alpha < 1.0 - theta < beta:
        raise OrderingError(f"need 0 < alpha < 1 - theta < beta, got alpha={alpha}, "
                            f"1 - theta={1.0 - theta}, beta={beta}")
    return (engine.log_slope_ell(alpha, *window), engine.log_slope_ell(beta, *window))


class TVRate:
    """The weight ``n -> ell'_alpha(n)`` of the total-variation rate.

    ``slope`` is its asymptotic log-log slope ``alpha / lambda - 1``.
    """

    def __init__(self, engine, alpha, lam):
        self.engine = engine
        self.alpha = alpha
        self.slope = alpha / lam - 1.0

    def __call__(self, n):
        if np.ndim(n) == 0:
            return self.engine.ell_prime(self.alpha, float(n))
        return np.array([self.engine.ell_prime(self.alpha, float(v)) for v in np.ravel(n)])

    def log_slope(self, n_lo, n_hi):
        return (math.log(self(n_hi)) - math.log(self(n_lo))) / (math.log(n_hi) - math.log(n_lo))


def predict_tv_rate(engine, alpha, theta):
    """Rate function for ``ell'_alpha(n) ||P^n(x, .) - pi||_TV -> 0``.

    Valid for ``lambda < alpha < 1 - theta``.
    """
    lam = float(compute_lambda(engine.drift))
    if not lam < alpha < 1.0 - theta:
        raise WindowError(f"need lambda < alpha < 1 - theta, got lambda={lam}, alpha={alpha}, "
                          f"1 - theta={1.0 - theta}")
    return TVRate(engine, alpha, lam)


@dataclass
class ClassificationReport:
    theta: float
    lam: float
    regime: Regime
    tail_exponent_center: float
    bracket: Optional[tuple] = None
    tv_rate_exponent: Optional[float] = None
    markov: bool = True
    recurrent: bool = True
    theta_converged: bool = True
    lambda_converged: bool = True
    warnings: list = field(default_factory=list)

    @property
    def converged(self):
        return self.theta_converged and self.lambda_converged

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["regime"] = self.regime.value
        d["bracket"] = list(self.bracket) if self.bracket is not None else None
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return d


def classify_model(model, alpha=None, beta=None, tol=None, numeric=False):
    """Full report for a model: limits, regime, bracket and TV-rate exponent.

    ``numeric=True`` replaces the closed-form limits with the large-x grid
    evaluation (and its looser boundary tolerance).
    """
    drift = model.drift()
    if numeric:
        th, lm = numeric_theta(model), numeric_lambda(drift)
    else:
        th, lm = compute_theta(model), compute_lambda(drift)
    if tol is None:
        tol = NUMERIC_TOL if th.method == "numeric" or lm.method == "numeric" else CLOSED_FORM_TOL
    theta, lam = th.value, lm.value
    regime = classify(theta, lam, tol)
    warnings = []
    if not (th.converged and lm.converged):
        warnings.append("large-x limit did not settle to 1% on the evaluation grid")
    if regime is Regime.BOUNDARY_UNTREATED:
        warnings.append("lambda = 1 - theta or theta = 1: boundary case left untreated")
    recurrent = theta < 1.0
    if not model.markov and regime is not Regime.TRANSIENT:
        warnings.append("process is not Markov: null/positive recurrence does not apply")
        regime = Regime.NOT_APPLICABLE
    center = (1.0 - theta) / lam if math.isfinite(theta) else math.nan

    bracket = None
    tv_exp = None
    engine = None
    if alpha is not None and beta is not None and 0.0 < theta < 1.0:
        engine = make_engine(drift)
        bracket = predict_bracket(engine, theta, alpha, beta)
    if alpha is not None and model.markov and lam < alpha < 1.0 - theta:
        tv_exp = alpha / lam - 1.0
    return ClassificationReport(
        theta=theta, lam=lam, regime=regime, tail_exponent_center=center,
        bracket=bracket, tv_rate_exponent=tv_exp, markov=model.markov,
        recurrent=recurrent, theta_converged=th.converged,
        lambda_converged=lm.converged, warnings=warnings)
