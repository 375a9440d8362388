"""Concrete growth models ``X_{n+1} = X_n + g(X_n) + xi_n``.

Each model is an immutable description with a closed-form drift ``g``,
conditional variance ``sigma2`` and the limits ``theta`` and ``lambda``. The
one-step laws themselves live in compiled kernels (:mod:`slowrec._kernels`).
"""

import enum
import math
from dataclasses import asdict, dataclass
from typing import ClassVar, Optional

import numpy as np

from . import _kernels as K
from .errors import ConfigError
from .rng import stream
from .transforms import DriftSpec

# history-dependent runs keep the whole path in memory
NONMARKOV_MAX_HORIZON = 10**6


class NoiseLaw(str, enum.Enum):
    """Centred noise with conditional standard deviation ``sigma(x)``."""

    GAUSSIAN = "gaussian"
    TWO_POINT = "two_point"


class GrowthModel:
    """Common surface of the model families."""

    family: ClassVar[str]
    markov: ClassVar[bool] = True
    countable: ClassVar[bool] = False
    kind: ClassVar[int]

    def g(self, x):
        raise NotImplementedError

    def variance(self, x):
        raise NotImplementedError

    def drift(self):
        """The drift as a :class:`DriftSpec` on ``[1, inf)``."""
        raise NotImplementedError

    @property
    def theta(self):
        raise NotImplementedError

    @property
    def lam(self):
        raise NotImplementedError

    def params(self):
        raise NotImplementedError

    def to_dict(self):
        d = {"family": self.family}
        for k, v in asdict(self).items():
            d[k] = v.value if isinstance(v, enum.Enum) else (list(v) if isinstance(v, tuple) else v)
        return d


def _positive(name, v):
    if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
        raise ConfigError(f"{name} must be a positive number, got {v!r}")


@dataclass(frozen=True)
class PowerDriftChain(GrowthModel):
    """Drift ``c x^gamma``, noise variance ``d x^(1+gamma)``.

    ``d = 0`` is accepted as a deterministic fixture. Excursions below zero
    are clamped to the absorbing state 0.
    """

    c: float
    gamma: float
    d: float
    noise: NoiseLaw = NoiseLaw.GAUSSIAN

    family: ClassVar[str] = "power_drift"
    kind: ClassVar[int] = K.POWER

    def __post_init__(self):
        _positive("c", self.c)
        if not -1.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (-1, 1)")
        if not self.d >= 0:
            raise ConfigError("d must be non-negative")
        object.__setattr__(self, "noise", NoiseLaw(self.noise))

    def g(self, x):
        return self.c * x**self.gamma

    def variance(self, x):
        return self.d * x ** (1.0 + self.gamma)

    def drift(self):
        return DriftSpec.power(self.c, self.gamma)

    @property
    def theta(self):
        return math.inf if self.d == 0 else 2.0 * self.c / self.d

    @property
    def lam(self):
        return 1.0 - self.gamma

    def params(self):
        return np.array([self.c, self.gamma, self.d, 0.0 if self.noise is NoiseLaw.GAUSSIAN else 1.0])


@dataclass(frozen=True)
class BesselLikeWalk(GrowthModel):
    """Nearest-neighbour walk on the integers >= 0, reflecting at 0.

    Up-probability ``(1 - delta / (2x)) / 2`` at ``x >= 1``. ``delta = 0`` (the
    simple symmetric walk) is accepted as an oracle fixture.
    """

    delta: float

    family: ClassVar[str] = "bessel"
    kind: ClassVar[int] = K.BESSEL
    countable: ClassVar[bool] = True

    def __post_init__(self):
        if not -1.0 < self.delta <= 0.0:
            raise ConfigError("delta must lie in (-1, 0]")

    def up_probability(self, x):
        return 1.0 if x <= 0 else 0.5 * (1.0 - self.delta / (2.0 * x))

    def g(self, x):
        return -self.delta / (2.0 * x)

    def variance(self, x):
        return 1.0 - self.g(x) ** 2

    def drift(self):
        return DriftSpec.power(-self.delta / 2.0, -1.0)

    @property
    def theta(self):
        return -self.delta

    @property
    def lam(self):
        return 2.0

    def params(self):
        return np.array([self.delta])


@dataclass(frozen=True)
class CriticalGWI(GrowthModel):
    """Critical Galton-Watson process with Poisson(c) immigration.

    Offspring law ``geometric`` (P(k) = 2^-(k+1), variance 2) or ``poisson``
    (mean 1, variance 1).
    """

    c: float
    offspring: str = "geometric"

    family: ClassVar[str] = "critical_gwi"
    kind: ClassVar[int] = K.GWI
    countable: ClassVar[bool] = True

    def __post_init__(self):
        _positive("c", self.c)
        if self.offspring not in ("geometric", "poisson"):
            raise ConfigError("offspring must be 'geometric' or 'poisson'")

    @property
    def d(self):
        return 2.0 if self.offspring == "geometric" else 1.0

    def g(self, x):
        return self.c

    def variance(self, x):
        return self.d * x + self.c

    def drift(self):
        return DriftSpec.power(self.c, 0.0)

    @property
    def theta(self):
        return 2.0 * self.c / self.d

    @property
    def lam(self):
        return 1.0

    def params(self):
        return np.array([self.c, 0.0 if self.offspring == "geometric" else 1.0])

    def offspring_pmf(self, size):
        k = np.arange(size)
        if self.offspring == "geometric":
            return 0.5 ** (k + 1.0)
        from scipy.stats import poisson
        return poisson.pmf(k, 1.0)

    def offspring_tail(self, k):
        """``P(offspring > k)``."""
        if self.offspring == "geometric":
            return 0.5 ** (k + 1.0)
        from scipy.stats import poisson
        return float(poisson.sf(k, 1.0))


def base_law(sigma2):
    """Law on ``{0, 1, m}`` with mean 1 and variance ``sigma2``.

    ``m`` is the smallest integer >= 2 with ``sigma2 <= m - 1``; returns
    ``(m, p0, p1, pm)``.
    """
    m = max(2, math.ceil(sigma2) + 1)
    pm = sigma2 / (m * (m - 1))
    p1 = 1.0 - sigma2 / (m - 1)
    p0 = sigma2 / m
    return m, p0, p1, pm


@dataclass(frozen=True)
class StateDepGW(GrowthModel):
    """State-dependent Galton-Watson process absorbed at 0.

    Given ``X_n = x`` each of the ``x`` individuals has a :func:`base_law`
    number of children plus ``floor(c/x) + Bernoulli(frac(c/x))`` extra ones,
    so the mean per individual is exactly ``1 + c/x`` and the variance is
    ``sigma2 + O(1/x)``.

    ``base_law_override = (m, p0, p1, pm)`` replaces the base law; it exists
    for degenerate fixtures and voids the moment guarantees above.
    """

    c: float
    sigma2: float
    base_law_override: Optional[tuple] = None

    family: ClassVar[str] = "state_dep_gw"
    kind: ClassVar[int] = K.STATEDEP
    countable: ClassVar[bool] = True

    def __post_init__(self):
        if self.base_law_override is None:
            _positive("c", self.c)
            _positive("sigma2", self.sigma2)
        else:
            law = tuple(float(v) for v in self.base_law_override)
            if len(law) != 4 or abs(sum(law[1:]) - 1.0) > 1e-12 or min(law[1:]) < 0:
                raise ConfigError("base_law_override must be (m, p0, p1, pm) with probabilities summing to 1")
            object.__setattr__(self, "base_law_override", law)

    def law(self):
        if self.base_law_override is not None:
            return self.base_law_override
        return base_law(self.sigma2)

    def g(self, x):
        return self.c

    def extra_variance(self, x):
        """Variance of the extra children summed over the ``x`` individuals."""
        r = self.c / x
        f = r - math.floor(r)
        return x * f * (1.0 - f)

    def variance(self, x):
        return x * self.sigma2 + self.extra_variance(x)

    def drift(self):
        return DriftSpec.power(self.c, 0.0)

    @property
    def theta(self):
        return math.inf if self.sigma2 == 0 else 2.0 * self.c / self.sigma2

    @property
    def lam(self):
        return 1.0

    def params(self):
        m, p0, p1, pm = self.law()
        return np.array([self.c, m, p0, p1, pm])

    def to_dict(self):
        d = {"family": self.family, "c": self.c, "sigma2": self.sigma2}
        if self.base_law_override is not None:
            d["base_law_override"] = list(self.base_law_override)
        return d


@dataclass(frozen=True)
class NonMarkovR(GrowthModel):
    """Unit drift with a noise amplitude drawn from the whole past.

    ``X_{n+1} = X_n + 1 + K eps_n sqrt(R_n)`` where ``R_n`` mixes ``X_n`` with
    a uniformly chosen past value ``X_{N_n}``. Absorbed at 0.
    """

    K: float

    family: ClassVar[str] = "non_markov_r"
    kind: ClassVar[int] = K.NONMARKOV
    markov: ClassVar[bool] = False

    def __post_init__(self):
        if not self.K > 2:
            raise ConfigError("K must exceed 2")

    def g(self, x):
        return 1.0

    def variance(self, x):
        return self.K**2 * x / 2.0

    def drift(self):
        return DriftSpec.power(1.0, 0.0)

    @property
    def theta(self):
        return 4.0 / self.K**2

    @property
    def lam(self):
        return 1.0

    def params(self):
        return np.array([self.K])


@dataclass(frozen=True)
class PowerDriftLattice(GrowthModel):
    """Integer-valued three-point analogue of :class:`PowerDriftChain`.

    From ``x >= 1`` the walk jumps ``+h`` or ``-h`` with
    ``h = ceil(sqrt(d x^(1+gamma)))`` and otherwise stays, with probabilities
    chosen so the mean jump is ``c x^gamma`` and the mean squared jump
    ``d x^(1+gamma)``. From 0 it moves to 1 or stays with probability 1/2.
    With ``cap`` set, jumps above ``cap`` land on ``cap``; this makes a finite
    chain used as the positive-recurrent oracle fixture.
    """

    c: float
    gamma: float
    d: float
    cap: Optional[int] = None

    family: ClassVar[str] = "power_drift_lattice"
    kind: ClassVar[int] = K.LATTICE
    countable: ClassVar[bool] = True

    def __post_init__(self):
        _positive("c", self.c)
        _positive("d", self.d)
        if not -1.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (-1, 1)")
        if self.cap is not None and not (isinstance(self.cap, int) and self.cap >= 2):
            raise ConfigError("cap must be an integer >= 2")

    def row(self, x):
        return K.lattice_row(self.c, self.gamma, self.d, float(x))

    def g(self, x):
        return self.c * x**self.gamma

    def variance(self, x):
        return self.d * x ** (1.0 + self.gamma) - self.g(x) ** 2

    def drift(self):
        return DriftSpec.power(self.c, self.gamma)

    @property
    def theta(self):
        return 2.0 * self.c / self.d

    @property
    def lam(self):
        return 1.0 - self.gamma

    def params(self):
        return np.array([self.c, self.gamma, self.d, -1.0 if self.cap is None else float(self.cap)])


FAMILIES = {cls.family: cls for cls in
            (PowerDriftChain, BesselLikeWalk, CriticalGWI, StateDepGW, NonMarkovR, PowerDriftLattice)}


def model_from_dict(d):
    """Build a model from ``{"family": ..., **params}``."""
    d = dict(d)
    try:
        cls = FAMILIES[d.pop("family")]
    except KeyError as exc:
        raise ConfigError(f"unknown or missing model family: {exc}") from None
    if "base_law_override" in d and d["base_law_override"] is not None:
        d["base_law_override"] = tuple(d["base_law_override"])
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class TrajectoryConfig:
    """Start, target set ``[0, A]``, horizon and stream of one trajectory."""

    x0: float
    A: float
    horizon: int
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if not (isinstance(self.horizon, (int, np.integer)) and self.horizon >= 1):
            raise ConfigError("horizon must be a positive integer")
        if self.x0 < 0:
            raise ConfigError("x0 must be non-negative")
        if not self.A >= 0:
            raise ConfigError("A must be non-negative")
        if self.stream_id < 0:
            raise ConfigError("stream_id must be non-negative")


@dataclass(frozen=True)
class HittingTime:
    """Outcome of one run: ``steps`` is the hitting time, or the horizon if censored."""

    steps: int
    censored: bool


def history_buffer(model, horizon):
    if model.markov:
        return np.empty(1)
    if horizon > NONMARKOV_MAX_HORIZON:
        raise ConfigError(f"history-dependent runs are capped at {NONMARKOV_MAX_HORIZON} steps")
    return np.empty(horizon + 1)


def step(model, history, rng):
    """Sample the next state given the trajectory so far.

    Markov families read only ``history[-1]``.
    """
    hist = np.asarray(history, dtype=float)
    if hist.ndim != 1 or hist.size == 0:
        raise ValueError("history must be a non-empty 1-d sequence")
    if model.markov:
        return float(K.step(model.kind, model.params(), hist[-1:], 0, rng))
    return float(K.step(model.kind, model.params(), hist, hist.size - 1, rng))


def simulate_path(model, x0, steps, rng):
    """Return ``X_0..X_steps`` as an array."""
    hist = np.empty(steps + 1)
    hist[0] = x0
    K.trajectory(model.kind, model.params(), hist, steps, rng)
    return hist


def simulate_hitting_time(model, cfg):
    """First ``n >= 1`` with ``X_n <= A``, censored at the horizon."""
    if not cfg.x0 > cfg.A:
        raise ConfigError("hitting-time runs need x0 > A")
    rng = stream(cfg.seed, cfg.stream_id)
    n = K.hitting_time(model.kind, model.params(), float(cfg.x0), float(cfg.A),
                       int(cfg.horizon), rng, history_buffer(model, cfg.horizon))
    return HittingTime(cfg.horizon, True) if n < 0 else HittingTime(int(n), False)


def extinction_time(model, cfg):
    """First ``n`` with ``X_n = 0`` for a state-dependent GW process."""
    if not isinstance(model, StateDepGW):
        raise TypeError("extinction_time applies to StateDepGW models")
    if cfg.x0 == 0:
        return HittingTime(0, False)
    if cfg.x0 != int(cfg.x0) or cfg.x0 < 1:
        raise ConfigError("x0 must be a positive integer")
    return simulate_hitting_time(model, TrajectoryConfig(cfg.x0, 0.0, cfg.horizon, cfg.seed, cfg.stream_id))
