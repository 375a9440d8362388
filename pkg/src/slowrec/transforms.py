"""Space and time transforms of a positive drift.

For a drift ``g`` positive on ``[1, inf)`` the transforms are

    G(x)        = int_1^x dy / g(y)
    ell_a(n)    = G^{-1}(n) ** a
    ell'_a(n)   = a * g(G^{-1}(n)) * G^{-1}(n) ** (a - 1)

Power drifts ``g(x) = c * x**gamma`` have closed forms. Any other drift is
integrated numerically in the log coordinate ``u = ln x``, where
``G(e^u) = int_0^u e^s / g(e^s) ds`` has a smooth integrand over many decades.
"""

import bisect
import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import DomainError, IntegrabilityError

_EPS = np.finfo(float).eps


class DriftSpec:
    """A drift function ``g`` on ``[1, inf)``.

    Use :meth:`power` or :meth:`tabulated` to build one.

    Tabulated drifts interpolate linearly in log-log coordinates between
    knots and extrapolate past either end with the slope of the two
    outermost knots, so power-law tails are reproduced exactly.
    """

    def __init__(self, family, c=None, gamma=None, x=None, g=None):
        self.family = family
        if family == "power":
            c, gamma = float(c), float(gamma)
            if not c > 0:
                raise DomainError("power drift needs c > 0")
            if not -1.0 <= gamma < 1.0:
                raise DomainError("power drift needs gamma in [-1, 1)")
            self.c, self.gamma = c, gamma
        elif family == "tabulated":
            x = np.asarray(x, dtype=float)
            g = np.asarray(g, dtype=float)
            if x.ndim != 1 or x.shape != g.shape or x.size < 2:
                raise DomainError("tabulated drift needs two equal-length 1-d grids of at least 2 knots")
            if np.any(np.diff(x) <= 0) or x[0] <= 0:
                raise DomainError("tabulated knots must be positive and strictly increasing")
            self.x, self.g = x, g
            self._lx = [math.log(v) for v in x]
            self._lg = [math.log(v) if v > 0 else -math.inf for v in g]
            self._positive = [v > 0 for v in g]
        else:
            raise DomainError(f"unknown drift family {family!r}")

    @classmethod
    def power(cls, c, gamma):
        return cls("power", c=c, gamma=gamma)

    @classmethod
    def tabulated(cls, x, g):
        return cls("tabulated", x=x, g=g)

    @property
    def closed_form_available(self):
        return self.family == "power"

    def __repr__(self):
        if self.family == "power":
            return f"DriftSpec.power(c={self.c!r}, gamma={self.gamma!r})"
        return f"DriftSpec.tabulated(<{self.x.size} knots on [{self.x[0]:g}, {self.x[-1]:g}]>)"

    def to_dict(self):
        if self.family == "power":
            return {"family": "power", "c": self.c, "gamma": self.gamma}
        return {"family": "tabulated", "x": self.x.tolist(), "g": self.g.tolist()}

    def _segment(self, lx):
        # index i of the knot pair (i, i+1) used for log-abscissa lx
        i = bisect.bisect_right(self._lx, lx) - 1
        return min(max(i, 0), len(self._lx) - 2)

    def log_g(self, lx):
        """``ln g(e^lx)``; raises :class:`IntegrabilityError` where g <= 0."""
        if self.family == "power":
            return math.log(self.c) + self.gamma * lx
        i = self._segment(lx)
        if not (self._positive[i] and self._positive[i + 1]):
            raise IntegrabilityError(
                f"tabulated drift is not positive near x={math.exp(lx):g}")
        lx0, lx1 = self._lx[i], self._lx[i + 1]
        lg0, lg1 = self._lg[i], self._lg[i + 1]
        return lg0 + (lg1 - lg0) * (lx - lx0) / (lx1 - lx0)

    def __call__(self, x):
        if np.ndim(x) == 0:
            return math.exp(self.log_g(math.log(x)))
        return np.array([math.exp(self.log_g(math.log(v))) for v in np.ravel(x)]).reshape(np.shape(x))

    def derivative(self, x):
        """``g'(x)``: exact for power drifts, central difference otherwise."""
        if self.family == "power":
            return self.c * self.gamma * x ** (self.gamma - 1.0)
        h = 1e-6 * x
        return (self(x + h) - self(x - h)) / (2.0 * h)

    def breakpoints(self):
        """Log-abscissae where the integrand has kinks."""
        if self.family == "power":
            return []
        return [v for v in self._lx if v > 0.0]


def adaptive_simpson(f, a, b, tol, max_depth=48):
    """Integrate ``f`` over ``[a, b]`` by adaptive Simpson bisection.

    Each accepted panel satisfies ``|S2 - S1| <= 15 * tol_panel`` and gets the
    Richardson correction ``(S2 - S1) / 15``; panel tolerances halve on each
    split. Pieces are summed with :func:`math.fsum`.
    """
    if b == a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    pieces = []
    while stack:
        a0, b0, fa0, fm0, fb0, s, t, depth = stack.pop()
        m = 0.5 * (a0 + b0)
        lm, rm = 0.5 * (a0 + m), 0.5 * (m + b0)
        flm, frm = f(lm), f(rm)
        left = (m - a0) * (fa0 + 4.0 * flm + fm0) / 6.0
        right = (b0 - m) * (fm0 + 4.0 * frm + fb0) / 6.0
        delta = left + right - s
        if depth >= max_depth or abs(delta) <= 15.0 * t:
            pieces.append(left + right + delta / 15.0)
        else:
            stack.append((a0, m, fa0, flm, fm0, left, 0.5 * t, depth + 1))
            stack.append((m, b0, fm0, frm, fb0, right, 0.5 * t, depth + 1))
    return math.fsum(pieces)


class TransformEngine(BaseEstimator, TransformerMixin):
    """Evaluate ``G``, ``G^{-1}``, ``ell_alpha`` and ``ell'_alpha`` for a drift.

    As a transformer, :meth:`transform` maps states to ``G(x)`` and
    :meth:`inverse_transform` maps ``G``-values back to states.

    Parameters
    ----------
    drift : DriftSpec
    quad_tol : float
        Absolute quadrature tolerance for ``G``. Where ``|G|`` is so large
        that this is below double rounding, a floor of a few ulps of the
        value applies instead.
    inv_tol : float
        Target ``|G(G^{-1}(y)) - y|`` for inversion, floored the same way.
    closed_form : bool
        Use the closed forms of power drifts. ``False`` forces quadrature
        (used to cross-check the two routes).
    x_max : float
        The anchor cache spans ``[1, x_max]``; beyond it ``G`` is integrated
        on demand from the last anchor.
    anchor_step : float
        Anchor spacing in ``ln x``.
    """

    def __init__(self, drift, quad_tol=1e-10, inv_tol=1e-9, closed_form=True,
                 x_max=1e15, anchor_step=0.25):
        self.drift = drift
        self.quad_tol = quad_tol
        self.inv_tol = inv_tol
        self.closed_form = closed_form
        self.x_max = x_max
        self.anchor_step = anchor_step

    def fit(self, X=None, y=None):
        """Build the monotone anchor table ``(x_k, G(x_k))``."""
        drift = self.drift
        self.closed_form_ = bool(self.closed_form and drift.closed_form_available)
        u_max = math.log(self.x_max)
        grid = np.arange(0.0, u_max, self.anchor_step).tolist()
        grid = sorted(set(grid + [u_max] + [b for b in drift.breakpoints() if b < u_max]))
        n_seg = max(len(grid) - 1, 1)
        self._seg_tol = self.quad_tol / n_seg
        us, gs = [0.0], [0.0]
        for u0, u1 in zip(grid[:-1], grid[1:]):
            try:
                piece = self._integrate(u0, u1)
            except IntegrabilityError:
                # cache stops where the drift stops being positive
                break
            us.append(u1)
            gs.append(math.fsum([gs[-1], piece]))
        self.anchor_u_ = np.array(us)
        self.anchor_G_ = np.array(gs)
        return self

    def _integrand(self, u):
        return math.exp(u - self.drift.log_g(u))

    def _integrate(self, u0, u1):
        if u1 <= u0:
            return 0.0
        f = self._integrand
        rough = 0.5 * (u1 - u0) * (f(u0) + f(u1))
        tol = max(self._seg_tol, 8.0 * _EPS * abs(rough))
        return adaptive_simpson(f, u0, u1, tol)

    # -- G --------------------------------------------------------------

    def _G_from_log(self, u):
        if self.closed_form_:
            c, gm = self.drift.c, self.drift.gamma
            return math.expm1((1.0 - gm) * u) / (c * (1.0 - gm))
        k = int(np.searchsorted(self.anchor_u_, u, side="right")) - 1
        k = min(k, len(self.anchor_u_) - 1)
        return self.anchor_G_[k] + self._integrate(self.anchor_u_[k], u)

    def G(self, x):
        """``int_1^x dy / g(y)`` for scalar ``x >= 1``."""
        check_is_fitted(self, "anchor_u_")
        if not x >= 1.0:
            raise DomainError(f"G is defined for x >= 1, got {x!r}")
        if self.closed_form_ and x >= 2.0:
            # a direct power avoids the relative error of log(x) scaling with |log x|
            c, gm = self.drift.c, self.drift.gamma
            return (x ** (1.0 - gm) - 1.0) / (c * (1.0 - gm))
        return float(self._G_from_log(math.log(x)))

    def G_many(self, x):
        """Vectorised ``G`` over an array of states ``>= 1``."""
        check_is_fitted(self, "anchor_u_")
        x = np.asarray(x, dtype=float)
        if np.any(~(x >= 1.0)):
            raise DomainError("G is defined for x >= 1")
        if self.closed_form_:
            c, gm = self.drift.c, self.drift.gamma
            near = np.expm1((1.0 - gm) * np.log(x))
            far = np.power(x, 1.0 - gm) - 1.0
            return np.where(x >= 2.0, far, near) / (c * (1.0 - gm))
        # integer-valued chains revisit few states; integrate each once
        uniq, inv = np.unique(x, return_inverse=True)
        vals = np.fromiter((self.G(v) for v in uniq), dtype=float, count=uniq.size)
        return vals[inv].reshape(x.shape)

    # -- G^{-1} ---------------------------------------------------------

    def log_G_inverse(self, y):
        """``ln G^{-1}(y)``; stays finite where ``G^{-1}(y)`` would overflow."""
        check_is_fitted(self, "anchor_u_")
        if not y >= 0.0:
            raise DomainError(f"G^-1 is defined for y >= 0, got {y!r}")
        if y == 0.0:
            return 0.0
        if self.closed_form_:
            c, gm = self.drift.c, self.drift.gamma
            return math.log1p(c * (1.0 - gm) * y) / (1.0 - gm)
        k = int(np.searchsorted(self.anchor_G_, y, side="right")) - 1
        if k < len(self.anchor_G_) - 1:
            lo, hi, base = self.anchor_u_[k], self.anchor_u_[k + 1], self.anchor_G_[k]
        else:
            lo, base = self.anchor_u_[-1], self.anchor_G_[-1]
            hi, acc, step = lo, base, self.anchor_step
            # walk up one panel at a time until the bracket holds y
            while acc < y:
                lo, base = hi, acc
                hi = lo + step
                acc = base + self._integrate(lo, hi)
                step *= 1.5
        return self._solve(lo, hi, base, y)

    def _solve(self, lo, hi, base, y):
        """Safeguarded Newton on ``F(u) = base + int_lo^u - y`` inside ``[lo, hi]``."""
        u0 = lo
        u = 0.5 * (lo + hi)
        best_u, best_err = u, math.inf
        for _ in range(200):
            val = base + self._integrate(u0, u)
            err = val - y
            # aim well inside inv_tol; Newton gets there in a step or two
            tol = max(1e-3 * self.inv_tol, 4.0 * _EPS * abs(y))
            if abs(err) < best_err:
                best_u, best_err = u, abs(err)
            if abs(err) <= tol:
                return u
            if err > 0:
                hi = u
            else:
                lo = u
            if hi - lo <= 4.0 * _EPS * max(1.0, abs(u)):
                break
            step = err / self._integrand(u)
            cand = u - step
            u = cand if lo < cand < hi else 0.5 * (lo + hi)
        return best_u

    def G_inverse(self, y):
        if self.closed_form_ and y > 0.0:
            c, gm = self.drift.c, self.drift.gamma
            try:
                return (1.0 + c * (1.0 - gm) * y) ** (1.0 / (1.0 - gm))
            except OverflowError:
                return math.inf
        return math.exp(self.log_G_inverse(y))

    # -- ell --------------------------------------------------------------

    def ell(self, alpha, n):
        _check_alpha(alpha)
        if not n >= 0:
            raise DomainError("ell is defined for n >= 0")
        return math.exp(alpha * self.log_G_inverse(n))

    def ell_prime(self, alpha, n):
        _check_alpha(alpha)
        if not n >= 0:
            raise DomainError("ell' is defined for n >= 0")
        u = self.log_G_inverse(n)
        return alpha * math.exp(self.drift.log_g(u) + (alpha - 1.0) * u)

    def log_slope_ell(self, alpha, n_lo, n_hi):
        if not 1.0 <= n_lo < n_hi:
            raise DomainError("need 1 <= n_lo < n_hi")
        _check_alpha(alpha)
        du = self.log_G_inverse(n_hi) - self.log_G_inverse(n_lo)
        return alpha * du / (math.log(n_hi) - math.log(n_lo))

    # -- sklearn surface ----------------------------------------------------

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        return self.G_many(X)

    def inverse_transform(self, X):
        X = np.asarray(X, dtype=float)
        return np.vectorize(self.G_inverse, otypes=[float])(X)


def _check_alpha(alpha):
    if not alpha > 0:
        raise DomainError("alpha must be positive")


def make_engine(drift, **kwargs):
    """Build and fit a :class:`TransformEngine`."""
    return TransformEngine(drift, **kwargs).fit()


def eval_G(engine, x):
    return engine.G(x)


def eval_G_inverse(engine, y):
    return engine.G_inverse(y)


def eval_ell(engine, alpha, n):
    return engine.ell(alpha, n)


def eval_ell_prime(engine, alpha, n):
    return engine.ell_prime(alpha, n)


def log_slope_ell(engine, alpha, n_lo, n_hi):
    """Log-log slope of ``ell_alpha`` between ``n_lo`` and ``n_hi``.

    Tends to ``alpha / lambda`` as the window moves out.
    """
    return engine.log_slope_ell(alpha, n_lo, n_hi)
