"""Exact computations on truncated transition kernels of integer-valued chains."""

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.signal import fftconvolve
from scipy.stats import binom, poisson

from .errors import CapError, ConfigError, NonConvergenceError, SchemaError
from .io import TV_COLUMNS, atomic_write, csv_text, write_csv, write_json
from .models import BesselLikeWalk, CriticalGWI, PowerDriftLattice, StateDepGW
from .montecarlo import SurvivalEstimate

ENTRY_CUTOFF = 1e-14
ROW_SUM_TOL = 1e-12
FLAG_OVERFLOW = 1e-9


@dataclass
class TruncatedKernel:
    """Transition probabilities on ``0..cap`` plus per-row overflow mass.

    ``overflow[x]`` is the probability that row ``x`` leaves ``0..cap``
    (including entries dropped below the sparse cutoff).
    """

    P: sp.csr_matrix
    overflow: np.ndarray
    absorbing: np.ndarray

    @property
    def cap(self):
        return self.P.shape[0] - 1

    @property
    def flagged(self):
        return np.flatnonzero(self.overflow > FLAG_OVERFLOW)

    def row(self, x):
        r = self.P.getrow(x)
        return {int(j): float(v) for j, v in zip(r.indices, r.data)}

    def row_sum_error(self):
        s = np.asarray(self.P.sum(axis=1)).ravel() + self.overflow
        return float(np.max(np.abs(s - 1.0)))

    def with_absorbing(self, A):
        mask = np.arange(self.cap + 1) <= A
        return TruncatedKernel(self.P, self.overflow, mask)

    def folded(self):
        """Kernel with each row's overflow moved onto the top state."""
        if not np.any(self.overflow > 0):
            return self.P
        n = self.cap + 1
        extra = sp.csr_matrix((self.overflow, (np.arange(n), np.full(n, n - 1))), shape=(n, n))
        return (self.P + extra).tocsr()

    def header(self):
        ov = np.ascontiguousarray(self.overflow, dtype=np.float64)
        return {
            "cap": self.cap,
            "nnz": int(self.P.nnz),
            "overflow_total": float(ov.sum()),
            "overflow_max": float(ov.max()) if ov.size else 0.0,
            "overflow_sha256": hashlib.sha256(ov.tobytes()).hexdigest(),
            "overflow": [float(v) for v in ov],
            "absorbing": [int(i) for i in np.flatnonzero(self.absorbing)],
        }

    def save(self, csv_path, json_path=None):
        """Write ``row,col,prob`` triplets and a JSON header beside them."""
        coo = self.P.tocoo()
        order = np.lexsort((coo.col, coo.row))
        rows = zip(coo.row[order].tolist(), coo.col[order].tolist(), coo.data[order].tolist())
        atomic_write(csv_path, csv_text(("row", "col", "prob"), rows))
        json_path = Path(json_path) if json_path else Path(csv_path).with_suffix(".json")
        write_json(json_path, self.header())
        return json_path

    @classmethod
    def load(cls, csv_path, json_path=None):
        json_path = Path(json_path) if json_path else Path(csv_path).with_suffix(".json")
        try:
            head = json.loads(Path(json_path).read_text())
            data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        except (OSError, ValueError) as exc:
            raise SchemaError(f"cannot read kernel: {exc}") from exc
        n = int(head["cap"]) + 1
        ov = np.asarray(head["overflow"], dtype=float)
        if ov.size != n:
            raise SchemaError("overflow length does not match cap")
        if hashlib.sha256(ov.tobytes()).hexdigest() != head["overflow_sha256"]:
            raise SchemaError("overflow digest mismatch")
        P = sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                          shape=(n, n)) if data.size else sp.csr_matrix((n, n))
        mask = np.zeros(n, dtype=bool)
        mask[np.asarray(head["absorbing"], dtype=int)] = True
        return cls(P, ov, mask)


def _assemble(rows, overflow, absorbing=None):
    """``rows`` is a list of ``(offset, dense_probs)``; entries past cap must already be removed."""
    n = len(rows)
    indptr = [0]
    indices, data = [], []
    for off, probs in rows:
        keep = np.flatnonzero(probs >= ENTRY_CUTOFF)
        indices.append(keep + off)
        data.append(probs[keep])
        indptr.append(indptr[-1] + keep.size)
    P = sp.csr_matrix((np.concatenate(data), np.concatenate(indices), np.array(indptr)),
                      shape=(n, n))
    kept = np.asarray(P.sum(axis=1)).ravel()
    ov = np.asarray(overflow, dtype=float)
    # entries under the cutoff count as overflow (they are mass we no longer track)
    dropped = np.array([float(p.sum()) for _, p in rows]) - kept
    ov = ov + np.maximum(dropped, 0.0)
    mask = np.zeros(n, dtype=bool) if absorbing is None else absorbing
    return TruncatedKernel(P, ov, mask)


def from_dense(matrix, overflow=None, absorbing=None):
    """Kernel from an explicit ``(cap+1) x (cap+1)`` matrix."""
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("kernel matrix must be square")
    ov = np.zeros(M.shape[0]) if overflow is None else np.asarray(overflow, dtype=float)
    mask = np.zeros(M.shape[0], dtype=bool)
    if absorbing is not None:
        mask[list(absorbing)] = True
    return TruncatedKernel(sp.csr_matrix(M), ov, mask)


def birth_death_kernel(p_up, cap, reflect_at_zero=True):
    """Walk on ``0..cap`` moving up w.p. ``p_up`` and down otherwise.

    At 0 the down move stays put (reflection); at ``cap`` the up move
    overflows.
    """
    rows, ov = [], np.zeros(cap + 1)
    for x in range(cap + 1):
        r = np.zeros(3)
        if x < cap:
            r[2] = p_up
        else:
            ov[x] = p_up
        if x > 0:
            r[0] = 1.0 - p_up
            rows.append((x - 1, r))
        else:
            r[1] = (1.0 - p_up) if reflect_at_zero else 0.0
            rows.append((0, r[1:]))
    return _assemble(rows, ov)


# -- truncated convolution algebra ------------------------------------------------

def _trim(probs, off, cap):
    """Drop mass above ``cap`` and sub-cutoff tails; return ``(off, probs, lost)``."""
    lost = 0.0
    if off + probs.size - 1 > cap:
        k = cap - off + 1
        lost += float(probs[max(k, 0):].sum())
        probs = probs[:max(k, 0)]
    if probs.size == 0:
        return off, probs, lost
    nz = np.flatnonzero(probs >= ENTRY_CUTOFF * 1e-2)
    if nz.size == 0:
        return off, probs[:0], lost + float(probs.sum())
    lo, hi = nz[0], nz[-1] + 1
    lost += float(probs[:lo].sum() + probs[hi:].sum())
    return off + lo, probs[lo:hi].copy(), lost


def _conv(a, b, cap):
    """Convolve two ``(off, probs, lost)`` laws truncated at ``cap``."""
    (oa, pa, la), (ob, pb, lb) = a, b
    if pa.size == 0 or pb.size == 0:
        return oa + ob, np.zeros(0), 1.0
    if min(pa.size, pb.size) < 64:
        out = np.convolve(pa, pb)
    else:
        out = np.maximum(fftconvolve(pa, pb), 0.0)
    off, probs, lost = _trim(out, oa + ob, cap)
    # lost mass of a product law: 1 - (1-la)(1-lb), plus what this trim removed
    return off, probs, la + lb - la * lb + lost


class _PowerTable:
    """``law^{*x}`` for any ``x <= cap`` via cached dyadic powers."""

    def __init__(self, pmf, cap, tail=0.0):
        self.cap = cap
        off, probs, lost = _trim(np.asarray(pmf, dtype=float), 0, cap)
        # ``tail`` is the law's mass beyond the supplied pmf
        self.dyadic = [(off, probs, lost + tail)]
        while (1 << len(self.dyadic)) <= cap:
            d = self.dyadic[-1]
            self.dyadic.append(_conv(d, d, cap))

    def power(self, x):
        acc = (0, np.ones(1), 0.0)
        k = 0
        while x:
            if x & 1:
                acc = _conv(acc, self.dyadic[k], self.cap)
            x >>= 1
            k += 1
        return acc


def _law_rows(single, cap, shift_law, x_range, zero_row, tail=0.0):
    """Rows ``x -> law^{*x} * shift_law(x)`` with overflow tracking."""
    table = _PowerTable(single, cap, tail)
    rows, ov = [], np.zeros(cap + 1)
    for x in x_range:
        if x == 0:
            off, probs, lost = zero_row
        else:
            off, probs, lost = _conv(table.power(x), shift_law(x), cap)
        rows.append((off, probs))
        ov[x] = lost
    return rows, ov


def _check_needed(ov, needed, cap):
    needed = range(0, cap // 2 + 1) if needed is None else needed
    bad = [x for x in needed if 0 <= x <= cap and ov[x] > 0.5]
    if bad:
        raise CapError(f"cap {cap} too small: row {bad[0]} loses {ov[bad[0]]:.3g} of its mass")


def build_kernel(model, cap, A=None, needed=None):
    """Exact one-step kernel of an integer-valued model truncated to ``0..cap``.

    Parameters
    ----------
    model : BesselLikeWalk, CriticalGWI, StateDepGW or PowerDriftLattice
    cap : int
        Largest state kept.
    A : float, optional
        States ``<= A`` are marked absorbing (``{0}`` for StateDepGW by default).
    needed : iterable of int, optional
        Rows that must be usable; defaults to ``0..cap // 2``.

    Raises
    ------
    CapError
        If a needed row loses more than half its mass above ``cap``.
    """
    cap = int(cap)
    if cap < 2:
        raise ConfigError("cap must be >= 2")
    if isinstance(model, BesselLikeWalk):
        rows, ov = [], np.zeros(cap + 1)
        rows.append((1, np.ones(1)) if cap >= 1 else (0, np.zeros(0)))
        for x in range(1, cap + 1):
            up = model.up_probability(x)
            if x < cap:
                rows.append((x - 1, np.array([1.0 - up, 0.0, up])))
            else:
                rows.append((x - 1, np.array([1.0 - up])))
                ov[x] = up
    elif isinstance(model, CriticalGWI):
        imm = poisson.pmf(np.arange(cap + 1), model.c)
        imm_law = _trim(imm, 0, cap)
        imm_law = (imm_law[0], imm_law[1], imm_law[2] + float(poisson.sf(cap, model.c)))
        rows, ov = _law_rows(model.offspring_pmf(cap + 1), cap, lambda x: imm_law,
                             range(cap + 1), imm_law, model.offspring_tail(cap))
    elif isinstance(model, StateDepGW):
        m, p0, p1, pm = model.law()
        single = np.zeros(int(m) + 1)
        single[0], single[1] = p0, p1
        single[int(m)] += pm

        def extra(x):
            r = model.c / x
            k = math.floor(r)
            fr = r - k
            probs = binom.pmf(np.arange(x + 1), x, fr) if fr > 0 else np.ones(1)
            return _trim(probs, x * k, cap)

        rows, ov = _law_rows(single, cap, extra, range(cap + 1), (0, np.ones(1), 0.0))
        if A is None:
            A = 0
    elif isinstance(model, PowerDriftLattice):
        rows, ov = [], np.zeros(cap + 1)
        top = model.cap if model.cap is not None else None
        for x in range(cap + 1):
            h, up, down = model.row(x)
            h = int(h)
            moves = {x: 1.0 - up - down}
            if down > 0:
                moves[max(x - h, 0)] = moves.get(max(x - h, 0), 0.0) + down
            dest = x + h
            if top is not None and dest > top:
                dest = int(top)
            if dest > cap:
                ov[x] += up
            elif up > 0:
                moves[dest] = moves.get(dest, 0.0) + up
            lo = min(moves)
            r = np.zeros(max(moves) - lo + 1)
            for k, v in moves.items():
                r[k - lo] += v
            rows.append((lo, r))
    else:
        raise ConfigError(f"no exact kernel for {type(model).__name__}")
    kernel = _assemble(rows, ov)
    if A is not None:
        kernel = kernel.with_absorbing(A)
    if kernel.row_sum_error() > ROW_SUM_TOL:
        raise NonConvergenceError(f"row sums off by {kernel.row_sum_error():.3g}")
    _check_needed(kernel.overflow, needed, cap)
    return kernel


# -- survival -----------------------------------------------------------------------

@dataclass
class ExactSurvival:
    """``P(tau > n)`` for ``n = 0..n_max`` with a cumulative truncation bound."""

    surv: np.ndarray
    error_bound: np.ndarray
    x0: int

    def on_grid(self, n_grid):
        g = np.asarray(n_grid, dtype=np.int64)
        return SurvivalEstimate(g, self.surv[g], self.error_bound[g], None, 0,
                                len(self.surv) - 1)


def exact_survival(kernel, x0, n_max, accuracy=1e-6):
    """Survival of the chain started at ``x0`` before entering the absorbing set.

    Iterates the sub-stochastic row vector ``mu_{n+1} = mu_n P`` with
    absorbing states zeroed. Mass lost to overflow is tallied as an upper
    bound on the truncation error of every later value.

    Raises
    ------
    CapError
        If the accumulated bound exceeds ``accuracy``.
    """
    x0 = int(x0)
    if not 0 <= x0 <= kernel.cap:
        raise ConfigError("x0 outside the kernel")
    if kernel.absorbing[x0]:
        raise ConfigError("x0 lies in the absorbing set")
    if not kernel.absorbing.any():
        raise ConfigError("kernel has no absorbing states")
    live = ~kernel.absorbing
    PT = kernel.P.T.tocsr()
    mu = np.zeros(kernel.cap + 1)
    mu[x0] = 1.0
    surv = np.empty(n_max + 1)
    bound = np.empty(n_max + 1)
    surv[0], bound[0], lost = 1.0, 0.0, 0.0
    for n in range(1, n_max + 1):
        lost += float(mu @ kernel.overflow)
        mu = PT @ mu
        mu[~live] = 0.0
        surv[n] = mu.sum()
        bound[n] = lost
    if lost > accuracy:
        raise CapError(f"truncation bound {lost:.3g} exceeds accuracy {accuracy:.3g}; raise cap")
    # rounding can nudge the running sum up by an ulp; survival is monotone by definition
    surv = np.minimum.accumulate(np.minimum(surv, 1.0))
    return ExactSurvival(surv, bound, x0)


# -- stationarity -------------------------------------------------------------------

@dataclass
class InvariantMeasure:
    pi: np.ndarray
    residual: float
    error_bound: float
    iterations: int
    tol_attainable: bool


def _residual(pi, P):
    return float(np.abs(P.T @ pi - pi).sum())


def invariant_measure(kernel, tol=1e-10, max_iter=100000):
    """Stationary law of the truncated chain with overflow folded onto ``cap``.

    A direct sparse solve is polished by power iteration until
    ``||pi P - pi||_1 <= tol``. ``error_bound`` is the per-step mass the
    truncation misplaces, ``sum_x pi(x) overflow(x)``.

    Raises
    ------
    NonConvergenceError
        If ``tol`` is not met within ``max_iter`` power steps.
    """
    P = kernel.folded()
    n = P.shape[0]
    M = (P.T - sp.identity(n, format="csr")).tolil()
    M[0, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[0] = 1.0
    try:
        pi = spla.spsolve(M.tocsc(), rhs)
    except RuntimeError:
        pi = np.full(n, 1.0 / n)
    if not np.all(np.isfinite(pi)):
        pi = np.full(n, 1.0 / n)
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    PT = P.T.tocsr()
    it = 0
    res = _residual(pi, P)
    while res > tol and it < max_iter:
        pi = PT @ pi
        pi /= pi.sum()
        it += 1
        res = _residual(pi, P)
    if res > tol:
        raise NonConvergenceError(f"invariant measure residual {res:.3g} > {tol:.3g}")
    bound = float(pi @ kernel.overflow)
    return InvariantMeasure(pi, res, bound, it, bound <= tol)


@dataclass
class TVDecay:
    n_grid: np.ndarray
    tv: np.ndarray
    error_bound: np.ndarray
    weighted: np.ndarray = None

    def rows(self):
        w = self.weighted if self.weighted is not None else [None] * len(self.tv)
        for n, t, e, v in zip(self.n_grid, self.tv, self.error_bound, w):
            yield int(n), float(t), float(e), v

    def to_csv(self, path):
        return write_csv(path, TV_COLUMNS, self.rows())


def tv_decay(kernel, pi, x0, n_grid, rate=None):
    """``||P^n(x0, .) - pi||_TV`` on ``n_grid`` by exact row evolution.

    ``pi`` may be an array or an :class:`InvariantMeasure`; its error bound
    (per step, times ``n``) and the row's own overflow enter ``error_bound``.
    ``rate`` (e.g. from ``classifier.predict_tv_rate``) adds the weighted
    column ``rate(n) * TV(n)``.
    """
    per_step = 0.0
    if isinstance(pi, InvariantMeasure):
        per_step = pi.error_bound
        pi = pi.pi
    pi = np.asarray(pi, dtype=float)
    grid = np.asarray(n_grid, dtype=np.int64)
    if grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ConfigError("n_grid must be non-negative and strictly increasing")
    P = kernel.folded()
    PT = P.T.tocsr()
    mu = np.zeros(kernel.cap + 1)
    mu[int(x0)] = 1.0
    tv, err = [], []
    lost = 0.0
    n = 0
    for target in grid:
        while n < target:
            lost += float(mu @ kernel.overflow)
            mu = PT @ mu
            n += 1
        tv.append(0.5 * float(np.abs(mu - pi).sum()))
        err.append(lost + per_step * n)
    tv = np.array(tv)
    weighted = np.array([rate(int(k)) for k in grid]) * tv if rate is not None else None
    return TVDecay(grid, tv, np.array(err), weighted)
