"""The inhomogeneity psi and the log-periodic tail profile q.

Three independent routes to q are provided:

* ``q_from_psi``       -- lattice sum (h/mu) sum_j psi(log x + jh),
* ``q_from_smoothing`` -- divided differences of e^s C(s), where C is built
  from the exponentially smoothed psi (optionally through a renewal sequence),
* ``q_from_tail``      -- normalized tail values x^k e^{k n h} T(x e^{nh}).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientTailSamples, QuadratureDivergence, SumDivergence
from .tables import write_csv

SQRT5 = math.sqrt(5.0)


# tails ------------------------------------------------------------------------

class TailFunction:
    """x -> P{X > x}.  Subclasses implement ``__call__`` on arrays."""

    kind = "abstract"

    def __call__(self, x):
        raise NotImplementedError

    def log_breaks(self, lo, hi):
        """Points in [lo, hi] where t -> T(e^t) may fail to be smooth."""
        return np.zeros(0)


class ExactTail(TailFunction):
    """Closed-form tail.

    ``break_period``/``break_offsets`` describe where t -> T(e^t) jumps or kinks:
    at offset + j * period for every integer j.  ``extra_breaks`` are absolute.
    """

    kind = "ExactOracle"

    def __init__(self, func, descriptor, break_period=None, break_offsets=(), extra_breaks=()):
        self.func = func
        self.descriptor = dict(descriptor)
        self.break_period = break_period
        self.break_offsets = np.asarray(break_offsets, dtype=float)
        self.extra_breaks = np.asarray(extra_breaks, dtype=float)

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def log_breaks(self, lo, hi):
        pts = [self.extra_breaks[(self.extra_breaks >= lo) & (self.extra_breaks <= hi)]]
        if self.break_period:
            p = self.break_period
            for off in self.break_offsets:
                j = np.arange(math.ceil((lo - off) / p), math.floor((hi - off) / p) + 1)
                pts.append(off + j * p)
        return np.unique(np.concatenate(pts)) if pts else np.zeros(0)


class EmpiricalTail(TailFunction):
    """T(x) = #{samples > x} / count."""

    kind = "Empirical"

    def __init__(self, samples):
        self.sorted = np.sort(np.asarray(samples, dtype=float))
        self.count = self.sorted.size
        if self.count == 0:
            raise ValueError("no samples")

    def exceedances(self, x):
        return self.count - np.searchsorted(self.sorted, np.asarray(x, dtype=float), side="right")

    def __call__(self, x):
        return self.exceedances(x) / self.count

    def standard_error(self, x):
        t = self(x)
        return np.sqrt(t * (1.0 - t) / self.count)


# psi --------------------------------------------------------------------------

class PsiFunction:
    """psi(x) = e^{kappa x} (T(e^x) - P{A X > e^x}), A independent of X.

    P{AX > e^x} = sum_k a_k T(e^{x - k h}); the A = 0 atom contributes nothing
    (for x real, e^x > 0).  Atoms of a parametric A-tail are kept until the
    tilted mass beyond them is below ``mixture_tol``; the omitted part costs at
    most ``sup_y y^kappa T(y)`` times that mass in psi.
    """

    def __init__(self, kappa, law_a, tail_x, mixture_tol=1e-16, max_atoms=100_000):
        self.kappa = float(kappa)
        self.law_a = law_a
        self.tail = tail_x
        self.span_h = law_a.span_h
        ks = law_a.offset + np.arange(law_a.masses.size)
        ms = np.array(law_a.masses, dtype=float)
        omitted = 0.0
        gen = law_a.generator
        if gen is not None and gen.c > 0:
            t = self.kappa * self.span_h
            k = gen.k0
            block = []
            while True:
                rest = gen.weighted_sum(t, start=k)
                if rest <= mixture_tol or k - gen.k0 >= max_atoms:
                    omitted = rest
                    break
                block.append(k)
                k += 1
            gk = np.array(block, dtype=np.int64)
            ks = np.concatenate([ks, gk])
            ms = np.concatenate([ms, gen.masses(gk)])
        keep = ms > 0
        self.atom_index = ks[keep]
        self.atom_mass = ms[keep]
        self.mixture_omitted = omitted
        self._cache = {}

    def tail_of_ax(self, y):
        y = np.asarray(y, dtype=float)
        shifts = self.law_a.lattice_values(-self.atom_index)
        vals = self.tail(y[..., None] * shifts)
        return np.sum(vals * self.atom_mass, axis=-1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = np.exp(x)
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(self.kappa * x) * (self.tail(y) - self.tail_of_ax(y))

    def cached(self, x):
        """Write-once cache keyed by the float value of x."""
        out = np.empty(len(x))
        missing = [i for i, v in enumerate(x) if float(v) not in self._cache]
        if missing:
            vals = self(np.asarray([x[i] for i in missing]))
            for i, v in zip(missing, vals):
                self._cache.setdefault(float(x[i]), float(v))
        for i, v in enumerate(x):
            out[i] = self._cache[float(v)]
        return out

    def breaks(self, lo, hi):
        """Possible nonsmooth points of psi in [lo, hi]."""
        base = self.tail.log_breaks(lo - 1e-9, hi + self.span_h * (self.atom_index.max(initial=0) + 1))
        if base.size == 0:
            return base
        shifted = (base[:, None] - self.atom_index[None, :] * self.span_h).ravel()
        pts = np.concatenate([base, shifted]) if self.atom_index.size < 200 else base
        pts = pts[(pts >= lo) & (pts <= hi)]
        return np.unique(pts)


def psi(tail_x, law_a, kappa, x):
    return PsiFunction(kappa, law_a, tail_x)(x)


# quadrature -------------------------------------------------------------------

def romberg(func, a, b, tol=1e-13, kmin=4, kmax=18):
    """Romberg integration (trapezoid step halving + Richardson) on many pieces at once.

    ``func`` maps an (npieces, npts) array to values.  Endpoints are nudged
    inward by a relative 1e-12 so one-sided limits are used at breakpoints.
    Returns (values, error_estimates).
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    length = b - a
    nudge = 1e-12 * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    nudge = np.minimum(nudge, 0.25 * length)
    aa, bb = a + nudge, b - nudge
    fa = func(aa[:, None])[:, 0]
    fb = func(bb[:, None])[:, 0]
    T = 0.5 * length * (fa + fb)
    row = [T]
    err = np.full(a.shape, np.inf)
    for k in range(1, kmax + 1):
        m = 1 << (k - 1)
        t = (2 * np.arange(1, m + 1) - 1) / (2 * m)
        pts = a[:, None] + length[:, None] * t[None, :]
        T = 0.5 * T + length / (2 * m) * func(pts).sum(axis=1)
        new = [T]
        for j in range(1, k + 1):
            prev = new[j - 1]
            new.append(prev + (prev - row[j - 1]) / (4.0**j - 1.0))
        err = np.abs(new[-1] - row[-1])
        row = new
        # pieces where the integrand is negligible are judged against the mean size
        floor = np.mean(np.abs(row[-1])) if row[-1].size else 0.0
        if k >= kmin and np.all(err <= tol * np.maximum(np.abs(row[-1]), floor) + 1e-300):
            return row[-1], err
    if not np.all(np.isfinite(row[-1])):
        raise QuadratureDivergence("integrand is not finite")
    floor = np.mean(np.abs(row[-1]))
    worst = float(np.max(err / np.maximum(np.abs(row[-1]), max(floor, 1e-300))))
    if worst > 1e-8:
        raise QuadratureDivergence(f"Romberg did not settle (relative error {worst:.2e})")
    return row[-1], err


def _pieces(lo, hi, breaks):
    edges = np.unique(np.concatenate([[lo, hi], breaks[(breaks > lo) & (breaks < hi)]]))
    a, b = edges[:-1], edges[1:]
    keep = b - a > 1e-13 * np.maximum(1.0, np.abs(a))
    return a[keep], b[keep]


def smooth_hat(g, s, quad_tol=1e-13, breaks=(), cutoff=40.0, return_error=False):
    """g_hat(s) = int_{-inf}^s e^{-(s-x)} g(x) dx, truncated at s - cutoff."""
    lo = s - cutoff
    a, b = _pieces(lo, s, np.asarray(breaks, dtype=float))
    vals, errs = romberg(lambda x: np.exp(-(s - x)) * np.asarray(g(x), dtype=float), a, b, quad_tol)
    value = math.fsum(vals)
    if not math.isfinite(value):
        raise QuadratureDivergence("smoothing integral is not finite")
    if return_error:
        return value, math.fsum(errs)
    return value


def lattice_smooth_hat(psi_fn, s, h, k_lo, k_hi, breaks_fn, quad_tol=1e-12, cutoff=40.0):
    """psi_hat(s + k h) for k = k_lo..k_hi via per-cell integrals and the recursion
    psi_hat(t + h) = e^{-h} psi_hat(t) + int_t^{t+h} e^{-(t+h-x)} psi(x) dx."""
    start = s + k_lo * h
    # psi is negligible left of the start, so the seed value needs little accuracy
    first = smooth_hat(psi_fn, start, 1e-8, breaks_fn(start - cutoff, start), cutoff)
    cells_lo = s + np.arange(k_lo, k_hi) * h
    cells_hi = cells_lo + h
    pa, pb, owner = [], [], []
    for i, (lo, hi) in enumerate(zip(cells_lo, cells_hi)):
        a, b = _pieces(lo, hi, breaks_fn(lo, hi))
        pa.append(a)
        pb.append(b)
        owner.append(np.full(a.size, i))
    pa, pb, owner = np.concatenate(pa), np.concatenate(pb), np.concatenate(owner)
    right = cells_hi[owner]
    vals, _ = romberg(lambda x: np.exp(-(right[:, None] - x)) * psi_fn(x), pa, pb, quad_tol)
    cell = np.bincount(owner, weights=vals, minlength=cells_lo.size)
    out = np.empty(k_hi - k_lo + 1)
    out[0] = first
    decay = math.exp(-h)
    for i in range(cells_lo.size):
        out[i + 1] = decay * out[i] + cell[i]
    return out


# periodic q -------------------------------------------------------------------

@dataclass(frozen=True)
class PeriodicQ:
    kappa: float
    span_h: float
    x: np.ndarray
    q: np.ndarray
    normalizer: str = "Unit"
    trunc_error: np.ndarray = field(default=None)

    def __post_init__(self):
        order = np.argsort(self.x)
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float)[order])
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float)[order])
        te = np.zeros(self.x.size) if self.trunc_error is None else np.asarray(self.trunc_error)[order]
        object.__setattr__(self, "trunc_error", te)
        if np.any(self.x < 1.0) or np.any(self.x >= math.exp(self.span_h) * (1 + 1e-15)):
            raise ValueError("grid must lie in one period [1, e^h)")

    def reduce(self, x):
        """Map x > 0 into [1, e^h) along the multiplicative period."""
        x = np.asarray(x, dtype=float)
        n = np.floor(np.log(x) / self.span_h)
        z = x * np.exp(-n * self.span_h)
        period = math.exp(self.span_h)
        z = np.where(z >= period, z / period, z)
        return np.where(z < 1.0, z * period, z)

    def scaled_profile(self):
        """x^{-kappa} q(x) over the grid followed by the grid shifted one period."""
        x2 = np.concatenate([self.x, self.x * math.exp(self.span_h)])
        q2 = np.concatenate([self.q, self.q])
        return x2, x2 ** (-self.kappa) * q2

    def check_class_q(self, tol=1e-9):
        """q >= 0 and x^{-kappa} q(x) nonincreasing across the seam (relative tolerance)."""
        if np.any(self.q < -tol):
            return False
        _, prof = self.scaled_profile()
        scale = max(float(np.max(np.abs(prof))), 1e-300)
        return bool(np.all(np.diff(prof) <= tol * scale))

    def value(self, x):
        """Periodic linear interpolation of the grid values."""
        z = self.reduce(x)
        period = math.exp(self.span_h)
        xs = np.concatenate([self.x[-1:] / period, self.x, self.x[:1] * period])
        qs = np.concatenate([self.q[-1:], self.q, self.q[:1]])
        return np.interp(z, xs, qs)

    def limits(self, x):
        """Bounds (q(z+) lower, q(z-) upper) implied by monotonicity of y^{-kappa} q(y)."""
        z = self.reduce(x)
        period = math.exp(self.span_h)
        xs = np.concatenate([self.x[-1:] / period, self.x, self.x[:1] * period])
        qs = np.concatenate([self.q[-1:], self.q, self.q[:1]])
        i = np.clip(np.searchsorted(xs, z, side="right") - 1, 0, xs.size - 2)
        left_x, right_x = xs[i], xs[i + 1]
        left_q, right_q = qs[i], qs[i + 1]
        exact = np.isclose(z, left_x, rtol=1e-14, atol=0)
        upper = np.where(exact, left_q, (z / left_x) ** self.kappa * left_q)
        lower = (z / right_x) ** self.kappa * right_q
        # at a grid point the right limit is bounded by the point value itself
        lower = np.where(exact, np.minimum(left_q, lower), lower)
        prev_q = np.where(i > 0, qs[np.maximum(i - 1, 0)], qs[0])
        prev_x = np.where(i > 0, xs[np.maximum(i - 1, 0)], xs[0])
        upper = np.where(exact & (i > 0), (z / prev_x) ** self.kappa * prev_q, upper)
        return lower, upper

    def to_csv(self, path):
        return write_csv(path, ["x", "q", "normalizer_kind", "trunc_error"],
                         [self.x, self.q, [self.normalizer] * self.x.size, self.trunc_error])


def jittered_grid(span_h, count):
    """count points in [1, e^h), offset by 1/sqrt(5) of a step from the seams."""
    i = np.arange(count)
    return np.exp(span_h * (i + 1.0 / SQRT5) / count)


# conditions -------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionReport:
    mode: str
    value: float
    tail_contribution: float

    @property
    def converged(self):
        return self.tail_contribution <= 1e-6 * max(self.value, 1e-300) or self.value == 0.0


def check_conditions(psi_fn, mode="Integral", truncation=(-40.0, 40.0), delta=None, x0=0.0):
    """Numerically evaluate the integrability / summability hypotheses on a range.

    Integral: int |psi(x)| dx   (= int y^{kappa-1} |P{X>y} - P{AX>y}| dy)
    Sum:      sum_j |psi(x0 + jh)|
    Delta:    int e^{delta x} |psi(x)| dx
    The outermost decade (length log 10) at each end is reported separately
    as a convergence heuristic.
    """
    lo, hi = truncation
    decade = math.log(10.0)
    h = psi_fn.span_h
    if mode == "Sum":
        j = np.arange(math.ceil((lo - x0) / h), math.floor((hi - x0) / h) + 1)
        xs = x0 + j * h
        terms = np.abs(psi_fn(xs))
        outer = (xs < lo + decade) | (xs > hi - decade)
        return ConditionReport(mode, math.fsum(terms), math.fsum(terms[outer]))
    if mode == "Integral":
        weight = lambda x: 1.0
    elif mode == "Delta":
        if delta is None or delta <= 0:
            raise ValueError("Delta mode needs delta > 0")
        weight = lambda x: np.exp(delta * x)
        mode = f"Delta({delta})"
    else:
        raise ValueError(f"unknown mode {mode!r}")
    a, b = _pieces(lo, hi, np.concatenate([psi_fn.breaks(lo, hi),
                                           [lo + decade, hi - decade]]))
    vals, _ = romberg(lambda x: weight(x) * np.abs(psi_fn(x)), a, b, 1e-10, kmax=14)
    outer = (b <= lo + decade + 1e-12) | (a >= hi - decade - 1e-12)
    return ConditionReport(mode, math.fsum(vals), math.fsum(vals[outer]))


# q routes ---------------------------------------------------------------------

def _lattice_series(terms_fn, j_max, rel=1e-12, patience=20):
    """Sum terms_fn(j) (vector over a grid) over all integers j.

    Sides are expanded alternately (0, 1, -1, 2, -2, ...) so the running sum
    grows on both at once; a side stops once every grid component has had
    ``patience`` consecutive terms below rel * (|running sum| + 1e-300).
    Returns (sum, remainder_estimate, (j_lo, j_hi)).
    """
    total = np.asarray(terms_fn(0), dtype=float).copy()
    if not np.all(np.isfinite(total)):
        raise SumDivergence("lattice term not finite at j = 0")
    rem = np.zeros_like(total)
    quiet = {1: np.zeros(total.shape, dtype=int), -1: np.zeros(total.shape, dtype=int)}
    tail_abs = {1: np.zeros_like(total), -1: np.zeros_like(total)}
    reach = {1: 0, -1: 0}
    open_sides = [1, -1]
    while open_sides:
        for d in list(open_sides):
            j = reach[d] + d
            if abs(j) > j_max:
                raise SumDivergence(f"partial sums fail the Cauchy criterion by |j| = {j_max}")
            t = np.asarray(terms_fn(j), dtype=float)
            if not np.all(np.isfinite(t)):
                raise SumDivergence(f"lattice term not finite at j = {j}")
            total = total + t
            small = np.abs(t) < rel * (np.abs(total) + 1e-300)
            quiet[d] = np.where(small, quiet[d] + 1, 0)
            tail_abs[d] = np.where(small, tail_abs[d] + np.abs(t), 0.0)
            reach[d] = j
            if np.all(quiet[d] >= patience):
                rem = rem + tail_abs[d]
                open_sides.remove(d)
    return total, rem, (reach[-1], reach[1])


def q_from_psi(psi_fn, mu, x_grid, j_max=5000):
    """q(x) = (h/mu) sum_j psi(log x + j h) on a grid in [1, e^h)."""
    h = psi_fn.span_h
    lx = np.log(np.asarray(x_grid, dtype=float))
    s, rem, _ = _lattice_series(lambda j: psi_fn(lx + j * h), j_max)
    scale = h / mu
    sup_q = max(float(np.max(np.abs(s))) * scale, 1.0)
    err = scale * rem + sup_q * psi_fn.mixture_omitted * 100
    return PeriodicQ(psi_fn.kappa, h, np.asarray(x_grid, dtype=float), scale * s, "Unit", err)


def _psi_support(psi_fn, s, j_max=5000):
    """Lattice range around s outside which psi(s + jh) is negligible."""
    h = psi_fn.span_h
    _, _, (j_lo, j_hi) = _lattice_series(lambda j: psi_fn(np.array([s + j * h])), j_max, rel=1e-16)
    return j_lo, j_hi


def q_from_smoothing(psi_fn, x_grid, mu=None, u=None, n=None, normalizer=None,
                     normalizer_kind="Unit", width_frac=1e-3, quad_tol=1e-12):
    """Recover q at continuity points from int_{e^{s1}}^{e^{s2}} q = e^{s2} C(s2) - e^{s1} C(s1).

    Without ``u``: C(s) = (h/mu) sum_j psi_hat(s + jh)  (key renewal limit).
    With ``u`` (a RenewalSequence) and ``n``: C(s) = normalizer * sum_j psi_hat(s + nh - jh) u_j,
    i.e. the smoothed solution at s + nh, scaled by the regime normalizer (1, m(nh) or 1/p_n).
    Central brackets of width ``width_frac * h`` and half of it; their difference is
    reported as trunc_error (bracket sensitivity).
    """
    h = psi_fn.span_h
    x_grid = np.asarray(x_grid, dtype=float)
    cutoff = 40.0
    j_lo, j_hi = _psi_support(psi_fn, 0.0)
    j_lo -= 2
    j_hi += math.ceil(cutoff / h) + 2

    def C(s):
        if u is None:
            vals = lattice_smooth_hat(psi_fn, s, h, j_lo, j_hi, psi_fn.breaks, quad_tol, cutoff)
            return h / mu * math.fsum(vals)
        k_lo = max(j_lo, n - u.n_hi)
        k_hi = min(j_hi, n - u.n_lo)
        if k_hi <= k_lo:
            return 0.0
        vals = lattice_smooth_hat(psi_fn, s, h, k_lo, k_hi, psi_fn.breaks, quad_tol, cutoff)
        k = np.arange(k_lo, k_hi + 1)
        norm = 1.0 if normalizer is None else normalizer
        return norm * math.fsum(vals * u.at(n - k))

    def q_at(x, w):
        s1, s2 = math.log(x) - w / 2, math.log(x) + w / 2
        return (math.exp(s2) * C(s2) - math.exp(s1) * C(s1)) / (math.exp(s2) - math.exp(s1))

    w = width_frac * h
    q1 = np.array([q_at(x, w) for x in x_grid])
    q2 = np.array([q_at(x, w / 2) for x in x_grid])
    return PeriodicQ(psi_fn.kappa, h, x_grid, q2, normalizer_kind, np.abs(q2 - q1))


@dataclass(frozen=True)
class QTable:
    n: np.ndarray
    x: np.ndarray
    values: np.ndarray          # shape (len(n), len(x)); nan where refused
    counts: np.ndarray = None   # exceedance counts for empirical tails

    def stabilization(self):
        """max_x |row_n - row_{n-1}| for consecutive n."""
        return np.nanmax(np.abs(np.diff(self.values, axis=0)), axis=1)

    def to_csv(self, path):
        nn, xx = np.meshgrid(self.n, self.x, indexing="ij")
        cols = [nn.ravel(), xx.ravel(), self.values.ravel()]
        header = ["n", "x", "value"]
        if self.counts is not None:
            cols.append(self.counts.ravel())
            header.append("exceedances")
        return write_csv(path, header, cols)


def q_from_tail(tail_x, kappa, h, x_grid, n_range, normalizer=None, normalizer_kind="Unit",
                min_count=100, allow_sparse=False):
    """Table of normalizer(n) x^kappa e^{kappa n h} T(x e^{nh}) and q from the last row.

    ``normalizer`` maps an integer n to the regime factor (1, m(nh) or 1/p_n).
    Empirical tails are refused where fewer than ``min_count`` samples exceed
    the query point, unless ``allow_sparse``; refused cells become nan.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    ns = np.asarray(list(n_range), dtype=np.int64)
    pts = x_grid[None, :] * np.exp(h * ns)[:, None]
    if isinstance(tail_x, ExactTail):
        # exact powers when e^h is an integer
        base = math.exp(h)
        if abs(base - round(base)) < 1e-12:
            pts = x_grid[None, :] * np.power(float(round(base)), ns.astype(float))[:, None]
    vals = tail_x(pts)
    norm = np.array([1.0 if normalizer is None else float(normalizer(int(n))) for n in ns])
    table = norm[:, None] * pts**kappa * vals
    counts = None
    if isinstance(tail_x, EmpiricalTail):
        counts = tail_x.exceedances(pts)
        sparse = counts < min_count
        if np.any(sparse[-1]) and not allow_sparse:
            raise InsufficientTailSamples(
                f"only {int(counts[-1].min())} exceedances at the deepest n (< {min_count})")
        table = np.where(sparse, np.nan, table)
    last = table[-1]
    err = np.zeros(x_grid.size)
    if counts is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            t = vals[-1]
            err = last * np.sqrt((1 - t) / np.maximum(counts[-1], 1))
    q = PeriodicQ(kappa, h, x_grid, last, normalizer_kind, err)
    return q, QTable(ns, x_grid, table, counts)


@dataclass(frozen=True)
class SandwichReport:
    x: np.ndarray
    scaled_tail: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    ratio: np.ndarray
    ok: np.ndarray

    @property
    def all_ok(self):
        return bool(np.all(self.ok))


def lemma1_extend(q, tail_x, x_seq, normalizer=None, tol=1e-9):
    """Check q(z+) - tol <= x^kappa norm T(x) <= q(z-) + tol along x_seq, z the reduced point.

    Also reports x^kappa norm T(x) / q(x) (via periodic interpolation), which
    tends to 1 when q is continuous.
    """
    x_seq = np.asarray(x_seq, dtype=float)
    if np.any(np.diff(x_seq) <= 0):
        raise ValueError("x_seq must be increasing")
    norm = 1.0 if normalizer is None else np.array([normalizer(x) for x in x_seq])
    scaled = norm * x_seq**q.kappa * tail_x(x_seq)
    lower, upper = q.limits(x_seq)
    ok = (lower - tol <= scaled) & (scaled <= upper + tol)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = scaled / q.value(x_seq)
    return SandwichReport(x_seq, scaled, lower, upper, ratio, ok)
