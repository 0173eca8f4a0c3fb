"""Renewal mass sequences u_n = sum_m theta^m f^{*m}[n] and key-renewal limits.

The series is summed by repeated doubling (S_{2M} = S_M + P_M * S_M with
P_M = theta^M f^{*M}) on a padded working range.  Stopping is certified: the
visits contributed by terms m >= M at any point are at most
w_M * sup_n u_n <= w_M * u_0 / (1 - w_M), where w_M is the mass of P_M still
inside the range.  Mass dropped off the range can only return by descending,
which an exponential-left-tail walk does with probability e^{-gamma * depth}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DecayViolation, NonconvergentU, WindowTooWide, WrongRegime, ZeroAtomPresent
from .lattice import convolve_arrays, subexp_diagnostic
from .tables import write_csv


@dataclass(frozen=True)
class RenewalSequence:
    span_h: float
    n_lo: int
    n_hi: int
    u: np.ndarray
    theta: float
    trunc_error: np.ndarray
    u_sup_bound: float        # upper bound on sup_n u_n (= bound on u_0)
    left_rate: float          # gamma with P{walk ever descends by d} <= e^{-gamma d}; inf if no left tail
    terms: int                # number of convolution powers summed

    @property
    def n(self):
        return np.arange(self.n_lo, self.n_hi + 1)

    def at(self, n):
        n = np.asarray(n)
        if np.any((n < self.n_lo) | (n > self.n_hi)):
            raise IndexError("index outside the computed window")
        return self.u[n - self.n_lo]

    def restrict(self, n_lo, n_hi):
        sl = slice(n_lo - self.n_lo, n_hi - self.n_lo + 1)
        return RenewalSequence(self.span_h, n_lo, n_hi, self.u[sl], self.theta,
                               self.trunc_error[sl], self.u_sup_bound, self.left_rate, self.terms)

    def total_mass(self):
        return math.fsum(self.u)


def _left_rate(f, theta):
    """gamma > 0 solving theta * sum_k f_k e^{-gamma k} = 1 (per lattice index)."""
    if f.min_index >= 0:
        return math.inf

    def phi(g):
        ks = f.offset + np.arange(f.masses.size)
        val = math.fsum(f.masses * np.exp(-g * ks))
        if f.generator is not None:
            val += f.generator.weighted_sum(-g)
        return theta * val - 1.0

    hi = 1.0
    while phi(hi) <= 0:
        hi *= 2.0
        if hi > 1e6:
            raise NonconvergentU("left tail is not exponentially bounded")
    lo = 0.0
    # phi < 0 just right of 0 when the drift is positive (or theta < 1)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12 * hi:
            break
    return lo if lo > 0 else hi * 1e-3


def renewal_sequence(f, theta=1.0, window=None, tol=1e-12, method="auto", max_terms=1 << 24):
    """Mass sequence of U = sum_m (theta F)^{*m} on ``window = (n_lo, n_hi)``.

    ``window`` may also be a single int n_hi; n_lo then defaults to 0 for
    nonnegative supports and to -ceil(40 / gamma) otherwise (left mass of U
    below it is at most e^{-40} u_0).
    """
    if f.zero_atom > 0:
        raise ZeroAtomPresent("renewal kernel must be a proper lattice law")
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    if theta == 1.0 and not f.mean_index() > 0:
        raise NonconvergentU("proper renewal measure needs positive drift")
    rate = _left_rate(f, theta)
    if window is None:
        raise ValueError("window (n_lo, n_hi) or n_hi is required")
    if np.isscalar(window):
        n_hi = int(window)
        n_lo = 0 if math.isinf(rate) else -math.ceil(40.0 / rate)
    else:
        n_lo, n_hi = (int(w) for w in window)
    if n_hi < n_lo:
        raise ValueError("empty window")

    two_sided = math.isfinite(rate)
    if two_sided:
        pad = math.ceil(math.log(1e3 / tol) / rate)
        L = min(n_lo, -pad)
        top = n_hi + pad
    else:
        L = min(n_lo, 0)
        top = max(n_hi, 0)
    width = top - L + 1

    ks = np.arange(L, top + 1)
    P = theta * f.pmf(ks)
    S = np.zeros(width)
    S[-L] = 1.0
    M, levels = 1, 0
    while True:
        w = math.fsum(P)
        if w < 1.0:
            ub = S[-L] / (1.0 - w)
            if w * ub <= tol:
                break
        if M >= max_terms:
            raise WindowTooWide(f"truncation bound not reached after {M} terms; raise max_terms")
        # index of (P*S)[i] is 2L + i
        S = S + convolve_arrays(P, S, method)[-L: -L + width]
        P = convolve_arrays(P, P, method)[-L: -L + width]
        M *= 2
        levels += 1

    idx = np.arange(n_lo, n_hi + 1)
    u = S[idx - L].copy()
    err = np.full(idx.shape, w * ub)
    if two_sided:
        events = 3 * levels + 1
        err += events * ub * (math.exp(-rate * (-L)) + np.exp(-rate * (top - idx)))
    return RenewalSequence(f.span_h, n_lo, n_hi, u, theta, err, ub, rate, M)


def forward_recursion(f, theta, n_max):
    """u_n = delta_{n0} + theta sum_{k>=0} f_k u_{n-k} for support in {0, 1, ...}.

    An atom at 0 is solved out: u_n (1 - theta f_0) = delta_{n0} + theta sum_{k>=1} f_k u_{n-k}.
    """
    if f.min_index < 0:
        raise ValueError("forward recursion needs nonnegative support")
    fk = f.pmf(np.arange(0, n_max + 1))
    stay = 1.0 - theta * fk[0]
    if not stay > 0:
        raise NonconvergentU("theta * f_0 >= 1: the walk never leaves 0")
    u = np.zeros(n_max + 1)
    u[0] = 1.0 / stay
    for n in range(1, n_max + 1):
        u[n] = theta * np.dot(fk[1:n + 1], u[n - 1::-1]) / stay
    return u


def srt_constant(alpha):
    """C_alpha = sin(alpha pi) / ((1 - alpha) pi), with C_1 = 1."""
    if alpha == 1:
        return 1.0
    return math.sin(alpha * math.pi) / ((1.0 - alpha) * math.pi)


@dataclass(frozen=True)
class ConvergenceReport:
    n: np.ndarray
    u: np.ndarray
    normalizer: np.ndarray
    ratio: np.ndarray
    trunc_error: np.ndarray

    def select(self, n_from, n_to):
        sel = (self.n >= n_from) & (self.n <= n_to)
        return self.ratio[sel]

    def max_deviation(self, n_from=None, n_to=None):
        n_from = self.n[-1] // 10 if n_from is None else n_from
        n_to = self.n[-1] if n_to is None else n_to
        return float(np.max(np.abs(self.select(n_from, n_to) - 1.0)))

    def decade_averages(self, edges):
        """Mean ratio over [edges[i], edges[i+1]) for consecutive edges."""
        return np.array([np.mean(self.ratio[(self.n >= a) & (self.n < b)])
                         for a, b in zip(edges[:-1], edges[1:])])

    def to_csv(self, path):
        return write_csv(path, ["n", "u_n", "normalizer", "ratio", "trunc_error"],
                         [self.n, self.u, self.normalizer, self.ratio, self.trunc_error])


def _report(u, keep, normalizer):
    n = u.n[keep]
    uu = u.u[keep]
    return ConvergenceReport(n, uu, normalizer, uu * normalizer, u.trunc_error[keep] * normalizer)


def blackwell_check(u, mu):
    """Report u_n * mu / h; the finite-mean limit is 1."""
    if u.theta < 1 or not math.isfinite(mu):
        raise WrongRegime("Blackwell limit applies to proper, finite-mean renewal measures")
    keep = u.n >= 0
    norm = np.full(int(keep.sum()), mu / u.span_h)
    return _report(u, keep, norm)


def srt_check(u, m_fn, alpha):
    """Report u_n * m(nh) / (h C_alpha); the strong renewal limit is 1."""
    if u.theta < 1:
        raise WrongRegime("strong renewal theorem needs a proper renewal measure")
    keep = u.n >= 1
    h = u.span_h
    norm = np.asarray(m_fn(u.n[keep] * h), dtype=float) / (h * srt_constant(alpha))
    return _report(u, keep, norm)


def defective_check(u, f, theta, check_subexp=True, tol=0.05):
    """Report u_n / (p_n theta / (1 - theta)^2); the defective limit is 1."""
    if not theta < 1:
        raise WrongRegime("defective limit needs theta < 1")
    if check_subexp:
        rep = subexp_diagnostic(f, max(10, min(u.n_hi, 10_000)))
        if not rep.plausibly_subexponential(tol):
            raise WrongRegime("tilted law does not look h-subexponential")
    keep = u.n >= 1
    p = f.pmf(u.n[keep])
    with np.errstate(divide="ignore"):
        norm = (1.0 - theta) ** 2 / (theta * p)
    return _report(u, keep, norm)


# key renewal -----------------------------------------------------------------

@dataclass(frozen=True)
class KeyRenewalValue:
    value: float
    remainder: float


def lattice_sum(z, x, h, j_lo, j_hi):
    """sum_{j_lo <= j <= j_hi} z(x + j h)."""
    j = np.arange(j_lo, j_hi + 1)
    return math.fsum(np.asarray(z(x + j * h), dtype=float))


def _check_decay(z, x, h, j_lo, j_hi, decay, p_fn=None):
    j = np.arange(j_lo, j_hi + 1)
    vals = np.abs(np.asarray(z(x + j * h), dtype=float))
    total = vals.sum()
    if not np.all(np.isfinite(vals)):
        raise DecayViolation("z is not finite on the lattice")
    if total == 0:
        return
    edge = max(1, (j_hi - j_lo) // 10)
    if vals[:edge].sum() + vals[-edge:].sum() > 1e-3 * total:
        raise DecayViolation("lattice sum of |z| is not settled at the ends of the range")
    pos = j > 0
    if decay == "reciprocal" and np.any(pos):
        y = x + j[pos] * h
        yz = y * vals[pos]
        if yz[-edge:].max() > 2 * yz.max() + 1e-300:
            raise DecayViolation("y |z(y)| grows: z is not O(1/y)")
    if decay == "defective" and np.any(pos):
        jj = j[pos]
        r = vals[pos] / p_fn(jj)
        if r[-edge:].max() > r[: max(1, jj.size // 2)].max():
            raise DecayViolation("z(x + nh) is not o(p_n)")


def key_renewal_eval(z, u, x, n, decay="summable", p_fn=None, extra=None):
    """sum_j z(x + nh - jh) u_j over the window, with a remainder bound.

    ``decay`` selects the prerequisite that is checked: "summable",
    "reciprocal" (z = O(1/y), infinite mean) or "defective" (z(x+nh) = o(p_n)).
    """
    h = u.span_h
    width = u.n_hi - u.n_lo + 1
    extra = width if extra is None else extra
    _check_decay(z, x, h, n - u.n_hi - extra, n - u.n_lo + extra, decay, p_fn)
    j = u.n
    zv = np.asarray(z(x + (n - j) * h), dtype=float)
    value = math.fsum(zv * u.u)
    rem = math.fsum(np.abs(zv) * u.trunc_error)
    j_above = np.arange(u.n_hi + 1, u.n_hi + extra + 1)
    rem += u.u_sup_bound * math.fsum(np.abs(np.asarray(z(x + (n - j_above) * h), dtype=float)))
    if math.isfinite(u.left_rate):
        j_below = np.arange(u.n_lo - extra, u.n_lo)
        zb = np.abs(np.asarray(z(x + (n - j_below) * h), dtype=float))
        rem += u.u_sup_bound * math.fsum(zb * np.exp(-u.left_rate * np.abs(j_below)))
    return KeyRenewalValue(value, rem)


def key_renewal_limit(z, x, h, regime, n=None, j_range=(-2000, 2000), mu=None, m_fn=None,
                      alpha=None, theta=None, p_n=None):
    """Predicted value of the key-renewal sum at large n for each regime.

    finite: (h/mu) S;  infinite: h C_alpha S / m(nh);  defective: theta/(1-theta)^2 S p_n,
    where S = sum_j z(x + jh).
    """
    s = lattice_sum(z, x, h, *j_range)
    if regime == "finite":
        return h / mu * s
    if regime == "infinite":
        return h * srt_constant(alpha) * s / float(m_fn(n * h))
    if regime == "defective":
        return theta / (1.0 - theta) ** 2 * s * p_n
    raise ValueError(f"unknown regime {regime!r}")
