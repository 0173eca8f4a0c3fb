"""Arithmetic laws for log A on the lattice hZ, plus an optional atom at A = 0.

Lattice indices are plain integers; only masses are floating point.  A law is
a dense block of finite atoms, optionally followed by a parametric right tail
``c * k**(-gamma) * exp(-beta*k)`` whose sums are evaluated in closed form
(Hurwitz zeta / Lerch transcendent), never by truncation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import mpmath
import numpy as np
from scipy import signal, special

from .errors import (
    InvalidLaw,
    NoCommonSpan,
    SpanMismatch,
    ZeroAtomPresent,
    ZeroMassTail,
)

MASS_TOL = 1e-12
SPAN_TOL = 1e-9
DIRECT_CONV_LIMIT = 4096


def series_tail(log_z, g, n):
    """Return sum_{k >= n} k**(-g) * exp(k*log_z), or inf when it diverges.

    ``n`` must be >= 1 unless ``g`` is 0 or -1 (closed forms valid for any n).
    """
    n = int(n)
    if log_z > 1e-15:
        return math.inf
    if abs(log_z) <= 1e-15:
        if g > 1 and n >= 1:
            return float(special.zeta(g, n))
        return math.inf
    if g == 0:
        return math.exp(n * log_z) / -math.expm1(log_z)
    if g == -1:
        z = math.exp(log_z)
        one_minus = -math.expm1(log_z)
        return math.exp(n * log_z) * (n / one_minus + z / one_minus**2)
    if n < 1:
        raise ValueError("power-law series needs n >= 1")
    z = mpmath.exp(log_z)
    return float(mpmath.exp(n * log_z) * mpmath.lerchphi(z, g, n))


@dataclass(frozen=True)
class PowerExpTail:
    """Right-tail generator: mass c * k**(-gamma) * exp(-beta*k) for k >= k0."""

    k0: int
    c: float
    gamma: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.gamma != 0 and self.k0 < 1:
            raise InvalidLaw("power-law generator must start at k0 >= 1")
        if self.c < 0:
            raise InvalidLaw("generator weight must be nonnegative")
        if self.beta < 0 or (self.beta == 0 and self.gamma <= 1):
            raise InvalidLaw("generator masses are not summable")

    def masses(self, k):
        k = np.asarray(k, dtype=float)
        out = np.zeros_like(k)
        on = k >= self.k0
        kk = k[on]
        with np.errstate(over="ignore", under="ignore"):
            out[on] = self.c * np.exp(-self.gamma * np.log(np.maximum(kk, 1.0)) - self.beta * kk) \
                if self.gamma != 0 else self.c * np.exp(-self.beta * kk)
        return out

    def weighted_sum(self, t=0.0, power=0, start=None):
        """sum_{k >= start} k**power * e^{t*k} * mass(k)."""
        start = self.k0 if start is None else max(int(start), self.k0)
        if self.c == 0:
            return 0.0
        g = self.gamma - power
        if g not in (0, -1) and start < 1:
            start = 1
        return self.c * series_tail(t - self.beta, g, start)

    def abscissa(self, span_h):
        """Largest s with e^{s h k} * mass summable (finite at the boundary iff gamma > 1)."""
        return self.beta / span_h

    def to_dict(self):
        return {"kind": "powerexp",
                "params": {"k0": self.k0, "c": self.c, "gamma": self.gamma, "beta": self.beta}}

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "powerexp":
            raise InvalidLaw(f"unknown generator kind {d.get('kind')!r}")
        p = d["params"]
        return cls(int(p["k0"]), float(p["c"]), float(p.get("gamma", 0.0)), float(p.get("beta", 0.0)))


class ArithmeticLaw:
    """Law of log A on span_h * Z with an explicit atom for A = 0.

    Parameters
    ----------
    span_h : float
        Lattice step on the log scale.
    masses : array_like
        Dense masses for indices ``offset, offset+1, ...``.
    offset : int
        Lattice index of ``masses[0]``.
    zero_atom : float
        P{A = 0}.
    generator : PowerExpTail, optional
        Parametric continuation for indices ``>= generator.k0``.
    """

    def __init__(self, span_h, masses=(), offset=0, zero_atom=0.0, generator=None,
                 check_span=True):
        self.span_h = float(span_h)
        masses = np.asarray(masses, dtype=float).copy()
        if masses.ndim != 1:
            raise InvalidLaw("masses must be one-dimensional")
        # trim zero padding so offset is the first positive atom
        nz = np.flatnonzero(masses)
        if nz.size:
            offset += int(nz[0])
            masses = masses[nz[0]:nz[-1] + 1]
        else:
            masses = masses[:0]
        masses.setflags(write=False)
        self.masses = masses
        self.offset = int(offset)
        self.zero_atom = float(zero_atom)
        self.generator = generator
        self._validate(check_span)

    # construction -----------------------------------------------------
    @classmethod
    def from_atoms(cls, span_h, atoms, zero_atom=0.0, generator=None, check_span=True):
        items = sorted(dict(atoms).items()) if not isinstance(atoms, list) else sorted(atoms)
        if not items:
            return cls(span_h, (), 0, zero_atom, generator, check_span)
        ks = [int(k) for k, _ in items]
        lo = ks[0]
        dense = np.zeros(ks[-1] - lo + 1)
        for k, m in items:
            dense[int(k) - lo] += m
        return cls(span_h, dense, lo, zero_atom, generator, check_span)

    @classmethod
    def point(cls, span_h, k=1):
        return cls(span_h, [1.0], k, check_span=False)

    def _validate(self, check_span):
        if not self.span_h > 0:
            raise InvalidLaw("span_h must be positive")
        if np.any(self.masses < 0) or self.zero_atom < 0:
            raise InvalidLaw("masses must be nonnegative")
        if not 0 <= self.zero_atom <= 1:
            raise InvalidLaw("zero_atom must lie in [0, 1]")
        if self.generator is not None and self.masses.size:
            if self.generator.k0 <= self.offset + self.masses.size - 1:
                raise InvalidLaw("generator must start above the finite atoms")
        total = self.total_mass()
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidLaw(f"total mass {total!r} differs from 1")
        if check_span:
            idx = list(self.offset + np.flatnonzero(self.masses))
            if self.generator is not None and self.generator.c > 0:
                idx += [self.generator.k0, self.generator.k0 + 1]
            if len(idx) > 1 and reduce(math.gcd, (abs(int(k)) for k in idx)) != 1:
                raise InvalidLaw("span is not maximal: atom indices share a common factor")

    # basic queries ------------------------------------------------------
    def total_mass(self):
        gen = self.generator.weighted_sum() if self.generator is not None else 0.0
        return math.fsum([self.zero_atom, math.fsum(self.masses), gen])

    @property
    def is_finite(self):
        return self.generator is None or self.generator.c == 0

    @property
    def min_index(self):
        if self.masses.size:
            return self.offset
        if self.generator is not None:
            return self.generator.k0
        raise InvalidLaw("law has no mass on the lattice")

    @property
    def max_index(self):
        if not self.is_finite:
            return math.inf
        return self.offset + self.masses.size - 1

    def pmf(self, k):
        k = np.asarray(k)
        out = np.zeros(k.shape, dtype=float)
        pos = k - self.offset
        inside = (pos >= 0) & (pos < self.masses.size)
        out[inside] = self.masses[pos[inside]]
        if self.generator is not None:
            out = out + self.generator.masses(k)
        return out

    def prefix(self, upto):
        """Dense (indices, masses) from ``min_index`` through ``upto`` inclusive."""
        lo = self.min_index
        ks = np.arange(lo, int(upto) + 1)
        return ks, self.pmf(ks)

    def lattice_values(self, k):
        """e^{k h}, exact when e^h is an integer (e.g. h = log 2)."""
        base = math.exp(self.span_h)
        if abs(base - round(base)) < 1e-12:
            return np.power(float(round(base)), np.asarray(k, dtype=float))
        return np.exp(self.span_h * np.asarray(k, dtype=float))

    def sf_index(self, j):
        """P{log A > j*h} for integer ``j`` (the A = 0 atom never counts)."""
        j = np.atleast_1d(np.asarray(j, dtype=np.int64))
        rc = np.concatenate([np.cumsum(self.masses[::-1])[::-1], [0.0]])
        pos = np.clip(j + 1 - self.offset, 0, self.masses.size)
        out = rc[pos].astype(float)
        gen = self.generator
        if gen is not None and gen.c > 0:
            top = max(int(j.max()) + 1, gen.k0)
            ks = np.arange(gen.k0, top)
            exact_top = gen.weighted_sum(start=top)
            grc = np.concatenate([np.cumsum(gen.masses(ks)[::-1])[::-1], [0.0]]) + exact_top
            out = out + grc[np.clip(j + 1 - gen.k0, 0, ks.size)]
        return out

    def mellin(self, s):
        """E A^s, with E A^0 = 1 by convention and +inf when divergent."""
        if s < 0:
            raise ValueError("mellin moment needs s >= 0")
        if s == 0:
            return 1.0
        t = s * self.span_h
        ks = self.offset + np.arange(self.masses.size)
        with np.errstate(over="ignore"):
            finite = math.fsum(self.masses * np.exp(t * ks))
        gen = self.generator.weighted_sum(t) if self.generator is not None else 0.0
        return finite + gen

    def mellin_log(self, s):
        """E A^s log A over {A > 0}; +inf when divergent."""
        t = s * self.span_h
        ks = self.offset + np.arange(self.masses.size)
        with np.errstate(over="ignore"):
            finite = math.fsum(self.masses * ks * np.exp(t * ks))
        gen = self.generator.weighted_sum(t, power=1) if self.generator is not None else 0.0
        return self.span_h * (finite + gen)

    def drift(self):
        """E log A (-inf when A = 0 has positive mass)."""
        if self.zero_atom > 0:
            return -math.inf
        return self.mellin_log(0.0)

    def mean_index(self):
        ks = self.offset + np.arange(self.masses.size)
        gen = self.generator.weighted_sum(power=1) if self.generator is not None else 0.0
        return math.fsum(self.masses * ks) + gen

    # serialization ------------------------------------------------------
    def to_dict(self):
        ks = self.offset + np.flatnonzero(self.masses)
        d = {"span_h": self.span_h, "zero_atom": self.zero_atom,
             "atoms": [[int(k), float(self.masses[k - self.offset])] for k in ks]}
        if self.generator is not None:
            d["generator"] = self.generator.to_dict()
        return d

    @classmethod
    def from_dict(cls, d, check_span=True):
        gen = PowerExpTail.from_dict(d["generator"]) if d.get("generator") else None
        return cls.from_atoms(float(d["span_h"]), [(int(k), float(m)) for k, m in d.get("atoms", [])],
                              float(d.get("zero_atom", 0.0)), gen, check_span)

    def __repr__(self):
        gen = f", generator={self.generator}" if self.generator is not None else ""
        return (f"ArithmeticLaw(span_h={self.span_h!r}, offset={self.offset}, "
                f"n_atoms={self.masses.size}, zero_atom={self.zero_atom!r}{gen})")


# parametric families ------------------------------------------------------

def power_law(span_h, alpha, k0=1):
    """p_k = k**-(1+alpha) / zeta(1+alpha, k0) for k >= k0."""
    s = 1.0 + alpha
    c = 1.0 / float(special.zeta(s, k0))
    return ArithmeticLaw(span_h, (), k0, generator=PowerExpTail(k0, c, s, 0.0))


def geometric_law(span_h, r, k0=0):
    """p_k = (1 - r) r**(k - k0) for k >= k0."""
    beta = -math.log(r)
    c = (1.0 - r) * math.exp(beta * k0)
    return ArithmeticLaw(span_h, (), k0, generator=PowerExpTail(k0, c, 0.0, beta))


# operations ---------------------------------------------------------------

def detect_span(support, tol=SPAN_TOL, max_denominator=10_000):
    """Largest h with every (finite) log-atom in hZ.

    Raises NoCommonSpan when the atoms are not commensurable within ``tol``.
    """
    vals = [float(v) for v in support if math.isfinite(v)]
    if not vals:
        raise NoCommonSpan("empty support")
    nonzero = [v for v in vals if abs(v) > tol]
    if not nonzero:
        raise NoCommonSpan("support {0} has no span")
    ref = min(nonzero, key=abs)
    fracs = []
    for v in nonzero:
        r = v / ref
        f = Fraction(r).limit_denominator(max_denominator)
        if abs(r - float(f)) > tol * max(1.0, abs(r)):
            raise NoCommonSpan(f"{v!r} and {ref!r} are not commensurable")
        fracs.append(f)
    lcm = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fracs), 1)
    ints = [abs(int(f * lcm)) for f in fracs]
    return abs(ref) / lcm * reduce(math.gcd, ints)


def convolve_arrays(a, b, method="auto"):
    """Linear convolution of mass arrays; direct below DIRECT_CONV_LIMIT, FFT above."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        return np.zeros(0)
    if method == "auto":
        method = "direct" if max(a.size, b.size) < DIRECT_CONV_LIMIT else "fft"
    if method == "direct":
        return np.convolve(a, b)
    if method == "fft":
        out = signal.fftconvolve(a, b)
        np.maximum(out, 0.0, out=out)
        return out
    raise ValueError(f"unknown convolution method {method!r}")


def _check_pair(f, g):
    if not math.isclose(f.span_h, g.span_h, rel_tol=1e-12):
        raise SpanMismatch(f"spans differ: {f.span_h!r} vs {g.span_h!r}")
    if f.zero_atom > 0 or g.zero_atom > 0:
        raise ZeroAtomPresent("convolution is defined on proper lattice laws only")


def convolve(f, g, method="auto"):
    """(f * g)[n] = sum_k f[k] g[n-k] for finitely supported laws."""
    _check_pair(f, g)
    if not (f.is_finite and g.is_finite):
        raise InvalidLaw("convolve needs finite support; use convolve_arrays on prefixes")
    out = convolve_arrays(f.masses, g.masses, method)
    return ArithmeticLaw(f.span_h, out, f.offset + g.offset, check_span=False)


def mellin_moment(law, s):
    return law.mellin(s)


@dataclass(frozen=True)
class SubexpReport:
    n: np.ndarray
    shift_ratio: np.ndarray      # p_{n+1} / p_n
    conv_ratio: np.ndarray       # p^{*2}_n / (2 p_n)
    sup_ratio: np.ndarray        # sup_{k >= n} p_k / p_n

    def last_decade(self):
        return self.n >= self.n[-1] / 10

    def max_deviation(self):
        sel = self.last_decade()
        return (float(np.max(np.abs(self.shift_ratio[sel] - 1))),
                float(np.max(np.abs(self.conv_ratio[sel] - 1))))

    def plausibly_subexponential(self, tol=0.02, sup_bound=2.0):
        dev_shift, dev_conv = self.max_deviation()
        sup_ok = float(np.max(self.sup_ratio[self.last_decade()])) <= sup_bound
        return dev_shift <= tol and dev_conv <= tol and sup_ok


def subexp_diagnostic(law, n_max):
    """Ratios p_{n+1}/p_n and p^{*2}_n/(2 p_n) for n from max(min_index, 0) to n_max."""
    if n_max < 10:
        raise ValueError("n_max must be at least 10")
    if law.zero_atom > 0:
        raise ZeroAtomPresent("diagnostic needs a proper law")
    lo = law.min_index
    start = max(lo, 0)
    ks, p = law.prefix(2 * n_max + 1)
    n = np.arange(start, n_max + 1)
    pn = p[n - lo]
    if np.any(pn <= 0):
        bad = int(n[np.argmax(pn <= 0)])
        raise ZeroMassTail(f"p_n = 0 at n = {bad}")
    head = p[: n_max - 2 * lo + 1]
    conv = convolve_arrays(head, head)
    p2 = np.where(n >= 2 * lo, conv[np.maximum(n - 2 * lo, 0)], 0.0)
    # running sup from the right over the computed prefix
    sup_from = np.maximum.accumulate(p[::-1])[::-1]
    return SubexpReport(n=n, shift_ratio=p[n + 1 - lo] / pn, conv_ratio=p2 / (2 * pn),
                        sup_ratio=sup_from[n - lo] / pn)
