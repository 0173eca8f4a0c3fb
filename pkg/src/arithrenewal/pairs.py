"""Joint laws of (A, B) for the fixed-point equations.

The joint law is described by the law of log A (an ``ArithmeticLaw`` with an
atom for A = 0) and two conditional laws of B: one given A = 0 and one given
A != 0.  Given which of the two events occurs, B is independent of the value
of A.  This covers the AB = 0 constructions (B = 0 whenever A != 0) and
independent pairs (both conditionals equal).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidLaw
from .lattice import ArithmeticLaw


class BLaw:
    """Law of a real random variable with survival function and sampler."""

    kind = "abstract"

    def sf(self, x):
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def moment(self, s):
        """E |B|^s (may be inf)."""
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(BLaw):
    value: float = 0.0
    kind = "point"

    def sf(self, x):
        return (np.asarray(x, dtype=float) < self.value).astype(float)

    def sample(self, rng, size):
        return np.full(size, float(self.value))

    def moment(self, s):
        return abs(self.value) ** s if self.value != 0 else 0.0

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class PowerGeometric(BLaw):
    """B = base**K with P{K = k} = (1 - r) r**(k - k0), k >= k0."""

    base: float = 2.0
    r: float = 0.25
    k0: int = 1
    kind = "power_geometric"

    def __post_init__(self):
        if not (0 < self.r < 1 and self.base > 1):
            raise InvalidLaw("need 0 < r < 1 and base > 1")

    def pmf(self, k):
        k = np.asarray(k)
        return np.where(k >= self.k0, (1 - self.r) * self.r ** (k - self.k0).astype(float), 0.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            # number of atoms base**k <= x
            kk = np.floor(np.log(np.maximum(x, 1e-300)) / math.log(self.base) + 1e-12)
        # smallest k with base**k > x
        kk = np.where(self.base ** kk > x, kk, kk + 1)
        kk = np.maximum(kk, self.k0)
        return self.r ** (kk - self.k0)

    def sample(self, rng, size):
        k = self.k0 + rng.geometric(1.0 - self.r, size) - 1
        return np.power(self.base, k.astype(float))

    def moment(self, s):
        q = self.r * self.base**s
        if q >= 1:
            return math.inf
        return (1 - self.r) * self.base ** (s * self.k0) / (1 - q)

    def to_dict(self):
        return {"kind": self.kind, "base": self.base, "r": self.r, "k0": self.k0}


@dataclass(frozen=True)
class Pareto(BLaw):
    """P{B > x} = (x/scale)**(-alpha) for x >= scale."""

    alpha: float
    scale: float = 1.0
    kind = "pareto"

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.scale, 1.0, (np.maximum(x, self.scale) / self.scale) ** (-self.alpha))

    def sample(self, rng, size):
        return self.scale * rng.random(size) ** (-1.0 / self.alpha)

    def moment(self, s):
        if s >= self.alpha:
            return math.inf
        return self.alpha * self.scale**s / (self.alpha - s)

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha, "scale": self.scale}


class CallableDF(BLaw):
    """Law on [lo, hi) given by a right-continuous df H; sampled by vectorized bisection."""

    kind = "callable_df"

    def __init__(self, cdf, lo, hi, descriptor=None, bisect_steps=64):
        self.cdf = cdf
        self.lo = float(lo)
        self.hi = float(hi)
        self.descriptor = descriptor or {}
        self.bisect_steps = bisect_steps

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.clip(x, self.lo, np.nextafter(self.hi, self.lo))
        return np.where(x < self.lo, 1.0, np.where(x >= self.hi, 0.0, 1.0 - self.cdf(inside)))

    def sample(self, rng, size):
        # generalized inverse: smallest y with H(y) >= u
        u = rng.random(size)
        lo = np.full(size, self.lo)
        hi = np.full(size, self.hi)
        at_lo = self.cdf(lo) >= u
        for _ in range(self.bisect_steps):
            mid = 0.5 * (lo + hi)
            ok = self.cdf(mid) >= u
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        return np.where(at_lo, self.lo, hi)

    def moment(self, s):
        return max(abs(self.lo), abs(self.hi)) ** s

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, **self.descriptor}


class Negated(BLaw):
    """Law of -B for a wrapped law B."""

    kind = "negated"

    def __init__(self, inner):
        self.inner = inner

    def sf(self, x):
        # P{-B > x} = P{B < -x}, taken as 1 - P{B >= -x} via a left limit
        x = np.asarray(x, dtype=float)
        return 1.0 - self.inner.sf(np.nextafter(-x, -np.inf))

    def sample(self, rng, size):
        return -self.inner.sample(rng, size)

    def moment(self, s):
        return self.inner.moment(s)

    def to_dict(self):
        return {"kind": self.kind, "inner": self.inner.to_dict()}


def blaw_from_dict(d):
    kind = d.get("kind")
    if kind == "point":
        return PointMass(float(d["value"]))
    if kind == "power_geometric":
        return PowerGeometric(float(d["base"]), float(d["r"]), int(d["k0"]))
    if kind == "pareto":
        return Pareto(float(d["alpha"]), float(d.get("scale", 1.0)))
    if kind == "negated":
        return Negated(blaw_from_dict(d["inner"]))
    raise InvalidLaw(f"B law of kind {kind!r} is not reconstructible from JSON")


class LatticeSampler:
    """Inverse-cdf sampler for A = e^{K h} (or 0) from an ArithmeticLaw.

    Parametric tails are tabulated until the remaining mass is below
    ``tail_mass``; that remainder is reported as ``omitted`` and folded into
    the last tabulated atom.
    """

    def __init__(self, law, tail_mass=1e-17, max_atoms=1_000_000):
        self.law = law
        ks = law.offset + np.arange(law.masses.size)
        ms = np.array(law.masses, dtype=float)
        self.omitted = 0.0
        gen = law.generator
        if gen is not None and gen.c > 0:
            k_end = gen.k0
            step = 64
            while True:
                rest = gen.weighted_sum(start=k_end + step)
                k_end += step
                if rest <= tail_mass or k_end - gen.k0 >= max_atoms:
                    self.omitted = rest
                    break
                step *= 2
            gk = np.arange(gen.k0, k_end)
            ks = np.concatenate([ks, gk])
            ms = np.concatenate([ms, gen.masses(gk)])
        if ks.size == 0:
            # A = 0 a.s.; a dummy atom that is never selected
            ks, ms = np.zeros(1, dtype=np.int64), np.zeros(1)
        self.index = ks
        self.values = law.lattice_values(ks)
        cdf = law.zero_atom + np.cumsum(ms)
        cdf[-1] = 1.0
        self.cdf = cdf

    def sample_index_nonzero(self, rng, size):
        """Lattice indices K drawn from the law of log A / h given A != 0."""
        z = self.law.zero_atom
        u = z + (1.0 - z) * rng.random(size)
        pos = np.minimum(np.searchsorted(self.cdf, u, side="right"), self.cdf.size - 1)
        return self.index[pos]

    def sample(self, rng, size):
        u = rng.random(size)
        pos = np.searchsorted(self.cdf, u, side="right")
        pos = np.minimum(pos, self.cdf.size - 1)
        zero = u < self.law.zero_atom
        return np.where(zero, 0.0, self.values[pos])


class JointABLaw:
    """(A, B) with B | {A = 0} ~ b_zero and B | {A != 0} ~ b_nonzero."""

    def __init__(self, a_law: ArithmeticLaw, b_zero: BLaw, b_nonzero: BLaw = PointMass(0.0), name=""):
        self.a_law = a_law
        self.b_zero = b_zero
        self.b_nonzero = b_nonzero
        self.name = name
        self._sampler = None

    @property
    def span_h(self):
        return self.a_law.span_h

    @property
    def is_ab0(self):
        return isinstance(self.b_nonzero, PointMass) and self.b_nonzero.value == 0.0

    def prob(self, a_index=None, b_value=None):
        """P{A = e^{a_index h}, B = b_value} for discrete parts (a_index None means A = 0)."""
        if a_index is None:
            pa, bl = self.a_law.zero_atom, self.b_zero
        else:
            pa, bl = float(self.a_law.pmf(np.array([a_index]))[0]), self.b_nonzero
        if isinstance(bl, PointMass):
            return pa * float(bl.value == b_value)
        if isinstance(bl, PowerGeometric):
            k = math.log(b_value) / math.log(bl.base)
            if abs(k - round(k)) > 1e-12:
                return 0.0
            return pa * float(bl.pmf(np.array([round(k)]))[0])
        raise InvalidLaw("prob is only defined for discrete conditional laws")

    @property
    def sampler(self):
        if self._sampler is None:
            self._sampler = LatticeSampler(self.a_law)
        return self._sampler

    def sample(self, rng, size):
        a = self.sampler.sample(rng, size)
        zero = a == 0.0
        b = np.empty(size)
        nz = int(zero.sum())
        b[zero] = self.b_zero.sample(rng, nz)
        b[~zero] = self.b_nonzero.sample(rng, size - nz)
        return a, b

    def drift_ok(self):
        """E log A < 0 and E log_+ |B| < inf (the standard contraction checks)."""
        if not self.a_law.drift() < 0:
            return False
        for bl in (self.b_zero, self.b_nonzero):
            if not math.isfinite(bl.moment(1e-3)):
                return False
        return True

    def to_dict(self):
        return {"name": self.name, "a_law": self.a_law.to_dict(),
                "b_given_a_zero": self.b_zero.to_dict(),
                "b_given_a_nonzero": self.b_nonzero.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(ArithmeticLaw.from_dict(d["a_law"]), blaw_from_dict(d["b_given_a_zero"]),
                   blaw_from_dict(d.get("b_given_a_nonzero", {"kind": "point", "value": 0.0})),
                   d.get("name", ""))

    def __repr__(self):
        return f"JointABLaw({self.name or 'unnamed'}, a={self.a_law!r}, b0={self.b_zero}, b1={self.b_nonzero})"
