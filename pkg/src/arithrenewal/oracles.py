"""Closed-form test cases: the St. Petersburg pair and the q-set construction.

Construction (native kappa = 1, base b = e^{h}):

    P{A = b^l, B = 0} = (1 - r b) r^l,  l >= 0
    P{A = 0}          = r (b - 1) / (1 - r),  B | A = 0  ~  H on [1, b)

Then E A = 1, and with S = S_{N-1} the lattice exponent of A_1...A_{N-1},

    P{S = 0} = (b - 1) / ((1 - r) b),   P{S = k} = D b^{-k},  D = (b-1)(1-rb)/((1-r) b).

For x = b^n z with n >= 1, z in [1, b):  x P{X > x} = z D (b/(b-1) - H(z)).
Given a target q with c = q(b-) in (0, 1) the choice r = (1 - c)/(b - c),
H(z) = b/(b-1) (1 - q(z)/(c z)) makes x P{X > x} = q(z).  For b = 2 this is
p = r = 1 - 1/(2 - c) and H(y) = 2 - 2(1-p)/(1-2p) q(y)/y.

A target in class Q for general (kappa, h) is mapped to base b = e^{kappa h} via
y = x^kappa, constructed natively, and mapped back with A -> A^{1/kappa},
B -> B^{1/kappa} (valid because AB = 0 makes X a product A_1...A_{N-1} B_N).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidQ
from .implicit import ExactTail
from .lattice import ArithmeticLaw, PowerExpTail
from .pairs import CallableDF, JointABLaw, Negated, PowerGeometric
from .renewal import forward_recursion

LOG2 = math.log(2.0)


# St. Petersburg -------------------------------------------------------------

def st_petersburg_pair():
    """P{A=0, B=2^k} = 4^-k (k >= 1), P{A=2^l, B=0} = 2^-(2l+1) (l >= 0)."""
    a = ArithmeticLaw(LOG2, (), 0, zero_atom=1.0 / 3.0,
                      generator=PowerExpTail(0, 0.5, 0.0, math.log(4.0)))
    # given A = 0, B = 2^K with P{K = k} = 3 * 4^-k
    return JointABLaw(a, PowerGeometric(2.0, 0.25, 1), name="st_petersburg")


def _floor_log2(x):
    _, e = np.frexp(x)
    return e - 1


def st_petersburg_tail(x):
    """P{X > x}: 1 for x < 2, 2^{-floor(log2 x)} otherwise (exact)."""
    x = np.asarray(x, dtype=float)
    n = _floor_log2(np.maximum(x, 2.0))
    out = np.where(x < 2.0, 1.0, np.ldexp(1.0, -n))
    return out if out.ndim else float(out)


def st_petersburg_pmf(k):
    return np.ldexp(1.0, -np.asarray(k))


def st_petersburg_q(x):
    """q(x) = 2^{frac(log2 x)} = x 2^{-floor(log2 x)}."""
    x = np.asarray(x, dtype=float)
    return np.ldexp(x, -_floor_log2(x))


def st_petersburg_exact_tail():
    return ExactTail(st_petersburg_tail, {"kind": "st_petersburg"}, LOG2, [0.0])


def pushforward_pmf(pair, x_pmf, k):
    """P{AX + B = 2^k} for X with lattice pmf x_pmf(j) = P{X = 2^j}, using the AB = 0 structure."""
    total = pair.prob(None, 2.0**k)
    for l in range(0, k):
        total += pair.prob(l, 0.0) * x_pmf(k - l)
    return total


# q targets ------------------------------------------------------------------

@dataclass(frozen=True)
class QTarget:
    """Right-continuous piecewise-linear q on one period [1, e^h).

    ``right[i]`` = q(knots[i]); ``left[i]`` = q(knots[i]-) for i >= 1 and
    ``left[0]`` = q(e^h -), the left limit at the end of the period.  On
    [knots[i], knots[i+1]) q is linear from right[i] to left[i+1].
    """

    knots: tuple
    right: tuple
    left: tuple
    kappa: float = 1.0
    span_h: float = LOG2
    scale_c: float = 1.0

    def __post_init__(self):
        y = np.asarray(self.knots, dtype=float)
        if y.size == 0 or y[0] != 1.0 or np.any(np.diff(y) <= 0) or y[-1] >= self.period:
            raise InvalidQ("knots must start at 1, increase and stay below e^h")
        if len(self.right) != y.size or len(self.left) != y.size:
            raise InvalidQ("need one right value and one left limit per knot")
        if not self.scale_c > 0:
            raise InvalidQ("scale_c must be positive")
        self.validate()

    @property
    def period(self):
        return math.exp(self.span_h)

    @classmethod
    def constant(cls, c, **kw):
        return cls((1.0,), (float(c),), (float(c),), **kw)

    def _ends(self):
        y = np.append(np.asarray(self.knots, dtype=float), self.period)
        v0 = np.asarray(self.right, dtype=float)
        v1 = np.append(np.asarray(self.left, dtype=float)[1:], self.left[0])
        return y, v0, v1

    def validate(self, tol=1e-13):
        """q >= 0, not identically 0, y^-kappa q(y) nonincreasing including the seam."""
        y, v0, v1 = self._ends()
        if np.any(v0 < 0) or np.any(v1 < 0) or not (np.any(v0 > 0) or np.any(v1 > 0)):
            raise InvalidQ("q must be nonnegative and not identically zero")
        k = self.kappa
        scale = max(float(np.max(v0)), float(np.max(v1)))
        # within pieces: check on a fine sub-grid (exact for kappa = 1, where the condition is intercept >= 0)
        for i in range(y.size - 1):
            t = np.linspace(y[i], y[i + 1], 65)[:-1]
            vals = v0[i] + (v1[i] - v0[i]) * (t - y[i]) / (y[i + 1] - y[i])
            g = vals * t ** (-k)
            if np.any(np.diff(g) > tol * scale):
                raise InvalidQ(f"y^-kappa q(y) increases on [{y[i]}, {y[i + 1]})")
            if k == 1.0:
                slope = (v1[i] - v0[i]) / (y[i + 1] - y[i])
                if v0[i] - slope * y[i] < -tol * scale:
                    raise InvalidQ(f"q(y)/y increases on [{y[i]}, {y[i + 1]})")
        # jumps go down only (right-continuity with nonincreasing y^-kappa q)
        if np.any(v0[1:] > v1[:-1] + tol * scale):
            raise InvalidQ("q may only jump downward")
        if v0[0] > v1[-1] + tol * scale:
            raise InvalidQ("seam: q(1) must not exceed q(e^h -)")

    def base_value(self, y):
        """Unscaled q on the period, extended log-periodically."""
        y = np.asarray(y, dtype=float)
        h = self.span_h
        n = np.floor(np.log(y) / h)
        z = y * np.exp(-n * h)
        z = np.where(z >= self.period, z / self.period, z)
        z = np.where(z < 1.0, z * self.period, z)
        if abs(self.period - 2.0) < 1e-15:
            z = np.ldexp(y, -_floor_log2(y))
        knots, v0, v1 = self._ends()
        i = np.clip(np.searchsorted(knots, z, side="right") - 1, 0, knots.size - 2)
        w = (z - knots[i]) / (knots[i + 1] - knots[i])
        return v0[i] + (v1[i] - v0[i]) * w

    def __call__(self, x):
        """Target profile c q(x / c)."""
        x = np.asarray(x, dtype=float)
        c = self.scale_c
        return c * self.base_value(x / c) if c != 1.0 else self.base_value(x)

    def left_limit_end(self):
        return float(self.left[0])

    def to_dict(self):
        return {"kappa": self.kappa, "h": self.span_h, "scale_c": self.scale_c,
                "knots": list(self.knots), "right": list(self.right), "left": list(self.left)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["knots"]), tuple(d["right"]), tuple(d["left"]),
                   float(d.get("kappa", 1.0)), float(d.get("h", LOG2)), float(d.get("scale_c", 1.0)))


def random_qtarget(rng, n_knots=6, kappa=1.0, span_h=LOG2, max_tries=1000):
    """Random piecewise-linear member of class Q (nonnegative slopes, small downward jumps)."""
    period = math.exp(span_h)
    for _ in range(max_tries):
        inner = np.sort(rng.uniform(1.0, period, n_knots - 1))
        knots = np.concatenate([[1.0], inner])
        if np.any(np.diff(np.append(knots, period)) < 1e-3):
            continue
        right = [float(rng.uniform(0.5, 1.5))]
        left = [None]
        for i in range(n_knots):
            y0 = knots[i]
            y1 = knots[i + 1] if i + 1 < n_knots else period
            # q(y) = v + s (y - y0) keeps y^-kappa q nonincreasing for s <= kappa v / y1
            s_max = kappa * right[i] / y1
            s = float(rng.uniform(0.0, 0.9)) * s_max
            end = right[i] + s * (y1 - y0)
            if i + 1 < n_knots:
                left.append(end)
                right.append(end * float(rng.uniform(0.85, 1.0)))
            else:
                left[0] = end
        try:
            return QTarget(tuple(knots), tuple(right), tuple(left), kappa, span_h)
        except InvalidQ:
            continue
    raise RuntimeError("could not draw a valid random target")


# q-set construction ---------------------------------------------------------

def sn_pmf(p, k, base=2.0):
    """P{S_{N-1} = k}; ``p`` is the geometric ratio r of the nonzero A atoms."""
    b, r = float(base), float(p)
    if not 0 < r < 1 / b:
        raise ValueError("need 0 < p < 1/base")
    k = np.asarray(k)
    d = (b - 1) * (1 - r * b) / ((1 - r) * b)
    out = np.where(k == 0, (b - 1) / ((1 - r) * b), d * np.power(b, -k.astype(float)))
    out = np.where(k < 0, 0.0, out)
    return out if out.ndim else float(out)


def sn_pmf_bruteforce(p, k_max, n_max=60, base=2.0):
    """Enumerate N <= n_max and convolve the geometric(1 - p) Y laws."""
    b, r = float(base), float(p)
    pi0 = r * (b - 1) / (1 - r)
    y = (1 - r) * r ** np.arange(k_max + 1, dtype=float)
    out = np.zeros(k_max + 1)
    conv = np.zeros(k_max + 1)
    conv[0] = 1.0
    for n in range(1, n_max + 1):
        out += pi0 * (1 - pi0) ** (n - 1) * conv
        conv = np.convolve(conv, y)[: k_max + 1]
    return out


def qset_exact_tail(p, H, x, base=2.0):
    """Native tail P{X > x} of the construction (kappa = 1), exact branches.

    x < 1: 1.  x in [1, b): P{S >= 1} + P{S = 0}(1 - H(x)).
    x >= b: D b^{-n} (b/(b-1) - H(z)),  x = b^n z.
    """
    b, r = float(base), float(p)
    x = np.asarray(x, dtype=float)
    d = (b - 1) * (1 - r * b) / ((1 - r) * b)
    p0 = (b - 1) / ((1 - r) * b)
    if b == 2.0:
        n = _floor_log2(np.maximum(x, 1.0))
        z = np.ldexp(np.maximum(x, 1.0), -n)
        bn = np.ldexp(1.0, -n)
    else:
        n = np.floor(np.log(np.maximum(x, 1.0)) / math.log(b)).astype(np.int64)
        bn = np.power(b, -n.astype(float))
        z = np.maximum(x, 1.0) * bn
        hi = z >= b
        n, z, bn = np.where(hi, n + 1, n), np.where(hi, z / b, z), np.where(hi, bn / b, bn)
        lo = z < 1.0
        n, z, bn = np.where(lo, n - 1, n), np.where(lo, z * b, z), np.where(lo, bn * b, bn)
    hz = H(z)
    first = d / (b - 1) + p0 * (1.0 - hz)
    later = d * bn * (b / (b - 1) - hz)
    out = np.where(x < 1.0, 1.0, np.where(n == 0, first, later))
    return out if out.ndim else float(out)


@dataclass
class QSetPair:
    target: QTarget
    pair: JointABLaw
    p: float                 # geometric ratio r (p in the base-2 notation)
    base: float              # native base b = e^{kappa h}
    internal_scale: int      # m in the rescale q -> q / b^m
    b_scale: float           # total multiplier of B^{1/kappa}: c e^{h m}
    H: object                # native df of the pre-scaled B on [1, b)
    tail: ExactTail

    @property
    def native_q_end(self):
        return self.target.left_limit_end() / self.base**self.internal_scale

    def q_of_target(self, x):
        return self.target(x)


def qset_construct(target: QTarget):
    """Pair (A, B) with AB = 0 whose solution has x^kappa P{X > x} -> target(x) log-periodically."""
    kappa, h = target.kappa, target.span_h
    b = math.exp(kappa * h)
    end = target.left_limit_end()
    if not end > 0:
        raise InvalidQ("q(e^h -) must be positive")
    m = math.floor(math.log(end) / math.log(b)) + 1
    # q1(y) = q(y^{1/kappa}) / b^m on [1, b), so q1(b-) lies in [1/b, 1)
    while end / b**m >= 1.0:
        m += 1
    while end / b ** (m - 1) < 1.0:
        m -= 1
    c = end / b**m
    r = (1.0 - c) / (b - c)

    def q1(y):
        return target.base_value(np.asarray(y, dtype=float) ** (1.0 / kappa)) / b**m

    def H(z):
        z = np.asarray(z, dtype=float)
        val = b / (b - 1.0) * (1.0 - q1(z) / (c * z))
        return np.clip(val, 0.0, 1.0)

    grid = np.linspace(1.0, b, 4097)[:-1]
    hv = b / (b - 1.0) * (1.0 - q1(grid) / (c * grid))
    if np.any(hv < -1e-12) or np.any(np.diff(hv) < -1e-12):
        raise InvalidQ("constructed H is not a distribution function on the grid")

    a_law = ArithmeticLaw(h, (), 0, zero_atom=r * (b - 1.0) / (1.0 - r),
                          generator=PowerExpTail(0, 1.0 - r * b, 0.0, -math.log(r)))
    b_scale = target.scale_c * math.exp(h * m)

    def b_cdf(y):
        return H((np.asarray(y, dtype=float) / b_scale) ** kappa)

    b_law = CallableDF(b_cdf, b_scale, b_scale * math.exp(h),
                       {"construction": "qset", "target": target.to_dict()})
    pair = JointABLaw(a_law, b_law, name="qset")

    def tail(x):
        y = (np.asarray(x, dtype=float) / b_scale) ** kappa
        return qset_exact_tail(r, H, y, b)

    offsets = [math.log(b_scale * k) for k in target.knots]
    ex = ExactTail(tail, {"kind": "qset", "target": target.to_dict()}, h, offsets)
    return QSetPair(target, pair, r, b, m, b_scale, H, ex)


@dataclass
class LeftTailPair:
    pair: JointABLaw
    left_tail: ExactTail     # x -> P{X < -x}
    source: QSetPair


def qset_construct_left(target: QTarget):
    """Left-tail variant: B -> -B turns the solution X into -X (AB = 0, so X = A_1...A_{N-1} B_N).

    Then |x|^kappa P{X < -x} -> target(x) log-periodically and P{X > 0} = 0.
    """
    con = qset_construct(target)
    pair = JointABLaw(con.pair.a_law, Negated(con.pair.b_zero), name="qset_left")
    left = ExactTail(con.tail.func, {"kind": "qset_left", "target": target.to_dict()},
                     con.tail.break_period, con.tail.break_offsets)
    return LeftTailPair(pair, left, con)


def constant_q_tail(p, x):
    """(2 - 1/(1-p)) / x for x > 2: the H(y) = 2 - 2/y case."""
    return (2.0 - 1.0 / (1.0 - p)) / np.asarray(x, dtype=float)


# generic AB = 0 tail ----------------------------------------------------------

def ab0_tail(pair: JointABLaw, k_max=None, tol=1e-18):
    """Exact tail of X = A_1...A_{N-1} B_N for an AB = 0 pair with A >= 1 on {A != 0}.

    P{S_{N-1} = k} = pi0 u_k with u the defective renewal sequence of the
    lattice masses of A (total 1 - pi0); T(x) = sum_k pi0 u_k P{B > x e^{-kh}}.
    """
    a = pair.a_law
    pi0 = a.zero_atom
    if not pair.is_ab0 or pi0 <= 0:
        raise InvalidQ("ab0_tail needs an AB = 0 pair with P{A = 0} > 0")
    if a.min_index < 0:
        raise InvalidQ("ab0_tail needs A >= 1 on {A != 0}")
    if k_max is None:
        k_max = 64
        while True:
            ks, pm = a.prefix(k_max)
            f = pm / (1.0 - pi0)
            u = forward_recursion(ArithmeticLaw(a.span_h, f, int(ks[0]), check_span=False),
                                  1.0 - pi0, k_max)
            if pi0 * u[-1] < tol or k_max > 1 << 16:
                break
            k_max *= 2
    else:
        ks, pm = a.prefix(k_max)
        u = forward_recursion(ArithmeticLaw(a.span_h, pm / (1.0 - pi0), int(ks[0]), check_span=False),
                              1.0 - pi0, k_max)
    weights = pi0 * u
    shifts = a.lattice_values(-np.arange(k_max + 1))

    def tail(x):
        x = np.asarray(x, dtype=float)
        return np.sum(weights * pair.b_zero.sf(x[..., None] * shifts), axis=-1)

    return ExactTail(tail, {"kind": "ab0", "pair": pair.name})
