"""Cramér root, exponential tilting and the regime split.

The tilted law has masses e^{kappa k h} p_k (divided by E A^kappa when that is
a defect theta < 1).  Three regimes follow from it: finite tilted mean,
infinite mean with regularly varying tail (alpha supplied by the caller) and
the defective case E A^kappa = theta < 1 with E A^t = inf for t > kappa.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DivergentTilt,
    MassExceedsOne,
    NoCramerRoot,
    PositiveDrift,
    WrongRegime,
)
from .lattice import ArithmeticLaw, PowerExpTail

ROOT_RTOL = 1e-12
ABSCISSA_TOL = 1e-9


@dataclass(frozen=True)
class FiniteMean:
    kind: str = field(default="FiniteMean", init=False)

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class InfiniteMeanRegVar:
    alpha: float
    ell: str = "constant"
    kind: str = field(default="InfiniteMeanRegVar", init=False)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha, "slowly_varying": self.ell}


@dataclass(frozen=True)
class Defective:
    theta: float
    kappa: float
    kind: str = field(default="Defective", init=False)

    def to_dict(self):
        return {"kind": self.kind, "theta": self.theta}


def _json_real(x):
    return x if math.isfinite(x) else "+inf"


@dataclass(frozen=True)
class CramerInfo:
    kappa: float
    mu: float
    regime: object
    tilted: ArithmeticLaw

    def to_dict(self):
        return {"kappa": self.kappa, "mu": _json_real(self.mu),
                "regime": self.regime.to_dict(), "tilted": self.tilted.to_dict()}


def convergence_abscissa(law, s_max, tol=ABSCISSA_TOL):
    """Abscissa of convergence of s -> E A^s, located by bisection on finiteness.

    Returns inf when E A^s is finite on all of [0, s_max].  When the law carries
    a parametric tail whose exact abscissa lies within ``tol`` of the bisection
    result, the exact value is returned.
    """
    if math.isfinite(law.mellin(s_max)):
        return math.inf
    lo, hi = 0.0, float(s_max)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if math.isfinite(law.mellin(mid)):
            lo = mid
        else:
            hi = mid
    if law.generator is not None:
        exact = law.generator.abscissa(law.span_h)
        if abs(exact - lo) <= 2 * tol:
            return exact
    return lo


def solve_kappa(law, s_max=50.0, rtol=ROOT_RTOL):
    """Positive root of E A^s = 1, or ``Defective`` when E A^s stays below 1 up to a blow-up.

    Bracketed bisection; log-convexity of s -> E A^s makes the root unique.
    """
    if law.drift() >= 0:
        raise PositiveDrift("E log A >= 0: no Cramér root on (0, inf)")
    s_star = convergence_abscissa(law, s_max)
    cap = min(float(s_max), s_star)
    g_cap = law.mellin(cap) - 1.0
    if g_cap > 0:
        return _bisect_root(law, 0.0, cap, rtol)
    if cap == s_star:
        theta = law.mellin(s_star)
        if theta == 1.0:
            return s_star
        return Defective(theta=theta, kappa=s_star)
    raise NoCramerRoot(f"E A^s < 1 for all s <= {s_max}")


def _bisect_root(law, lo, hi, rtol):
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        # inf compares as positive, which is what bisection wants past the abscissa
        if law.mellin(mid) - 1.0 > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def tilt(law, kappa):
    """Law of log A under P_kappa; divides by E A^kappa so the result is proper."""
    norm = law.mellin(kappa)
    if not math.isfinite(norm):
        raise DivergentTilt(f"E A^{kappa} is infinite")
    h = law.span_h
    ks = law.offset + np.arange(law.masses.size)
    masses = law.masses * np.exp(kappa * h * ks) / norm
    gen = None
    if law.generator is not None:
        g = law.generator
        beta = g.beta - kappa * h
        if abs(beta) < 1e-12:
            beta = 0.0
        if beta < 0:
            raise DivergentTilt("tilt pushes the parametric tail past summability")
        gen = PowerExpTail(g.k0, g.c / norm, g.gamma, beta)
    return ArithmeticLaw(h, masses, law.offset, 0.0, gen)


def invert_tilt(f_kappa, kappa):
    """Original law whose kappa-tilt is ``f_kappa``; the deficit becomes the A = 0 atom."""
    h = f_kappa.span_h
    ks = f_kappa.offset + np.arange(f_kappa.masses.size)
    masses = f_kappa.masses * np.exp(-kappa * h * ks)
    gen = None
    gen_mass = 0.0
    if f_kappa.generator is not None:
        g = f_kappa.generator
        gen = PowerExpTail(g.k0, g.c, g.gamma, g.beta + kappa * h)
        gen_mass = gen.weighted_sum()
    s = math.fsum(masses) + gen_mass
    if s > 1.0 + 1e-12:
        raise MassExceedsOne(f"sum e^(-kappa k h) f_k = {s!r} > 1")
    return ArithmeticLaw(h, masses, f_kappa.offset, max(0.0, 1.0 - s), gen)


def truncated_mean_m(f_kappa, x):
    """m(x) = int_0^x P_kappa{log A > y} dy, exact on the lattice cells."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x_arr < 0):
        raise ValueError("truncated mean needs x >= 0")
    h = f_kappa.span_h
    J = np.floor(x_arr / h).astype(np.int64)
    jmax = int(J.max()) if J.size else 0
    sf = f_kappa.sf_index(np.arange(0, jmax + 1))
    csum = np.concatenate([[0.0], np.cumsum(sf)])
    out = h * csum[J] + (x_arr - J * h) * sf[J]
    return out if np.ndim(x) else float(out[0])


@dataclass(frozen=True)
class DoneyReport:
    n: np.ndarray
    delta: np.ndarray
    values: np.ndarray        # shape (len(delta), len(n)); nan where excluded

    def limsup_trend(self, tail_fraction=1 / 3):
        """Max over the last ``tail_fraction`` of the n-grid, one value per delta."""
        start = int(len(self.n) * (1 - tail_fraction))
        return np.nanmax(self.values[:, start:], axis=1)


def doney_diagnostic(f_kappa, n_grid, delta_grid, alpha):
    """Evaluate x F(x) sum_{1 <= y <= delta x} f(x - y) / (y F(y)^2) at x = n h.

    Only meaningful for alpha <= 1/2; for larger alpha the condition holds
    automatically and the diagnostic refuses to run.
    """
    if alpha > 0.5:
        raise WrongRegime("for alpha > 1/2 the small-jump condition holds automatically")
    h = f_kappa.span_h
    n_grid = np.asarray(n_grid, dtype=np.int64)
    delta_grid = np.asarray(delta_grid, dtype=float)
    nmax = int(n_grid.max())
    j_all = np.arange(0, nmax + 1)
    sf = f_kappa.sf_index(j_all)
    lo = f_kappa.min_index
    j_min = max(1, math.ceil(1.0 / h))
    values = np.full((delta_grid.size, n_grid.size), np.nan)
    for col, n in enumerate(n_grid):
        if sf[n] <= 0:
            continue
        for row, d in enumerate(delta_grid):
            j = np.arange(j_min, int(math.floor(d * n)) + 1)
            j = j[(n - j >= lo) & (sf[j] > 0)]
            if j.size == 0:
                values[row, col] = 0.0
                continue
            terms = f_kappa.pmf(n - j) / (j * h * sf[j] ** 2)
            values[row, col] = n * h * sf[n] * math.fsum(terms)
    return DoneyReport(n_grid, delta_grid, values)


def cramer_info(law, s_max=50.0, alpha=None, ell="constant"):
    """Solve for kappa, tilt, and classify the regime."""
    root = solve_kappa(law, s_max)
    if isinstance(root, Defective):
        tilted = tilt(law, root.kappa)
        return CramerInfo(root.kappa, law.mellin_log(root.kappa), root, tilted)
    kappa = root
    tilted = tilt(law, kappa)
    mu = law.mellin_log(kappa)
    if math.isfinite(mu):
        if not mu > 0:
            raise PositiveDrift("tilted mean is not positive")
        return CramerInfo(kappa, mu, FiniteMean(), tilted)
    if alpha is None:
        raise WrongRegime("infinite tilted mean: the regular-variation index alpha must be supplied")
    return CramerInfo(kappa, math.inf, InfiniteMeanRegVar(float(alpha), ell), tilted)


def defective_law(f_kappa, theta, kappa):
    """Original law with E A^kappa = theta whose normalized tilt is ``f_kappa``.

    Masses theta * e^{-kappa k h} f_k; the A = 0 atom absorbs the deficit.
    """
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    h = f_kappa.span_h
    ks = f_kappa.offset + np.arange(f_kappa.masses.size)
    masses = theta * f_kappa.masses * np.exp(-kappa * h * ks)
    gen = None
    gen_mass = 0.0
    if f_kappa.generator is not None:
        g = f_kappa.generator
        gen = PowerExpTail(g.k0, theta * g.c, g.gamma, g.beta + kappa * h)
        gen_mass = gen.weighted_sum()
    s = math.fsum(masses) + gen_mass
    if s > 1.0 + 1e-12:
        raise MassExceedsOne(f"total lattice mass {s!r} > 1")
    return ArithmeticLaw(h, masses, f_kappa.offset, max(0.0, 1.0 - s), gen)
