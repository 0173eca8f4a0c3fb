"""Monte Carlo samplers for the perpetuity, the maximum equation and sandwiched IFS.

Paths are split into fixed-size chunks; chunk i always uses the i-th child
of ``SeedSequence(seed)``, so output does not depend on the worker count.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, NonContractive, NotAB0Pair, SandwichViolated
from .tables import write_csv


@dataclass(frozen=True)
class SimConfig:
    sample_count: int
    seed: int = 0
    weight_floor: float = 1e-9
    max_steps: int = 10_000
    chunk_size: int = 1 << 16
    workers: int = 1

    def __post_init__(self):
        if self.sample_count < 1:
            raise ConfigError("sample_count must be positive")
        if not 0 < self.weight_floor < 1:
            raise ConfigError("weight_floor must lie in (0, 1)")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        if self.chunk_size < 1 or self.workers < 1:
            raise ConfigError("chunk_size and workers must be positive")

    def chunks(self):
        n_chunks = -(-self.sample_count // self.chunk_size)
        children = np.random.SeedSequence(self.seed).spawn(n_chunks)
        sizes = [self.chunk_size] * (n_chunks - 1) + [self.sample_count - self.chunk_size * (n_chunks - 1)]
        return list(zip(children, sizes))

    def hash(self):
        return config_hash(asdict(self))


def config_hash(obj):
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class SampleResult:
    samples: np.ndarray
    truncated: int = 0            # paths stopped by the weight floor with nonzero weight
    hit_max_steps: int = 0
    bias_bound: float = 0.0       # weight_floor * mean |X| on truncated paths (heuristic)
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return self.samples.size


def _run_chunks(cfg, work):
    jobs = cfg.chunks()
    if cfg.workers == 1:
        parts = [work(np.random.default_rng(ss), n) for ss, n in jobs]
    else:
        with ThreadPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(lambda job: work(np.random.default_rng(job[0]), job[1]), jobs))
    return parts


def _check_contractive(pair):
    if not pair.drift_ok():
        raise NonContractive("need E log A < 0 and E log+ |B| < inf")


def _forward(pair, cfg, combine):
    _check_contractive(pair)

    def work(rng, n):
        x = np.full(n, np.nan)
        w = np.ones(n)
        active = np.arange(n)
        steps = 0
        while active.size and steps < cfg.max_steps:
            a, b = pair.sample(rng, active.size)
            term = w[active] * b
            cur = x[active]
            x[active] = np.where(np.isnan(cur), term, combine(cur, term))
            w[active] *= a
            steps += 1
            active = active[w[active] >= cfg.weight_floor]
        truncated = int(np.count_nonzero((w > 0) & (w < cfg.weight_floor)))
        return x, truncated, int(active.size)

    parts = _run_chunks(cfg, work)
    x = np.concatenate([p[0] for p in parts])
    truncated = sum(p[1] for p in parts)
    capped = sum(p[2] for p in parts)
    bias = cfg.weight_floor * float(np.mean(np.abs(x))) if truncated or capped else 0.0
    return SampleResult(x, truncated, capped, bias)


def sample_perpetuity(pair, cfg):
    """X = sum_n A_1...A_{n-1} B_n, stopped once the running weight drops below the floor."""
    return _forward(pair, cfg, np.add)


def sample_max(pair, cfg):
    """X = sup_n A_1...A_{n-1} B_n with the same stopping rule."""
    return _forward(pair, cfg, np.maximum)


def sample_ab0_exact(pair, cfg):
    """X = A_1...A_{N-1} B_N with N geometric(P{A = 0}); no truncation."""
    if not pair.is_ab0:
        raise NotAB0Pair("B must vanish whenever A != 0")
    pi0 = pair.a_law.zero_atom
    if not pi0 > 0:
        raise NotAB0Pair("P{A = 0} must be positive")
    sampler = pair.sampler

    def work(rng, n):
        steps = rng.geometric(pi0, n) - 1
        total = int(steps.sum())
        k = sampler.sample_index_nonzero(rng, total)
        owner = np.repeat(np.arange(n), steps)
        s = np.bincount(owner, weights=k, minlength=n).astype(np.int64)
        b = pair.b_zero.sample(rng, n)
        return pair.a_law.lattice_values(s) * b

    return SampleResult(np.concatenate(_run_chunks(cfg, work)))


# iterated function systems ------------------------------------------------------

IFS_MAPS = {
    "hypot": lambda a, b, x: np.hypot(a * x, b),
    "affine": lambda a, b, x: a * x + b,
    "max": lambda a, b, x: np.maximum(a * x, b),
}


@dataclass
class IFSDescriptor:
    """Psi(theta, x) with theta = (A, B) drawn from ``pair``.

    Lower bound map A x v B, upper bound map A x + B' with B' = upper_b_factor * B.
    """

    map_name: str
    pair: object
    upper_b_factor: float = 1.0

    def __post_init__(self):
        if self.map_name not in IFS_MAPS:
            raise ConfigError(f"unknown IFS map {self.map_name!r}")

    def psi(self, a, b, x):
        return IFS_MAPS[self.map_name](a, b, x)

    def lower(self, a, b, x):
        return np.maximum(a * x, b)

    def upper(self, a, b, x):
        return a * x + self.upper_b_factor * b

    def validate(self, rng, n_theta=2000, x_grid=None):
        """Check lower <= Psi <= upper on sampled theta and a test grid of x."""
        if x_grid is None:
            x_grid = np.concatenate([[0.0], np.logspace(-3, 6, 40)])
        a, b = self.pair.sample(rng, n_theta)
        A, X = np.meshgrid(a, x_grid, indexing="ij")
        B, _ = np.meshgrid(b, x_grid, indexing="ij")
        val = self.psi(A, B, X)
        bad = (self.lower(A, B, X) > val) | (val > self.upper(A, B, X))
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise SandwichViolated("bound maps do not sandwich Psi", theta=(A[i, j], B[i, j]), x=X[i, j])


@dataclass
class IFSResult:
    samples: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    violations: int
    steps: int


def sample_ifs(desc, cfg, steps=200, strict=True):
    """Forward iteration of X_{n+1} = Psi(theta_{n+1}, X_n) with coupled bound chains.

    All three chains start at 0 and use the same theta draws.  Returns the end
    states and the number of (path, step) pairs where lower <= X <= upper failed.
    """
    _check_contractive(desc.pair)
    desc.validate(np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0].spawn(1)[0]))

    def work(rng, n):
        x = np.zeros(n)
        lo = np.zeros(n)
        hi = np.zeros(n)
        bad = 0
        first = None
        for _ in range(steps):
            a, b = desc.pair.sample(rng, n)
            x = desc.psi(a, b, x)
            lo = desc.lower(a, b, lo)
            hi = desc.upper(a, b, hi)
            viol = (lo > x) | (x > hi)
            if np.any(viol):
                bad += int(np.count_nonzero(viol))
                if first is None:
                    i = int(np.argmax(viol))
                    first = ((float(a[i]), float(b[i])), float(x[i]))
        return x, lo, hi, bad, first

    parts = _run_chunks(cfg, work)
    violations = sum(p[3] for p in parts)
    if violations and strict:
        theta, x = next(p[4] for p in parts if p[4] is not None)
        raise SandwichViolated(f"{violations} pathwise violations", theta=theta, x=x)
    return IFSResult(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                     np.concatenate([p[2] for p in parts]), violations, steps)


# statistics and persistence ------------------------------------------------------

def binomial_se(p, n):
    return math.sqrt(p * (1.0 - p) / n)


def ks_critical(n1, n2, level=0.01):
    """Asymptotic two-sample Kolmogorov-Smirnov critical value."""
    c = math.sqrt(-0.5 * math.log(level / 2.0))
    return c * math.sqrt((n1 + n2) / (n1 * n2))


def save_samples(path, samples, cfg=None, extra=None):
    """Little-endian float64 binary plus a JSON sidecar at ``path + '.json'``."""
    arr = np.asarray(samples, dtype="<f8")
    arr.tofile(path)
    meta = {"count": int(arr.size), "dtype": "<f8"}
    if cfg is not None:
        meta.update(seed=cfg.seed, config_hash=cfg.hash(), config=asdict(cfg))
    if extra:
        meta.update(extra)
    with open(str(path) + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return path


def load_samples(path):
    with open(str(path) + ".json") as fh:
        meta = json.load(fh)
    arr = np.fromfile(path, dtype="<f8")
    if arr.size != meta["count"]:
        raise ValueError("sample file does not match its sidecar count")
    return arr, meta


def write_ecdf(path, samples, x_grid):
    """ECDF, survival fraction and exceedance counts at the given points."""
    s = np.sort(np.asarray(samples, dtype=float))
    x = np.asarray(x_grid, dtype=float)
    below = np.searchsorted(s, x, side="right")
    return write_csv(path, ["x", "ecdf", "sf", "exceedances"],
                     [x, below / s.size, 1.0 - below / s.size, s.size - below])
