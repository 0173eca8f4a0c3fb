"""Scenario runner: ``arithrenewal run <config.json> [--seed N] [--out DIR]``.

A config is one JSON document ``{"scenario": name, "seed": int, "params": {...}}``.
Each run writes report.json and CSV tables (deterministic given config and
seed) plus manifest.json (config hash, versions, timestamp, assertion results).
Exit status: 0 all assertions passed, 2 some assertion failed, 1 error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import platform
import sys
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np

from . import implicit, oracles, renewal, simulate, tilt
from .errors import ArithRenewalError, ConfigError
from .lattice import ArithmeticLaw, power_law, subexp_diagnostic
from .pairs import JointABLaw, Pareto
from .tables import write_csv

NUM = {"type": "number"}
POS = {"type": "number", "exclusiveMinimum": 0}
INT = {"type": "integer"}
POS_INT = {"type": "integer", "minimum": 1}
PAIR_SPEC = {"oneOf": [
    {"type": "string", "enum": ["st_petersburg", "heavy_b"]},
    {"type": "object", "required": ["a_law", "b_given_a_zero"]},
]}
LAW_SPEC = {"type": "object", "required": ["span_h"],
            "properties": {"span_h": POS, "atoms": {"type": "array"}, "zero_atom": NUM,
                           "generator": {"type": "object"}}}
TARGET = {"type": "object", "required": ["knots", "right", "left"],
          "properties": {"knots": {"type": "array", "items": NUM, "minItems": 1},
                         "right": {"type": "array", "items": NUM}, "left": {"type": "array", "items": NUM},
                         "kappa": POS, "h": POS, "scale_c": POS}}


def _obj(props):
    return {"type": "object", "properties": props, "additionalProperties": False}


SCHEMAS = {
    "stpetersburg": _obj({"grid_points": POS_INT, "tol_q": POS, "mc_samples": POS_INT,
                          "mc_x": {"type": "array", "items": POS}, "se_bound": POS, "k_max": POS_INT}),
    "qset-roundtrip": _obj({"targets": {"type": "array", "items": TARGET},
                            "random_targets": {"type": "integer", "minimum": 0},
                            "random_knots": {"type": "integer", "minimum": 2},
                            "grid_points": POS_INT, "n_range": {"type": "array", "items": INT,
                                                                "minItems": 2, "maxItems": 2},
                            "tol": POS}),
    "constant-q": _obj({"p": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
                        "x": {"type": "array", "items": POS}, "tol": POS, "grid_points": POS_INT}),
    "blackwell": _obj({"law": LAW_SPEC, "n_range": {"type": "array", "items": INT, "minItems": 2, "maxItems": 2},
                       "tol": POS, "recursion_tol": POS}),
    "srt": _obj({"alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}, "span_h": POS,
                 "n_max": POS_INT, "n_check": {"type": "array", "items": INT, "minItems": 2, "maxItems": 2},
                 "band": {"type": "array", "items": NUM, "minItems": 2, "maxItems": 2},
                 "decade_edges": {"type": "array", "items": INT, "minItems": 2}}),
    "defective": _obj({"theta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                       "alpha": {"type": "number", "exclusiveMinimum": 0},
                       "span_h": POS, "n_max": POS_INT,
                       "n_check": {"type": "array", "items": INT, "minItems": 2, "maxItems": 2},
                       "band": {"type": "array", "items": NUM, "minItems": 2, "maxItems": 2},
                       "subexp_tol": POS}),
    "mc-perpetuity": _obj({"pair": PAIR_SPEC, "samples": POS_INT, "x": {"type": "array", "items": POS},
                           "se_bound": POS, "save_samples": {"type": "boolean"}, "workers": POS_INT}),
    "mc-max": _obj({"pair": PAIR_SPEC, "samples": POS_INT, "x": {"type": "array", "items": POS},
                    "se_bound": POS, "save_samples": {"type": "boolean"}, "workers": POS_INT}),
    "ifs-sandwich": _obj({"pair": PAIR_SPEC, "map": {"enum": ["hypot", "affine", "max"]},
                          "paths": POS_INT, "steps": POS_INT, "grid_points": POS_INT,
                          "n_range": {"type": "array", "items": INT, "minItems": 2, "maxItems": 2},
                          "min_count": POS_INT}),
    "conditions-check": _obj({"pair": PAIR_SPEC, "truncation": {"type": "array", "items": NUM,
                                                                "minItems": 2, "maxItems": 2},
                              "delta": POS, "expect": {"enum": ["converged", "divergent"]}}),
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["scenario"],
    "properties": {"scenario": {"enum": sorted(SCHEMAS)}, "seed": {"type": "integer", "minimum": 0},
                   "params": {"type": "object"}},
    "additionalProperties": False,
}


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
        jsonschema.validate(cfg.get("params", {}), SCHEMAS[cfg["scenario"]])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from None
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate_config(cfg)


# helpers --------------------------------------------------------------------------

class Run:
    """Collects assertions, report entries and written tables for one scenario."""

    def __init__(self, out_dir):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.assertions = []
        self.report = {}
        self.tables = []

    def check(self, name, value, bound, passed):
        self.assertions.append({"name": name, "value": _jsonable(value), "bound": _jsonable(bound),
                                "passed": bool(passed)})

    def table(self, name, header, columns):
        write_csv(self.out / name, header, columns)
        self.tables.append(name)

    @property
    def passed(self):
        return all(a["passed"] for a in self.assertions)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("+inf" if v > 0 else ("-inf" if v < 0 else "nan"))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def make_pair(spec):
    if spec == "st_petersburg":
        return oracles.st_petersburg_pair()
    if spec == "heavy_b":
        # St. Petersburg A with B | A = 0 Pareto(kappa / 2): E B^kappa = inf
        sp = oracles.st_petersburg_pair()
        return JointABLaw(sp.a_law, Pareto(0.5, 1.0), name="heavy_b")
    return JointABLaw.from_dict(spec)


def _pair_tail(pair):
    if pair.name == "st_petersburg":
        return oracles.st_petersburg_exact_tail()
    return oracles.ab0_tail(pair)


# scenarios ------------------------------------------------------------------------

def sc_stpetersburg(p, seed, run):
    pair = oracles.st_petersburg_pair()
    info = tilt.cramer_info(pair.a_law)
    run.report["cramer"] = info.to_dict()
    k_max = p.get("k_max", 40)
    ks = np.arange(1, k_max + 1)
    push = np.array([oracles.pushforward_pmf(pair, oracles.st_petersburg_pmf, int(k)) for k in ks])
    exact = oracles.st_petersburg_pmf(ks)
    run.table("pushforward.csv", ["k", "pmf", "pushforward"], [ks, exact, push])
    run.check("pushforward_max_abs_err", float(np.max(np.abs(push - exact))), 1e-14,
              np.max(np.abs(push - exact)) <= 1e-14)

    tail = oracles.st_petersburg_exact_tail()
    psi = implicit.PsiFunction(info.kappa, pair.a_law, tail)
    grid = implicit.jittered_grid(pair.span_h, p.get("grid_points", 64))
    q = implicit.q_from_psi(psi, info.mu, grid)
    q.to_csv(run.out / "q_from_psi.csv")
    run.tables.append("q_from_psi.csv")
    err = float(np.max(np.abs(q.q - oracles.st_petersburg_q(grid))))
    tol = p.get("tol_q", 1e-6)
    run.check("q_max_abs_err", err, tol, err <= tol)
    run.check("q_class_Q", q.check_class_q(), True, q.check_class_q())

    n = p.get("mc_samples", 100_000)
    xs = np.asarray(p.get("mc_x", [2, 3, 4, 6, 8]), dtype=float)
    res = simulate.sample_perpetuity(pair, simulate.SimConfig(n, seed))
    emp = np.array([np.mean(res.samples > x) for x in xs])
    ex = tail(xs)
    se = np.sqrt(ex * (1 - ex) / n)
    z = (emp - ex) / se
    run.table("mc_tail.csv", ["x", "exact_tail", "empirical_tail", "std_error", "z"], [xs, ex, emp, se, z])
    bound = p.get("se_bound", 3.0)
    run.check("mc_max_abs_z", float(np.max(np.abs(z))), bound, np.max(np.abs(z)) <= bound)
    run.report["mc"] = {"samples": n, "truncated": res.truncated, "bias_bound": res.bias_bound}


def _targets(p, seed):
    out = [oracles.QTarget.from_dict(t) for t in p.get("targets", [])]
    rng = np.random.default_rng(seed)
    for _ in range(p.get("random_targets", 0)):
        out.append(oracles.random_qtarget(rng, p.get("random_knots", 6)))
    return out


def sc_qset(p, seed, run):
    targets = _targets(p, seed)
    if not targets:
        raise ConfigError("qset-roundtrip needs targets or random_targets")
    lo, hi = p.get("n_range", [1, 8])
    tol = p.get("tol", 1e-9)
    ids, xs, tv, rv = [], [], [], []
    worst = 0.0
    built = []
    for i, tg in enumerate(targets):
        con = oracles.qset_construct(tg)
        grid = implicit.jittered_grid(tg.span_h, p.get("grid_points", 64))
        q, _ = implicit.q_from_tail(con.tail, tg.kappa, tg.span_h, grid, range(lo, hi + 1))
        want = tg(grid)
        worst = max(worst, float(np.max(np.abs(q.q - want))))
        run.check(f"target_{i}_class_Q", q.check_class_q(), True, q.check_class_q())
        ids += [i] * grid.size
        xs.append(grid)
        tv.append(want)
        rv.append(q.q)
        built.append({"p": con.p, "internal_scale": con.internal_scale, "b_scale": con.b_scale,
                      "target": tg.to_dict()})
    run.table("roundtrip.csv", ["target", "x", "target_q", "recovered_q", "abs_err"],
              [ids, np.concatenate(xs), np.concatenate(tv), np.concatenate(rv),
               np.abs(np.concatenate(rv) - np.concatenate(tv))])
    run.report["constructions"] = built
    run.check("roundtrip_max_abs_err", worst, tol, worst <= tol)


def sc_constant_q(p, seed, run):
    pp = p.get("p", 0.25)
    c = 2.0 - 1.0 / (1.0 - pp)
    con = oracles.qset_construct(oracles.QTarget.constant(c))
    xs = np.asarray(p.get("x", [2.5, 3.0, 4.0, 7.0, 100.0]), dtype=float)
    got = con.tail(xs)
    formula = oracles.constant_q_tail(pp, xs)
    run.table("constant_q.csv", ["x", "tail", "formula"], [xs, got, formula])
    tol = p.get("tol", 1e-14)
    err = float(np.max(np.abs(got - formula)))
    run.check("tail_vs_formula", err, tol, err <= tol)
    run.report.update(p=con.p, c=c, tail_at_4=float(con.tail(4.0)))
    pair = con.pair
    info = tilt.cramer_info(pair.a_law)
    psi = implicit.PsiFunction(1.0, pair.a_law, con.tail)
    grid = implicit.jittered_grid(pair.span_h, p.get("grid_points", 16))
    q = implicit.q_from_psi(psi, info.mu, grid)
    q.to_csv(run.out / "q_from_psi.csv")
    run.tables.append("q_from_psi.csv")
    e2 = float(np.max(np.abs(q.q - c)))
    run.check("q_from_psi_constant", e2, 1e-9, e2 <= 1e-9)


def sc_blackwell(p, seed, run):
    law = ArithmeticLaw.from_dict(p.get("law", {"span_h": 1.0, "atoms": [[1, 0.5], [2, 0.5]]}))
    lo, hi = p.get("n_range", [150, 200])
    mu = law.span_h * law.mean_index()
    u = renewal.renewal_sequence(law, 1.0, (min(lo, 0), hi))
    rep = renewal.blackwell_check(u, mu)
    rep.to_csv(run.out / "convergence.csv")
    run.tables.append("convergence.csv")
    dev = rep.max_deviation(lo, hi)
    tol = p.get("tol", 1e-4)
    run.check("blackwell_max_dev", dev, tol, dev <= tol)
    run.report.update(mu=mu, window=[u.n_lo, u.n_hi], trunc_error=float(u.trunc_error.max()),
                      terms=u.terms)
    if law.min_index >= 0:
        ref = renewal.forward_recursion(law, 1.0, hi)
        diff = float(np.max(np.abs(u.at(np.arange(0, hi + 1)) - ref)))
        rtol = p.get("recursion_tol", 1e-10)
        run.check("recursion_cross_check", diff, rtol, diff <= rtol)


def sc_srt(p, seed, run):
    alpha = p.get("alpha", 0.7)
    h = p.get("span_h", 1.0)
    f = power_law(h, alpha)
    n_max = p.get("n_max", 10_000)
    u = renewal.renewal_sequence(f, 1.0, n_max)
    rep = renewal.srt_check(u, lambda x: tilt.truncated_mean_m(f, x), alpha)
    rep.to_csv(run.out / "convergence.csv")
    run.tables.append("convergence.csv")
    a, b = p.get("n_check", [5000, 10_000])
    lo_b, hi_b = p.get("band", [0.9, 1.1])
    sel = rep.select(a, b)
    run.check("srt_band", [float(sel.min()), float(sel.max())], [lo_b, hi_b],
              lo_b <= sel.min() and sel.max() <= hi_b)
    avgs = rep.decade_averages(p.get("decade_edges", [10, 100, 1000, 10_000]))
    devs = np.abs(np.asarray(avgs) - 1.0)
    run.check("decade_deviation_decreasing", devs, "monotone", bool(np.all(np.diff(devs) < 0)))
    run.report.update(C_alpha=renewal.srt_constant(alpha), decade_averages=list(avgs),
                      trunc_error=float(u.trunc_error.max()), terms=u.terms)


def sc_defective(p, seed, run):
    theta = p.get("theta", 0.5)
    alpha = p.get("alpha", 1.5)
    h = p.get("span_h", 1.0)
    f = power_law(h, alpha)
    n_max = p.get("n_max", 10_000)
    u = renewal.renewal_sequence(f, theta, n_max)
    rep = renewal.defective_check(u, f, theta, check_subexp=False)
    rep.to_csv(run.out / "convergence.csv")
    run.tables.append("convergence.csv")
    a, b = p.get("n_check", [5000, 10_000])
    lo_b, hi_b = p.get("band", [1.8, 2.2])
    limit = theta / (1 - theta) ** 2
    sel = rep.select(a, b) * limit
    run.check("u_over_p_band", [float(sel.min()), float(sel.max())], [lo_b, hi_b],
              lo_b <= sel.min() and sel.max() <= hi_b)
    sub = subexp_diagnostic(f, n_max)
    dev = sub.max_deviation()
    stol = p.get("subexp_tol", 0.02)
    run.check("subexp_ratios", list(dev), stol, max(dev) <= stol)
    run.report.update(limit=limit, trunc_error=float(u.trunc_error.max()), terms=u.terms)


def _mc(p, seed, run, sampler):
    pair = make_pair(p.get("pair", "st_petersburg"))
    n = p.get("samples", 100_000)
    cfg = simulate.SimConfig(n, seed, workers=p.get("workers", 1))
    res = sampler(pair, cfg)
    xs = np.asarray(p.get("x", [2, 3, 4, 6, 8]), dtype=float)
    simulate.write_ecdf(run.out / "ecdf.csv", res.samples, xs)
    run.tables.append("ecdf.csv")
    if p.get("save_samples", False):
        simulate.save_samples(run.out / "samples.f64", res.samples, cfg)
    run.report.update(samples=n, truncated=res.truncated, hit_max_steps=res.hit_max_steps,
                      bias_bound=res.bias_bound, config_hash=cfg.hash())
    tail = _pair_tail(pair)
    ex = tail(xs)
    emp = np.array([np.mean(res.samples > x) for x in xs])
    z = (emp - ex) / np.sqrt(ex * (1 - ex) / n)
    run.table("tail_check.csv", ["x", "exact_tail", "empirical_tail", "z"], [xs, ex, emp, z])
    bound = p.get("se_bound", 3.0)
    run.check("mc_max_abs_z", float(np.max(np.abs(z))), bound, np.max(np.abs(z)) <= bound)


def sc_mc_perpetuity(p, seed, run):
    _mc(p, seed, run, simulate.sample_perpetuity)


def sc_mc_max(p, seed, run):
    _mc(p, seed, run, simulate.sample_max)


def sc_ifs(p, seed, run):
    pair = make_pair(p.get("pair", "st_petersburg"))
    desc = simulate.IFSDescriptor(p.get("map", "hypot"), pair)
    n = p.get("paths", 100_000)
    res = simulate.sample_ifs(desc, simulate.SimConfig(n, seed), steps=p.get("steps", 200), strict=False)
    run.check("sandwich_violations", res.violations, 0, res.violations == 0)
    info = tilt.cramer_info(pair.a_law)
    h = pair.span_h
    grid = implicit.jittered_grid(h, p.get("grid_points", 16))
    lo, hi = p.get("n_range", [0, 3])
    mc = p.get("min_count", 100)
    prof = {}
    for key, arr in (("lower", res.lower), ("ifs", res.samples), ("upper", res.upper)):
        q, tab = implicit.q_from_tail(implicit.EmpiricalTail(arr), info.kappa, h, grid,
                                      range(lo, hi + 1), min_count=mc, allow_sparse=True)
        prof[key] = tab
    vals = {k: t.values for k, t in prof.items()}
    ok_mask = ~(np.isnan(vals["lower"]) | np.isnan(vals["ifs"]) | np.isnan(vals["upper"]))
    between = (vals["lower"] <= vals["ifs"]) & (vals["ifs"] <= vals["upper"])
    bad = int(np.count_nonzero(ok_mask & ~between))
    nn, xx = np.meshgrid(prof["ifs"].n, grid, indexing="ij")
    run.table("profiles.csv", ["n", "x", "lower", "ifs", "upper"],
              [nn.ravel(), xx.ravel(), vals["lower"].ravel(), vals["ifs"].ravel(), vals["upper"].ravel()])
    run.check("profile_between_bounds", bad, 0, bad == 0)
    run.report.update(paths=n, steps=res.steps, cells_compared=int(ok_mask.sum()))


def sc_conditions(p, seed, run):
    pair = make_pair(p.get("pair", "st_petersburg"))
    info = tilt.cramer_info(pair.a_law)
    psi = implicit.PsiFunction(info.kappa, pair.a_law, _pair_tail(pair))
    trunc = tuple(p.get("truncation", [-40.0, 40.0]))
    reports = [implicit.check_conditions(psi, "Integral", trunc),
               implicit.check_conditions(psi, "Sum", trunc),
               implicit.check_conditions(psi, "Delta", trunc, delta=p.get("delta", 0.1))]
    run.table("conditions.csv", ["mode", "value", "tail_contribution", "converged"],
              [[r.mode for r in reports], [r.value for r in reports],
               [r.tail_contribution for r in reports], [r.converged for r in reports]])
    expect = p.get("expect", "converged")
    integral = reports[0]
    want = expect == "converged"
    run.check("integral_converged", integral.converged, want, integral.converged == want)


SCENARIOS = {
    "stpetersburg": sc_stpetersburg,
    "qset-roundtrip": sc_qset,
    "constant-q": sc_constant_q,
    "blackwell": sc_blackwell,
    "srt": sc_srt,
    "defective": sc_defective,
    "mc-perpetuity": sc_mc_perpetuity,
    "mc-max": sc_mc_max,
    "ifs-sandwich": sc_ifs,
    "conditions-check": sc_conditions,
}


def _versions():
    out = {"python": platform.python_version()}
    for name in ("artifact", "numpy", "scipy", "mpmath", "jsonschema"):
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = "unknown"
    return out


def run_scenario(cfg, out_dir=None, seed=None):
    """Run a validated config; returns the Run record."""
    validate_config(cfg)
    name = cfg["scenario"]
    seed = cfg.get("seed", 0) if seed is None else int(seed)
    out_dir = Path(out_dir or Path("out") / name)
    run = Run(out_dir)
    try:
        SCENARIOS[name](cfg.get("params", {}), seed, run)
    except ArithRenewalError as exc:
        raise type(exc)(f"scenario {name}: {exc}") from exc
    effective = dict(cfg, seed=seed)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(_jsonable({"scenario": name, "seed": seed, "report": run.report,
                             "assertions": run.assertions}), fh, indent=2, sort_keys=True)
    manifest = {"scenario": name, "seed": seed, "config": effective,
                "config_hash": simulate.config_hash(effective), "versions": _versions(),
                "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                "tables": run.tables + ["report.json"], "passed": run.passed}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
    return run


def main(argv=None):
    ap = argparse.ArgumentParser(prog="arithrenewal", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None)
    v = sub.add_parser("validate", help="validate a scenario config")
    v.add_argument("config")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok ({cfg['scenario']})")
            return 0
        run = run_scenario(cfg, args.out, args.seed)
    except (ArithRenewalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for a in run.assertions:
        print(f"{'PASS' if a['passed'] else 'FAIL'} {a['name']}: {a['value']} (bound {a['bound']})")
    return 0 if run.passed else 2


if __name__ == "__main__":
    sys.exit(main())
