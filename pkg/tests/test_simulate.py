import math

import numpy as np
import pytest
from scipy import stats

from arithrenewal import oracles
from arithrenewal.errors import ConfigError, NonContractive, NotAB0Pair, SandwichViolated
from arithrenewal.lattice import ArithmeticLaw
from arithrenewal.pairs import JointABLaw, Pareto, PointMass, PowerGeometric
from arithrenewal.simulate import (
    IFSDescriptor,
    SimConfig,
    binomial_se,
    ks_critical,
    load_samples,
    sample_ab0_exact,
    sample_ifs,
    sample_max,
    sample_perpetuity,
    save_samples,
    write_ecdf,
)

LOG2 = math.log(2.0)


def const_pair(a, b):
    law = ArithmeticLaw.point(abs(math.log(a)), -1)
    return JointABLaw(law, PointMass(b), PointMass(b))


def zero_pair(b_law):
    law = ArithmeticLaw(LOG2, (), 0, zero_atom=1.0, check_span=False)
    return JointABLaw(law, b_law)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(sample_count=0), dict(sample_count=5, weight_floor=1.0),
                                    dict(sample_count=5, max_steps=0), dict(sample_count=5, workers=0)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            SimConfig(**kw)

    def test_chunks(self):
        cfg = SimConfig(10, chunk_size=4)
        assert [n for _, n in cfg.chunks()] == [4, 4, 2]

    def test_hash_stable(self):
        assert SimConfig(10, 3).hash() == SimConfig(10, 3).hash()
        assert SimConfig(10, 3).hash() != SimConfig(10, 4).hash()


class TestPerpetuity:
    def test_constant(self):
        res = sample_perpetuity(const_pair(0.5, 1.0), SimConfig(100, weight_floor=1e-9))
        assert np.all(np.abs(res.samples - 2.0) <= 1e-9 * 2.0)
        assert res.truncated == 100

    def test_a_zero(self):
        res = sample_perpetuity(zero_pair(PowerGeometric(2.0, 0.25, 1)), SimConfig(1000, seed=5))
        assert np.all(np.log2(res.samples) == np.round(np.log2(res.samples)))
        assert res.truncated == 0

    def test_determinism(self, stp_pair):
        a = sample_perpetuity(stp_pair, SimConfig(5000, seed=11, chunk_size=1000)).samples
        b = sample_perpetuity(stp_pair, SimConfig(5000, seed=11, chunk_size=1000, workers=3)).samples
        assert np.array_equal(a, b)

    def test_noncontractive(self):
        law = ArithmeticLaw.from_atoms(1.0, {1: 0.6, -1: 0.4})
        with pytest.raises(NonContractive):
            sample_perpetuity(JointABLaw(law, PointMass(1.0), PointMass(1.0)), SimConfig(10))

    def test_stp_tail(self, stp_pair):
        n = 200_000
        res = sample_perpetuity(stp_pair, SimConfig(n, seed=3))
        for x in [2.0, 3.0, 4.0]:
            t = oracles.st_petersburg_tail(x)
            assert abs(np.mean(res.samples > x) - t) <= 3 * binomial_se(t, n)


class TestMax:
    def test_constant(self):
        res = sample_max(const_pair(0.5, 1.0), SimConfig(50))
        assert np.all(res.samples == 1.0)

    def test_matches_perpetuity_for_ab0(self, stp_pair):
        n = 100_000
        a = sample_perpetuity(stp_pair, SimConfig(n, seed=1)).samples
        b = sample_max(stp_pair, SimConfig(n, seed=2)).samples
        assert stats.ks_2samp(a, b).statistic < ks_critical(n, n)


class TestAB0:
    def test_not_ab0(self):
        with pytest.raises(NotAB0Pair):
            sample_ab0_exact(const_pair(0.5, 1.0), SimConfig(10))

    def test_qset_n_law(self):
        # N geometric with success 1/3 at p = 1/4; S_{N-1} pmf 2/3, (1/3) 2^-k
        con = oracles.qset_construct(oracles.QTarget.constant(2 - 1 / 0.75))
        n = 200_000
        x = sample_ab0_exact(con.pair, SimConfig(n, seed=9)).samples
        s = np.floor(np.log2(x / con.b_scale) + 1e-12)
        for k in range(0, 5):
            pk = oracles.sn_pmf(0.25, k)
            assert abs(np.mean(s == k) - pk) <= 3.5 * binomial_se(pk, n)

    def test_qset_tail(self):
        con = oracles.qset_construct(oracles.QTarget((1.0, 1.5), (1.0, 1.2), (1.1, 1.3)))
        n = 200_000
        x = sample_ab0_exact(con.pair, SimConfig(n, seed=4)).samples
        for v in [2.5, 4.0, 9.0, 20.0]:
            t = float(con.tail(v))
            assert abs(np.mean(x > v) - t) <= 3.5 * binomial_se(t, n)


class TestIFS:
    def test_affine_equals_perpetuity(self, stp_pair):
        res = sample_ifs(IFSDescriptor("affine", stp_pair), SimConfig(1000, seed=2), steps=100)
        assert np.array_equal(res.samples, res.upper)

    def test_max_equals_lower(self, stp_pair):
        res = sample_ifs(IFSDescriptor("max", stp_pair), SimConfig(1000, seed=2), steps=100)
        assert np.array_equal(res.samples, res.lower)

    def test_hypot_sandwich(self, stp_pair):
        res = sample_ifs(IFSDescriptor("hypot", stp_pair), SimConfig(20_000, seed=2), steps=100)
        assert res.violations == 0
        assert np.all(res.lower <= res.samples) and np.all(res.samples <= res.upper)

    def test_bad_bounds(self, stp_pair):
        desc = IFSDescriptor("affine", stp_pair, upper_b_factor=0.5)
        with pytest.raises(SandwichViolated) as exc:
            desc.validate(np.random.default_rng(0))
        assert exc.value.theta is not None

    def test_unknown_map(self, stp_pair):
        with pytest.raises(ConfigError):
            IFSDescriptor("sine", stp_pair)


def test_heavy_b_contractive():
    pair = JointABLaw(oracles.st_petersburg_pair().a_law, Pareto(0.5))
    assert pair.drift_ok()


def test_ks_critical():
    # c(0.01) = 1.6276
    assert ks_critical(1, 10**12, 0.01) == pytest.approx(1.6276, abs=1e-4)


def test_save_load(tmp_path, rng):
    x = rng.standard_cauchy(1000)
    cfg = SimConfig(1000, seed=7)
    path = save_samples(tmp_path / "s.f64", x, cfg)
    back, meta = load_samples(path)
    assert np.array_equal(back, x)
    assert meta["seed"] == 7 and meta["count"] == 1000 and meta["config_hash"] == cfg.hash()
    assert (tmp_path / "s.f64").stat().st_size == 8000


def test_ecdf(tmp_path):
    write_ecdf(tmp_path / "e.csv", [1.0, 2.0, 3.0, 4.0], [2.0, 3.5])
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines == ["x,ecdf,sf,exceedances", "2.0,0.5,0.5,2", "3.5,0.75,0.25,1"]
