import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arithrenewal import oracles
from arithrenewal.errors import InvalidQ
from arithrenewal.implicit import jittered_grid, q_from_tail
from arithrenewal.oracles import QTarget
from arithrenewal.tilt import cramer_info

LOG2 = math.log(2.0)


class TestStPetersburg:
    def test_pair_atoms(self, stp_pair):
        assert stp_pair.prob(None, 2.0) == pytest.approx(0.25, rel=1e-15)
        assert stp_pair.prob(0, 0.0) == pytest.approx(0.5, rel=1e-15)
        assert stp_pair.a_law.zero_atom == pytest.approx(1 / 3)
        assert stp_pair.a_law.total_mass() == pytest.approx(1.0, abs=1e-15)

    def test_kappa_mean(self, stp_pair):
        assert stp_pair.a_law.mellin(1.0) == pytest.approx(1.0, abs=1e-15)
        assert cramer_info(stp_pair.a_law).kappa == pytest.approx(1.0, rel=1e-11)

    def test_tail_values(self):
        assert np.array_equal(oracles.st_petersburg_tail([1.0, 2.0, 3.0, 4.0]), [1.0, 0.5, 0.5, 0.25])

    def test_q(self):
        x = np.geomspace(2, 1e9, 500)
        assert np.allclose(x * oracles.st_petersburg_tail(x), oracles.st_petersburg_q(x), rtol=1e-15)

    def test_pmf_total(self):
        assert math.fsum(oracles.st_petersburg_pmf(np.arange(1, 80))) == pytest.approx(1.0, abs=1e-15)

    def test_pmf_from_tail(self):
        k = np.arange(1, 30)
        x = np.ldexp(1.0, k)
        diff = oracles.st_petersburg_tail(x * 0.999) - oracles.st_petersburg_tail(x)
        assert np.array_equal(diff, oracles.st_petersburg_pmf(k))

    def test_pushforward(self, stp_pair):
        for k in range(1, 41):
            got = oracles.pushforward_pmf(stp_pair, oracles.st_petersburg_pmf, k)
            assert abs(got - 2.0**-k) <= 1e-14


class TestSn:
    def test_values(self):
        assert oracles.sn_pmf(0.25, 0) == pytest.approx(2 / 3, rel=1e-15)
        assert oracles.sn_pmf(0.25, 2) == pytest.approx(1 / 12, rel=1e-15)
        assert oracles.sn_pmf(0.25, np.arange(1, 10)) == pytest.approx((1 / 3) * 2.0 ** -np.arange(1, 10))

    def test_sum(self):
        assert math.fsum(oracles.sn_pmf(0.3, np.arange(0, 200))) == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("p", [0.05, 0.25, 0.45])
    def test_bruteforce(self, p):
        k = np.arange(0, 25)
        brute = oracles.sn_pmf_bruteforce(p, 24, n_max=1000)
        assert np.max(np.abs(brute - oracles.sn_pmf(p, k))) <= 1e-12

    def test_n_pmf(self):
        # P{N = k} = (p/(1-p)) ((1-2p)/(1-p))^{k-1}
        p = 0.25
        pi0 = p / (1 - p)
        assert pi0 == pytest.approx(1 / 3)
        assert pi0 * (1 - pi0) ** 2 == pytest.approx((1 / 3) * (2 / 3) ** 2)

    def test_range(self):
        with pytest.raises(ValueError):
            oracles.sn_pmf(0.6, 1)


class TestConstruction:
    def test_constant_example(self):
        p = 0.25
        H = lambda y: 2.0 - 2.0 / y
        assert oracles.qset_exact_tail(p, H, 4.0) == pytest.approx(1 / 6, rel=1e-15)
        x = np.array([2.5, 3.0, 17.0, 1e5])
        assert np.allclose(oracles.qset_exact_tail(p, H, x), oracles.constant_q_tail(p, x), rtol=1e-14)

    def test_constant_construct(self):
        p = 0.25
        con = oracles.qset_construct(QTarget.constant(2 - 1 / (1 - p)))
        assert con.p == pytest.approx(p, rel=1e-14)
        assert float(con.tail(4.0)) == pytest.approx(1 / 6, rel=1e-14)
        assert np.allclose(con.H(np.array([1.0, 1.5, 1.9])), 2 - 2 / np.array([1.0, 1.5, 1.9]), atol=1e-14)

    def test_log_periodic(self):
        con = oracles.qset_construct(QTarget((1.0, 1.5), (1.0, 1.2), (1.1, 1.3)))
        x = np.geomspace(5, 1e6, 300)
        assert np.allclose(con.tail(2 * x) * 2 * x, con.tail(x) * x, rtol=1e-13)

    def test_seam(self):
        con = oracles.qset_construct(QTarget((1.0, 1.5), (1.0, 1.2), (1.1, 1.3)))
        x = con.b_scale * 2.0 ** np.arange(2, 10)
        assert np.allclose(x * con.tail(x), 1.0, rtol=1e-14)

    def test_decomposition(self):
        # T(x) = P{S >= n+1} + P{S = n} (1 - H(z)) for x = 2^n z
        p = 0.2
        H = lambda y: np.clip(2.0 - 2.0 / y, 0, 1)
        for n in range(0, 6):
            z = 1.37
            s_ge = 1 - math.fsum(oracles.sn_pmf(p, np.arange(0, n + 1)))
            want = s_ge + oracles.sn_pmf(p, n) * (1 - H(z))
            assert oracles.qset_exact_tail(p, H, z * 2**n) == pytest.approx(want, rel=1e-12)

    def test_assumptions(self):
        con = oracles.qset_construct(QTarget((1.0, 1.5), (1.0, 1.2), (1.1, 1.3)))
        a = con.pair.a_law
        assert a.mellin(1.0) == pytest.approx(1.0, abs=1e-14)
        assert math.isfinite(a.mellin_log(1.0))

    def test_ab0_tail_matches(self):
        con = oracles.qset_construct(QTarget((1.0, 1.5), (1.0, 1.2), (1.1, 1.3)))
        x = np.geomspace(1.1, 1e4, 60)
        assert np.allclose(oracles.ab0_tail(con.pair)(x), con.tail(x), atol=1e-15)

    def test_stp_shape(self):
        # q(y) = y on [1, 2) with q(2-) = 2
        con = oracles.qset_construct(QTarget((1.0,), (1.0,), (2.0,)))
        grid = jittered_grid(LOG2, 32)
        q, _ = q_from_tail(con.tail, 1.0, LOG2, grid, range(3, 6))
        assert np.allclose(q.q, grid, rtol=1e-12)
        assert con.internal_scale == 2

    def test_invalid(self):
        with pytest.raises(InvalidQ):
            QTarget((1.0,), (1.0,), (0.5,))
        with pytest.raises(InvalidQ):
            QTarget((1.0, 1.5), (1.0, 0.5), (1.0, 1.8))   # q(y)/y increases on the second piece
        with pytest.raises(InvalidQ):
            QTarget((1.0, 1.5), (1.0, 1.4), (1.1, 1.3))   # upward jump
        with pytest.raises(InvalidQ):
            QTarget((1.0,), (-1.0,), (1.0,))

    def test_dict_roundtrip(self):
        t = QTarget((1.0, 1.5), (1.0, 1.2), (1.1, 1.3), scale_c=2.5)
        assert QTarget.from_dict(t.to_dict()) == t

    def test_general_kappa_h(self):
        t = QTarget((1.0, 1.8), (1.0, 1.2), (1.0, 1.3), kappa=1.5, span_h=1.0)
        con = oracles.qset_construct(t)
        grid = jittered_grid(1.0, 24)
        q, _ = q_from_tail(con.tail, 1.5, 1.0, grid, range(4, 8))
        assert np.allclose(q.q, t(grid), rtol=1e-9)
        assert cramer_info(con.pair.a_law).kappa == pytest.approx(1.5, rel=1e-10)


class TestScaling:
    @pytest.mark.parametrize("c", [0.3, 2.0, 7.5])
    def test_covariance(self, c):
        base = QTarget((1.0, 1.5), (1.0, 1.2), (1.1, 1.3))
        scaled = QTarget(base.knots, base.right, base.left, scale_c=c)
        t1 = oracles.qset_construct(base).tail
        tc = oracles.qset_construct(scaled).tail
        x = np.geomspace(50 * max(c, 1), 1e7, 200)
        assert np.allclose(tc(x), t1(x / c), rtol=1e-10, atol=0)
        assert np.allclose(x * tc(x), c * base(x / c), rtol=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_roundtrip(seed):
    t = oracles.random_qtarget(np.random.default_rng(seed))
    con = oracles.qset_construct(t)
    grid = jittered_grid(LOG2, 32)
    q, table = q_from_tail(con.tail, 1.0, LOG2, grid, range(2, 6))
    assert np.max(np.abs(q.q - t(grid))) <= 1e-9
    assert q.check_class_q()
    assert np.nanmax(table.stabilization()) <= 1e-9


def test_left_tail_variant():
    from arithrenewal.simulate import SimConfig, binomial_se, sample_ab0_exact, sample_perpetuity
    t = QTarget((1.0, 1.5), (1.0, 1.2), (1.1, 1.3))
    left = oracles.qset_construct_left(t)
    n = 100_000
    x = sample_perpetuity(left.pair, SimConfig(n, seed=12)).samples
    assert np.all(x < 0)
    for v in [2.5, 4.0, 9.0]:
        want = float(left.left_tail(v))
        assert abs(np.mean(x < -v) - want) <= 3.5 * binomial_se(want, n)
    y = sample_ab0_exact(left.pair, SimConfig(1000, seed=1)).samples
    assert np.all(y < 0)
    assert left.pair.b_zero.sf(np.array([-1e9, 0.0])).tolist() == [1.0, 0.0]
