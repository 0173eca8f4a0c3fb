import math

import numpy as np
import pytest

from arithrenewal.errors import DecayViolation, NonconvergentU, WrongRegime, ZeroAtomPresent
from arithrenewal.lattice import ArithmeticLaw, power_law
from arithrenewal.renewal import (
    blackwell_check,
    defective_check,
    forward_recursion,
    key_renewal_eval,
    key_renewal_limit,
    renewal_sequence,
    srt_constant,
)

LOG2 = math.log(2.0)


def test_point_mass():
    u = renewal_sequence(ArithmeticLaw.point(LOG2), 1.0, (-5, 50))
    assert np.all(u.at(np.arange(0, 51)) == 1.0)
    assert np.all(u.at(np.arange(-5, 0)) == 0.0)


def test_two_step_recursion():
    f = ArithmeticLaw.from_atoms(1.0, {1: 0.5, 2: 0.5})
    u = renewal_sequence(f, 1.0, 300)
    assert np.allclose(u.u[:3], [1.0, 0.5, 0.75], atol=1e-14)
    assert np.max(np.abs(u.u - forward_recursion(f, 1.0, 300))) <= 1e-10
    assert u.u[-1] == pytest.approx(2 / 3, abs=1e-10)


def test_defective_point():
    u = renewal_sequence(ArithmeticLaw.point(1.0), 0.5, 60)
    assert np.allclose(u.u, 0.5 ** np.arange(61), rtol=1e-13)


def test_nonnegative_and_u0(stp_pair):
    f = ArithmeticLaw.from_atoms(1.0, {-1: 1 / 3, 1: 2 / 3})
    u = renewal_sequence(f, 1.0, 100)
    assert np.all(u.u >= 0)
    assert u.at(0) >= 1.0


def test_window_consistency():
    f = ArithmeticLaw.from_atoms(1.0, {-1: 1 / 3, 1: 2 / 3})
    wide = renewal_sequence(f, 1.0, (-30, 200))
    narrow = renewal_sequence(f, 1.0, (0, 80))
    diff = np.abs(wide.restrict(0, 80).u - narrow.u)
    assert np.all(diff <= wide.restrict(0, 80).trunc_error + narrow.trunc_error + 1e-15)


def test_defective_total_mass():
    f = power_law(1.0, 1.5)
    u = renewal_sequence(f, 0.5, 4000)
    # mass beyond the window is bounded by the tail of U
    assert u.total_mass() == pytest.approx(2.0, abs=2e-3)
    assert u.total_mass() <= 2.0 + 1e-12


def test_forward_recursion_with_zero_atom():
    f = ArithmeticLaw.from_atoms(1.0, {0: 0.25, 1: 0.75})
    u = forward_recursion(f, 0.5, 40)
    # generating function 1 / (1 - theta F(s))
    expected = renewal_sequence(ArithmeticLaw.point(1.0), 0.375 / 0.875, 40).u / 0.875
    assert np.allclose(u, expected, rtol=1e-12)


def test_errors():
    with pytest.raises(NonconvergentU):
        renewal_sequence(ArithmeticLaw.from_atoms(1.0, {-1: 0.6, 1: 0.4}), 1.0, 10)
    with pytest.raises(ZeroAtomPresent):
        renewal_sequence(ArithmeticLaw.from_atoms(1.0, {1: 0.5}, zero_atom=0.5), 1.0, 10)


class TestBlackwell:
    def test_point(self):
        rep = blackwell_check(renewal_sequence(ArithmeticLaw.point(LOG2), 1.0, 50), LOG2)
        assert np.all(rep.ratio == 1.0)

    def test_aperiodic(self):
        f = ArithmeticLaw.from_atoms(1.0, {1: 0.5, 2: 0.5})
        rep = blackwell_check(renewal_sequence(f, 1.0, 200), 1.5)
        assert rep.max_deviation(150, 200) <= 1e-12

    def test_two_sided(self):
        f = ArithmeticLaw.from_atoms(LOG2, {-1: 1 / 3, 1: 2 / 3})
        mu = LOG2 / 3
        rep = blackwell_check(renewal_sequence(f, 1.0, 200), mu)
        assert rep.max_deviation(150, 200) <= 1e-4

    def test_regime(self):
        u = renewal_sequence(ArithmeticLaw.point(1.0), 0.5, 10)
        with pytest.raises(WrongRegime):
            blackwell_check(u, 1.0)

    def test_csv(self, tmp_path):
        rep = blackwell_check(renewal_sequence(ArithmeticLaw.point(1.0), 1.0, 5), 1.0)
        rep.to_csv(tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "n,u_n,normalizer,ratio,trunc_error"
        assert len(lines) == 7


def test_srt_constant():
    assert srt_constant(0.5) == pytest.approx(2 / math.pi, rel=1e-15)
    assert srt_constant(1) == 1.0


def test_defective_small_theta():
    f = power_law(1.0, 1.5)
    theta = 1e-3
    u = renewal_sequence(f, theta, 200)
    ratio = u.u[50:] / f.pmf(np.arange(50, 201))
    assert np.allclose(ratio, theta, rtol=5e-3)


def test_defective_third():
    f = power_law(1.0, 1.5)
    u = renewal_sequence(f, 1 / 3, 10_000)
    rep = defective_check(u, f, 1 / 3)
    assert rep.max_deviation(9000, 10_000) <= 0.1


def test_defective_needs_theta():
    u = renewal_sequence(ArithmeticLaw.point(1.0), 1.0, 5)
    with pytest.raises(WrongRegime):
        defective_check(u, ArithmeticLaw.point(1.0), 1.0)


class TestKeyRenewal:
    def test_indicator(self):
        f = ArithmeticLaw.from_atoms(1.0, {1: 0.5, 2: 0.5})
        u = renewal_sequence(f, 1.0, 400)
        z = lambda y: (np.abs(y - 0.25) < 1e-9).astype(float)
        val = key_renewal_eval(z, u, 0.25, 300)
        assert val.value == pytest.approx(key_renewal_limit(z, 0.25, 1.0, "finite", mu=1.5), abs=1e-10)

    def test_geometric(self):
        u = renewal_sequence(ArithmeticLaw.point(1.0), 1.0, 200)
        z = lambda y: np.where(y >= 0, np.exp(-np.abs(y)), 0.0)
        val = key_renewal_eval(z, u, 0.0, 100, extra=200)
        exact = sum(math.exp(-(100 - j)) for j in range(0, 101))
        assert val.value == pytest.approx(exact, rel=1e-13)
        limit = key_renewal_limit(z, 0.0, 1.0, "finite", mu=1.0)
        assert limit == pytest.approx(math.e / (math.e - 1), rel=1e-12)
        assert val.value <= limit

    def test_decay_violation(self):
        u = renewal_sequence(ArithmeticLaw.point(1.0), 1.0, 50)
        with pytest.raises(DecayViolation):
            key_renewal_eval(lambda y: np.ones_like(y), u, 0.0, 20)

    def test_defective_limit(self):
        f = power_law(1.0, 1.5)
        u = renewal_sequence(f, 0.5, 5000)
        z = lambda y: np.where(np.abs(y) < 0.5, 1.0, 0.0)
        n = 4000
        val = key_renewal_eval(z, u, 0.0, n, decay="defective", p_fn=f.pmf)
        pred = key_renewal_limit(z, 0.0, 1.0, "defective", theta=0.5, p_n=f.pmf([n])[0])
        assert val.value / pred == pytest.approx(1.0, abs=0.05)
