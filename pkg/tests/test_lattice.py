import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arithrenewal.errors import (
    InvalidLaw,
    NoCommonSpan,
    SpanMismatch,
    ZeroAtomPresent,
    ZeroMassTail,
)
from arithrenewal.lattice import (
    ArithmeticLaw,
    PowerExpTail,
    convolve,
    convolve_arrays,
    detect_span,
    geometric_law,
    mellin_moment,
    power_law,
    series_tail,
    subexp_diagnostic,
)

LOG2 = math.log(2.0)


class TestSpan:
    def test_log2(self):
        assert detect_span([0.0, LOG2, 2 * LOG2]) == pytest.approx(LOG2, rel=1e-12)

    def test_common_factor(self):
        assert detect_span([2 * LOG2, 4 * LOG2]) == pytest.approx(2 * LOG2, rel=1e-12)

    def test_incommensurable(self):
        with pytest.raises(NoCommonSpan):
            detect_span([LOG2, math.log(3.0)])

    def test_empty(self):
        with pytest.raises(NoCommonSpan):
            detect_span([])

    @given(st.lists(st.integers(-30, 30).filter(lambda k: k != 0), min_size=1, max_size=6),
           st.integers(1, 7))
    def test_scaling(self, ks, m):
        h = 0.37
        base = detect_span([k * h for k in ks])
        assert detect_span([m * k * h for k in ks]) == pytest.approx(m * base, rel=1e-9)


class TestLaw:
    def test_mass_validation(self):
        with pytest.raises(InvalidLaw):
            ArithmeticLaw.from_atoms(1.0, {1: 0.5})

    def test_negative_mass(self):
        with pytest.raises(InvalidLaw):
            ArithmeticLaw.from_atoms(1.0, {1: 1.5, 2: -0.5})

    def test_span_not_maximal(self):
        with pytest.raises(InvalidLaw):
            ArithmeticLaw.from_atoms(1.0, {2: 0.5, 4: 0.5})

    def test_roundtrip_json(self, stp_pair):
        law = stp_pair.a_law
        again = ArithmeticLaw.from_dict(law.to_dict())
        k = np.arange(0, 30)
        assert np.array_equal(again.pmf(k), law.pmf(k))
        assert again.zero_atom == law.zero_atom

    def test_sf_matches_sum(self):
        law = power_law(1.0, 0.7)
        j = np.array([0, 5, 50, 500])
        direct = [1.0 - law.pmf(np.arange(1, jj + 1)).sum() for jj in j]
        assert np.allclose(law.sf_index(j), direct, rtol=1e-10, atol=1e-14)

    def test_series_tail_geometric(self):
        assert series_tail(math.log(0.5), 0.0, 3) == pytest.approx(0.25, rel=1e-14)

    def test_series_tail_zeta(self):
        assert series_tail(0.0, 2.0, 1) == pytest.approx(math.pi**2 / 6, rel=1e-14)

    def test_series_tail_divergent(self):
        assert series_tail(0.1, 2.0, 1) == math.inf
        assert series_tail(0.0, 1.0, 1) == math.inf

    def test_generator_abscissa(self):
        g = PowerExpTail(1, 1.0, 2.0, 3.0)
        assert g.abscissa(1.5) == 2.0


class TestConvolve:
    def test_identity(self):
        g = ArithmeticLaw.from_atoms(1.0, {1: 0.3, 2: 0.7})
        d0 = ArithmeticLaw.point(1.0, 0)
        out = convolve(d0, g)
        assert np.allclose(out.pmf([1, 2]), [0.3, 0.7])

    def test_binomial(self):
        f = ArithmeticLaw.from_atoms(1.0, {0: 0.5, 1: 0.5})
        out = convolve(f, f)
        assert np.allclose(out.pmf([0, 1, 2]), [0.25, 0.5, 0.25], atol=1e-15)
        assert out.total_mass() == pytest.approx(1.0, abs=1e-12)

    def test_span_mismatch(self):
        with pytest.raises(SpanMismatch):
            convolve(ArithmeticLaw.point(1.0), ArithmeticLaw.point(2.0))

    def test_zero_atom(self):
        f = ArithmeticLaw.from_atoms(1.0, {1: 0.5}, zero_atom=0.5)
        with pytest.raises(ZeroAtomPresent):
            convolve(f, f)

    def test_methods_agree(self, rng):
        a = rng.random(5000)
        a /= a.sum()
        b = rng.random(3000)
        b /= b.sum()
        assert np.max(np.abs(convolve_arrays(a, b, "direct") - convolve_arrays(a, b, "fft"))) <= 1e-10

    @settings(max_examples=25)
    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6),
           st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6),
           st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6))
    def test_commutative_associative(self, x, y, z):
        mk = lambda v: ArithmeticLaw(1.0, np.array(v) / sum(v), 0, check_span=False)
        f, g, k = mk(x), mk(y), mk(z)
        fg = convolve(f, g)
        assert np.allclose(fg.masses, convolve(g, f).masses, atol=1e-10)
        left = convolve(fg, k).masses
        right = convolve(f, convolve(g, k)).masses
        assert np.allclose(left, right, atol=1e-10)


class TestMellin:
    def test_stp(self, stp_pair):
        assert mellin_moment(stp_pair.a_law, 1.0) == pytest.approx(1.0, abs=1e-14)

    def test_zero(self, stp_pair):
        assert mellin_moment(stp_pair.a_law, 0.0) == 1.0

    def test_two_point(self, two_point):
        assert two_point.mellin(1.0) == pytest.approx(1.0, abs=1e-15)

    def test_divergent(self):
        assert power_law(1.0, 0.5).mellin(0.1) == math.inf

    def test_log_convex(self, stp_pair):
        s = np.linspace(0.05, 1.4, 40)
        logm = np.log([stp_pair.a_law.mellin(v) for v in s])
        assert np.all(np.diff(logm, 2) >= -1e-9)


class TestSubexp:
    def test_power_law(self):
        rep = subexp_diagnostic(power_law(1.0, 1.5), 10_000)
        dev_shift, dev_conv = rep.max_deviation()
        assert dev_shift <= 0.02 and dev_conv <= 0.02
        assert rep.plausibly_subexponential()

    def test_geometric_not(self):
        rep = subexp_diagnostic(geometric_law(1.0, 0.5), 200)
        # p*2_n / (2 p_n) grows linearly in n for geometric laws
        assert rep.conv_ratio[-1] > 10 * rep.conv_ratio[10]
        assert not rep.plausibly_subexponential()

    def test_point_mass(self):
        with pytest.raises(ZeroMassTail):
            subexp_diagnostic(ArithmeticLaw.point(1.0), 20)
