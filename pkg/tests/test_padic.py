import random
from fractions import Fraction

import pytest

from quatslopes.padic import (
    DEFAULT_PRECISION,
    NewtonPolygon,
    PadicError,
    PadicPoly,
    PadicScalar,
    PrecisionError,
    newton_polygon,
    one_unit_log_residue,
    teichmuller_residue,
)


def S(n, p=3, prec=DEFAULT_PRECISION):
    return PadicScalar.from_int(n, p, prec)


class TestScalarRing:
    def test_add_integstraight(self):
        assert (S(7) + S(2)).residue() == 9
        s = S(7) + S(2)
        assert s.val == 2 and s.unit == 1  # 9 = 1 * 3^2

    def test_mul_absorbing_zero(self):
        z = S(5) * PadicScalar.zero(3)
        assert z.is_zeroish

    def test_cancellation_flags_zero(self):
        a = PadicScalar.from_int(1, 3, 5)
        d = a - a
        assert d.is_zeroish and d.absprec == 5

    def test_prime_mismatch(self):
        with pytest.raises(PadicError):
            S(1, p=3) + S(1, p=5)

    def test_subtraction_precision_drop(self):
        # equal-valuation cancellation raises valuation, keeps absolute cap
        a = PadicScalar.from_int(1 + 27, 3, 10)
        b = PadicScalar.from_int(1, 3, 10)
        d = a - b
        assert d.val == 3 and d.absprec == 10

    def test_invert_2_mod_3_5(self):
        a = PadicScalar.from_int(2, 3, 5)
        inv = a.invert()
        assert inv.residue() == 122  # 2 * 122 = 3^5 + 1
        assert (a * inv).residue() == 1

    def test_invert_one(self):
        one = PadicScalar.from_int(1, 5, 8)
        assert one.invert().residue() == 1

    def test_invert_p(self):
        x = S(3).invert()
        assert x.val == -1 and x.unit == 1

    def test_invert_zeroish_rejected(self):
        with pytest.raises(PrecisionError):
            PadicScalar.zero(3).invert()

    def test_double_invert_roundtrip(self):
        rng = random.Random(7)
        for _ in range(40):
            u = rng.randrange(1, 3**10)
            if u % 3 == 0:
                u += 1
            a = PadicScalar.from_int(u, 3, 12)
            assert a.invert().invert().agrees(a)

    def test_rational_construction(self):
        half = PadicScalar.from_rational(Fraction(1, 2), 3, 5)
        assert (half + half).residue() == 1
        third = PadicScalar.from_rational(Fraction(1, 3), 3, 5)
        assert third.val == -1

    def test_pow_negative(self):
        a = S(2)
        assert (a ** -2).agrees(a.invert() * a.invert())

    def test_precision_soundness_chains(self):
        # recomputing a random op chain at higher cap agrees on retained digits
        rng = random.Random(31)
        for _ in range(25):
            ops = [rng.choice("+-*") for _ in range(6)]
            vals = [rng.randrange(-200, 200) or 1 for _ in range(7)]

            def run(prec):
                acc = PadicScalar.from_int(vals[0], 3, prec)
                for o, v in zip(ops, vals[1:]):
                    x = PadicScalar.from_int(v, 3, prec)
                    acc = acc + x if o == "+" else acc - x if o == "-" else acc * x
                return acc

            lo, hi = run(12), run(20)
            assert lo.agrees(hi)

    def test_str_roundtrip_format(self):
        assert str(PadicScalar.from_int(122, 3, 5)) == "122*3^0 + O(3^5)"
        assert str(PadicScalar.zero(3, 5)) == "O(3^5)"


class TestUnitFunctions:
    def test_teichmuller_fixed_point(self):
        for p in (3, 5, 7):
            for x in range(1, p):
                t = teichmuller_residue(x, p, 12)
                assert pow(t, p, p**12) == t
                assert t % p == x

    def test_log_additivity(self):
        p, m = 3, 15
        rng = random.Random(5)
        for _ in range(15):
            a = 1 + p * rng.randrange(1, p ** (m - 1))
            b = 1 + p * rng.randrange(1, p ** (m - 1))
            lab = one_unit_log_residue(a * b % p**m, p, m)
            la, lb = one_unit_log_residue(a, p, m), one_unit_log_residue(b, p, m)
            assert (la + lb - lab) % p**m == 0

    def test_log_leading_term(self):
        # log(1+3) = 3 - 9/2 + 27/3 - ... : valuation exactly 1
        val = one_unit_log_residue(4, 3, 10)
        assert val % 3 == 0 and val % 9 != 0


class TestNewtonPolygon:
    def test_three_term_example(self):
        f = PadicPoly(3, (S(1), S(-1), S(3)))
        np_ = newton_polygon(f)
        assert np_.slopes == ((Fraction(0), 1), (Fraction(1), 1))
        assert np_.trusted_slope is None

    def test_known_factorization(self):
        # (1-t)(1-5t)(1-25t) over Q_5
        one = PadicScalar.from_int(1, 5)
        f = PadicPoly(5, (one, PadicScalar.from_int(-1, 5)))
        g = PadicPoly(5, (one, PadicScalar.from_int(-5, 5)))
        h = PadicPoly(5, (one, PadicScalar.from_int(-25, 5)))
        np_ = newton_polygon(f * g * h)
        assert np_.slopes == ((Fraction(0), 1), (Fraction(1), 1), (Fraction(2), 1))

    def test_constant_poly(self):
        np_ = newton_polygon(PadicPoly(3, (S(1),)))
        assert np_.slopes == ()

    def test_nonunit_constant_rejected(self):
        with pytest.raises(PadicError):
            newton_polygon(PadicPoly(3, (S(3), S(1))))

    def test_product_merges_slopes(self):
        rng = random.Random(11)
        for _ in range(20):
            def rand_poly():
                coeffs = [S(1)]
                deg = rng.randrange(1, 4)
                for _ in range(deg):
                    c = rng.randrange(-80, 80)
                    coeffs.append(S(c if c else 1))
                return PadicPoly(3, tuple(coeffs))

            f, g = rand_poly(), rand_poly()
            nf, ng, nfg = newton_polygon(f), newton_polygon(g), newton_polygon(f * g)
            merged: dict[Fraction, int] = {}
            for s, m in list(nf.slopes) + list(ng.slopes):
                merged[s] = merged.get(s, 0) + m
            assert dict(nfg.slopes) == merged

    def test_unresolved_coefficient_limits_trust(self):
        # hidden coefficient whose precision floor dips below the hull
        coeffs = (S(1), S(3, prec=10), PadicScalar.zero(3, 1), S(27, prec=10))
        np_ = newton_polygon(PadicPoly(3, coeffs))
        assert np_.trusted_slope is not None
        assert np_.trusted_slope < Fraction(1)
        assert np_.slopes == ()

    def test_unresolved_above_hull_harmless(self):
        coeffs = (S(1), S(1), PadicScalar.zero(3, 25), S(9, prec=28))
        np_ = newton_polygon(PadicPoly(3, coeffs))
        assert np_.trusted_slope is None
        assert np_.slopes == ((Fraction(0), 1), (Fraction(1), 2))

    def test_diagonal_valuations_random(self):
        rng = random.Random(23)
        for _ in range(20):
            vals = sorted(rng.randrange(0, 6) for _ in range(rng.randrange(2, 6)))
            f = PadicPoly(3, (S(1),))
            for v in vals:
                f = f * PadicPoly(3, (S(1), S(-(3**v))))
            np_ = newton_polygon(f)
            expanded = [s for s, m in np_.slopes for _ in range(m)]
            assert expanded == [Fraction(v) for v in vals]
