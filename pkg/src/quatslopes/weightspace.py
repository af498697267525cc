"""Locally analytic characters of the unit torus (Z_p^x)^2 and weight discs.

A character is split as (Teichmueller part)^e times a wild part on one-units.
The wild part is either an integer power or the specialization of a disc's
universal character at a point s0; disc points always evaluate through the
disc's truncated series, so specializing a family and evaluating a point of
it are the same operation by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from .padic import (
    DEFAULT_PRECISION,
    PadicError,
    PadicScalar,
    PrecisionError,
    one_unit_log_residue,
    padic_val,
    teichmuller_residue,
)


def teichmuller(u: PadicScalar) -> PadicScalar:
    if u.is_zeroish or u.val != 0:
        raise PadicError("Teichmueller part needs a unit")
    n = u.ndigits
    return PadicScalar.from_unit_residue(teichmuller_residue(u.unit, u.p, n), 0, u.p, n)


def one_unit_part(u: PadicScalar) -> PadicScalar:
    """<u> = u / omega(u), a principal unit."""
    return u * teichmuller(u).invert()


def log_one_unit(u: PadicScalar) -> PadicScalar:
    if u.is_zeroish or u.val != 0 or (u.unit - 1) % u.p != 0:
        raise PadicError("log needs an element of 1 + pZ_p")
    m = u.ndigits
    return PadicScalar.from_unit_residue(one_unit_log_residue(u.unit, u.p, m), 0, u.p, m)


@dataclass(frozen=True)
class SSeries:
    """Truncated power series in the disc coordinate s, PadicScalar coefficients."""

    p: int
    coeffs: tuple[PadicScalar, ...]

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def constant(cls, c: PadicScalar, order: int) -> "SSeries":
        prec = c.absprec
        return cls(c.p, (c,) + tuple(PadicScalar.zero(c.p, prec) for _ in range(order)))

    def __add__(self, other: "SSeries") -> "SSeries":
        if self.order != other.order:
            raise PadicError("order mismatch")
        return SSeries(self.p, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __mul__(self, other: "SSeries") -> "SSeries":
        if self.order != other.order:
            raise PadicError("order mismatch")
        n = self.order
        prec = min(min(c.absprec for c in self.coeffs), min(c.absprec for c in other.coeffs))
        out = [PadicScalar.zero(self.p, prec) for _ in range(n + 1)]
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                if i + j <= n:
                    out[i + j] = out[i + j] + a * b
        return SSeries(self.p, tuple(out))

    def scale(self, c: PadicScalar) -> "SSeries":
        return SSeries(self.p, tuple(c * a for a in self.coeffs))

    def specialize(self, s0: PadicScalar) -> PadicScalar:
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * s0 + c
        return acc

    def agrees(self, other: "SSeries", absprec: int | None = None) -> bool:
        return all(a.agrees(b, absprec) for a, b in zip(self.coeffs, other.coeffs))

    def to_json(self) -> list[str]:
        return [str(c) for c in self.coeffs]


@dataclass(frozen=True)
class TorusCharacter:
    """Character of (Z_p^x)^2: kappa(diag(u1,u2)) = kappa_1(u1) kappa_2(u2).

    Each factor is omega^tame times a wild part on one-units; the wild part
    is u -> <u>^n, optionally multiplied (in direction 1) by the universal
    factor of a weight disc specialized at s_value.
    """

    p: int
    tame: tuple[int, int]
    wild: tuple[int, int]
    s_value: PadicScalar | None = None
    s_order: int | None = None

    def __post_init__(self):
        if self.p == 2 or self.p % 2 == 0:
            raise PadicError("odd prime required")
        if (self.s_value is None) != (self.s_order is None):
            raise PadicError("disc-point wild part needs both s_value and s_order")

    @classmethod
    def algebraic(cls, p: int, n1: int, n2: int, tame: tuple[int, int] | None = None) -> "TorusCharacter":
        if tame is None:
            tame = (n1 % (p - 1), n2 % (p - 1))
        return cls(p, (tame[0] % (p - 1), tame[1] % (p - 1)), (n1, n2))

    @property
    def is_algebraic_point(self) -> bool:
        return self.s_value is None

    def algebraic_exponents(self) -> tuple[int, int]:
        return self.wild

    def dominance_gap(self) -> int:
        """n_1 - n_2 of the algebraic part."""
        return self.wild[0] - self.wild[1]

    def parity_sign(self) -> int:
        """Value at (-1, -1); the space of forms is zero unless this is 1."""
        return (-1) ** ((self.tame[0] + self.tame[1]) % 2)

    def _wild_factor(self, u: PadicScalar, which: int) -> PadicScalar:
        one_u = one_unit_part(u)
        n = self.wild[which - 1]
        out = one_u**n
        if which == 1 and self.s_value is not None:
            out = out * truncated_exp(log_one_unit(one_u) * self.s_value, self.s_order, self.p)
        return out

    def eval_factor(self, u: PadicScalar, which: int) -> PadicScalar:
        """kappa_which on a single unit."""
        if u.is_zeroish or u.val != 0:
            raise PadicError("character defined on units")
        e = self.tame[which - 1]
        return teichmuller(u) ** e * self._wild_factor(u, which)


def truncated_exp(x: PadicScalar, order: int, p: int) -> PadicScalar:
    """sum_{m<=order} x^m / m!; requires v(x) >= 1 so every term is integral."""
    if not x.is_zeroish and x.val < 1:
        raise PadicError("truncated exp needs valuation >= 1")
    acc = PadicScalar.from_int(1, p, x.absprec)
    xm = acc
    for m in range(1, order + 1):
        xm = xm * x
        acc = acc + xm * PadicScalar.from_rational(Fraction(1, factorial(m)), p, xm.absprec)
    return acc


def eval_character(kappa: TorusCharacter, u1: PadicScalar, u2: PadicScalar) -> PadicScalar:
    """kappa_1(u1) * kappa_2(u2) on a pair of units."""
    return kappa.eval_factor(u1, 1) * kappa.eval_factor(u2, 2)


def eval_extended(kappa: TorusCharacter, m1: PadicScalar, m2: PadicScalar) -> PadicScalar:
    """Extension to diagonal elements, trivial on powers of p.

    Strips the p-power part of each entry and evaluates on the unit parts;
    this realizes the action of the monoid's diagonal factor on weights.
    """
    if m1.is_zeroish or m2.is_zeroish:
        raise PrecisionError("diagonal entry indistinguishable from zero")
    u1 = PadicScalar.from_unit_residue(m1.unit, 0, m1.p, m1.ndigits)
    u2 = PadicScalar.from_unit_residue(m2.unit, 0, m2.p, m2.ndigits)
    return eval_character(kappa, u1, u2)


@dataclass(frozen=True)
class WeightDisc:
    """Affinoid disc |s| <= p^{-radius_exp} of weights around a center character.

    The coordinate s moves the wild part of the first torus direction, which
    changes the ratio kappa_1/kappa_2; order is the s-truncation carried by
    every series over the disc.
    """

    center: TorusCharacter
    radius_exp: int
    order: int

    def __post_init__(self):
        if not self.center.is_algebraic_point:
            raise PadicError("disc center must be locally algebraic")
        if self.radius_exp < 0 or self.order < 0:
            raise PadicError("radius exponent and order must be nonnegative")

    @property
    def p(self) -> int:
        return self.center.p

    def point(self, s0: PadicScalar | int, absprec: int = DEFAULT_PRECISION) -> TorusCharacter:
        if isinstance(s0, int):
            s0 = PadicScalar.from_int(s0, self.p, absprec)
        if not s0.is_zeroish and s0.val < self.radius_exp:
            raise PadicError("point outside the disc")
        if s0.is_zeroish:
            return self.center
        return TorusCharacter(self.p, self.center.tame, self.center.wild, s0, self.order)

    def analyticity_radius(self) -> int:
        """Least k >= 1 with the universal character analytic on 1 + p^k Z_p."""
        k = 1
        while not self._converges_at(k):
            k += 1
        return k

    def _converges_at(self, k: int) -> bool:
        # term m of exp(s log u) has valuation >= m(k + r) - v_p(m!)
        # >= m(k + r - 1/(p-1)); need positivity of the rate
        return (k + self.radius_exp) * (self.p - 1) > 1

    def convergence_certificate(self, k: int, terms: int | None = None) -> list[tuple[int, Fraction]]:
        """Per-term valuation lower bounds for the series on 1 + p^k Z_p."""
        if terms is None:
            terms = self.order + 1
        out = []
        for m in range(terms + 1):
            fact_val = padic_val(factorial(m), self.p) if m > 1 and factorial(m) % self.p == 0 else 0
            out.append((m, Fraction(m * (k + self.radius_exp) - fact_val)))
        return out


def universal_eval(disc: WeightDisc, u: PadicScalar, which: int) -> SSeries:
    """Value of the universal character at a unit, as a truncated s-series.

    Specializing the result at s0 agrees with evaluating the disc point at
    s0 directly; at s = 0 it is the center character's value.
    """
    if u.is_zeroish or u.val != 0:
        raise PadicError("character defined on units")
    base = disc.center.eval_factor(u, which)
    if which == 2:
        return SSeries.constant(base, disc.order)
    lg = log_one_unit(one_unit_part(u))
    coeffs = []
    power = PadicScalar.from_int(1, disc.p, lg.absprec)
    for m in range(disc.order + 1):
        if m:
            power = power * lg
        fm = factorial(m)
        c = power * PadicScalar.from_rational(Fraction(1, fm), disc.p, power.absprec)
        coeffs.append(base * c)
    return SSeries(disc.p, tuple(coeffs))
