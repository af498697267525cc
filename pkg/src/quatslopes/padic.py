"""Capped-precision arithmetic in Q_p, polynomials over it, and Newton polygons.

Every scalar carries the precision it is actually known to; arithmetic
propagates precision pessimistically, so a digit reported by any routine in
this package is a digit that is certain.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

DEFAULT_PRECISION = 30


class PadicError(ValueError):
    pass


class PrecisionError(PadicError):
    """Raised when the retained digits cannot decide the requested question."""


def padic_val(n: int, p: int) -> int:
    """Valuation of a nonzero integer."""
    if n == 0:
        raise PadicError("valuation of exact zero is undefined")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def val_of_residue(x: int, p: int, cap: int) -> int:
    """Valuation of a residue known mod p^cap; returns cap when x = 0 mod p^cap."""
    x %= p**cap
    if x == 0:
        return cap
    return padic_val(x, p)


def inv_unit_mod(x: int, p: int, m: int) -> int:
    return pow(x, -1, p**m)


def exact_div_residue(x: int, d: int, p: int, cap: int) -> tuple[int, int]:
    """Divide a residue known mod p^cap by an integer d.

    Returns (residue, new_cap) with new_cap = cap - v_p(d); x must be
    divisible by p^{v_p(d)}.
    """
    vd = padic_val(d, p) if d % p == 0 else 0
    unit = d // p**vd
    if vd:
        if x % p**vd:
            raise PadicError(f"residue not divisible by p^{vd}")
        x //= p**vd
    new_cap = cap - vd
    if new_cap <= 0:
        raise PrecisionError("division exhausts all retained digits")
    return (x * inv_unit_mod(unit, p, new_cap)) % p**new_cap, new_cap


def teichmuller_residue(x: int, p: int, m: int) -> int:
    """Teichmueller representative of a unit residue, mod p^m."""
    mod = p**m
    x %= mod
    if x % p == 0:
        raise PadicError("Teichmueller lift needs a unit")
    y = x
    for _ in range(m):
        y = pow(y, p, mod)
    return y


def one_unit_log_residue(x: int, p: int, m: int) -> int:
    """log of x in 1 + pZ_p, as a residue mod p^m (p odd).

    Terms z^n/n have valuation >= n - v_p(n); summation runs until that
    bound clears the target precision.
    """
    guard = 1
    while p**guard <= m + guard + 1:
        guard += 1
    cap = m + guard
    mod = p**cap
    z = (x - 1) % mod
    if z % p != 0:
        raise PadicError("log needs an element of 1 + pZ_p")
    # n - v_p(n) >= n - log_p(n): find the first n_max where it clears cap
    n_max = cap
    while n_max - padic_val_bound(n_max, p) < cap:
        n_max += 1
    total = 0
    term = 1
    for n in range(1, n_max + 1):
        term = (term * z) % mod
        piece, _ = exact_div_residue(term, n, p, cap)
        if n % 2 == 0:
            piece = -piece
        total = (total + piece) % mod
    return total % p**m


def padic_val_bound(n: int, p: int) -> int:
    """Largest e with p^e <= n (upper bound for v_p across 1..n)."""
    e = 0
    while p ** (e + 1) <= n:
        e += 1
    return e


@dataclass(frozen=True)
class PadicScalar:
    """Element of Q_p known modulo p^absprec.

    Stored as unit * p^val with the unit part the least nonnegative residue
    coprime to p.  ``val is None`` flags a value indistinguishable from zero
    at the stated precision: all retained digits vanished, and no fabricated
    digits are invented.
    """

    p: int
    val: int | None
    unit: int
    absprec: int

    def __post_init__(self):
        if self.absprec <= (self.val if self.val is not None else -1):
            raise PadicError("no retained digits")
        if self.val is not None:
            n = self.ndigits
            if not (0 < self.unit < self.p**n) or self.unit % self.p == 0:
                raise PadicError("unit part not canonical")
        elif self.unit != 0:
            raise PadicError("zero flag with nonzero unit")

    # -- construction -------------------------------------------------

    @classmethod
    def from_int(cls, n: int, p: int, absprec: int = DEFAULT_PRECISION) -> "PadicScalar":
        n %= p**absprec
        if n == 0:
            return cls(p, None, 0, absprec)
        v = padic_val(n, p)
        return cls(p, v, (n // p**v) % p ** (absprec - v), absprec)

    @classmethod
    def from_rational(cls, q: Fraction | int, p: int, absprec: int = DEFAULT_PRECISION) -> "PadicScalar":
        q = Fraction(q)
        if q == 0:
            return cls(p, None, 0, absprec)
        num, den = q.numerator, q.denominator
        vn = padic_val(num, p) if num % p == 0 else 0
        vd = padic_val(den, p) if den % p == 0 else 0
        v = vn - vd
        n = absprec - v
        if n <= 0:
            return cls(p, None, 0, absprec)
        unit = (num // p**vn) * inv_unit_mod(den // p**vd, p, n) % p**n
        return cls(p, v, unit, absprec)

    @classmethod
    def zero(cls, p: int, absprec: int = DEFAULT_PRECISION) -> "PadicScalar":
        return cls(p, None, 0, absprec)

    @classmethod
    def from_unit_residue(cls, unit: int, val: int, p: int, absprec: int) -> "PadicScalar":
        n = absprec - val
        unit %= p**n
        if unit == 0:
            return cls(p, None, 0, absprec)
        w = padic_val(unit, p) if unit % p == 0 else 0
        if w:
            return cls(p, val + w, (unit // p**w) % p ** (absprec - val - w), absprec)
        return cls(p, val, unit, absprec)

    # -- inspection ----------------------------------------------------

    @property
    def is_zeroish(self) -> bool:
        return self.val is None

    @property
    def ndigits(self) -> int:
        return self.absprec - (self.val if self.val is not None else self.absprec)

    def valuation(self) -> int:
        """Exact valuation; raises when the digits cannot decide it."""
        if self.val is None:
            raise PrecisionError(f"valuation >= {self.absprec} only (zero at this precision)")
        return self.val

    def valuation_floor(self) -> int:
        return self.val if self.val is not None else self.absprec

    def residue(self, m: int | None = None) -> int:
        """Value as an integer residue mod p^m (requires val >= 0)."""
        if m is None:
            m = self.absprec
        if m > self.absprec:
            raise PrecisionError(f"only {self.absprec} digits retained")
        if self.val is None:
            return 0
        if self.val < 0:
            raise PadicError("negative valuation has no integer residue")
        return (self.unit * self.p**self.val) % self.p**m

    # -- arithmetic ----------------------------------------------------

    def _check(self, other: "PadicScalar"):
        if self.p != other.p:
            raise PadicError(f"prime mismatch: {self.p} vs {other.p}")

    def __add__(self, other: "PadicScalar") -> "PadicScalar":
        self._check(other)
        p = self.p
        absprec = min(self.absprec, other.absprec)
        shift = min(self.val if self.val is not None else 0,
                    other.val if other.val is not None else 0, 0)
        cap = absprec - shift
        a = 0 if self.val is None else self.unit * p ** (self.val - shift)
        b = 0 if other.val is None else other.unit * p ** (other.val - shift)
        return PadicScalar.from_unit_residue((a + b) % p**cap, shift, p, absprec)

    def __neg__(self) -> "PadicScalar":
        if self.val is None:
            return self
        return PadicScalar(self.p, self.val, (-self.unit) % self.p**self.ndigits, self.absprec)

    def __sub__(self, other: "PadicScalar") -> "PadicScalar":
        return self + (-other)

    def __mul__(self, other: "PadicScalar") -> "PadicScalar":
        self._check(other)
        p = self.p
        if self.val is None or other.val is None:
            prec = (self.valuation_floor() + other.valuation_floor())
            return PadicScalar(p, None, 0, prec)
        n = min(self.ndigits, other.ndigits)
        v = self.val + other.val
        return PadicScalar.from_unit_residue(self.unit * other.unit % p**n, v, p, v + n)

    def invert(self) -> "PadicScalar":
        if self.val is None:
            raise PrecisionError("inversion of an element indistinguishable from zero")
        n = self.ndigits
        return PadicScalar(self.p, -self.val, inv_unit_mod(self.unit, self.p, n), -self.val + n)

    def __pow__(self, e: int) -> "PadicScalar":
        if e < 0:
            return self.invert() ** (-e)
        if e == 0:
            n = self.ndigits if self.val is not None else self.absprec
            return PadicScalar.from_int(1, self.p, n)
        if self.val is None:
            return PadicScalar(self.p, None, 0, self.absprec * e)
        n = self.ndigits
        v = self.val * e
        return PadicScalar.from_unit_residue(pow(self.unit, e, self.p**n), v, self.p, v + n)

    def agrees(self, other: "PadicScalar", absprec: int | None = None) -> bool:
        """True when the two values coincide on all shared retained digits."""
        self._check(other)
        m = min(self.absprec, other.absprec)
        if absprec is not None:
            m = min(m, absprec)
        d = self - other
        return d.is_zeroish or d.val >= m

    # -- serialization ---------------------------------------------------

    def __str__(self) -> str:
        if self.val is None:
            return f"O({self.p}^{self.absprec})"
        return f"{self.unit}*{self.p}^{self.val} + O({self.p}^{self.absprec})"

    __repr__ = __str__


def binomial_int(n: int, m: int) -> int:
    """Binomial coefficient for any integer top argument."""
    if m < 0:
        return 0
    if n >= 0:
        return comb(n, m)
    return (-1) ** m * comb(-n + m - 1, m)


@dataclass(frozen=True)
class PadicPoly:
    """Polynomial with PadicScalar coefficients, ascending degree.

    Trailing coefficients that are indistinguishable from zero stay in the
    list: the nominal length records how far the polynomial is known, while
    ``degree`` reports the last coefficient with a resolved valuation.
    """

    p: int
    coeffs: tuple[PadicScalar, ...]

    def __post_init__(self):
        if not self.coeffs:
            raise PadicError("empty polynomial")
        for c in self.coeffs:
            if c.p != self.p:
                raise PadicError("prime mismatch in coefficients")

    @property
    def nominal_degree(self) -> int:
        return len(self.coeffs) - 1

    def degree(self) -> int | None:
        for i in range(len(self.coeffs) - 1, -1, -1):
            if not self.coeffs[i].is_zeroish:
                return i
        return None

    def __mul__(self, other: "PadicPoly") -> "PadicPoly":
        n = len(self.coeffs) + len(other.coeffs) - 1
        prec = min(min(c.absprec for c in self.coeffs), min(c.absprec for c in other.coeffs))
        out = [PadicScalar.zero(self.p, prec) for _ in range(n)]
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return PadicPoly(self.p, tuple(out))

    def evaluate(self, x: PadicScalar) -> PadicScalar:
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * x + c
        return acc

    def to_json(self) -> list[str]:
        return [str(c) for c in self.coeffs]


@dataclass(frozen=True)
class NewtonPolygon:
    """Lower convex hull of coefficient valuations, with slope segments.

    ``trusted_slope`` is the largest slope provable at the precision of the
    input: None means every segment of the hull is certified.
    """

    vertices: tuple[tuple[int, int], ...]
    slopes: tuple[tuple[Fraction, int], ...]
    trusted_slope: Fraction | None = None

    def __post_init__(self):
        xs = [v[0] for v in self.vertices]
        if xs != sorted(set(xs)):
            raise PadicError("vertices not strictly increasing in abscissa")
        ss = [s for s, _ in self.slopes]
        if ss != sorted(set(ss)):
            raise PadicError("slopes not strictly increasing")
        if self.slopes and sum(m for _, m in self.slopes) != self.vertices[-1][0]:
            raise PadicError("multiplicities do not span the polygon")

    def slope_multiset(self, below: Fraction | None = None) -> list[tuple[Fraction, int]]:
        return [(s, m) for s, m in self.slopes if below is None or s < below]


def _lower_hull(points: list[tuple[int, int]]) -> list[tuple[int, int]]:
    # monotone chain; collinear points merged so vertices are extreme points
    hull: list[tuple[int, int]] = []
    for pt in sorted(points):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (pt[0] - x1) >= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    return hull


def _hull_slopes(hull: list[tuple[int, int]]) -> list[tuple[Fraction, int]]:
    out = []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        out.append((Fraction(y2 - y1, x2 - x1), x2 - x1))
    return out


def newton_polygon(f: PadicPoly) -> NewtonPolygon:
    """Newton polygon of f, certified against unresolved coefficients.

    Coefficients indistinguishable from zero contribute no point, but their
    precision bounds the trustworthy slope range: the reported polygon is cut
    at the first segment a hidden coefficient could alter.
    """
    c0 = f.coeffs[0]
    if c0.is_zeroish or c0.val != 0:
        raise PadicError("constant coefficient must be a unit")
    known = [(i, c.val) for i, c in enumerate(f.coeffs) if not c.is_zeroish]
    unknown = [(i, c.absprec) for i, c in enumerate(f.coeffs) if c.is_zeroish]
    if len(known) == 1:
        return NewtonPolygon(((0, 0),), ())
    hull = _lower_hull(known)
    slopes = _hull_slopes(hull)
    if not unknown:
        return NewtonPolygon(tuple(hull), tuple(slopes))
    pess = _lower_hull(known + unknown)
    pess_slopes = _hull_slopes(pess)
    agree = 0
    while (agree < len(slopes) and agree < len(pess_slopes)
           and slopes[agree] == pess_slopes[agree]):
        agree += 1
    certified = slopes[:agree]
    trusted = certified[-1][0] if certified else Fraction(-1)
    if agree == len(slopes) == len(pess_slopes):
        return NewtonPolygon(tuple(hull), tuple(slopes))
    return NewtonPolygon(tuple(hull[: agree + 1]), tuple(certified), trusted)
