"""Banach modules of rigid functions on coset discs and their monoid action.

The module for radius index k has orthonormal basis e_{a,j}(z) = ((z-a)/p^k)^j
supported on the coset disc a + p^k Z_p, for a in Z/p^k and j up to a degree
cutoff.  A matrix g = (a b; c d) with a invertible, b/a and det/a^2 integral
and c/a divisible by p acts by

    (g o f)(z) = kappa~(A(z), det/A(z)) * f((b + dz)/(a + cz)),  A(z) = a + cz,

where kappa~ is the weight character extended to diagonal matrices, trivial
on powers of p.  All matrices here are exact: entries are integer residues at
a stated modulus, with valuation floors recorded so downstream consumers can
certify what the degree truncation cannot affect.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import comb, factorial

import numpy as np

from .padic import (
    PadicError,
    PadicScalar,
    PrecisionError,
    binomial_int,
    exact_div_residue,
    inv_unit_mod,
    one_unit_log_residue,
    padic_val,
    teichmuller_residue,
    val_of_residue,
)
from .weightspace import SSeries, TorusCharacter, WeightDisc


class MembershipError(PadicError):
    """Matrix outside the acting monoid (or too imprecise to decide)."""


@dataclass(frozen=True)
class BasisIndex:
    coset: int
    degree: int


@dataclass(frozen=True)
class ModuleSpec:
    """Parameters of one Banach module: prime, radius index, weight, truncation."""

    p: int
    k: int
    weight: TorusCharacter | WeightDisc
    degree_cap: int
    prec: int

    def __post_init__(self):
        if self.k < self.min_radius():
            raise PadicError(f"radius index {self.k} below analyticity radius")
        if self.degree_cap < 0 or self.prec <= 0:
            raise PadicError("bad truncation parameters")

    def min_radius(self) -> int:
        if isinstance(self.weight, WeightDisc):
            return self.weight.analyticity_radius()
        return 1  # locally algebraic weights of tame conductor dividing p

    @property
    def s_order(self) -> int:
        return self.weight.order if isinstance(self.weight, WeightDisc) else 0

    @property
    def n_layers(self) -> int:
        return self.s_order + 1

    @property
    def dim(self) -> int:
        return self.p**self.k * (self.degree_cap + 1)

    def basis(self) -> list[BasisIndex]:
        D = self.degree_cap
        return [BasisIndex(a, j) for a in range(self.p**self.k) for j in range(D + 1)]

    def flat(self, idx: BasisIndex) -> int:
        return idx.coset * (self.degree_cap + 1) + idx.degree

    def _fact_loss(self) -> int:
        """Digits spent on 1/m! in the wild series of the weight."""
        order = None
        if isinstance(self.weight, WeightDisc):
            order = self.weight.order
        elif self.weight.s_value is not None:
            order = self.weight.s_order
        if not order:
            return 0
        return padic_val(factorial(order), self.p) if factorial(order) % self.p == 0 else 0


@dataclass(frozen=True)
class IwahoriFactors:
    """g = (1 0; nbar 1) diag(m1, m2) (1 n; 0 1), exactly."""

    nbar: PadicScalar
    m1: PadicScalar
    m2: PadicScalar
    n: PadicScalar

    def recompose(self) -> list[list[PadicScalar]]:
        a = self.m1
        b = self.m1 * self.n
        c = self.nbar * self.m1
        d = self.nbar * self.m1 * self.n + self.m2
        return [[a, b], [c, d]]


class MonoidElement:
    """2x2 p-adic matrix together with its Iwahori factorization data."""

    def __init__(self, entries: list[list[PadicScalar]]):
        (a, b), (c, d) = entries
        ps = {a.p, b.p, c.p, d.p}
        if len(ps) != 1:
            raise PadicError("prime mismatch in matrix entries")
        self.p = ps.pop()
        self.entries = ((a, b), (c, d))

    @classmethod
    def from_ints(cls, p, quad, prec) -> "MonoidElement":
        a, b, c, d = (PadicScalar.from_int(x, p, prec) for x in quad)
        return cls([[a, b], [c, d]])

    def det(self) -> PadicScalar:
        (a, b), (c, d) = self.entries
        return a * d - b * c

    def residues(self, cap: int) -> tuple[int, int, int, int]:
        return tuple(x.residue(cap) for row in self.entries for x in row)

    def __matmul__(self, other: "MonoidElement") -> "MonoidElement":
        (a, b), (c, d) = self.entries
        (e, f), (g, h) = other.entries
        return MonoidElement([[a * e + b * g, a * f + b * h],
                              [c * e + d * g, c * f + d * h]])

    def __str__(self):
        (a, b), (c, d) = self.entries
        return f"[{a}, {b}; {c}, {d}]"


def _ratio_val_floor(num: PadicScalar, den_val: int) -> int | None:
    """Floor for v(num) - den_val, or None when the digits cannot decide its sign."""
    if num.is_zeroish:
        f = num.absprec - den_val
        return f if f >= 0 else None
    return num.val - den_val


def monoid_membership(g: MonoidElement) -> bool:
    """Whether g lies in the monoid generated by the Iwahori group and
    the contracting diagonal elements: a != 0, b/a and det/a^2 integral,
    c/a divisible by p."""
    (a, b), (c, d) = g.entries
    if a.is_zeroish:
        raise MembershipError("upper-left entry indistinguishable from zero")
    va = a.val
    fb = _ratio_val_floor(b, va)
    fc = _ratio_val_floor(c, va + 1)
    fdet = _ratio_val_floor(g.det(), 2 * va)
    if fb is None or fc is None or fdet is None:
        raise MembershipError("entries too imprecise to decide membership")
    return fb >= 0 and fc >= 0 and fdet >= 0


def iwahori_factorize(g: MonoidElement) -> IwahoriFactors:
    """Lower-unipotent x diagonal x upper-unipotent factorization."""
    (a, b), (c, d) = g.entries
    if a.is_zeroish:
        raise MembershipError("upper-left entry indistinguishable from zero")
    ainv = a.invert()
    nbar = c * ainv
    n = b * ainv
    if not nbar.is_zeroish and nbar.val < 1:
        raise MembershipError("lower coordinate not divisible by p")
    if not n.is_zeroish and n.val < 0:
        raise MembershipError("upper coordinate not integral")
    return IwahoriFactors(nbar=nbar, m1=a, m2=g.det() * ainv, n=n)


# ---------------------------------------------------------------------------
# residue-level series helpers (plain ints mod p^cap)


def _ser_mul(x, y, n, mod):
    out = np.convolve(np.asarray(x, dtype=object), np.asarray(y, dtype=object))[: n + 1]
    return [int(v) % mod for v in out]


def _geometric(eps, n, mod):
    """Coefficients of 1/(1 + eps*u) up to degree n."""
    out = [1]
    cur = 1
    for _ in range(n):
        cur = (-cur * eps) % mod
        out.append(cur)
    return out


def _binom_series(eps, exponent, n, mod):
    """Coefficients of (1 + eps*u)^exponent up to degree n, any integer exponent."""
    out = []
    epow = 1
    for m in range(n + 1):
        out.append(binomial_int(exponent, m) * epow % mod)
        epow = epow * eps % mod
    return out


def _log_one_plus(eps, n, p, cap):
    """Coefficients of log(1 + eps*u) up to degree n; v(eps) >= 1 required."""
    mod = p**cap
    out = [0]
    epow = 1
    for m in range(1, n + 1):
        epow = epow * eps % mod
        piece, _ = exact_div_residue(epow, m, p, cap)
        out.append(-piece % mod if m % 2 == 0 else piece)
    return out


@dataclass
class _WeightData:
    """Weight evaluation recipe shared by every coset of one operator build."""

    tame: tuple[int, int]
    wild: tuple[int, int]
    s0_res: int | None  # disc point: residue of the coordinate value
    s_order: int  # truncation order of the s-direction (0 = plain algebraic)
    layered: bool  # True: emit one u-series per power of s


def _weight_data(weight: TorusCharacter | WeightDisc, cap: int) -> _WeightData:
    if isinstance(weight, WeightDisc):
        return _WeightData(weight.center.tame, weight.center.wild, None, weight.order, True)
    if weight.s_value is not None:
        s0 = weight.s_value
        if s0.is_zeroish:
            res = 0
        else:
            if s0.val < 0:
                raise PadicError("disc coordinate must be integral")
            res = s0.residue(min(cap, s0.absprec))
        return _WeightData(weight.tame, weight.wild, res, weight.s_order, False)
    return _WeightData(weight.tame, weight.wild, None, 0, False)


def _weight_series(wd: _WeightData, x1: int, x2: int, eps: int, n: int, p: int, cap: int):
    """u-series of the weight factor kappa~(x1(1+eps u), x2/(1+eps u)).

    Returns (layers, loss): one u-coefficient list per retained power of s
    (a single layer when the weight is a point), certified mod p^(cap-loss).
    """
    mod = p**cap
    e1, e2 = wd.tame
    n1, n2 = wd.wild
    t1 = teichmuller_residue(x1, p, cap)
    t2 = teichmuller_residue(x2, p, cap)
    const = pow(t1, e1, mod) * pow(t2, e2, mod) % mod
    y1 = x1 * inv_unit_mod(t1, p, cap) % mod
    y2 = x2 * inv_unit_mod(t2, p, cap) % mod
    for y, ex in ((y1, n1), (y2, n2)):
        ypow = pow(y, ex, mod) if ex >= 0 else pow(inv_unit_mod(y, p, cap), -ex, mod)
        const = const * ypow % mod
    base = _binom_series(eps, n1 - n2, n, mod)
    base = [const * v % mod for v in base]
    if wd.s_order == 0:
        return [base], 0
    lc = one_unit_log_residue(y1, p, cap)
    lser = _log_one_plus(eps, n, p, cap)
    lser[0] = (lser[0] + lc) % mod
    loss = padic_val(factorial(wd.s_order), p) if factorial(wd.s_order) % p == 0 else 0
    powers = [[1] + [0] * n]
    for m in range(1, wd.s_order + 1):
        powers.append(_ser_mul(powers[-1], lser, n, mod))
    if wd.layered:
        layers = []
        for m, pw in enumerate(powers):
            fm = factorial(m)
            layers.append([exact_div_residue(v, fm, p, cap)[0] if v else 0 for v in pw])
        return [_ser_mul(base, lay, n, mod) for lay in layers], loss
    # disc point: sum the truncated exponential at the coordinate value
    acc = [0] * (n + 1)
    s_pow = 1
    for m, pw in enumerate(powers):
        fm = factorial(m)
        for i, v in enumerate(pw):
            if v:
                term = exact_div_residue(v * s_pow % mod, fm, p, cap)[0]
                acc[i] = (acc[i] + term) % mod
        s_pow = s_pow * wd.s0_res % mod
    return [_ser_mul(base, acc, n, mod)], loss


@dataclass
class _CosetExpansion:
    source: int
    t_series: list[int]
    w_layers: list[list[int]]
    cap: int  # certified exponent for the series residues
    eps_val: int  # v(A1/A0) >= k_target + 1
    contraction: int  # c0: valuation gained per source degree (>=1 for U_p type)


def _coset_data(quad, spec: ModuleSpec, a_tgt: int, k_tgt: int, cap: int) -> _CosetExpansion:
    p = spec.p
    mod = p**cap
    a, b, c, d = quad
    pk = p**k_tgt
    A0 = (a + c * a_tgt) % mod
    A1 = c * pk % mod
    B0 = (b + d * a_tgt) % mod
    B1 = d * pk % mod
    vA0 = val_of_residue(A0, p, cap)
    if vA0 >= cap:
        raise MembershipError("matrix outside the big cell at this precision")
    capr = cap - vA0
    modr = p**capr
    inv_u = inv_unit_mod(A0 // p**vA0, p, capr)
    if A1 % p**vA0:
        raise MembershipError("c/a not integral")
    eps = (A1 // p**vA0) * inv_u % modr
    e = val_of_residue(eps, p, capr)
    if e < k_tgt + 1:
        raise MembershipError("c/a not divisible by p")
    det = (a * d - b * c) % mod
    vdet = val_of_residue(det, p, cap)
    if vdet >= cap:
        raise PrecisionError("determinant indistinguishable from zero")
    n = spec.degree_cap
    geo = _geometric(eps, n, modr)
    if B0 % p**vA0 or B1 % p**vA0:
        raise MembershipError("b/a not integral")
    w0c = (B0 // p**vA0) * inv_u % modr
    w1c = (B1 // p**vA0) * inv_u % modr
    w = [(w0c * geo[m] + (w1c * geo[m - 1] if m else 0)) % modr for m in range(n + 1)]
    ks = p**spec.k
    src = w[0] % ks
    capt = capr - spec.k
    modt = p**capt
    t = []
    for m, wm in enumerate(w):
        num = (wm - src) % modr if m == 0 else wm
        if num % ks:
            raise MembershipError("image disc does not refine the source discs")
        t.append(num // ks % modt)
    # weight factor on the unit parts of (A0, det/A0)
    x1 = A0 // p**vA0 % modt
    x2 = (det // p**vdet) * inv_unit_mod(x1, p, capt) % modt
    wd = _weight_data(spec.weight, capt)
    layers, loss = _weight_series(wd, x1, x2, eps % modt, n, p, capt)
    capw = capt - loss
    # contraction per source degree: min valuation of t_m - (m-1) e for m >= 1
    vB0 = val_of_residue(B0, p, cap)
    vB1 = val_of_residue(B1, p, cap)
    c0 = max(0, min(e + vB0 - vA0, vB1 - vA0) - spec.k)
    return _CosetExpansion(src, [v % p**capw for v in t],
                           [[v % p**capw for v in lay] for lay in layers],
                           capw, e, c0)


@dataclass
class OperatorMatrix:
    """Matrix of one module map in the coset-monomial basis.

    Rows index the target basis, columns the source basis, both in
    lexicographic (coset, degree) order; ``layers[m]`` holds the coefficient
    of s^m (a single layer for weights that are points).  Entries are integer
    residues certified modulo p^prec.
    """

    p: int
    k_rows: int
    k_cols: int
    degree_cap: int
    s_order: int
    prec: int
    layers: list[np.ndarray]
    col_tail_floors: list[int] | None = None
    row_rate: int = 0  # entries in row degree j have valuation >= row_rate*j + row_offset
    row_offset: int = 0

    @property
    def shape(self):
        return self.layers[0].shape

    @property
    def mod(self) -> int:
        return self.p**self.prec

    def row_basis(self) -> list[BasisIndex]:
        D = self.degree_cap
        return [BasisIndex(a, j) for a in range(self.p**self.k_rows) for j in range(D + 1)]

    def col_basis(self) -> list[BasisIndex]:
        D = self.degree_cap
        return [BasisIndex(a, j) for a in range(self.p**self.k_cols) for j in range(D + 1)]

    def _flat(self, idx: BasisIndex) -> int:
        return idx.coset * (self.degree_cap + 1) + idx.degree

    def entry(self, row: BasisIndex | int, col: BasisIndex | int):
        r = row if isinstance(row, int) else self._flat(row)
        c = col if isinstance(col, int) else self._flat(col)
        if self.s_order == 0:
            return PadicScalar.from_int(int(self.layers[0][r, c]), self.p, self.prec)
        return SSeries(self.p, tuple(
            PadicScalar.from_int(int(lay[r, c]), self.p, self.prec) for lay in self.layers))

    @classmethod
    def identity(cls, spec: ModuleSpec, prec: int) -> "OperatorMatrix":
        eye = np.array(np.eye(spec.dim, dtype=int), dtype=object)
        layers = [eye] + [np.zeros((spec.dim, spec.dim), dtype=object)
                          for _ in range(spec.s_order)]
        return cls(spec.p, spec.k, spec.k, spec.degree_cap, spec.s_order, prec, layers)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if self.k_cols != other.k_rows or self.s_order != other.s_order:
            raise PadicError("matrix shape mismatch")
        prec = min(self.prec, other.prec)
        mod = self.p**prec
        L = self.s_order + 1
        out = [np.zeros((self.shape[0], other.shape[1]), dtype=object) for _ in range(L)]
        for i in range(L):
            for j in range(L - i):
                out[i + j] = out[i + j] + self.layers[i] @ other.layers[j]
        return OperatorMatrix(self.p, self.k_rows, other.k_cols, self.degree_cap,
                              self.s_order, prec, [lay % mod for lay in out])

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        prec = min(self.prec, other.prec)
        mod = self.p**prec
        layers = [(x + y) % mod for x, y in zip(self.layers, other.layers)]
        return OperatorMatrix(self.p, self.k_rows, self.k_cols, self.degree_cap,
                              self.s_order, prec, layers)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return self + other.scale_int(-1)

    def scale_int(self, c: int) -> "OperatorMatrix":
        return OperatorMatrix(self.p, self.k_rows, self.k_cols, self.degree_cap,
                              self.s_order, self.prec, [lay * c % self.mod for lay in self.layers])

    def min_entry_valuation(self, rows=None, cols=None) -> int:
        """Minimum valuation over the selected block; self.prec when it vanishes."""
        best = self.prec
        for lay in self.layers:
            block = lay
            if rows is not None:
                block = block[rows, :]
            if cols is not None:
                block = block[:, cols]
            for v in block.flat:
                if int(v) % self.mod:
                    best = min(best, val_of_residue(int(v), self.p, self.prec))
        return best

    def degree_rows(self, degrees) -> list[int]:
        D = self.degree_cap
        return [a * (D + 1) + j for a in range(self.p**self.k_rows) for j in range(D + 1)
                if j in degrees]

    def degree_cols(self, degrees) -> list[int]:
        D = self.degree_cap
        return [a * (D + 1) + j for a in range(self.p**self.k_cols) for j in range(D + 1)
                if j in degrees]

    def to_json(self) -> dict:
        return {
            "basis": "lexicographic (coset, degree); index = coset*(degree_cap+1) + degree",
            "p": self.p,
            "k_rows": self.k_rows,
            "k_cols": self.k_cols,
            "degree_cap": self.degree_cap,
            "s_order": self.s_order,
            "precision": self.prec,
            "layers": [[[str(self.entry(r, c)) if self.s_order == 0 else None
                         for c in range(self.shape[1])] for r in range(self.shape[0])]
                       if self.s_order == 0 else
                       [[int(v) for v in row] for row in lay]
                       for lay in self.layers],
        }


def _spec_residues(g: MonoidElement | tuple, p: int, cap: int):
    if isinstance(g, MonoidElement):
        if g.p != p:
            raise PadicError("prime mismatch")
        return g.residues(cap)
    return tuple(x % p**cap for x in g)


def operator_matrix(gamma, spec: ModuleSpec, *, prec: int | None = None,
                    k_target: int | None = None) -> OperatorMatrix:
    """Matrix of the action of gamma on the module described by spec.

    ``k_target`` selects a smaller target radius for contracting elements
    (the factored maps through which compactness flows); by default the map
    is an endomorphism at radius spec.k.
    """
    p = spec.p
    k_tgt = spec.k if k_target is None else k_target
    if k_tgt > spec.k:
        raise PadicError("target radius cannot exceed the source radius")
    prec_out = spec.prec if prec is None else prec
    if isinstance(gamma, MonoidElement):
        if not monoid_membership(gamma):
            raise MembershipError("element outside the acting monoid")
        va = gamma.entries[0][0].val
    else:
        va = val_of_residue(gamma[0] % p**prec_out if gamma[0] else 0, p, prec_out)
        if va >= prec_out:
            raise MembershipError("upper-left entry vanishes")
    fam = ModuleSpec._fact_loss(spec)
    cap = prec_out + spec.k + fam + va + 2
    quad = _spec_residues(gamma, p, cap)
    D = spec.degree_cap
    L = spec.n_layers
    n_rows = p**k_tgt * (D + 1)
    n_cols = spec.dim
    layers = [np.zeros((n_rows, n_cols), dtype=object) for _ in range(L)]
    mod_out = p**prec_out
    tail_floors = [0] * n_cols
    seen_cols = [False] * n_cols
    rates = []
    for a_tgt in range(p**k_tgt):
        cx = _coset_data(quad, spec, a_tgt, k_tgt, cap)
        rates.append(cx.contraction)
        tmod = p**cx.cap
        tj = [1] + [0] * D
        for j in range(D + 1):
            if j:
                tj = _ser_mul(tj, cx.t_series, D, tmod)
            col = cx.source * (D + 1) + j
            floor = (D + 1 - j) * max(1, cx.eps_val - 1) + j * min(cx.contraction, 1) \
                - (cap - cx.cap)
            if not seen_cols[col] or floor < tail_floors[col]:
                tail_floors[col] = max(0, floor)
            seen_cols[col] = True
            for m in range(L):
                ser = _ser_mul(cx.w_layers[m], tj, D, tmod)
                base = a_tgt * (D + 1)
                for jp, v in enumerate(ser):
                    layers[m][base + jp, col] = v % mod_out
    rate = min(rates) if rates else 0
    return OperatorMatrix(p, k_tgt, spec.k, D, spec.s_order, prec_out, layers,
                          col_tail_floors=tail_floors, row_rate=min(rate, 1),
                          row_offset=0)


@dataclass
class ColumnExpansion:
    """Expansion of the image of one basis vector, with its truncation bound."""

    source: BasisIndex
    entries: list[tuple[BasisIndex, PadicScalar | SSeries]]
    tail_floor: int
    prec: int


def act_on_basis(gamma, idx: BasisIndex, spec: ModuleSpec, *,
                 prec: int | None = None) -> ColumnExpansion:
    """Image of e_{idx} under gamma, expanded over the target basis.

    Coefficients beyond the degree cutoff are guaranteed valuation at least
    ``tail_floor``.
    """
    mat = operator_matrix(gamma, spec, prec=prec)
    col = spec.flat(idx)
    out = []
    for r, bi in enumerate(mat.row_basis()):
        val = mat.entry(r, col)
        nz = (not val.is_zeroish) if isinstance(val, PadicScalar) else any(
            not c.is_zeroish for c in val.coeffs)
        if nz:
            out.append((bi, val))
    return ColumnExpansion(idx, out, mat.col_tail_floors[col], mat.prec)


def classical_inclusion(n: int, spec: ModuleSpec, *, prec: int | None = None) -> np.ndarray:
    """Rows m = 0..n: expansion of the global monomial z^m over the basis.

    The span of these rows is the finite-dimensional subspace of global
    polynomials of degree at most n, stable under the monoid action when the
    weight is dominant (gap n).  Raises for non-dominant weights, whose
    classical subspace is zero.
    """
    if n < 0:
        raise PadicError("classical subspace is zero for non-dominant weights")
    if n > spec.degree_cap:
        raise PadicError("degree cutoff below the classical degree")
    p = spec.p
    prec_out = spec.prec if prec is None else prec
    mod = p**prec_out
    D = spec.degree_cap
    out = np.zeros((n + 1, spec.dim), dtype=object)
    for m in range(n + 1):
        for a in range(p**spec.k):
            for j in range(min(m, D) + 1):
                out[m, a * (D + 1) + j] = comb(m, j) * a ** (m - j) * p ** (spec.k * j) % mod
    return out


@dataclass(frozen=True)
class TorusEigen:
    """Eigencharacter of the diagonal monoid on one basis vector."""

    weight: TorusCharacter
    degree: int

    def eigenvalue(self, t1: PadicScalar, t2: PadicScalar) -> PadicScalar:
        from .weightspace import eval_extended

        ratio = t2 * t1.invert()
        return eval_extended(self.weight, t1, t2) * ratio**self.degree


def torus_weight(idx: BasisIndex, weight: TorusCharacter) -> TorusEigen:
    """Character by which diagonal elements scale e_{idx}: the weight value
    times (t2/t1)^degree."""
    if not isinstance(weight, TorusCharacter):
        raise PadicError("pointwise weight required")
    return TorusEigen(weight, idx.degree)


def radius_inclusion(spec: ModuleSpec, *, prec: int | None = None) -> OperatorMatrix:
    """Re-expansion of the radius-k basis in the radius-(k+1) basis."""
    p = spec.p
    prec_out = spec.prec if prec is None else prec
    mod = p**prec_out
    D = spec.degree_cap
    k = spec.k
    n_rows = p ** (k + 1) * (D + 1)
    lay = np.zeros((n_rows, spec.dim), dtype=object)
    for a in range(p**k):
        for cdigit in range(p):
            ap = a + p**k * cdigit
            for j in range(D + 1):
                for l in range(j + 1):
                    lay[ap * (D + 1) + l, a * (D + 1) + j] = \
                        comb(j, l) * cdigit ** (j - l) * p**l % mod
    layers = [lay] + [np.zeros_like(lay) for _ in range(spec.s_order)]
    return OperatorMatrix(p, k + 1, k, D, spec.s_order, prec_out, layers)


def link_pair(spec_k: ModuleSpec, spec_k1: ModuleSpec, z,
              *, prec: int | None = None) -> tuple[OperatorMatrix, OperatorMatrix]:
    """Inclusion i_k and the factored action z_k through the smaller radius.

    i_k expresses radius-k basis functions at radius k+1; z_k maps the
    radius-(k+1) module to the radius-k module; their compositions are the
    plain actions of z at the two radii.
    """
    if spec_k1.k != spec_k.k + 1:
        raise PadicError("specs must sit at adjacent radii")
    if isinstance(z, MonoidElement):
        vdet = z.det().valuation()
    else:
        vdet = padic_val(z[0] * z[3] - z[1] * z[2], spec_k.p)
    if vdet < 1:
        raise MembershipError("link maps need a strictly contracting element")
    ik = radius_inclusion(spec_k, prec=prec)
    zk = operator_matrix(z, spec_k1, prec=prec, k_target=spec_k.k)
    return ik, zk
