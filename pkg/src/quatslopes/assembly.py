"""Global spaces of module-valued forms, block Hecke operators, and the
classical finite-dimensional oracle.

Assembled operators are averages of group translates sandwiched between
invariant projectors.  Rather than multiplying truncated matrices (whose
products are polluted in the last degree columns), the element products are
expanded symbolically and each composite is run through the exact series
engine once; assembled entries are then correct at working precision, and
operators that commute in exact arithmetic commute entrywise here too.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .induced import ModuleSpec, operator_matrix
from .padic import (
    PadicError,
    PadicScalar,
    inv_unit_mod,
    padic_val,
    teichmuller_residue,
    val_of_residue,
)
from .quatalg import DoubleQuotient, HeckeCosetData, _mat_mul
from .weightspace import SSeries, TorusCharacter, WeightDisc


def working_precision(prec: int, p: int, weight=None) -> int:
    """Internal modulus exponent: report precision plus slack for projector
    denominators, plus headroom growing with the algebraic weight (slope sums
    below the classical bound grow with it, and resolving the polygon there
    needs the extra digits)."""
    slack = 8 if p == 3 else 4
    if weight is not None:
        kappa = weight.center if isinstance(weight, WeightDisc) else weight
        slack += 2 * max(0, kappa.dominance_gap())
    return prec + slack


def weight_parity_ok(weight: TorusCharacter | WeightDisc) -> bool:
    """The central unit -1 sits in every stabilizer; the space vanishes unless
    the weight kills it."""
    kappa = weight.center if isinstance(weight, WeightDisc) else weight
    return kappa.parity_sign() == 1


@dataclass
class SymbolicOp:
    """Block operator written as multisets of local matrices over a common
    denominator; multiplication composes elements exactly."""

    t: int
    denom: int
    blocks: dict[tuple[int, int], Counter]
    mod: int

    def __matmul__(self, other: "SymbolicOp") -> "SymbolicOp":
        if self.t != other.t or self.mod != other.mod:
            raise PadicError("mismatched symbolic operators")
        out: dict[tuple[int, int], Counter] = {}
        for (j, mid), left in self.blocks.items():
            for (mid2, k), right in other.blocks.items():
                if mid != mid2:
                    continue
                tgt = out.setdefault((j, k), Counter())
                for x, mx in left.items():
                    for y, my in right.items():
                        tgt[_mat_mul(x, y, self.mod)] += mx * my
        return SymbolicOp(self.t, self.denom * other.denom, out, self.mod)

    def term_count(self) -> int:
        return sum(len(c) for c in self.blocks.values())


class GlobalSpace:
    """Direct sum over quotient classes of one Banach module, with the
    stabilizer-invariance projectors."""

    def __init__(self, spec: ModuleSpec, dq: DoubleQuotient, *, work_prec: int | None = None):
        if spec.p != dq.p:
            raise PadicError("prime mismatch between module and quotient data")
        self.spec = spec
        self.dq = dq
        self.parity_zero = not weight_parity_ok(spec.weight)
        self.work_prec = work_prec or working_precision(spec.prec, spec.p, spec.weight)
        cap = self.work_prec + spec.k + ModuleSpec._fact_loss(spec) + 4
        self._cap = cap
        self._stabs = [
            [el.residues(cap) for el in dq.conjugated_stabilizer(i, cap)]
            for i in range(dq.class_count)
        ]

    @property
    def t(self) -> int:
        return self.dq.class_count

    @property
    def dim(self) -> int:
        return 0 if self.parity_zero else self.t * self.spec.dim

    def projector_symbolic(self, i: int | None = None) -> SymbolicOp:
        mod = self.spec.p**self._cap
        denom = 1
        blocks = {}
        for idx in range(self.t) if i is None else [i]:
            blocks[(idx, idx)] = Counter({m: 1 for m in self._stabs[idx]})
            denom = max(denom, len(self._stabs[idx]))
        orders = {len(self._stabs[idx]) for idx in (range(self.t) if i is None else [i])}
        if len(orders) > 1:
            # rescale blocks to a common denominator
            lcm = 1
            for o in orders:
                lcm = lcm * o // _gcd(lcm, o)
            for (j, _), c in blocks.items():
                factor = lcm // len(self._stabs[j])
                for key in c:
                    c[key] *= factor
            denom = lcm
        else:
            denom = orders.pop()
        return SymbolicOp(self.t, denom, blocks, mod)

    def hecke_symbolic(self, cosets: HeckeCosetData) -> SymbolicOp:
        """Projector * (coset sum) * projector, expanded into exact element
        products."""
        if cosets.p != self.spec.p:
            raise PadicError("prime mismatch")
        mod = self.spec.p**self._cap
        mids = {}
        for (j, k), quads in cosets.quads_at(self.dq, self._cap).items():
            mids[(j, k)] = Counter({quad: 1 for quad in quads})
        middle = SymbolicOp(self.t, 1, mids, mod)
        proj = self.projector_symbolic()
        return proj @ middle @ proj

    def materialize(self, sym: SymbolicOp, label: str = "") -> "BlockMatrix":
        """Run every composite element through the series engine and sum."""
        if self.parity_zero:
            raise PadicError("space is zero at this weight (parity)")
        spec = self.spec
        prec = self.work_prec
        mod = spec.p**prec
        n = spec.dim
        L = spec.n_layers
        layers = [np.zeros((self.t * n, self.t * n), dtype=object) for _ in range(L)]
        cache: dict[tuple, list[np.ndarray]] = {}
        rates = [1]
        for (j, k), counter in sym.blocks.items():
            acc = None
            for quad, mult in counter.items():
                if quad not in cache:
                    m = operator_matrix(quad, spec, prec=prec)
                    cache[quad] = m.layers
                    rates.append(m.row_rate)
                term = cache[quad]
                if acc is None:
                    acc = [lay * mult for lay in term]
                else:
                    acc = [a + lay * mult for a, lay in zip(acc, term)]
            for m in range(L):
                layers[m][j * n:(j + 1) * n, k * n:(k + 1) * n] = acc[m] % mod
        return BlockMatrix(label=label, p=spec.p, prec=prec, denom=sym.denom,
                           layers=layers, t=self.t, block_dim=n, mod_spec=spec,
                           row_rate=min(rates))


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


@dataclass
class BlockMatrix:
    """Square block operator with integer entries over a scalar denominator.

    The true operator is layers/denom; keeping the integral form avoids any
    p-adic division until the characteristic series is extracted, where the
    denominator becomes an exact slope shift.
    """

    label: str
    p: int
    prec: int
    denom: int
    layers: list[np.ndarray]
    t: int
    block_dim: int
    mod_spec: ModuleSpec | None = None
    convention: str = "indicator"
    row_rate: int = 0

    @property
    def dim(self) -> int:
        return self.t * self.block_dim

    @property
    def mod(self) -> int:
        return self.p**self.prec

    @property
    def denom_val(self) -> int:
        return padic_val(self.denom, self.p) if self.denom % self.p == 0 else 0

    @property
    def s_order(self) -> int:
        return len(self.layers) - 1

    def entry(self, r: int, c: int):
        """True entry as a precision-tracked scalar (or s-series)."""
        vals = [PadicScalar.from_int(int(lay[r, c]), self.p, self.prec)
                * PadicScalar.from_rational(Fraction(1, self.denom), self.p, self.prec)
                for lay in self.layers]
        return vals[0] if self.s_order == 0 else SSeries(self.p, tuple(vals))

    def int_product(self, other: "BlockMatrix") -> "BlockMatrix":
        if self.dim != other.dim or self.s_order != other.s_order:
            raise PadicError("dimension mismatch")
        prec = min(self.prec, other.prec)
        mod = self.p**prec
        L = self.s_order + 1
        out = [np.zeros((self.dim, self.dim), dtype=object) for _ in range(L)]
        for i in range(L):
            for j in range(L - i):
                out[i + j] = out[i + j] + self.layers[i] @ other.layers[j]
        return BlockMatrix(f"{self.label}*{other.label}", self.p, prec,
                           self.denom * other.denom, [lay % mod for lay in out],
                           self.t, self.block_dim, self.mod_spec, self.convention)

    def int_sub(self, other: "BlockMatrix") -> "BlockMatrix":
        if self.denom != other.denom:
            raise PadicError("denominator mismatch")
        prec = min(self.prec, other.prec)
        mod = self.p**prec
        layers = [(x - y) % mod for x, y in zip(self.layers, other.layers)]
        return BlockMatrix(f"{self.label}-{other.label}", self.p, prec, self.denom,
                           layers, self.t, self.block_dim, self.mod_spec, self.convention)

    def min_entry_valuation(self, rows=None, cols=None) -> int:
        """Of the true entries (denominator included); prec - v(denom) = clean."""
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
        return best - self.denom_val

    def degree_indices(self, degrees) -> list[int]:
        if self.mod_spec is None:
            raise PadicError("no degree structure on this matrix")
        D = self.mod_spec.degree_cap
        per = self.mod_spec.dim
        return [i * per + a * (D + 1) + j
                for i in range(self.t)
                for a in range(self.p**self.mod_spec.k)
                for j in range(D + 1) if j in degrees]

    def trace_layers(self) -> list[int]:
        return [int(sum(lay[i, i] for i in range(self.dim))) % self.mod for lay in self.layers]

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "p": self.p,
            "precision": self.prec,
            "denominator": self.denom,
            "convention": self.convention,
            "blocks": self.t,
            "block_dim": self.block_dim,
            "s_order": self.s_order,
            "basis": "class block, then coset-degree lexicographic"
                     if self.mod_spec else "class block, then monomial degree",
            "layers": [[[int(v) for v in row] for row in lay] for lay in self.layers],
        }


def invariant_projector(gspace: GlobalSpace, i: int) -> BlockMatrix:
    """Averaging projector onto the stabilizer invariants of one class,
    materialized over its integer form (denominator = stabilizer order)."""
    sym = gspace.projector_symbolic(i)
    mat = gspace.materialize(sym, label=f"proj_{i}")
    return mat


def assemble_hecke(label: str, gspace: GlobalSpace, cosets: HeckeCosetData) -> BlockMatrix:
    """Block Hecke operator: projector-sandwiched coset sums, indicator
    normalization (plain sums over left coset representatives)."""
    sym = gspace.hecke_symbolic(cosets)
    mat = gspace.materialize(sym, label=label)
    return mat


def commutator_min_valuation(gspace: GlobalSpace, ca: HeckeCosetData,
                             cb: HeckeCosetData) -> int:
    """Minimum entry valuation of [A, B] for two assembled operators.

    Both products are expanded into exact element composites before any
    matrix arithmetic, so commuting operators vanish here to working
    precision (less the projector denominators).
    """
    sa = gspace.hecke_symbolic(ca)
    sb = gspace.hecke_symbolic(cb)
    ab = gspace.materialize(sa @ sb, label="ab")
    ba = gspace.materialize(sb @ sa, label="ba")
    diff = ab.int_sub(ba)
    return diff.min_entry_valuation()


# ---------------------------------------------------------------------------
# classical (finite-dimensional) side


def _hom_action_matrix(quad, n: int, weight: TorusCharacter, level: str,
                       p: int, cap: int) -> np.ndarray:
    """Matrix of the weight action of an integral 2x2 matrix on polynomials
    of degree <= n, in the monomial basis: z^m -> (b + dz)^m (a + cz)^(n-m),
    scaled to match the p-power-stripped normalization of the Banach module
    (unit part of det^{n2}, plus the tame Teichmueller twist at iwahori
    level)."""
    mod = p**cap
    a, b, c, d = (x % mod for x in quad)
    n1, n2 = weight.wild
    det = (a * d - b * c) % mod
    out = np.zeros((n + 1, n + 1), dtype=object)
    for m in range(n + 1):
        poly = [0] * (n + 1)
        for i in range(m + 1):
            base = comb(m, i) * pow(b, m - i, mod) * pow(d, i, mod) % mod
            for l in range(n - m + 1):
                coeff = base * comb(n - m, l) * pow(a, n - m - l, mod) * pow(c, l, mod) % mod
                if i + l <= n:
                    poly[i + l] = (poly[i + l] + coeff) % mod
        for jp in range(n + 1):
            out[jp, m] = poly[jp]
    vdet = val_of_residue(det, p, cap)
    unit_det = det // p**vdet % mod
    scalar = (pow(unit_det, n2, mod) if n2 >= 0
              else pow(inv_unit_mod(unit_det, p, cap), -n2, mod))
    if level == "iwahori":
        # the corner entry is a unit for monoid members, making the tame
        # Teichmueller factors constants
        if val_of_residue(a, p, cap):
            raise PadicError("iwahori-level classical action needs a unit corner")
        e1, e2 = weight.tame
        x2 = unit_det * inv_unit_mod(a, p, cap) % mod
        t1 = teichmuller_residue(a, p, cap)
        t2 = teichmuller_residue(x2, p, cap)
        scalar = scalar * pow(t1, (e1 - n1) % (p - 1), mod) \
            * pow(t2, (e2 - n2) % (p - 1), mod) % mod
    elif weight.tame != (n1 % (p - 1), n2 % (p - 1)):
        raise PadicError("tame twists need the iwahori level structure")
    return out * scalar % mod


def classical_brandt(cosets: HeckeCosetData, weight: TorusCharacter,
                     dq: DoubleQuotient, prec: int) -> BlockMatrix:
    """Exact finite Hecke matrix on the stabilizer invariants of the
    degree-n polynomial representation; the independent classical oracle."""
    if isinstance(weight, WeightDisc):
        raise PadicError("classical side needs a pointwise weight")
    if not weight.is_algebraic_point:
        raise PadicError("classical side needs a locally algebraic weight")
    n = weight.dominance_gap()
    if n < 0:
        raise PadicError("non-dominant weight: classical space is zero")
    if not weight_parity_ok(weight):
        raise PadicError("space is zero at this weight (parity)")
    p = dq.p
    cap = prec + 6 * max(1, padic_val(12, p) if 12 % p == 0 else 1)
    mod = p**cap
    t = dq.class_count
    dim = t * (n + 1)
    stabs = [[el.residues(cap) for el in dq.conjugated_stabilizer(i, cap)]
             for i in range(t)]
    denoms = [len(s) for s in stabs]
    lcm = 1
    for d in denoms:
        lcm = lcm * d // _gcd(lcm, d)

    def act(quad):
        return _hom_action_matrix(quad, n, weight, dq.level, p, cap)

    projs = []
    for i in range(t):
        acc = np.zeros((n + 1, n + 1), dtype=object)
        for s in stabs[i]:
            acc = acc + act(s)
        projs.append(acc * (lcm // denoms[i]) % mod)
    big = np.zeros((dim, dim), dtype=object)
    for (j, k), quads in cosets.quads_at(dq, cap).items():
        mid = np.zeros((n + 1, n + 1), dtype=object)
        for m in quads:
            mid = mid + act(m)
        blk = projs[j] @ mid @ projs[k] % mod
        big[j * (n + 1):(j + 1) * (n + 1), k * (n + 1):(k + 1) * (n + 1)] = blk
    return BlockMatrix(label=f"brandt_{cosets.label}", p=p, prec=cap,
                       denom=lcm * lcm, layers=[big], t=t, block_dim=n + 1)


def classical_dimension(weight: TorusCharacter, dq: DoubleQuotient, prec: int = 24) -> int:
    """Dimension of the classical space: sum of traces of the stabilizer
    averaging projectors on the degree-n polynomial representation."""
    if weight.dominance_gap() < 0 or not weight_parity_ok(weight):
        return 0
    n = weight.dominance_gap()
    p = dq.p
    cap = prec
    total = Fraction(0)
    for i in range(dq.class_count):
        stabs = [el.residues(cap) for el in dq.conjugated_stabilizer(i, cap)]
        tr = 0
        for s in stabs:
            m = _hom_action_matrix(s, n, weight, dq.level, p, cap)
            tr += sum(int(m[j, j]) for j in range(n + 1))
        num = tr % p**cap
        # the true trace is a small integer; recover it from the residue
        half = p**cap // 2
        num = num - p**cap if num > half else num
        total += Fraction(num, len(stabs))
    if total.denominator != 1:
        raise PadicError("projector trace is not an integer")
    return int(total)
