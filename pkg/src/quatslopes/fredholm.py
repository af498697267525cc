"""Characteristic series of compact operator truncations and their slopes.

Coefficients come out of a division-free recurrence on the integer-cleared
block matrices; the scalar denominator of an assembled operator turns into
an exact shift of every slope, so no p-adic digits are spent on division.
Certification is two-sided: stability of each coefficient under raising the
degree cutoff, plus the theoretical tail bound coming from the valuation
growth of high-degree rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .assembly import BlockMatrix, GlobalSpace, assemble_hecke, classical_brandt
from .induced import ModuleSpec, MonoidElement
from .padic import (
    PadicError,
    PadicPoly,
    PadicScalar,
    PrecisionError,
    _hull_slopes,
    _lower_hull,
    newton_polygon,
    padic_val,
    val_of_residue,
)
from .quatalg import DoubleQuotient, HeckeCosetData
from .weightspace import SSeries, TorusCharacter, WeightDisc


def charpoly_division_free(m) -> PadicPoly:
    """det(1 - tM) for a square matrix of scalars, by the division-free
    principal-minor recurrence (reversed characteristic polynomial)."""
    rows = [list(r) for r in m]
    n = len(rows)
    if n == 0:
        raise PadicError("empty matrix")
    if any(len(r) != n for r in rows):
        raise PadicError("matrix not square")
    p = rows[0][0].p
    one = PadicScalar.from_int(1, p, rows[0][0].absprec)

    def poly_mul(f, g):
        out = [PadicScalar.zero(p, min(f[0].absprec, g[0].absprec))] * (n + 1)
        for i, a in enumerate(f):
            for j, b in enumerate(g):
                if i + j <= n:
                    out[i + j] = out[i + j] + a * b
        return out[: n + 1]

    P = [one, -rows[0][0]]
    for m_idx in range(1, n):
        R = rows[m_idx][:m_idx]
        C = [rows[i][m_idx] for i in range(m_idx)]
        a = rows[m_idx][m_idx]
        factor = [one, -a]
        v = C
        for _ in range(n - 1):
            q = sum((R[i] * v[i] for i in range(1, m_idx)), R[0] * v[0])
            factor.append(-q)
            if len(factor) > n + 1:
                break
            v = [sum((rows[i][j] * v[j] for j in range(1, m_idx)), rows[i][0] * v[0])
                 for i in range(m_idx)]
        P = poly_mul(P, factor[: n + 1])
    return PadicPoly(p, tuple(P))


def _layered_charpoly(layers: list[np.ndarray], T: int, p: int, prec: int) -> list[list[int]]:
    """Coefficients of det(1 - tM) through t^T for a layered integer matrix;
    returns [t-degree][s-layer] residues mod p^prec."""
    mod = p**prec
    L = len(layers)
    n = layers[0].shape[0]
    T = min(T, n)

    def smul(x, y):
        out = [0] * L
        for i in range(L):
            if x[i] == 0:
                continue
            for j in range(L - i):
                out[i + j] = (out[i + j] + x[i] * y[j]) % mod
        return out

    def poly_mul(f, g):
        out = [[0] * L for _ in range(T + 1)]
        for i, a in enumerate(f):
            if all(v == 0 for v in a):
                continue
            for j, b in enumerate(g):
                if i + j > T:
                    break
                term = smul(a, b)
                tgt = out[i + j]
                for l in range(L):
                    tgt[l] = (tgt[l] + term[l]) % mod
        return out

    def scalar(v):
        return [int(v) % mod] + [0] * (L - 1) if L else [int(v) % mod]

    def entry(i, j):
        return [int(layers[l][i, j]) % mod for l in range(L)]

    P = [[1] + [0] * (L - 1)]
    P += [[0] * L for _ in range(T)]
    first = entry(0, 0)
    P[1] = [(-v) % mod for v in first] if T >= 1 else P[1]
    for m in range(1, n):
        # factor 1 - t a_mm - sum_j t^{j+2} R A^j C on the leading block
        R = [entry(m, i) for i in range(m)]
        C = [entry(i, m) for i in range(m)]
        factor = [[1] + [0] * (L - 1), [(-v) % mod for v in entry(m, m)]]
        v = C
        for _ in range(T - 1):
            q = [0] * L
            for i in range(m):
                term = smul(R[i], v[i])
                for l in range(L):
                    q[l] = (q[l] + term[l]) % mod
            factor.append([(-x) % mod for x in q])
            if len(factor) > T + 1:
                break
            nv = []
            for i in range(m):
                acc = [0] * L
                for j in range(m):
                    e = entry(i, j)
                    if all(x == 0 for x in e):
                        continue
                    term = smul(e, v[j])
                    for l in range(L):
                        acc[l] = (acc[l] + term[l]) % mod
                nv.append(acc)
            v = nv
        P = poly_mul(P, factor[: T + 1])
    return P[: T + 1]


@dataclass
class FredholmSeries:
    """Truncation of det(1 - t * operator) with certification bookkeeping.

    ``cleared[r]`` holds the integer coefficients of det(1 - t * denom * op);
    the true coefficient is cleared[r] / denom^r, and slopes of the true
    operator are slopes of the cleared polynomial minus v_p(denom).
    """

    p: int
    label: str
    cleared: list[list[int]]
    denom: int
    prec: int
    degree_used: int
    tail_floor: int
    s_order: int = 0
    stable: list[bool | None] = field(default_factory=list)
    convention: str = "indicator"
    exact: bool = False  # full characteristic polynomial of an exact matrix

    def __post_init__(self):
        if self.cleared[0][0] != 1 or any(v for v in self.cleared[0][1:]):
            raise PadicError("constant coefficient of a Fredholm series must be 1")
        if not self.stable:
            self.stable = [None] * len(self.cleared)

    @property
    def t_degree(self) -> int:
        return len(self.cleared) - 1

    @property
    def denom_val(self) -> int:
        return padic_val(self.denom, self.p) if self.denom % self.p == 0 else 0

    def certified_mod(self, r: int) -> int:
        """Exponent through which the true coefficient of t^r is known."""
        return min(self.prec, self.tail_floor) - r * self.denom_val

    def coefficient(self, r: int):
        vals = [
            PadicScalar.from_int(v, self.p, self.prec)
            * PadicScalar.from_rational(Fraction(1, self.denom**r), self.p, self.prec)
            for v in self.cleared[r]
        ]
        return vals[0] if self.s_order == 0 else SSeries(self.p, tuple(vals))

    def coefficients(self):
        return [self.coefficient(r) for r in range(self.t_degree + 1)]

    def specialize(self, s0: PadicScalar) -> "FredholmSeries":
        if self.s_order == 0:
            return self
        mod = self.p**self.prec
        res = s0.residue(min(self.prec, s0.absprec)) if not s0.is_zeroish else 0
        cleared = []
        for layer_vals in self.cleared:
            acc = 0
            for v in reversed(layer_vals):
                acc = (acc * res + v) % mod
            cleared.append([acc])
        return FredholmSeries(self.p, f"{self.label}|s", cleared, self.denom,
                              self.prec, self.degree_used, self.tail_floor, 0,
                              list(self.stable), self.convention)

    def to_padic_poly(self) -> PadicPoly:
        """Coefficients as scalars at their honest certified precision."""
        if self.s_order != 0:
            raise PadicError("specialize the family before extracting slopes")
        coeffs = []
        for r in range(self.t_degree + 1):
            cm = self.certified_mod(r)
            if cm <= 0:
                coeffs.append(PadicScalar.zero(self.p, 1))
                continue
            coeffs.append(_true_coeff(self.cleared[r][0], self.denom, r, self.p, cm))
        return PadicPoly(self.p, tuple(coeffs))

    def slope_table(self, normalized: bool = False) -> "SlopeTable":
        """Newton slopes of the true operator, from the cleared integer form.

        A slope is reported only when both endpoints of its polygon segment
        are resolved, certified coefficients, and no coefficient of smaller
        degree is unresolved (which would let the hull dip below the reported
        segments).  The provable-range bound is emitted alongside; when every
        coefficient of the full characteristic polynomial resolves there is
        no bound to report.
        """
        if self.s_order != 0:
            raise PadicError("specialize the family before extracting slopes")
        cap = min(self.prec, self.tail_floor)
        points = []
        resolved = []
        for r, vals in enumerate(self.cleared):
            v = val_of_residue(vals[0], self.p, self.prec)
            ok = v < cap and self.stable[r] is not False
            resolved.append(ok)
            if ok:
                points.append((r, v))
        hull = _lower_hull(points)
        segs = _hull_slopes(hull)
        shift = Fraction(self.denom_val)
        if normalized and self.label.upper().startswith("U"):
            shift += 1  # mass-one normalization divides U_p by its coset count
        if self.exact:
            # full polygon of an exact matrix: every finite slope is right,
            # and unresolved coefficients only hide slopes above the bound
            # at which their precision floor could intrude on the hull
            trusted = None
            for r, ok in enumerate(resolved):
                if not ok and r > 0:
                    intrusion = min(Fraction(cap - y, r - x) for x, y in hull if x < r)
                    trusted = intrusion if trusted is None else min(trusted, intrusion)
            slopes = tuple((s - shift, m) for s, m in segs
                           if trusted is None or s <= trusted)
            return SlopeTable(slopes, None if trusted is None else trusted - shift,
                              "normalized" if normalized else "indicator")
        # truncated regime: a slope counts when both endpoints of its segment
        # are resolved certified coefficients and nothing below is unresolved
        r_solid = 0
        while r_solid + 1 < len(resolved) and resolved[r_solid + 1]:
            r_solid += 1
        certified = []
        for (_, _), (x2, _), (sl, mult) in zip(hull, hull[1:], segs):
            if x2 <= r_solid:
                certified.append((sl, mult))
            else:
                break
        slopes = tuple((s - shift, m) for s, m in certified)
        trusted = slopes[-1][0] if slopes else Fraction(-1) - shift
        return SlopeTable(slopes, trusted,
                          "normalized" if normalized else "indicator")

    def agreement_valuation(self, other: "FredholmSeries", through: int | None = None) -> int:
        """Valuation through which true coefficients of the two series agree."""
        if self.denom != other.denom:
            raise PadicError("series have different denominators")
        through = self.t_degree if through is None else through
        best = min(self.certified_mod(0), other.certified_mod(0))
        for r in range(1, through + 1):
            cap = min(self.certified_mod(r), other.certified_mod(r))
            for l in range(self.s_order + 1):
                d = (self.cleared[r][l] - other.cleared[r][l]) % self.p**self.prec
                dv = val_of_residue(d, self.p, self.prec) - r * self.denom_val
                best = min(best, min(dv, cap))
        return best

    def to_json(self) -> dict:
        out = {
            "label": self.label,
            "p": self.p,
            "denominator": self.denom,
            "degree_cutoff": self.degree_used,
            "convention": self.convention,
            "coefficients": [],
        }
        for r in range(self.t_degree + 1):
            c = self.coefficient(r)
            out["coefficients"].append({
                "t_degree": r,
                "value": str(c) if self.s_order == 0 else c.to_json(),
                "certified_mod_exponent": self.certified_mod(r),
                "stable_under_degree_scan": self.stable[r],
            })
        return out


def _true_coeff(g: int, denom: int, r: int, p: int, cm: int) -> PadicScalar:
    c = PadicScalar.from_int(g, p, cm + r * (padic_val(denom, p) if denom % p == 0 else 0))
    return c * PadicScalar.from_rational(Fraction(1, denom**r), p, c.absprec)


@dataclass(frozen=True)
class SlopeTable:
    """Slopes with multiplicities, plus the largest provable slope."""

    slopes: tuple[tuple[Fraction, int], ...]
    certified_up_to: Fraction | None
    convention: str = "indicator"

    def below(self, bound: Fraction) -> list[tuple[Fraction, int]]:
        return [(s, m) for s, m in self.slopes if s < bound]

    def covers(self, bound: Fraction) -> bool:
        return self.certified_up_to is None or self.certified_up_to >= bound

    def to_json(self) -> dict:
        return {
            "slopes": [{"slope": str(s), "mult": m} for s, m in self.slopes],
            "certified_up_to_slope": None if self.certified_up_to is None
            else str(self.certified_up_to),
            "convention": self.convention,
        }

    def to_csv(self) -> str:
        lines = ["slope,mult"]
        lines += [f"{s},{m}" for s, m in self.slopes]
        return "\n".join(lines) + "\n"


def fredholm_series(B: BlockMatrix, T: int) -> FredholmSeries:
    """Truncated characteristic series of a block operator.

    High-degree rows of a compact-type operator vanish to working precision,
    so the matrix is first compressed to the degree range that can affect
    the result; the dropped tail is the source of the tail certificate.
    """
    layers = B.layers
    degree_used = B.mod_spec.degree_cap if B.mod_spec else B.block_dim - 1
    tail_floor = B.prec
    if B.mod_spec is not None and B.row_rate >= 1:
        cut = B.prec + B.denom_val + ModuleSpec._fact_loss(B.mod_spec) + 1
        if cut < B.mod_spec.degree_cap:
            keep = B.degree_indices(set(range(cut + 1)))
            layers = [lay[np.ix_(keep, keep)] for lay in layers]
        tail_floor = degree_used + 1
    elif B.mod_spec is not None:
        # no compactness floor: nothing certifies the truncation tail
        tail_floor = 0 if T > 0 else B.prec
    if T > layers[0].shape[0]:
        T = layers[0].shape[0]
    cleared = _layered_charpoly(layers, T, B.p, B.prec)
    exact = B.mod_spec is None and T >= B.dim
    return FredholmSeries(B.p, B.label, cleared, B.denom, B.prec,
                          degree_used, tail_floor, B.s_order,
                          convention=B.convention, exact=exact)


def stabilization_scan(build: Callable[[int], FredholmSeries],
                       degree_list: list[int], T: int) -> FredholmSeries:
    """Recompute the series along ascending degree cutoffs and certify.

    A coefficient is marked stable when the last two runs agree on it at
    working precision; agreement must be monotone along the scan, anything
    else flags insufficient precision or a bug.
    """
    if len(degree_list) < 2 or sorted(degree_list) != list(degree_list):
        raise PadicError("need an ascending list of at least two degree cutoffs")
    runs = [build(D) for D in degree_list]
    T = min(T, min(r.t_degree for r in runs))

    def agree(r1, r2, r):
        cap = min(r1.certified_mod(r), r2.certified_mod(r), r1.prec)
        if cap <= 0:
            return False
        for l in range(r1.s_order + 1):
            d = (r1.cleared[r][l] - r2.cleared[r][l]) % r1.p**r1.prec
            if d and val_of_residue(d, r1.p, r1.prec) - r * r1.denom_val < cap:
                return False
        return True

    final = runs[-1]
    stable = []
    for r in range(T + 1):
        history = [agree(runs[i], runs[i + 1], r) for i in range(len(runs) - 1)]
        if any(a and not b for a, b in zip(history, history[1:])):
            raise PrecisionError(f"non-monotone agreement for coefficient {r}")
        ok = history[-1] and final.certified_mod(r) > 0
        stable.append(bool(ok))
    out = FredholmSeries(final.p, final.label, final.cleared[: T + 1], final.denom,
                         final.prec, final.degree_used, final.tail_floor,
                         final.s_order, stable, final.convention)
    return out


def certified_t_degree(series: FredholmSeries) -> int:
    """Largest t-degree with a stability certificate (0 when none)."""
    last = 0
    for r, flag in enumerate(series.stable):
        if flag:
            last = r
        elif flag is False:
            break
    return last


def small_slope_bound(weight: TorusCharacter, eta=None) -> Fraction:
    """(n+1) times the contraction exponent of eta: slopes strictly below it
    belong to classical forms."""
    if not weight.is_algebraic_point:
        weight = TorusCharacter(weight.p, weight.tame, weight.wild)
    n = weight.dominance_gap()
    if n < 0:
        raise PadicError("non-dominant weight has no small-slope range")
    if eta is None:
        f = 1
    elif isinstance(eta, MonoidElement):
        f = eta.entries[1][1].valuation() - eta.entries[0][0].valuation()
    else:
        f = padic_val(eta[1], weight.p) - (padic_val(eta[0], weight.p) if eta[0] != 1 else 0)
    if f < 1:
        raise PadicError("eta must contract: positive valuation gap required")
    return Fraction((n + 1) * f)


@dataclass(frozen=True)
class ClassicalityReport:
    passed: bool
    bound: Fraction
    overconvergent_below: tuple[tuple[Fraction, int], ...]
    classical_below: tuple[tuple[Fraction, int], ...]
    discrepancies: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "verdict": "PASS" if self.passed else "FAIL",
            "bound": str(self.bound),
            "overconvergent_slopes_below": [[str(s), m] for s, m in self.overconvergent_below],
            "classical_slopes_below": [[str(s), m] for s, m in self.classical_below],
            "discrepancies": list(self.discrepancies),
        }


def classicality_compare(overconvergent: SlopeTable, classical: SlopeTable,
                         bound: Fraction) -> ClassicalityReport:
    """PASS iff the slope multisets strictly below the bound coincide."""
    for name, table in (("overconvergent", overconvergent), ("classical", classical)):
        if not table.covers(bound):
            raise PrecisionError(
                f"{name} table only certified up to {table.certified_up_to} < {bound}")
    oc = dict(overconvergent.below(bound))
    cl = dict(classical.below(bound))
    issues = []
    for s in sorted(set(oc) | set(cl)):
        a, b = oc.get(s, 0), cl.get(s, 0)
        if a != b:
            issues.append(f"slope {s}: overconvergent multiplicity {a}, classical {b}")
    return ClassicalityReport(not issues, bound,
                              tuple(sorted(oc.items())), tuple(sorted(cl.items())),
                              tuple(issues))


# ---------------------------------------------------------------------------
# pipelines at fixed global data


def operator_series(weight, label: str, dq: DoubleQuotient, cosets: HeckeCosetData,
                    *, k: int = 1, degree_cap: int, T: int, prec: int) -> FredholmSeries:
    """Assemble one Hecke operator at the given weight and take its series."""
    spec = ModuleSpec(dq.p, k, weight, degree_cap, prec)
    gspace = GlobalSpace(spec, dq)
    return fredholm_series(assemble_hecke(label, gspace, cosets), T)


def family_series(disc: WeightDisc, label: str, dq: DoubleQuotient,
                  cosets: HeckeCosetData, *, k: int | None = None,
                  degree_cap: int, T: int, prec: int) -> FredholmSeries:
    """Two-variable series det(1 - t op) mod (s^(S+1), t^(T+1)) over a disc."""
    k = disc.analyticity_radius() if k is None else k
    return operator_series(disc, label, dq, cosets, k=k, degree_cap=degree_cap,
                           T=T, prec=prec)


def link_invariance(weight, label: str, dq: DoubleQuotient, cosets: HeckeCosetData,
                    *, k: int, degree_cap: int, T: int, prec: int) -> int:
    """Valuation through which the series at radii k and k+1 agree."""
    s1 = operator_series(weight, label, dq, cosets, k=k, degree_cap=degree_cap,
                         T=T, prec=prec)
    s2 = operator_series(weight, label, dq, cosets, k=k + 1, degree_cap=degree_cap,
                         T=T, prec=prec)
    return s1.agreement_valuation(s2, through=T)


def classical_series(weight: TorusCharacter, label: str, dq: DoubleQuotient,
                     cosets: HeckeCosetData, prec: int) -> FredholmSeries:
    """Characteristic series of the exact classical (finite) Hecke matrix.

    The matrix is tiny, so precision is raised until the whole polygon
    resolves (slope sums grow with the weight and the dimension)."""
    n = weight.dominance_gap()
    dim = dq.class_count * (n + 1)
    extra = (n + 4) * (dim + 2) + 8
    B = classical_brandt(cosets, weight, dq, prec + extra)
    return fredholm_series(B, B.dim)


# ---------------------------------------------------------------------------
# eigenvector extraction for simple slopes


def padic_poly_root(series: FredholmSeries, slope: Fraction) -> PadicScalar | None:
    """Reciprocal root (eigenvalue) of valuation `slope`, for a simple
    Newton segment, by Newton iteration on the cleared reversed polynomial."""
    if slope.denominator != 1:
        return None
    p = series.p
    prec = min(series.prec, series.tail_floor)
    mod = p**prec
    coeffs = [v[0] % mod for v in series.cleared]
    sigma = int(slope) + series.denom_val
    pts = [(r, val_of_residue(c, p, prec)) for r, c in enumerate(coeffs)]
    idx = None
    for r in range(len(pts) - 1):
        if pts[r + 1][1] - pts[r][1] == sigma and all(
                pts[i][1] >= pts[r][1] + (i - r) * sigma - 1e-9 for i in range(len(pts))):
            idx = r
            break
    if idx is None:
        return None
    lam = PadicScalar.from_int(-coeffs[idx + 1], p, prec).invert() * \
        PadicScalar.from_int(coeffs[idx], p, prec)
    # lam approximates an eigenvalue of the cleared matrix; refine on
    # H(x) = sum_r c_r x^{T-r} (roots are the eigenvalues)
    T = len(coeffs) - 1
    cs = [PadicScalar.from_int(c, p, prec) for c in coeffs]

    def H(x):
        acc = PadicScalar.zero(p, prec + 40)
        for r, c in enumerate(cs):
            acc = acc + c * x ** (T - r)
        return acc

    def Hp(x):
        acc = PadicScalar.zero(p, prec + 40)
        for r, c in enumerate(cs[:-1]):
            e = T - r
            acc = acc + PadicScalar.from_int(e, p, prec) * c * x ** (e - 1)
        return acc

    for _ in range(40):
        val = H(lam)
        if val.is_zeroish:
            break
        dv = Hp(lam)
        if dv.is_zeroish:
            return None
        step = val * dv.invert()
        lam = lam - step
        if step.is_zeroish or step.valuation_floor() > prec:
            break
    if not lam.is_zeroish and lam.valuation() == sigma:
        # undo the clearing: true eigenvalue = lam / denom
        return lam * PadicScalar.from_rational(Fraction(1, series.denom), p, prec)
    return None


def eigenvector_mod(B: BlockMatrix, lam_cleared: PadicScalar) -> np.ndarray | None:
    """Kernel vector of (cleared matrix - lam) mod p^prec, unit pivots first."""
    p = B.p
    prec = B.prec
    mod = p**prec
    n = B.dim
    A = np.array([[int(B.layers[0][i, j]) % mod for j in range(n)] for i in range(n)],
                 dtype=object)
    lam = lam_cleared.residue(prec) if lam_cleared.val >= 0 else None
    if lam is None:
        return None
    for i in range(n):
        A[i, i] = (A[i, i] - lam) % mod
    col_of_row = {}
    used_cols = set()
    for _ in range(n - 1):
        pivot = None
        for i in range(n):
            if i in col_of_row:
                continue
            for j in range(n):
                if j in used_cols:
                    continue
                if int(A[i, j]) % p:
                    pivot = (i, j)
                    break
            if pivot:
                break
        if pivot is None:
            break
        pi, pj = pivot
        inv = pow(int(A[pi, pj]), -1, mod)
        for i in range(n):
            if i == pi:
                continue
            f = int(A[i, pj]) * inv % mod
            if f:
                A[i, :] = (A[i, :] - f * A[pi, :]) % mod
        col_of_row[pi] = pj
        used_cols.add(pj)
    free = [j for j in range(n) if j not in used_cols]
    if len(free) != 1:
        return None
    x = np.zeros(n, dtype=object)
    x[free[0]] = 1
    for pi, pj in col_of_row.items():
        inv = pow(int(A[pi, pj]), -1, mod)
        x[pj] = (-int(A[pi, free[0]]) * inv) % mod
    return x
