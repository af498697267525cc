"""Hurwitz quaternion arithmetic and the finite global data of the pipeline.

The quaternion algebra is (-1,-1) over Q with its maximal order; class
number one reduces every adelic double quotient here to orbits of the unit
group on the projective line mod p, which is verified at runtime through the
mass identity.  Coset data for Hecke operators is produced as matrices
conjugated into a standard frame per class, ready for the local action.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction

from .padic import PadicError, inv_unit_mod, padic_val, val_of_residue
from .induced import MonoidElement, monoid_membership


@dataclass(frozen=True)
class HurwitzQuat:
    """Quaternion (a + bi + cj + dk)/2 with integer a,b,c,d of equal parity."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        par = self.a % 2
        if any(x % 2 != par for x in (self.b, self.c, self.d)):
            raise PadicError("coefficients must share parity")

    @classmethod
    def from_integral(cls, a, b, c, d) -> "HurwitzQuat":
        return cls(2 * a, 2 * b, 2 * c, 2 * d)

    def key(self):
        return (self.a, self.b, self.c, self.d)

    def __mul__(self, o: "HurwitzQuat") -> "HurwitzQuat":
        a1, b1, c1, d1 = self.key()
        a2, b2, c2, d2 = o.key()
        return HurwitzQuat(
            (a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2) // 2,
            (a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2) // 2,
            (a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2) // 2,
            (a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2) // 2,
        )

    def conj(self) -> "HurwitzQuat":
        return HurwitzQuat(self.a, -self.b, -self.c, -self.d)

    def __neg__(self) -> "HurwitzQuat":
        return HurwitzQuat(-self.a, -self.b, -self.c, -self.d)

    def nrd(self) -> int:
        return (self.a**2 + self.b**2 + self.c**2 + self.d**2) // 4

    def is_unit(self) -> bool:
        return self.nrd() == 1


ONE = HurwitzQuat(2, 0, 0, 0)


def unit_group() -> list[HurwitzQuat]:
    """The 24 units: +-1, +-i, +-j, +-k and (+-1 +-i +-j +-k)/2."""
    out = []
    for i in range(4):
        for s in (2, -2):
            coeffs = [0, 0, 0, 0]
            coeffs[i] = s
            out.append(HurwitzQuat(*coeffs))
    for signs in itertools.product((1, -1), repeat=4):
        out.append(HurwitzQuat(*signs))
    return sorted(out, key=HurwitzQuat.key)


def units_mod_center() -> list[HurwitzQuat]:
    """One representative of each pair {u, -u}."""
    return [u for u in unit_group() if u.key() > (-u).key()]


def enumerate_norm(n: int) -> list[HurwitzQuat]:
    """All order elements of reduced norm n, by exhaustive coefficient search."""
    if n < 1:
        raise PadicError("positive norm required")
    target = 4 * n
    bound = int(target**0.5)
    out = []
    for parity in (0, 1):
        start = -bound if (-bound) % 2 == parity else -bound + 1
        for a in range(start, bound + 1, 2):
            ra = target - a * a
            if ra < 0:
                continue
            lb = int(ra**0.5)
            sb = -lb if (-lb) % 2 == parity else -lb + 1
            for b in range(sb, lb + 1, 2):
                rb = ra - b * b
                if rb < 0:
                    continue
                lc = int(rb**0.5)
                sc = -lc if (-lc) % 2 == parity else -lc + 1
                for c in range(sc, lc + 1, 2):
                    rc = rb - c * c
                    if rc < 0:
                        continue
                    d = int(rc**0.5)
                    if d * d != rc or d % 2 != parity:
                        continue
                    out.append(HurwitzQuat(a, b, c, d))
                    if d:
                        out.append(HurwitzQuat(a, b, c, -d))
    return sorted(out, key=HurwitzQuat.key)


@dataclass(frozen=True)
class SplittingData:
    """Embedding of the order into 2x2 matrices over Z_p, p odd.

    i maps to (alpha beta; beta -alpha) and j to (0 1; -1 0), where
    alpha^2 + beta^2 = -1 in Z_p.
    """

    p: int
    prec: int
    alpha: int
    beta: int

    def lifted(self, cap: int) -> "SplittingData":
        """Same splitting carried to at least cap digits (Hensel is
        deterministic, so this extends rather than changes the data)."""
        if cap <= self.prec:
            return self
        return split_at_p(self.p, cap)

    def image(self, q: HurwitzQuat, cap: int | None = None) -> tuple[int, int, int, int]:
        """Matrix image (entries as residues); coefficients of 1/2 are resolved
        p-adically since p is odd."""
        cap = cap or self.prec
        if cap > self.prec:
            raise PadicError("splitting carries fewer digits than requested")
        mod = self.p**cap
        half = inv_unit_mod(2, self.p, cap)
        a, b, c, d = (x * half % mod for x in q.key())
        al, be = self.alpha % mod, self.beta % mod
        return (
            (a + b * al - d * be) % mod,
            (b * be + c + d * al) % mod,
            (b * be - c + d * al) % mod,
            (a - b * al + d * be) % mod,
        )

    def image_mod_p(self, q: HurwitzQuat) -> tuple[int, int, int, int]:
        return tuple(x % self.p for x in self.image(q, 1))


def split_at_p(p: int, prec: int) -> SplittingData:
    """Hensel-lift the first solution of alpha^2 + beta^2 = -1 mod p."""
    if p == 2:
        raise PadicError("the algebra is ramified at 2; choose an odd prime")
    if p < 2 or any(p % r == 0 for r in range(2, int(p**0.5) + 1)):
        raise PadicError(f"{p} is not prime")
    sol = None
    for alpha in range(p):
        for beta in range(p):
            if (alpha * alpha + beta * beta + 1) % p == 0:
                sol = (alpha, beta)
                break
        if sol:
            break
    alpha, beta = sol
    lift_first = alpha % p != 0
    mod = p**prec
    for _ in range(prec.bit_length() + 1):
        f = (alpha * alpha + beta * beta + 1) % mod
        if lift_first:
            alpha = (alpha - f * inv_unit_mod(2 * alpha % mod, p, prec)) % mod
        else:
            beta = (beta - f * inv_unit_mod(2 * beta % mod, p, prec)) % mod
    assert (alpha * alpha + beta * beta + 1) % mod == 0
    return SplittingData(p, prec, alpha, beta)


# ---------------------------------------------------------------------------
# projective line over F_p and frames


def p1_points(p: int) -> list[int]:
    """Points of P^1(F_p): x in 0..p-1 encodes [x:1], p encodes [1:0]."""
    return list(range(p + 1))


def p1_act(m: tuple[int, int, int, int], pt: int, p: int) -> int:
    a, b, c, d = m
    x, y = (pt, 1) if pt < p else (1, 0)
    xx, yy = (a * x + b * y) % p, (c * x + d * y) % p
    if yy % p:
        return xx * inv_unit_mod(yy, p, 1) % p
    if xx % p == 0:
        raise PadicError("matrix not invertible mod p")
    return p


def frame_matrix(pt: int, p: int) -> tuple[int, int, int, int]:
    """Integer matrix carrying [1:0] (the line fixed by the Iwahori group) to pt."""
    if pt == p:
        return (1, 0, 0, 1)
    return (pt, 1, 1, 0)


def frame_inverse(pt: int, p: int) -> tuple[int, int, int, int]:
    if pt == p:
        return (1, 0, 0, 1)
    return (0, 1, 1, -pt)  # inverse of (pt 1; 1 0)


def _mat_mul(x, y, mod=None):
    a = (x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3],
         x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3])
    if mod:
        return tuple(v % mod for v in a)
    return a


@dataclass(frozen=True)
class QuotientClass:
    point: int | None  # None at maximal level
    frame: tuple[int, int, int, int]
    frame_inv: tuple[int, int, int, int]
    stabilizer: tuple[HurwitzQuat, ...]  # representatives mod center


@dataclass(frozen=True)
class DoubleQuotient:
    """Classes of the adelic double quotient with stabilizers and frames."""

    p: int
    level: str  # "maximal" | "iwahori"
    classes: tuple[QuotientClass, ...]
    splitting: SplittingData

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def stab_order(self, i: int) -> int:
        return len(self.classes[i].stabilizer)

    def mass(self) -> Fraction:
        return sum((Fraction(1, self.stab_order(i)) for i in range(self.class_count)),
                   Fraction(0))

    def conjugated_stabilizer(self, i: int, cap: int) -> list[MonoidElement]:
        """Stabilizer images g_i^{-1} u g_i, which land in the Iwahori group."""
        cl = self.classes[i]
        out = []
        mod = self.p**cap
        split = self.splitting.lifted(cap)
        for u in cl.stabilizer:
            m = _mat_mul(_mat_mul(cl.frame_inv, split.image(u, cap)), cl.frame, mod)
            out.append(MonoidElement.from_ints(self.p, m, cap))
        return out

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "level": self.level,
            "mass": str(self.mass()),
            "classes": [
                {
                    "point": cl.point,
                    "frame": list(cl.frame),
                    "stabilizer": [list(u.key()) for u in cl.stabilizer],
                }
                for cl in self.classes
            ],
        }


def build_double_quotient(p: int, level: str, prec: int) -> DoubleQuotient:
    """Orbits of the unit group on P^1(F_p) (iwahori) or the single class
    (maximal), with stabilizers; relies on class number one, which the mass
    identity re-verifies."""
    if level not in ("maximal", "iwahori"):
        raise PadicError(f"unknown level structure: {level}")
    split = split_at_p(p, prec)
    reps = units_mod_center()
    if level == "maximal":
        cls = QuotientClass(None, (1, 0, 0, 1), (1, 0, 0, 1), tuple(reps))
        dq = DoubleQuotient(p, level, (cls,), split)
        if dq.mass() != Fraction(1, 12):
            raise PadicError("mass identity failed: the order is not what it should be")
        return dq
    images = {u: split.image_mod_p(u) for u in reps}
    unseen = set(p1_points(p))
    classes = []
    while unseen:
        base = min(unseen)
        orbit = {base}
        frontier = [base]
        while frontier:
            x = frontier.pop()
            for m in images.values():
                y = p1_act(m, x, p)
                if y not in orbit:
                    orbit.add(y)
                    frontier.append(y)
        stab = tuple(u for u in reps if p1_act(images[u], base, p) == base)
        if len(stab) * len(orbit) != len(reps):
            raise PadicError("orbit-stabilizer mismatch")
        classes.append(QuotientClass(base, frame_matrix(base, p),
                                     frame_inverse(base, p), stab))
        unseen -= orbit
    return DoubleQuotient(p, "iwahori", tuple(classes), split)


# ---------------------------------------------------------------------------
# Hecke coset data


@dataclass(frozen=True)
class HeckeCosetData:
    """Per-(target, source)-class lists of local coset representatives.

    Entries of block (j,k) are the p-components of global elements carrying
    class k to class j, conjugated into the standard frame; every one of
    them lies in the acting monoid, and row degree sums are the operator
    degree (q+1, or p for the operator at p).
    """

    label: str
    p: int
    cap: int
    blocks: dict[tuple[int, int], list[tuple[HurwitzQuat, tuple[int, int, int, int]]]]

    def degree(self, j: int, t: int) -> int:
        return sum(len(self.blocks.get((j, k), ())) for k in range(t))

    def monoid_elements(self, j: int, k: int) -> list[MonoidElement]:
        return [MonoidElement.from_ints(self.p, m, self.cap)
                for _, m in self.blocks.get((j, k), ())]

    def quads_at(self, dq: "DoubleQuotient", cap: int) -> dict[tuple[int, int], list]:
        """Conjugated local matrices at a requested precision, re-derived from
        the stored quaternions when the cached residues are too short."""
        if cap <= self.cap:
            mod = self.p**cap
            return {jk: [tuple(v % mod for v in m) for _, m in entries]
                    for jk, entries in self.blocks.items()}
        split = dq.splitting.lifted(cap)
        mod = self.p**cap
        out = {}
        for (j, k), entries in self.blocks.items():
            out[(j, k)] = [
                _mat_mul(_mat_mul(dq.classes[j].frame_inv, split.image(q, cap)),
                         dq.classes[k].frame, mod)
                for q, _ in entries]
        return out

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "p": self.p,
            "precision": self.cap,
            "blocks": {
                f"{j},{k}": [{"quaternion": list(q.key()), "matrix": list(m)}
                             for q, m in entries]
                for (j, k), entries in sorted(self.blocks.items())
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "HeckeCosetData":
        blocks = {}
        for key, entries in data["blocks"].items():
            j, k = (int(x) for x in key.split(","))
            blocks[(j, k)] = [(HurwitzQuat(*e["quaternion"]), tuple(e["matrix"]))
                              for e in entries]
        return cls(data["label"], data["p"], data["precision"], blocks)


def parse_operator_label(label: str, p: int) -> tuple[str, int]:
    kind = label[0].upper()
    arg = int(label[1:].lstrip("_"))
    if kind == "U":
        if arg != p:
            raise PadicError(f"operator U_{arg} does not act at p={p}")
        return ("U", p)
    if kind == "T":
        if arg in (2, p) or any(arg % r == 0 for r in range(2, int(arg**0.5) + 1)) or arg < 3:
            raise PadicError(f"operator T_{arg} requires an odd prime away from 2 and {p}")
        return ("T", arg)
    raise PadicError(f"unknown operator label {label}")


def _right_unit_cosets(elements: list[HurwitzQuat]) -> list[HurwitzQuat]:
    """Representatives of x O^* , lexicographically least in each coset."""
    units = unit_group()
    seen = set()
    reps = []
    for x in sorted(elements, key=HurwitzQuat.key):
        if x.key() in seen:
            continue
        orbit = sorted((x * u for u in units), key=HurwitzQuat.key)
        reps.append(orbit[0])
        seen.update(y.key() for y in orbit)
    return reps


def _canonical_in_coset(x: HurwitzQuat, stab_full: list[HurwitzQuat],
                        rng=None, prefer=None) -> HurwitzQuat:
    orbit = sorted((x * s for s in stab_full), key=HurwitzQuat.key)
    if prefer is not None:
        good = [y for y in orbit if prefer(y)]
        orbit = good or orbit
    if rng is not None:
        return orbit[rng.randrange(len(orbit))]
    return orbit[0]


def hecke_coset_data(label: str, dq: DoubleQuotient, *, cap: int | None = None,
                     rng=None) -> HeckeCosetData:
    """Coset representatives of one Hecke operator, sorted into class blocks.

    ``rng`` draws non-canonical representatives inside each coset; assembled
    operators must not depend on that choice beyond working precision.
    """
    p = dq.p
    cap = cap or dq.splitting.prec
    kind, q = parse_operator_label(label, p)
    if kind == "U" and dq.level != "iwahori":
        raise PadicError("the operator at p needs the iwahori level structure")
    t = dq.class_count
    split = dq.splitting
    blocks: dict[tuple[int, int], list] = {}
    full_stabs = []
    for cl in dq.classes:
        full_stabs.append([s for u in cl.stabilizer for s in (u, -u)])

    def conj_frame(j, k, gamma):
        return _mat_mul(_mat_mul(dq.classes[j].frame_inv, split.image(gamma, cap)),
                        dq.classes[k].frame, p**cap)

    def in_monoid(j, k):
        def check(gamma):
            try:
                return monoid_membership(MonoidElement.from_ints(p, conj_frame(j, k, gamma), cap))
            except PadicError:
                return False
        return check

    def push(j, k, gamma):
        # at maximal level the stabilizer is the whole unit group, which always
        # allows a monoid representative for small p; prefer one when available
        gamma = _canonical_in_coset(gamma, full_stabs[k], rng, prefer=in_monoid(j, k))
        m = conj_frame(j, k, gamma)
        el = MonoidElement.from_ints(p, m, cap)
        if dq.level == "iwahori" and not monoid_membership(el):
            raise PadicError("conjugated representative fell outside the monoid")
        vdet = val_of_residue(m[0] * m[3] - m[1] * m[2], p, cap)
        if vdet != (1 if kind == "U" else 0):
            raise PadicError("wrong determinant valuation for this operator")
        blocks.setdefault((j, k), []).append((gamma, m))

    if kind == "T":
        cosets = _right_unit_cosets(enumerate_norm(q))
        if len(cosets) != q + 1:
            raise PadicError(f"expected {q + 1} cosets of norm-{q} elements")
        for j, cl_j in enumerate(dq.classes):
            for gamma in cosets:
                if dq.level == "maximal":
                    push(j, 0, gamma)
                    continue
                gbar = split.image_mod_p(gamma)
                adj = (gbar[3], -gbar[1], -gbar[2], gbar[0])
                y = p1_act(adj, cl_j.point, p)
                k, delta = _locate_point(dq, y)
                push(j, k, gamma * delta)
    else:
        norm_p = enumerate_norm(p)
        for j in range(t):
            for k in range(t):
                found: list[HurwitzQuat] = []
                taken = set()
                for gamma in norm_p:
                    if gamma.key() in taken:
                        continue
                    m = _mat_mul(_mat_mul(dq.classes[j].frame_inv, split.image(gamma, cap)),
                                 dq.classes[k].frame, p**cap)
                    el = MonoidElement.from_ints(p, m, cap)
                    try:
                        ok = monoid_membership(el)
                    except PadicError:
                        ok = False
                    if ok:
                        found.append(gamma)
                        taken.update((gamma * s).key() for s in full_stabs[k])
                for gamma in found:
                    push(j, k, gamma)
        for j in range(t):
            deg = sum(len(blocks.get((j, k), ())) for k in range(t))
            if deg != p:
                raise PadicError(f"degree identity failed for U_{p} at class {j}: {deg}")
    data = HeckeCosetData(label, p, cap, blocks)
    expected = q + 1 if kind == "T" else p
    for j in range(t):
        if data.degree(j, t) != expected:
            raise PadicError(f"degree identity failed for {label} at class {j}")
    return data


def _locate_point(dq: DoubleQuotient, y: int):
    """Class index of the orbit of y and a unit carrying the class point to y."""
    for k, cl in enumerate(dq.classes):
        for u in units_mod_center():
            if p1_act(dq.splitting.image_mod_p(u), cl.point, dq.p) == y:
                return k, u
    raise PadicError("point not covered by any orbit")


def save_json(obj, path: str):
    with open(path, "w") as fh:
        json.dump(obj.to_json() if hasattr(obj, "to_json") else obj, fh, indent=2, sort_keys=True)
