import random

import numpy as np
import pytest

from quatslopes.induced import (
    BasisIndex,
    MembershipError,
    ModuleSpec,
    MonoidElement,
    act_on_basis,
    classical_inclusion,
    iwahori_factorize,
    link_pair,
    monoid_membership,
    operator_matrix,
    radius_inclusion,
    torus_weight,
)
from quatslopes.padic import PadicScalar, val_of_residue
from quatslopes.weightspace import TorusCharacter, eval_extended

P = 3
PREC = 18


def M(quad, p=P, prec=PREC + 8):
    return MonoidElement.from_ints(p, quad, prec)


def spec_for(n1=0, n2=0, k=1, D=12, prec=PREC, p=P):
    return ModuleSpec(p, k, TorusCharacter.algebraic(p, n1, n2), D, prec)


def eval_expansion(mat, col, z, spec, k_rows=None):
    """Point-evaluation oracle: sum of entries times e_{a,j}(z)."""
    p = spec.p
    k = k_rows if k_rows is not None else spec.k
    pk = p**k
    D = spec.degree_cap
    acc = PadicScalar.zero(p, mat.prec)
    a = z.residue(k) % pk if not z.is_zeroish else 0
    for j in range(D + 1):
        coeff = mat.entry(a * (D + 1) + j, col)
        u = (z - PadicScalar.from_int(a, p, z.absprec)) * PadicScalar.from_int(p, p, z.absprec).invert() ** k
        acc = acc + coeff * u**j
    return acc


class TestIwahoriFactorization:
    def test_identity(self):
        f = iwahori_factorize(M((1, 0, 0, 1)))
        assert f.nbar.is_zeroish and f.n.is_zeroish
        assert f.m1.residue(10) == 1 and f.m2.residue(10) == 1

    def test_upper_unipotent(self):
        f = iwahori_factorize(M((1, 7, 0, 1)))
        assert f.nbar.is_zeroish
        assert f.n.residue(10) == 7

    def test_worked_example_recomposes(self):
        g = M((2, 3, 3, 1))
        f = iwahori_factorize(g)
        # nbar = 3/2, m = (2, -7/2), n = 3/2
        assert f.nbar.agrees(PadicScalar.from_rational(3, P) * PadicScalar.from_int(2, P).invert(), 20)
        assert f.m2.agrees(PadicScalar.from_rational(-7, P) * PadicScalar.from_int(2, P).invert(), 20)
        back = f.recompose()
        for i in range(2):
            for j in range(2):
                assert back[i][j].agrees(g.entries[i][j], 20)

    def test_outside_big_cell(self):
        with pytest.raises(MembershipError):
            iwahori_factorize(M((0, 1, 1, 0)))


class TestMonoidMembership:
    def test_eta_in_monoid(self):
        assert monoid_membership(M((1, 0, 0, P)))

    def test_lower_unipotent_rejected(self):
        assert not monoid_membership(M((1, 0, 1, 1)))

    def test_upper_times_eta(self):
        rng = random.Random(3)
        for _ in range(10):
            a = rng.randrange(0, 3**6)
            assert monoid_membership(M((1, a, 0, P)))

    def test_closure_under_products(self):
        rng = random.Random(5)
        gens = [M((1, 0, 0, 1)), M((1, 1, 0, 1)), M((1, 0, P, 1)),
                M((2, 0, 0, 1)), M((1, 0, 0, P)), M((P, 0, 0, P))]
        for _ in range(40):
            g = gens[rng.randrange(len(gens))]
            for _ in range(3):
                g = g @ gens[rng.randrange(len(gens))]
            assert monoid_membership(g)


class TestActOnBasis:
    def test_identity_fixes_basis(self):
        spec = spec_for()
        col = act_on_basis(M((1, 0, 0, 1)), BasisIndex(1, 2), spec)
        assert len(col.entries) == 1
        bi, v = col.entries[0]
        assert bi == BasisIndex(1, 2) and v.residue(10) == 1

    def test_eta_on_degree_one(self):
        # eta = diag(1,3) sends e_{0,1} to sum_a (a e_{a,0} + 3 e_{a,1})
        spec = spec_for(D=6)
        col = act_on_basis(M((1, 0, 0, P)), BasisIndex(0, 1), spec)
        got = {(bi.coset, bi.degree): v for bi, v in col.entries}
        assert set(got) == {(1, 0), (2, 0), (0, 1), (1, 1), (2, 1)}
        assert got[(1, 0)].residue(10) == 1
        assert got[(2, 0)].residue(10) == 2
        for a in range(3):
            assert got[(a, 1)].residue(10) == 3

    def test_eta_pointwise_oracle(self):
        # evaluate both sides of (eta o f)(z) = f(3z) at random points
        spec = spec_for(D=10)
        eta = M((1, 0, 0, P))
        mat = operator_matrix(eta, spec)
        rng = random.Random(11)
        for _ in range(20):
            src = BasisIndex(rng.randrange(3), rng.randrange(spec.degree_cap + 1))
            z = PadicScalar.from_int(rng.randrange(3**12), P, 30)
            col = spec.flat(src)
            lhs = eval_expansion(mat, col, z, spec)
            w = PadicScalar.from_int(P, P, 30) * z
            a = src.coset
            if w.is_zeroish or w.residue(1) % 3 == a % 3:
                u = (w - PadicScalar.from_int(a, P, 30)) * PadicScalar.from_int(P, P, 30).invert()
                rhs = u**src.degree
            else:
                rhs = PadicScalar.zero(P, 30)
            assert lhs.agrees(rhs, spec.prec - 1)

    def test_general_element_pointwise_oracle(self):
        # weight (2,0): direct evaluation of the action formula; the expansion
        # is truncated, so agreement is asked up to the recorded tail floor
        n1 = 2
        spec = spec_for(n1=n1, D=14)
        g = M((2, 3, 3, 7))  # det = 14 - 9 = 5, unit
        assert monoid_membership(g)
        mat = operator_matrix(g, spec)
        kappa = spec.weight
        rng = random.Random(13)
        for _ in range(20):
            src = BasisIndex(rng.randrange(3), rng.randrange(5))
            z = PadicScalar.from_int(rng.randrange(3**12), P, 40)
            lhs = eval_expansion(mat, spec.flat(src), z, spec)
            two, three, seven = (PadicScalar.from_int(t, P, 40) for t in (2, 3, 7))
            A = two + three * z
            w = (three + seven * z) * A.invert()
            det = PadicScalar.from_int(5, P, 40)
            factor = eval_extended(kappa, A, det * A.invert())
            a = src.coset
            if w.residue(1) % 3 == a % 3:
                u = (w - PadicScalar.from_int(a, P, 40)) * PadicScalar.from_int(P, P, 40).invert()
                rhs = factor * u**src.degree
            else:
                rhs = PadicScalar.zero(P, 40)
            tol = min(spec.prec, mat.col_tail_floors[spec.flat(src)]) - 1
            assert tol >= 8
            assert lhs.agrees(rhs, tol)

    def test_tail_floor_recorded(self):
        spec = spec_for(D=8)
        col = act_on_basis(M((1, 0, 0, P)), BasisIndex(0, 4), spec)
        assert col.tail_floor >= spec.degree_cap + 1 - 4


class TestOperatorMatrix:
    def test_identity_matrix(self):
        spec = spec_for(D=4)
        mat = operator_matrix(M((1, 0, 0, 1)), spec)
        eye = np.array(np.eye(spec.dim, dtype=int), dtype=object)
        assert all(int(x) == int(y) for x, y in zip(mat.layers[0].flat, eye.flat))

    def test_iwahori_action_is_isometric(self):
        spec = spec_for(n1=2, D=8)
        rng = random.Random(17)
        for _ in range(5):
            g = M((1 + P * rng.randrange(9), rng.randrange(9), P * rng.randrange(9),
                   1 + P * rng.randrange(9)))
            mat = operator_matrix(g, spec)
            assert mat.min_entry_valuation() >= 0
            # columns of an isometry have a unit entry
            assert mat.min_entry_valuation() == 0

    def test_up_type_row_degree_floors(self):
        # entries in expansion degree j carry valuation >= j
        spec = spec_for(D=10)
        for lam in range(3):
            g = M((1, 0, P * lam, P))
            mat = operator_matrix(g, spec)
            for j in range(spec.degree_cap + 1):
                rows = mat.degree_rows({j})
                assert mat.min_entry_valuation(rows=rows) >= j

    def test_cocycle_on_reliable_block(self):
        spec = spec_for(n1=2, D=16, prec=12)
        gens = [M((1, 1, 0, 1)), M((1, 0, P, 1)), M((2, 0, 0, 1)),
                M((1, 0, 0, P)), M((P, 0, 0, P))]
        rng = random.Random(19)
        reliable = spec.degree_cap - (spec.prec + 1) // 2
        cols = None
        for _ in range(8):
            g1, g2 = rng.choice(gens), rng.choice(gens)
            lhs = operator_matrix(g1 @ g2, spec)
            rhs = operator_matrix(g1, spec) @ operator_matrix(g2, spec)
            diff = lhs - rhs
            cols = diff.degree_cols(set(range(reliable + 1)))
            assert diff.min_entry_valuation(cols=cols) >= spec.prec

    def test_torus_elements_degree_diagonal(self):
        # diag(u1,u2) permutes cosets, is triangular in the degree filtration,
        # and scales the degree-diagonal by kappa(u1,u2) (u2/u1)^j
        spec = spec_for(n1=2, n2=1, D=5)
        rng = random.Random(23)
        for _ in range(10):
            u1 = 1 + rng.randrange(3**6)
            u2 = 1 + rng.randrange(3**6)
            u1 += 1 if u1 % 3 == 0 else 0
            u2 += 1 if u2 % 3 == 0 else 0
            mat = operator_matrix(M((u1, 0, 0, u2)), spec)
            s1 = PadicScalar.from_int(u1, P, 25)
            s2 = PadicScalar.from_int(u2, P, 25)
            perm = (u1 * pow(u2, -1, 3)) % 3
            D = spec.degree_cap
            for a in range(3):
                tgt = a * perm % 3
                for j in range(D + 1):
                    expect = torus_weight(BasisIndex(a, j), spec.weight).eigenvalue(s1, s2)
                    got = mat.entry(tgt * (D + 1) + j, a * (D + 1) + j)
                    assert got.agrees(expect, spec.prec - 1)
                    # support only in the image coset, degrees <= j
                    for r in range(mat.shape[0]):
                        v = int(mat.layers[0][r, a * (D + 1) + j]) % mat.mod
                        if v:
                            assert r // (D + 1) == tgt and r % (D + 1) <= j

    def test_central_units_act_diagonally(self):
        spec = spec_for(n1=2, n2=1, D=5)
        u = 1 + P + P**2
        mat = operator_matrix(M((u, 0, 0, u)), spec)
        D = spec.degree_cap
        off_diag = sum(1 for r in range(mat.shape[0]) for c in range(mat.shape[1])
                       if r != c and int(mat.layers[0][r, c]) % mat.mod)
        assert off_diag == 0
        s = PadicScalar.from_int(u, P, 25)
        for a in range(3):
            for j in range(D + 1):
                # central character value, independent of the degree
                expect = torus_weight(BasisIndex(a, j), spec.weight).eigenvalue(s, s)
                assert mat.entry(a * (D + 1) + j, a * (D + 1) + j).agrees(expect, spec.prec - 1)

    def test_eta_eigenvalue_on_identity_coset(self):
        spec = spec_for(D=6)
        mat = operator_matrix(M((1, 0, 0, P)), spec)
        D = spec.degree_cap
        for j in range(D + 1):
            assert int(mat.layers[0][j, j]) % mat.mod == pow(P, j) % mat.mod
        ev = torus_weight(BasisIndex(0, 2), spec.weight).eigenvalue(
            PadicScalar.from_int(1, P), PadicScalar.from_int(P, P))
        assert ev.val == 2


class TestClassicalSubspace:
    def test_constants(self):
        spec = spec_for(D=5)
        inc = classical_inclusion(0, spec)
        D = spec.degree_cap
        for a in range(3):
            assert int(inc[0, a * (D + 1)]) == 1
        assert sum(1 for v in inc.flat if int(v)) == 3

    def test_degree_one_expansion(self):
        # z = sum_a (a e_{a,0} + 3 e_{a,1})
        spec = spec_for(n1=1, D=5)
        inc = classical_inclusion(1, spec)
        D = spec.degree_cap
        for a in range(3):
            assert int(inc[1, a * (D + 1)]) == a
            assert int(inc[1, a * (D + 1) + 1]) == 3

    def test_monomial_span_stable(self):
        # eta * (image of z^m) stays in the span of monomials, mod p^prec
        n = 2
        spec = spec_for(n1=n, D=12)
        inc = classical_inclusion(n, spec)
        mat = operator_matrix(M((1, 0, P, P)), spec)
        mod = mat.mod
        images = mat.layers[0] @ inc.T % mod
        # solve for polynomial coordinates via the degree<=n rows of coset 0
        D = spec.degree_cap
        for m in range(n + 1):
            img = images[:, m]
            # peel off monomial components using the coset-0 rows, top degree first
            for l in range(n, -1, -1):
                c = int(img[l])
                denom = pow(P, spec.k * l)
                assert c % denom == 0
                coeff = c // denom % mod
                img = (img - coeff * inc[l]) % mod
            for v in img:
                assert int(v) % mod == 0 or val_of_residue(int(v), P, spec.prec) >= spec.prec - 2

    def test_nondominant_rejected(self):
        spec = spec_for(D=5)
        with pytest.raises(Exception):
            classical_inclusion(-1, spec)

    def test_quotient_norm_bound(self):
        # complement block of the classical slice has valuations >= n+1
        for n in (0, 2):
            spec = spec_for(n1=n, D=10)
            for lam in range(2):
                mat = operator_matrix(M((1, 0, P * lam, P)), spec)
                high = set(range(n + 1, spec.degree_cap + 1))
                rows = mat.degree_rows(high)
                cols = mat.degree_cols(high)
                assert mat.min_entry_valuation(rows=rows, cols=cols) >= n + 1
                # classical columns do not leak into high-degree rows
                low_cols = mat.degree_cols(set(range(n + 1)))
                assert mat.min_entry_valuation(rows=rows, cols=low_cols) >= spec.prec - 2


class TestLinkMaps:
    def test_inclusion_of_constants(self):
        spec = spec_for(D=4)
        ik = radius_inclusion(spec)
        D = spec.degree_cap
        col = spec.flat(BasisIndex(1, 0))
        nonzero = [(r, int(v)) for r, v in enumerate(ik.layers[0][:, col]) if int(v)]
        # e_{1,0} restricts to the three sub-cosets 1, 4, 7 with coefficient 1
        assert {r // (D + 1) for r, _ in nonzero} == {1, 4, 7}
        assert all(v == 1 and r % (D + 1) == 0 for r, v in nonzero)

    def test_inclusion_of_degree_one(self):
        # e_{a,1} at radius 1 -> per sub-coset c e_{a',0} + 3 e_{a',1}
        spec = spec_for(D=4)
        ik = radius_inclusion(spec)
        D = spec.degree_cap
        col = spec.flat(BasisIndex(0, 1))
        for c in range(3):
            ap = 3 * c
            assert int(ik.layers[0][ap * (D + 1), col]) == c
            assert int(ik.layers[0][ap * (D + 1) + 1, col]) == 3

    def test_link_compositions(self):
        spec1 = spec_for(n1=2, D=14, prec=10)
        spec2 = ModuleSpec(P, 2, spec1.weight, spec1.degree_cap, spec1.prec)
        z = M((1, 0, 0, P))
        ik, zk = link_pair(spec1, spec2, z)
        direct1 = operator_matrix(z, spec1)
        direct2 = operator_matrix(z, spec2)
        reliable = set(range(spec1.degree_cap - (spec1.prec + 1) // 2 + 1))
        d1 = zk @ ik - direct1
        assert d1.min_entry_valuation(cols=d1.degree_cols(reliable)) >= spec1.prec
        d2 = ik @ zk - direct2
        assert d2.min_entry_valuation(cols=d2.degree_cols(reliable)) >= spec1.prec

    def test_rejects_non_contracting(self):
        spec1 = spec_for(D=4)
        spec2 = ModuleSpec(P, 2, spec1.weight, 4, spec1.prec)
        with pytest.raises(MembershipError):
            link_pair(spec1, spec2, M((1, 0, 0, 1)))
