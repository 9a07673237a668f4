import math

import numpy as np
import pytest
from scipy.integrate import quad

from condlab import weights as W
from condlab.conditionality import ktilde_measure
from condlab.errors import (BlockOverrun, DimensionMismatch, IncompatibleOracles, InvalidParameter,
                            NotPositiveDefinite, OddDimension)
from condlab.spaces import Lorentz, Lp, space_norm
from condlab.systems import (ROTATION, AveragingBasisSystem, DkkSystem, GramSystem, Partition,
                             SequenceSystem, TransformedSystem, TrigSystem, almost_greedy_system,
                             averaging_projection, build, diamond, direct_sum, dkk_system,
                             dual_pairing_check, interleave_indices, orthonormal, parse_tree,
                             prefix_sum_system, rotate, rotation_matrix, tree_text)


def all_systems():
    return [
        orthonormal(6),
        TrigSystem(-0.5, 7),
        TrigSystem(0.3, 9, field="complex"),
        SequenceSystem(Lorentz(3, 2), 8),
        diamond(TrigSystem(-0.5, 4), TrigSystem(0.5, 4)),
        direct_sum(SequenceSystem(Lp(1), 3), TrigSystem(0.5, 3), p=1.5),
        prefix_sum_system(TrigSystem(-0.3, 5), [2, 4]),
        almost_greedy_system(orthonormal(4), "lp:2", 3),
    ]


class TestOracles:
    @pytest.mark.parametrize("S", all_systems(), ids=lambda S: S.label)
    def test_homogeneous_and_definite(self, S, rng):
        A = rng.standard_normal((20, S.dim))
        n = S.norm(A)
        assert np.allclose(S.norm(-2.5 * A), 2.5 * n, rtol=1e-14)
        assert np.all(n > 0)
        assert S.norm(np.zeros(S.dim)) == 0.0

    @pytest.mark.parametrize("S", all_systems(), ids=lambda S: S.label)
    def test_stacked_matches_rows(self, S, rng):
        A = rng.standard_normal((3, 2, S.dim))
        stacked = S.norm(A)
        assert stacked.shape == (3, 2)
        assert np.allclose(stacked, [[S.norm(a) for a in row] for row in A], rtol=1e-13)

    @pytest.mark.parametrize("S", all_systems(), ids=lambda S: S.label)
    def test_gram_form(self, S, rng):
        if S.gram is None:
            pytest.skip("not a Hilbert-space system")
        a = rng.standard_normal(S.dim)
        assert S.norm(a) == pytest.approx(math.sqrt(a @ S.gram @ a), rel=1e-13)

    def test_dimension_check(self):
        with pytest.raises(DimensionMismatch):
            orthonormal(3).norm(np.ones(4))


class TestTrig:
    def test_unweighted(self):
        assert np.allclose(TrigSystem(0.0, 7, "complex").gram, np.eye(7))
        assert np.allclose(TrigSystem(0.0, 5).gram, np.diag([1, 0.5, 0.5, 0.5, 0.5]))

    def test_constant_diagonal(self):
        assert np.allclose(np.diag(TrigSystem(0.6, 11, "complex").gram), W.weight_fourier_coeff(0.6, 0))

    def test_one_dimensional(self):
        assert TrigSystem(-0.5, 1).norm(np.ones(1)) == pytest.approx(math.sqrt(2 * math.sqrt(2)))

    def test_weighted_integral_oracle(self, rng):
        """sqrt(a* G a) against direct quadrature of ∫|t|^λ |p(t)|² dt on 10 random polynomials."""
        lam = 0.4
        S = TrigSystem(lam, 7)
        for _ in range(10):
            a = rng.standard_normal(7)

            def p(t):
                out = a[0]
                for k in range(1, 4):
                    out += a[2 * k - 1] * math.cos(2 * math.pi * k * t) + a[2 * k] * math.sin(2 * math.pi * k * t)
                return out

            val, _ = quad(lambda t: p(t) ** 2 + p(-t) ** 2, 0, 0.5, weight="alg", wvar=(lam, 0), limit=200)
            assert S.norm(a) ** 2 == pytest.approx(val, rel=1e-9)

    def test_large_dimension_uses_toeplitz(self, rng):
        S = TrigSystem(-0.5, 3001, "complex")
        a = np.zeros(3001)
        a[:50] = rng.standard_normal(50)
        assert S.norm(a) == pytest.approx(TrigSystem(-0.5, 50, "complex").norm(a[:50]), rel=1e-12)

    def test_validation(self):
        with pytest.raises(InvalidParameter):
            TrigSystem(0.5, 3, field="quaternion")


class TestSums:
    def test_orthonormal_sum(self):
        S = direct_sum(orthonormal(3), orthonormal(3))
        assert isinstance(S, GramSystem) and np.array_equal(S.gram, np.eye(6))

    def test_interleaving(self):
        i1, i2 = interleave_indices(3, 5)
        assert i1.tolist() == [0, 2, 4] and i2.tolist() == [1, 3, 5, 6, 7]

    def test_hilbert_rule_needs_gram(self):
        with pytest.raises(IncompatibleOracles):
            direct_sum(SequenceSystem(Lp(1), 2), orthonormal(2), outer="hilbert")

    def test_lp_outer_rule(self):
        S = direct_sum(SequenceSystem(Lp(1), 2), SequenceSystem(Lp(1), 2), p=1.0)
        a = np.array([1.0, -2.0, 3.0, 0.5])
        assert S.norm(a) == pytest.approx(6.5)

    def test_direct_sum_identities(self):
        O, R = TrigSystem(-0.5, 4), TrigSystem(0.3, 4)
        D = direct_sum(O, R)
        for m in range(1, 9):
            want = max(ktilde_measure(O, (m + 1) // 2).value, ktilde_measure(R, m // 2).value if m > 1 else 1.0)
            assert ktilde_measure(D, m).value == pytest.approx(want, rel=1e-12)


class TestRotation:
    def test_orthonormal_preserved(self):
        assert np.allclose(rotate(orthonormal(6)).gram, np.eye(6), atol=1e-15)
        assert np.allclose(diamond(orthonormal(3), orthonormal(3)).gram, np.eye(6), atol=1e-12)

    def test_twice_is_quarter_turn(self):
        assert np.allclose(ROTATION @ ROTATION, [[0.0, -1.0], [1.0, 0.0]])
        S = TrigSystem(-0.4, 6)
        twice = rotate(rotate(S))
        M = rotation_matrix(6)
        explicit = TransformedSystem(S, (M @ M).T, "explicit")
        assert np.allclose(twice.gram, explicit.gram, atol=1e-14)
        assert not np.allclose(twice.gram, S.gram)

    def test_coefficient_map_is_orthogonal(self, rng):
        M = rotation_matrix(8)
        b = rng.standard_normal(8)
        assert np.linalg.norm(M.T @ b) == pytest.approx(np.linalg.norm(b), rel=1e-15)

    def test_positive_definite_and_dimension(self):
        B = diamond(TrigSystem(-0.5, 5), TrigSystem(0.5, 5))
        assert B.dim == 10
        GramSystem(B.gram)  # Cholesky succeeds

    def test_odd_dimension(self):
        with pytest.raises(OddDimension):
            rotate(orthonormal(3))

    def test_non_gram_rotation(self, rng):
        S = rotate(SequenceSystem(Lp(1), 4))
        b = rng.standard_normal(4)
        assert S.norm(b) == pytest.approx(np.abs(rotation_matrix(4).T @ b).sum())


class TestPrefix:
    def test_single_block(self, rng):
        S = TrigSystem(0.5, 6)
        P = prefix_sum_system(S, [6])
        a = rng.standard_normal(6)
        assert P.norm(a) == pytest.approx(S.norm(a), rel=1e-14)

    def test_dyadic_condition(self):
        sizes = [2**j for j in range(1, 7)]
        assert all(sum(sizes[:j]) <= sizes[j] for j in range(1, len(sizes)))

    def test_dominates_inner_witness(self):
        B = diamond(TrigSystem(-0.5, 4), TrigSystem(0.5, 4))
        P = prefix_sum_system(B, [2, 4, 8])
        for m in range(1, 9):
            assert ktilde_measure(P, 6 + m).value >= ktilde_measure(B, m).value * (1 - 1e-12)

    def test_overrun(self):
        with pytest.raises(BlockOverrun):
            prefix_sum_system(orthonormal(3), [2, 4])


class TestPartition:
    def test_l1_hand_example(self):
        sigma = Partition([2, 2], Lp(1))
        P, Q = averaging_projection(sigma, np.array([1.0, 0.0, 0.0, 0.0]))
        assert np.allclose(P, [0.5, 0.5, 0, 0]) and np.allclose(Q, [0.5, -0.5, 0, 0])

    @pytest.mark.parametrize("spec", [Lp(1), Lp(2), Lorentz(4, 2)])
    def test_vectors(self, spec):
        sigma = Partition.dyadic(5, spec)
        for n in range(sigma.K):
            v = sigma.v(n)
            assert space_norm(spec, v) == pytest.approx(1.0, rel=1e-14)
            assert np.allclose(sigma.coords(v), np.eye(sigma.K)[n], atol=1e-15)
            P, Q = averaging_projection(sigma, v)
            assert np.allclose(P, v) and np.allclose(Q, 0.0, atol=1e-15)

    def test_idempotent(self, rng):
        sigma = Partition.dyadic(6, Lorentz(3, 2))
        F = rng.standard_normal((1000, sigma.N))
        P, _ = averaging_projection(sigma, F)
        PP, _ = averaging_projection(sigma, P)
        assert np.max(np.abs(PP - P)) <= 1e-12

    def test_pairing(self, rng):
        sigma = Partition.dyadic(5, Lp(2))
        rep = dual_pairing_check(sigma, samples=1000)
        assert rep["max_defect_P"] <= 1e-12 and rep["max_defect_Q"] <= 1e-12
        f = np.zeros(sigma.N)
        f[sigma.block(2)] = rng.standard_normal(len(sigma.block(2)))
        f[sigma.block(2)] -= f[sigma.block(2)].mean()
        g = sigma.v(2)
        P, _ = averaging_projection(sigma, f)
        assert abs(f @ averaging_projection(sigma, g)[0]) <= 1e-14 and np.allclose(P, 0.0, atol=1e-15)

    def test_condition_and_blocks(self):
        sigma = Partition.dyadic(6, Lp(2))
        assert sigma.condition_A() <= 1.0
        assert sigma.complete_blocks(6) == 2 and sigma.complete_blocks(5) == 1
        assert sigma.block_of(2) == 1

    def test_bad_sizes(self):
        with pytest.raises(InvalidParameter):
            Partition([2, 0], Lp(2))


class TestDkk:
    def test_hand_example(self):
        sigma = Partition([2], Lp(1))
        Y = dkk_system(orthonormal(1), Lp(1), sigma)
        assert Y.norm(np.array([1.0, 0.0])) == pytest.approx(2.0)

    def test_averaging_vectors(self):
        X = TrigSystem(-0.5, 4)
        sigma = Partition.dyadic(4, Lp(2))
        Y = DkkSystem(X, Lp(2), sigma)
        for n in range(4):
            assert Y.norm(sigma.v(n)) == pytest.approx(X.norm(np.eye(4)[n]), rel=1e-13)

    def test_triangle(self, rng):
        Y = almost_greedy_system(diamond(TrigSystem(-0.5, 3), TrigSystem(0.5, 3)), "lp:2", 5)
        F, G = rng.standard_normal((2, 500, Y.dim))
        assert np.all(Y.norm(F + G) <= Y.norm(F) + Y.norm(G) + 1e-12)

    def test_exact_section(self, rng):
        Y = almost_greedy_system(orthonormal(4), "lp:2", 4)
        sec = Y.section(14)
        assert isinstance(sec, DkkSystem)
        a = rng.standard_normal(14)
        assert sec.norm(a) == pytest.approx(Y.norm(np.pad(a, (0, Y.dim - 14))), rel=1e-14)

    def test_inner_basis(self):
        Y = almost_greedy_system(orthonormal(4), "lp:2", 3)
        assert Y.X.dim == 4 + 3
        assert isinstance(AveragingBasisSystem(Y.sigma).gram, np.ndarray)

    def test_too_many_blocks(self):
        with pytest.raises(DimensionMismatch):
            DkkSystem(orthonormal(2), Lp(2), Partition.dyadic(3, Lp(2)))


class TestTrees:
    def test_parse_and_print(self):
        text = "diamond(trig(-0.5, 4), trig(0.5, 4, field='complex'))"
        tree = parse_tree(text)
        assert tree["op"] == "diamond"
        assert parse_tree(tree_text(tree)) == tree

    def test_build_forms_agree(self):
        text = "almost_greedy(diamond(trig(-0.5, 3), trig(0.5, 3)), space='lp:2', K=4)"
        a = build(text)
        import json
        b = build(json.dumps(parse_tree(text)))
        x = np.linspace(-1, 1, a.dim)
        assert a.norm(x) == b.norm(x)
        assert a.tree == parse_tree(text)

    def test_gram_constructor(self):
        S = build("gram([[1.0, 0.5], [0.5, 1.0]])")
        assert np.allclose(S.gram, [[1, 0.5], [0.5, 1]])
        with pytest.raises(NotPositiveDefinite):
            build("gram([[1.0, 2.0], [2.0, 1.0]])")

    @pytest.mark.parametrize("text", ["nope(3)", "trig(0.5,", "orthonormal(N=__import__('os'))"])
    def test_rejects(self, text):
        with pytest.raises(InvalidParameter):
            build(text)
