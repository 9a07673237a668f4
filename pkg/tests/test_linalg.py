import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import eigh as scipy_eigh

from condlab.errors import DimensionMismatch, NotPositiveDefinite
from condlab.linalg import (cholesky, gen_sym_eig_max, gen_sym_eig_max_batch, jacobi_eigh,
                            solve_lower, solve_spd, solve_upper, sym_eig)

from conftest import random_spd


class TestCholesky:
    def test_identity(self):
        assert np.array_equal(cholesky(np.eye(3)), np.eye(3))

    def test_hand_example(self):
        L = cholesky(np.array([[4.0, 2.0], [2.0, 5.0]]))
        assert np.allclose(L, [[2.0, 0.0], [1.0, 2.0]], atol=1e-15)

    def test_indefinite_reports_pivot(self):
        with pytest.raises(NotPositiveDefinite) as info:
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert info.value.pivot_index == 1
        assert info.value.pivot_value == pytest.approx(-3.0)

    def test_tiny_pivot_is_rejected(self):
        A = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]])
        with pytest.raises(NotPositiveDefinite):
            cholesky(A)

    @pytest.mark.parametrize("n", [1, 2, 7, 33, 64])
    def test_reconstruction(self, rng, n):
        A = random_spd(rng, n, cond=1e4)
        L = cholesky(A)
        assert np.allclose(L, np.tril(L))
        assert np.linalg.norm(L @ L.T - A) <= 1e-12 * np.linalg.norm(A)

    def test_complex_hermitian(self, rng):
        B = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        A = B @ B.conj().T + 6 * np.eye(6)
        L = cholesky(A)
        assert np.linalg.norm(L @ L.conj().T - A) <= 1e-12 * np.linalg.norm(A)

    def test_shape_errors(self):
        with pytest.raises(DimensionMismatch):
            cholesky(np.ones((2, 3)))
        with pytest.raises(ValueError):
            cholesky(np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestSolve:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        assert np.allclose(solve_spd(np.eye(3), b), b)

    def test_hand_example(self):
        # 4x + 2y = 8, 2x + 5y = 9 gives y = 5/4, x = 11/8
        x = solve_spd(np.array([[4.0, 2.0], [2.0, 5.0]]), np.array([8.0, 9.0]))
        assert np.allclose(x, [11 / 8, 5 / 4], atol=1e-14)

    def test_diagonal(self):
        assert np.allclose(solve_spd(np.diag([2.0, 4.0]), np.array([2.0, 4.0])), [1.0, 1.0])

    def test_triangular_multiple_rhs(self, rng):
        L = np.tril(rng.standard_normal((5, 5))) + 5 * np.eye(5)
        B = rng.standard_normal((5, 3))
        assert np.allclose(L @ solve_lower(L, B), B)
        assert np.allclose(L.T @ solve_upper(L.T, B), B)

    def test_random_spd(self, rng):
        A = random_spd(rng, 20, cond=100.0)
        b = rng.standard_normal(20)
        assert np.allclose(A @ solve_spd(A, b), b, atol=1e-11)


class TestSymEig:
    def test_diagonal(self):
        w, V = sym_eig(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(w, [3.0, 2.0, 1.0])

    def test_swap_matrix(self):
        w, V = sym_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(w, [1.0, -1.0])
        assert np.allclose(np.abs(V[:, 0]), [2**-0.5, 2**-0.5])
        assert np.allclose(np.abs(V[:, 1]), [2**-0.5, 2**-0.5])
        assert V[0, 1] * V[1, 1] < 0

    def test_identity(self):
        w, _ = sym_eig(np.eye(5))
        assert np.allclose(w, 1.0)

    def test_small_integer_matrices_against_characteristic_roots(self):
        vals = (-2, 0, 1, 3)
        for a, b, c in itertools.product(vals, repeat=3):
            A = np.array([[a, b], [b, c]], dtype=float)
            roots = np.sort(np.roots([1.0, -(a + c), a * c - b * b]).real)[::-1]
            assert np.allclose(sym_eig(A, method="jacobi")[0], roots, atol=1e-10)
        rng = np.random.default_rng(3)
        for _ in range(200):
            M = rng.integers(-3, 4, size=(3, 3)).astype(float)
            A = M + M.T
            coeffs = np.poly(A)  # characteristic polynomial
            roots = np.sort(np.roots(coeffs).real)[::-1]
            assert np.allclose(sym_eig(A, method="jacobi")[0], roots, atol=1e-6 if
                               np.min(np.abs(np.diff(roots))) < 1e-4 else 1e-10)

    @pytest.mark.parametrize("n", [1, 2, 5, 16, 40])
    def test_jacobi_decomposition(self, rng, n):
        M = rng.standard_normal((n, n))
        A = M + M.T
        w, V = sym_eig(A, method="jacobi")
        assert np.all(np.diff(w) <= 1e-12)
        assert np.allclose(V.T @ V, np.eye(n), atol=1e-12)
        assert np.allclose(V @ np.diag(w) @ V.T, A, atol=1e-11)
        assert np.allclose(w, np.linalg.eigvalsh(A)[::-1], atol=1e-11)

    def test_lapack_matches_jacobi(self, rng):
        M = rng.standard_normal((30, 30))
        A = M + M.T
        assert np.allclose(sym_eig(A, "jacobi")[0], sym_eig(A, "lapack")[0], atol=1e-11)

    def test_complex_embedding(self, rng):
        B = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        A = B + B.conj().T
        w, V = sym_eig(A, method="jacobi")
        assert np.allclose(w, np.linalg.eigvalsh(A)[::-1], atol=1e-10)
        assert np.allclose(A @ V, V * w, atol=1e-9)

    def test_huge_rotation_angle_is_stable(self):
        A = np.array([[1e200, 1e-120], [1e-120, -1e200]])
        with np.errstate(all="raise"):
            w, _ = jacobi_eigh(A)
        assert np.allclose(np.sort(w), [-1e200, 1e200])

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            sym_eig(np.eye(2), method="qr")

    @given(st.integers(2, 12), st.integers(0, 10_000))
    def test_property_spectrum(self, n, seed):
        r = np.random.default_rng(seed)
        M = r.standard_normal((n, n))
        A = M + M.T
        w, V = sym_eig(A)
        assert np.allclose(V @ np.diag(w) @ V.T, A, atol=1e-10)


class TestPencil:
    def test_hand_example(self):
        a = 0.5
        M = np.array([[1.0, 0.0], [0.0, 0.0]])
        G = np.array([[1.0, a], [a, 1.0]])
        assert gen_sym_eig_max(M, G) == pytest.approx(1 / (1 - a * a), rel=1e-14)
        # grid over the unit G-sphere
        t = np.linspace(0, 2 * np.pi, 20001)
        X = np.stack([np.cos(t), np.sin(t)])
        ratio = np.einsum("it,ij,jt->t", X, M, X) / np.einsum("it,ij,jt->t", X, G, X)
        assert ratio.max() == pytest.approx(4 / 3, rel=1e-6)

    def test_trivial(self, rng):
        G = random_spd(rng, 6)
        assert gen_sym_eig_max(G, G) == pytest.approx(1.0, rel=1e-12)
        assert gen_sym_eig_max(np.zeros((6, 6)), G) == pytest.approx(0.0, abs=1e-14)

    def test_against_scipy_and_sampling(self, rng):
        n = 8
        G = random_spd(rng, n, cond=50.0)
        B = rng.standard_normal((n, n))
        M = B @ B.T
        lam, v = gen_sym_eig_max(M, G, return_vector=True)
        assert lam == pytest.approx(scipy_eigh(M, G, eigvals_only=True)[-1], rel=1e-11)
        assert v @ G @ v == pytest.approx(1.0, rel=1e-10)
        assert np.allclose(M @ v, lam * G @ v, atol=1e-9 * lam)
        X = rng.standard_normal((10_000, n))
        samples = np.einsum("ki,ij,kj->k", X, M, X) / np.einsum("ki,ij,kj->k", X, G, X)
        assert samples.max() <= lam + 1e-9

    @pytest.mark.parametrize("n", [2, 3])
    def test_sampling_lower_bound_is_tight(self, rng, n):
        G = random_spd(rng, n, cond=5.0)
        B = rng.standard_normal((n, n))
        M = B @ B.T
        lam = gen_sym_eig_max(M, G)
        X = rng.standard_normal((10_000, n))
        samples = np.einsum("ki,ij,kj->k", X, M, X) / np.einsum("ki,ij,kj->k", X, G, X)
        assert lam - 1e-3 * lam <= samples.max() <= lam + 1e-9

    def test_batch(self, rng):
        Gs = np.stack([random_spd(rng, 4) for _ in range(5)])
        Ms = np.stack([(lambda B: B @ B.T)(rng.standard_normal((4, 4))) for _ in range(5)])
        got = gen_sym_eig_max_batch(Ms, Gs)
        want = [gen_sym_eig_max(M, G) for M, G in zip(Ms, Gs)]
        assert np.allclose(got, want, rtol=1e-11)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            gen_sym_eig_max(np.eye(2), np.eye(3))
