import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import hadamard as scipy_hadamard

from dictid.errors import DimensionMismatch, NotUnitNorm, ZeroColumn
from dictid.model import (
    CoefficientMatrix,
    Dictionary,
    angle_dictionary,
    beta,
    coherence,
    gamma,
    gram_parts,
    mixed_orthobasis,
    normalize_columns,
    row_blocks,
    sign,
)


def random_dictionary(seed, d, K):
    g = np.random.default_rng(seed)
    return normalize_columns(g.standard_normal((d, K)))


def random_sparse(seed, K, N, p=0.5):
    g = np.random.default_rng(seed)
    return np.where(g.random((K, N)) < p, g.standard_normal((K, N)), 0.0)


class TestDictionary:
    def test_rejects_non_unit_columns(self):
        with pytest.raises(NotUnitNorm):
            Dictionary(np.array([[1.0, 0.0], [0.0, 2.0]]))

    def test_rejects_undercomplete(self):
        with pytest.raises(DimensionMismatch):
            Dictionary(np.eye(3)[:, :2])

    def test_flags(self):
        assert Dictionary(np.eye(2)).is_basis
        D = angle_dictionary([0.0, 1.0, 2.0])
        assert D.is_complete and not D.is_basis
        assert (D.d, D.K) == (2, 3)

    def test_immutable(self):
        D = Dictionary(np.eye(2))
        with pytest.raises(ValueError):
            D.atoms[0, 0] = 5.0


class TestNormalizeColumns:
    def test_identity(self):
        np.testing.assert_array_equal(normalize_columns(np.eye(2)).atoms, np.eye(2))

    def test_scaling(self):
        D = normalize_columns(np.array([[3.0, 1.0], [4.0, 0.0]]))
        np.testing.assert_allclose(D.atoms[:, 0], [0.6, 0.8], rtol=0, atol=1e-15)

    def test_zero_column(self):
        with pytest.raises(ZeroColumn) as exc:
            normalize_columns(np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert exc.value.k == 1


class TestGram:
    def test_orthonormal(self):
        gp = gram_parts(Dictionary(np.eye(3)))
        assert not gp.M0.any()
        assert not any(m.any() for m in gp.mbar)

    def test_sixty_degrees(self):
        gp = gram_parts(angle_dictionary([0.0, math.pi / 3]))
        np.testing.assert_allclose(gp.mbar, [[0.5], [0.5]], atol=1e-15)

    def test_three_atoms_in_plane(self):
        gp = gram_parts(angle_dictionary(np.radians([0.0, 60.0, 120.0])))
        np.testing.assert_allclose(gp.mbar[0], [0.5, -0.5], atol=1e-15)
        np.testing.assert_allclose(gp.mbar[2], [-0.5, 0.5], atol=1e-15)

    @given(st.integers(0, 10_000), st.integers(2, 5))
    @settings(max_examples=40, deadline=None)
    def test_structure(self, seed, K):
        D = random_dictionary(seed, K, K + seed % 3)
        gp = gram_parts(D)
        A = D.atoms
        assert np.all(np.diag(gp.M0) == 0.0)
        np.testing.assert_array_equal(gp.M0, gp.M0.T)
        np.testing.assert_allclose(gp.M0, A.T @ A - np.eye(D.K), atol=1e-12)
        for k in range(D.K):
            np.testing.assert_array_equal(gp.mbar[k], np.delete(gp.M0[:, k], k))


class TestCoherence:
    def test_orthonormal(self):
        for p in (1, 2, math.inf, 3.5):
            assert coherence(Dictionary(np.eye(4)), p) == 0.0

    def test_sixty_degrees(self):
        assert coherence(angle_dictionary([0.0, math.pi / 3]), 2) == pytest.approx(0.5, abs=1e-15)

    def test_infinity_is_classical(self):
        D = random_dictionary(3, 4, 7)
        G = np.abs(D.atoms.T @ D.atoms - np.eye(7))
        assert coherence(D, math.inf) == pytest.approx(G.max(), abs=1e-15)

    def test_mixed_orthobasis(self):
        # oracle: the same basis assembled from scipy's Hadamard matrix,
        # coherence from the full Gram matrix
        for K, ell in [(4, 2), (8, 4), (16, 8), (8, 2)]:
            H = scipy_hadamard(K) / math.sqrt(K)
            B = np.hstack([np.eye(K)[:, :ell], H[:, ell:]])
            G = B.T @ B - np.eye(K)
            oracle = np.linalg.norm(G, axis=0).max()
            assert coherence(mixed_orthobasis(K, ell), 2) == pytest.approx(oracle, abs=1e-12)
        # frozen from the oracle: sqrt(1 - ell/K), not 1 - ell/K
        assert coherence(mixed_orthobasis(8, 4), 2) == pytest.approx(math.sqrt(0.5), abs=1e-12)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_permutation_and_sign_invariance(self, seed):
        D = random_dictionary(seed, 3, 5)
        g = np.random.default_rng(seed + 1)
        perm = g.permutation(5)
        signs = np.where(g.random(5) < 0.5, -1.0, 1.0)
        D2 = Dictionary(D.atoms[:, perm] * signs)
        for p in (1, 2, math.inf):
            assert coherence(D2, p) == pytest.approx(coherence(D, p), abs=1e-14)


class TestCoefficientMatrix:
    def test_exact_zero_bookkeeping(self):
        X = CoefficientMatrix(np.array([[0.0, 1e-300, -0.0], [2.0, 0.0, 3.0]]))
        assert X.zero_set == {(0, 0), (0, 2), (1, 1)}
        np.testing.assert_array_equal(X.row_support(0), [1])
        np.testing.assert_array_equal(X.row_zeros(0), [0, 2])

    def test_sign_of_zero(self):
        np.testing.assert_array_equal(sign(np.array([-2.0, 0.0, 3.0])), [-1.0, 0.0, 1.0])


class TestRowBlocks:
    def test_identity(self):
        b = row_blocks(np.eye(2), Dictionary(np.eye(2)), 0)
        np.testing.assert_array_equal(b.sk, [1.0])
        np.testing.assert_array_equal(b.Xk, [[0.0]])
        np.testing.assert_array_equal(b.Xbark, [[1.0]])
        np.testing.assert_array_equal(b.uk, [0.0])
        np.testing.assert_array_equal(b.vk, [0.0])

    def test_worked_example_first_row(self, worked_X, identity2):
        b = row_blocks(worked_X, identity2, 0)
        np.testing.assert_array_equal(b.support, [0, 2])
        np.testing.assert_array_equal(b.zeros, [1, 3])
        np.testing.assert_array_equal(b.sk, [1.0, 1.0])
        np.testing.assert_array_equal(b.Xk, [[0.0, 1.0]])
        np.testing.assert_array_equal(b.Xbark, [[1.0, -1.0]])
        np.testing.assert_array_equal(b.uk, [1.0])
        np.testing.assert_array_equal(b.vk, [1.0])

    def test_worked_example_second_row(self, worked_X, identity2):
        b = row_blocks(worked_X, identity2, 1)
        np.testing.assert_array_equal(b.zeros, [0])
        np.testing.assert_array_equal(b.sk, [1.0, 1.0, -1.0])
        np.testing.assert_array_equal(b.Xk, [[0.0, 1.0, 0.0]])
        np.testing.assert_array_equal(b.Xbark, [[2.0]])
        np.testing.assert_array_equal(b.uk, [1.0])

    def test_brute_force_u(self):
        # oracle: explicit loops over the definitions
        D = random_dictionary(11, 4, 4)
        X = random_sparse(12, 4, 9)
        M0 = D.atoms.T @ D.atoms - np.eye(4)
        for k in range(4):
            b = row_blocks(X, D, k)
            others = [l for l in range(4) if l != k]
            u = []
            for l in others:
                v = sum(X[l, n] * np.sign(X[k, n]) for n in range(9) if X[k, n] != 0)
                u.append(v - np.abs(X[l]).sum() * M0[l, k])
            np.testing.assert_allclose(b.uk, u, atol=1e-13)

    def test_empty_blocks(self):
        b = row_blocks(np.ones((2, 3)), Dictionary(np.eye(2)), 0)
        assert b.Xbark.shape == (1, 0)
        b = row_blocks(np.array([[0.0, 0.0], [1.0, 2.0]]), Dictionary(np.eye(2)), 0)
        assert b.Xk.shape == (1, 0)
        np.testing.assert_array_equal(b.vk, [0.0])

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            row_blocks(np.eye(3), Dictionary(np.eye(2)), 0)

    @given(st.integers(0, 10_000), st.integers(2, 5), st.integers(1, 12))
    @settings(max_examples=40, deadline=None)
    def test_block_properties(self, seed, K, N):
        X = random_sparse(seed, K, N)
        D = Dictionary(np.eye(K))
        for k in range(K):
            b = row_blocks(X, D, k)
            assert b.Xk.shape[1] + b.Xbark.shape[1] == N
            # deleting the row and restricting columns commute
            np.testing.assert_array_equal(b.Xbark, X[:, b.zeros][np.arange(K) != k])
            # orthonormal dictionary: u_k = v_k exactly
            np.testing.assert_array_equal(b.uk, b.vk)


class TestGammaBeta:
    def test_gamma_examples(self):
        assert gamma(np.zeros((2, 3))) == 0.0
        assert gamma(np.array([[1.0, -2.0], [3.0, 0.0]])) == 3.0

    def test_gamma_bernoulli_gaussian(self):
        from dictid.bgmodel import BGParams, sample

        X = sample(BGParams(0.5, 3, 1000, seed=42))
        # independent direct summation
        direct = max(sum(abs(x) for x in row) for row in X.X.tolist())
        assert gamma(X) == pytest.approx(direct, rel=1e-12)
        assert abs(gamma(X) / (1000 * 0.5 * math.sqrt(2 / math.pi)) - 1) < 0.10

    def test_beta_examples(self, worked_X, identity2):
        for p in (1, 2, math.inf):
            assert beta(np.eye(3), Dictionary(np.eye(3)), p) == 0.0
        assert beta(worked_X, identity2, 2) == 1.0
        assert beta(np.ones((3, 1)), Dictionary(np.eye(3)), 1) == 2.0

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_column_permutation_invariance(self, seed):
        X = random_sparse(seed, 3, 8)
        D = random_dictionary(seed, 3, 3)
        perm = np.random.default_rng(seed).permutation(8)
        assert gamma(X[:, perm]) == pytest.approx(gamma(X), rel=1e-14)
        assert beta(X[:, perm], D, 2) == pytest.approx(beta(X, D, 2), rel=1e-12, abs=1e-14)
