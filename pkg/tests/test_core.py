import math

import numpy as np
import pytest

from lgw.core import (
    Dictionary,
    GramMatrix,
    SimplexWeight,
    SparseGridWeight,
    gram,
    min_q_over_simplex,
    mu_of_theta,
    project_l1_ball,
    project_simplex,
    q_form,
    read_dictionary_csv,
    signed_basis_dictionary,
    write_dictionary_csv,
)
from lgw.errors import DimensionMismatch, InvalidInput, NonConvergence


class TestGram:
    def test_orthonormal(self):
        gm = gram(Dictionary(np.eye(2)))
        assert np.allclose(gm.sigma, np.eye(2))
        assert gm.max_diag == 1.0

    def test_single_column(self):
        gm = gram(Dictionary(np.array([[3.0], [4.0]])))
        assert gm.sigma[0, 0] == pytest.approx(25.0)
        assert gm.max_diag == pytest.approx(25.0)

    def test_correlated_pair(self):
        pts = np.array([[1.0, 0.5], [0.0, math.sqrt(0.75)]])
        gm = gram(Dictionary(pts))
        assert np.allclose(gm.sigma, [[1.0, 0.5], [0.5, 1.0]], atol=1e-12)

    def test_rejects_asymmetric(self):
        with pytest.raises(InvalidInput):
            GramMatrix(sigma=np.array([[1.0, 0.2], [0.1, 1.0]]))

    def test_rejects_indefinite_small(self):
        with pytest.raises(InvalidInput):
            GramMatrix(sigma=np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_indefinite_power_iteration_path(self):
        M = 80  # above the exact-eigendecomposition cutoff
        mat = np.eye(M)
        mat[0, 1] = mat[1, 0] = 1.5
        with pytest.raises(InvalidInput):
            GramMatrix(sigma=mat)

    def test_accepts_psd_power_iteration_path(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((80, 80))
        GramMatrix(sigma=A.T @ A)

    def test_max_diag_override(self):
        gm = GramMatrix(sigma=np.eye(2), max_diag=4.0)
        assert gm.max_diag == 4.0
        with pytest.raises(InvalidInput):
            GramMatrix(sigma=np.eye(2), max_diag=0.5)


class TestQForm:
    def test_isotropic(self):
        gm = GramMatrix(sigma=np.eye(2))
        assert q_form(gm, np.array([0.5, 0.5])) == pytest.approx(0.5)

    def test_correlated(self):
        gm = GramMatrix(sigma=np.array([[1.0, 0.5], [0.5, 1.0]]))
        assert q_form(gm, np.array([0.5, 0.5])) == pytest.approx(0.75)

    def test_vertex_gives_diagonal(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((4, 4))
        gm = GramMatrix(sigma=A.T @ A)
        for j in range(4):
            e = np.zeros(4)
            e[j] = 1.0
            assert q_form(gm, e) == pytest.approx(gm.sigma[j, j])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            q_form(GramMatrix(sigma=np.eye(2)), np.ones(3))


class TestMuOfTheta:
    def test_vertex(self):
        d = Dictionary(np.array([[1.0, 0.0], [0.0, 1.0]]))
        mu = mu_of_theta(d, SimplexWeight.vertex(2, 0))
        assert np.allclose(mu, [1.0, 0.0])

    def test_symmetric_cancellation(self):
        d = Dictionary(np.array([[1.0, -1.0]]))
        mu = mu_of_theta(d, SimplexWeight(np.array([0.5, 0.5])))
        assert np.allclose(mu, [0.0])

    def test_direct_combination(self):
        d = Dictionary(np.eye(2))
        mu = mu_of_theta(d, SimplexWeight(np.array([0.3, 0.7])))
        assert np.allclose(mu, [0.3, 0.7])

    def test_q_form_consistency_randomized(self, rng):
        # |mu_theta|^2 must equal theta' Sigma theta to relative 1e-9
        for _ in range(1000):
            n = int(rng.integers(1, 6))
            M = int(rng.integers(1, 7))
            d = Dictionary(rng.standard_normal((n, M)))
            gm = gram(d)
            w = rng.random(M) + 1e-3
            theta = SimplexWeight(w / w.sum())
            lhs = float(np.sum(mu_of_theta(d, theta) ** 2))
            rhs = q_form(gm, theta.theta)
            assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


class TestProjectSimplex:
    def test_equal_shift(self):
        w = project_simplex(np.array([0.5, 0.5, 0.5]))
        assert np.allclose(w.theta, [1 / 3, 1 / 3, 1 / 3])

    def test_dominant_coordinate(self):
        w = project_simplex(np.array([2.0, 0.0, 0.0]))
        assert np.allclose(w.theta, [1.0, 0.0, 0.0])

    def test_idempotent_on_feasible(self):
        w = project_simplex(np.array([0.2, 0.3, 0.5]))
        assert np.allclose(w.theta, [0.2, 0.3, 0.5], atol=1e-12)

    def test_projection_optimality_randomized(self, rng):
        # closer to the input than 100 random feasible points, 1000 inputs
        for _ in range(1000):
            M = int(rng.integers(2, 8))
            v = rng.standard_normal(M) * 3.0
            proj = project_simplex(v).theta
            d_proj = np.sum((proj - v) ** 2)
            others = rng.dirichlet(np.ones(M), size=100)
            d_others = np.sum((others - v) ** 2, axis=1)
            assert d_proj <= d_others.min() + 1e-9


class TestProjectL1Ball:
    def test_interior_unchanged(self):
        v = np.array([0.2, -0.1])
        assert np.array_equal(project_l1_ball(v, 1.0), v)

    def test_axis_point(self):
        assert np.allclose(project_l1_ball(np.array([2.0, 0.0]), 1.0), [1.0, 0.0])

    def test_symmetric_soft_threshold(self):
        assert np.allclose(project_l1_ball(np.array([1.0, 1.0]), 1.0), [0.5, 0.5])

    def test_norm_and_sign_structure_randomized(self, rng):
        for _ in range(300):
            M = int(rng.integers(1, 9))
            v = rng.standard_normal(M) * 2.0
            R = float(rng.random() + 0.1)
            out = project_l1_ball(v, R)
            assert np.abs(out).sum() <= R + 1e-9
            # shrinkage keeps signs and never grows magnitudes
            assert np.all(out * v >= -1e-12)
            assert np.all(np.abs(out) <= np.abs(v) + 1e-12)
            # idempotence
            assert np.allclose(project_l1_ball(out, R), out, atol=1e-12)

    def test_matches_simplex_projection_of_magnitudes(self, rng):
        for _ in range(100):
            v = rng.standard_normal(6) * 2.0
            R = 0.8
            out = project_l1_ball(v, R)
            if np.abs(v).sum() > R:
                mags = project_simplex(np.abs(v) / R).theta * R
                assert np.allclose(np.abs(out), mags, atol=1e-12)

    def test_invalid_radius(self):
        with pytest.raises(InvalidInput):
            project_l1_ball(np.array([1.0]), 0.0)


class TestMinQ:
    def test_identity_uniform(self):
        for M in (2, 5, 17):
            w, q = min_q_over_simplex(gram(Dictionary(np.eye(M))))
            assert q == pytest.approx(1.0 / M, rel=1e-6)
            assert np.allclose(w.theta, np.full(M, 1.0 / M), atol=1e-6)

    def test_zero_in_hull(self):
        gm = gram(Dictionary(np.array([[1.0, -1.0]])))
        _, q = min_q_over_simplex(gm)
        assert q == pytest.approx(0.0, abs=1e-9)

    def test_correlated_segment(self):
        gm = GramMatrix(sigma=np.array([[1.0, 0.5], [0.5, 1.0]]))
        w, q = min_q_over_simplex(gm)
        assert q == pytest.approx(0.75, rel=1e-9)
        assert np.allclose(w.theta, [0.5, 0.5], atol=1e-6)

    def test_certificate_vs_brute_force(self, rng):
        from conftest import brute_force_quadratic_min

        for _ in range(20):
            A = rng.standard_normal((3, 3))
            gm = GramMatrix(sigma=A.T @ A)
            _, q = min_q_over_simplex(gm, tol=1e-10)
            brute = brute_force_quadratic_min(gm.sigma, np.zeros(3))
            assert q <= brute + 1e-8 * gm.max_diag
            assert q >= brute - 1e-4 * gm.max_diag  # grid resolution slack

    def test_nonconvergence_carries_best(self):
        gm = gram(Dictionary(np.eye(64)))
        with pytest.raises(NonConvergence) as err:
            min_q_over_simplex(gm, tol=1e-12, max_iter=3)
        weight, q = err.value.best
        assert q <= 1.0
        assert weight.theta.shape == (64,)


class TestSimplexWeight:
    def test_clamps_tiny_negatives(self):
        w = SimplexWeight(np.array([1.0 + 1e-13, -1e-13]))
        assert w.theta[1] == 0.0
        assert w.theta.sum() == pytest.approx(1.0)

    def test_rejects_larger_negatives(self):
        with pytest.raises(InvalidInput):
            SimplexWeight(np.array([1.0001, -1e-4]))

    def test_rejects_bad_sum(self):
        with pytest.raises(InvalidInput):
            SimplexWeight(np.array([0.6, 0.6]))

    def test_normalizes_within_tolerance(self):
        w = SimplexWeight(np.array([0.5, 0.5 + 5e-10]))
        assert w.theta.sum() == pytest.approx(1.0, abs=1e-15)


class TestSparseGridWeight:
    def test_valid(self):
        sg = SparseGridWeight(counts=np.array([2, 0, 1]), m=3)
        assert np.allclose(sg.weight().theta, [2 / 3, 0.0, 1 / 3])

    def test_rejects_bad_sum(self):
        with pytest.raises(InvalidInput):
            SparseGridWeight(counts=np.array([1, 1]), m=3)

    def test_rejects_negative(self):
        with pytest.raises(InvalidInput):
            SparseGridWeight(counts=np.array([4, -1]), m=3)


class TestDictionaryCsv:
    def test_round_trip(self, tmp_path):
        d = signed_basis_dictionary(3)
        path = tmp_path / "dict.csv"
        write_dictionary_csv(path, d)
        back = read_dictionary_csv(path)
        assert np.array_equal(back.points, d.points)

    def test_rejects_wrong_row_count(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# n=3 m=2\n1,0\n0,1\n")
        with pytest.raises(DimensionMismatch):
            read_dictionary_csv(path)

    def test_rejects_wrong_column_count(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# n=2 m=2\n1,0\n0,1,5\n")
        with pytest.raises(DimensionMismatch):
            read_dictionary_csv(path)

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("n=2 m=2\n1,0\n0,1\n")
        with pytest.raises(InvalidInput):
            read_dictionary_csv(path)

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidInput):
            Dictionary(np.array([[np.inf, 0.0]]))
