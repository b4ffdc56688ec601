import math

import numpy as np
import pytest

from conftest import brute_force_support
from lgw.core import Dictionary, gram, signed_basis_dictionary
from lgw.errors import EmptyIntersection, InvalidInput, InvalidRegime, NonConvergence
from lgw.rng import SeededStream
from lgw.width import (
    Packing,
    WidthOpts,
    build_packing,
    estimate_width,
    local_support,
    lower_bound_rip,
    rip_constant,
    upper_bound_closed_form,
    upper_bound_scaled,
)


def cross_polytope_2d() -> Dictionary:
    return Dictionary(np.array([[1.0, -1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0]]))


class TestLocalSupport:
    def test_vertex_feasible_is_exact(self):
        sol = local_support(cross_polytope_2d(), np.array([1.0, 1.0]), 2.0)
        assert sol.value == pytest.approx(1.0, abs=1e-12)
        assert sol.lam == 0.0
        assert sol.dual_gap == 0.0
        assert sol.converged and sol.feasible

    def test_active_constraint_analytic(self):
        # optimum at the l2 circle inside the l1 ball: value = s * sqrt(2)
        sol = local_support(cross_polytope_2d(), np.array([1.0, 1.0]), 0.5)
        assert sol.value == pytest.approx(0.5 * math.sqrt(2.0), abs=1e-5)
        mu = cross_polytope_2d().points @ sol.theta.theta
        assert np.allclose(mu, [0.35355, 0.35355], atol=1e-4)
        assert sol.lam > 0
        assert sol.q_value <= 0.25 + 1e-8

    def test_empty_intersection(self):
        single = Dictionary(np.array([[1.0], [0.0]]))
        with pytest.raises(EmptyIntersection):
            local_support(single, np.array([1.0, 0.0]), 0.5)

    def test_certificate_soundness_randomized(self, rng):
        # brute-force grid never beats value + dual_gap (+ grid slack)
        from lgw.core import min_q_over_simplex

        for trial in range(8):
            M = int(rng.integers(2, 4))
            pts = rng.standard_normal((4, M))
            pts /= np.linalg.norm(pts, axis=0)
            d = Dictionary(pts)
            gm = gram(d)
            _, q_min = min_q_over_simplex(gm)
            # radius strictly between the hull's closest point and the
            # farthest vertex, so the constraint is active but feasible
            s = math.sqrt(q_min + 0.6 * (gm.max_diag - q_min) + 1e-9)
            for _ in range(3):
                g = rng.standard_normal(4)
                sol = local_support(d, g, s)
                brute = brute_force_support(pts, g, s, step=2e-3)
                slack = 1e-3 * float(np.linalg.norm(g))
                assert brute <= sol.value + sol.dual_gap + slack
                assert abs(sol.value - brute) <= 2.0 * slack + 5e-3 * abs(brute)

    def test_q_within_declared_slack(self, rng):
        d = signed_basis_dictionary(6)
        for s in (0.4, 0.7, 1.3):
            g = rng.standard_normal(6)
            sol = local_support(d, g, s)
            assert sol.q_value <= s * s + 1e-8 * max(1.0, s * s)

    def test_dimension_mismatch(self):
        with pytest.raises(Exception):
            local_support(cross_polytope_2d(), np.ones(3), 1.0)


class TestEstimateWidth:
    def test_segment_width_matches_folded_normal(self):
        d = Dictionary(np.array([[1.0, -1.0], [0.0, 0.0]]))
        est = estimate_width(d, 2.0, 20_000, SeededStream(42))
        assert abs(est.mean - math.sqrt(2.0 / math.pi)) <= 4.0 * est.stderr
        assert est.n_nonconverged == 0

    def test_singleton_mean_near_zero(self):
        d = Dictionary(np.array([[1.0], [0.0]]))
        est = estimate_width(d, 1.0, 5000, SeededStream(3))
        assert abs(est.mean) <= 4.0 * est.stderr

    def test_full_l1_ball_equals_sup_norm(self):
        # with s = 1 every vertex is feasible: the sample value is exactly
        # the max absolute Gaussian coordinate
        d = signed_basis_dictionary(8)
        stream = SeededStream(11)
        for k in range(5):
            g = stream.substream(k).open().gaussians(8)
            sol = local_support(d, g, 1.0)
            assert sol.value == pytest.approx(np.max(np.abs(g)), abs=1e-12)
        est = estimate_width(d, 1.0, 2000, stream)
        assert est.mean <= upper_bound_closed_form(16, 8, 1.0)

    def test_monotone_in_radius_shared_draws(self):
        d = signed_basis_dictionary(16)
        stream = SeededStream(5)
        means = [
            estimate_width(d, s, 400, stream).mean for s in (0.25, 0.5, 1.0, 2.0)
        ]
        stderr = estimate_width(d, 0.25, 400, stream).stderr
        for lo, hi in zip(means, means[1:]):
            assert hi >= lo - 2.0 * stderr

    def test_scaling_is_exact_for_power_of_two(self):
        d = signed_basis_dictionary(6)
        d2 = d.scaled(2.0)
        stream = SeededStream(9)
        est = estimate_width(d, 0.5, 200, stream)
        est2 = estimate_width(d2, 1.0, 200, stream)
        assert est2.mean == pytest.approx(2.0 * est.mean, rel=0, abs=0)

    def test_scaling_close_for_general_factor(self):
        d = signed_basis_dictionary(5)
        d3 = d.scaled(3.0)
        stream = SeededStream(10)
        est = estimate_width(d, 0.6, 100, stream)
        est3 = estimate_width(d3, 1.8, 100, stream)
        assert est3.mean == pytest.approx(3.0 * est.mean, rel=1e-9)

    def test_deterministic_and_thread_invariant(self):
        d = signed_basis_dictionary(8)
        a = estimate_width(d, 0.5, 300, SeededStream(21))
        b = estimate_width(d, 0.5, 300, SeededStream(21))
        c = estimate_width(d, 0.5, 300, SeededStream(21), opts=WidthOpts(threads=4))
        assert a == b == c

    def test_stderr_definition(self):
        d = Dictionary(np.array([[1.0, -1.0]]))
        est = estimate_width(d, 2.0, 500, SeededStream(1))
        stream = SeededStream(1)
        values = np.array(
            [
                np.abs(stream.substream(k).open().gaussians(1))[0]
                for k in range(500)
            ]
        )
        assert est.mean == pytest.approx(values.mean(), abs=1e-12)
        assert est.stderr == pytest.approx(values.std(ddof=1) / math.sqrt(500), abs=1e-12)

    def test_requires_two_samples(self):
        with pytest.raises(InvalidInput):
            estimate_width(signed_basis_dictionary(2), 1.0, 1, SeededStream(0))

    def test_nonconvergence_above_one_percent_raises(self):
        d = signed_basis_dictionary(16)
        bad_opts = WidthOpts(feas_tol=1e-16, cg_gap_rel=1e-16, cg_max_iter=2,
                             bisect_steps=1, max_doublings=1)
        with pytest.raises(NonConvergence) as err:
            estimate_width(d, 0.3, 100, SeededStream(2), opts=bad_opts)
        assert err.value.best.n_nonconverged > 1


class TestClosedFormBounds:
    def test_small_hull_cauchy_schwarz_branch(self):
        assert upper_bound_closed_form(2, 1000, 1.0) == pytest.approx(
            math.sqrt(2.0), abs=1e-12
        )

    def test_tiny_radius_clamps_log(self):
        assert upper_bound_closed_form(100, 100, 1e-3) == pytest.approx(0.01)

    def test_log_branch_with_dimension_cap(self):
        # the min keeps the rank term: s*sqrt(min(n, M)) = 10 beats
        # 4*sqrt(ln(400e)) ~ 10.577
        assert upper_bound_closed_form(100, 10**6, 1.0) == pytest.approx(10.0)
        assert 4.0 * math.sqrt(math.log(400 * math.e)) == pytest.approx(10.5767, abs=1e-3)

    def test_scaled_reduces_to_closed_form_at_unit_scale(self):
        for M in (2, 10, 100):
            for n in (1, 50, 10**4):
                for s in (0.01, 0.3, 1.0, 2.5):
                    assert upper_bound_scaled(M, n, s, 1.0) == pytest.approx(
                        upper_bound_closed_form(M, n, s), abs=1e-14
                    )

    def test_scaled_log_branch_value(self):
        # in the log-dominant regime the scaled bound is 4R sqrt(ln(4eM r^2/R^2))
        val = upper_bound_scaled(1000, 10**6, 1.0, 2.0)
        assert val == pytest.approx(8.0 * math.sqrt(math.log(1000 * math.e)), rel=1e-12)

    def test_scaled_r_at_least_R_matches_scaled_closed_form_log_branch(self):
        M, n = 1000, 10**6
        for r in (1.0, 1.5, 3.0):
            assert upper_bound_scaled(M, n, r, 1.0) == pytest.approx(
                upper_bound_closed_form(M, n, 1.0), rel=1e-12
            )

    def test_monte_carlo_below_upper_bound(self):
        d = signed_basis_dictionary(8)
        stream = SeededStream(4)
        for s in (0.35355339059327373, 1.0):
            est = estimate_width(d, s, 1500, stream)
            assert est.mean <= upper_bound_closed_form(16, 8, s) + 2 * est.stderr

    def test_input_validation(self):
        with pytest.raises(InvalidInput):
            upper_bound_closed_form(1, 10, 1.0)
        with pytest.raises(InvalidInput):
            upper_bound_closed_form(2, 10, 0.0)
        with pytest.raises(InvalidInput):
            upper_bound_scaled(2, 10, 1.0, -1.0)


class TestLowerBoundRip:
    def test_values(self):
        assert lower_bound_rip(100, 0.5, 1.0) == pytest.approx(
            (math.sqrt(2) / 4) * math.sqrt(math.log(5.0)), rel=1e-12
        )
        assert lower_bound_rip(128, 0.5, 1.0) == pytest.approx(0.481702, abs=1e-5)

    def test_regime_guards(self):
        with pytest.raises(InvalidRegime):
            lower_bound_rip(10, 0.5, 1.0)  # m = 4 > M/5 = 2
        with pytest.raises(InvalidRegime):
            lower_bound_rip(100, 0.3, 1.0)  # 1/s^2 not an integer
        with pytest.raises(InvalidInput):
            lower_bound_rip(100, 1.5, 1.0)
        with pytest.raises(InvalidInput):
            lower_bound_rip(100, 0.5, 0.0)

    def test_boundary_regime_gives_zero(self):
        # m = M/5 exactly: log argument is 1, bound is 0
        assert lower_bound_rip(20, 0.5, 1.0) == pytest.approx(0.0, abs=1e-12)


class TestRipConstant:
    def test_orthonormal_exact(self):
        kappa, exact = rip_constant(Dictionary(np.eye(6)), 3)
        assert exact
        assert kappa == pytest.approx(1.0, abs=1e-9)

    def test_correlated_pair(self):
        pts = np.array([[1.0, 0.5], [0.0, math.sqrt(0.75)]])
        kappa, exact = rip_constant(Dictionary(pts), 2)
        assert exact
        assert kappa == pytest.approx(math.sqrt(0.5), rel=1e-9)

    def test_duplicated_column_is_singular(self):
        pts = np.array([[1.0, 1.0], [0.0, 0.0]])
        kappa, _ = rip_constant(Dictionary(pts), 2)
        assert kappa == pytest.approx(0.0, abs=1e-9)

    def test_sampled_branch_overestimates(self, rng):
        pts = rng.standard_normal((8, 12))
        pts /= np.linalg.norm(pts, axis=0)
        d = Dictionary(pts)
        exact_kappa, exact = rip_constant(d, 3, budget=10**6)
        assert exact
        sampled_kappa, flag = rip_constant(d, 3, budget=50, stream=SeededStream(8))
        assert not flag
        assert sampled_kappa >= exact_kappa - 1e-12

    def test_sampling_requires_stream(self):
        with pytest.raises(InvalidInput):
            rip_constant(Dictionary(np.eye(30)), 5, budget=10)


class TestPacking:
    def test_weight_one_gives_all_singletons(self):
        d = Dictionary(np.eye(7))
        packing = build_packing(d, 1, SeededStream(0))
        assert packing.size == 7
        assert sorted(np.flatnonzero(v)[0] for v in packing.signed_vectors) == list(range(7))

    def test_orthonormal_signs_accepted_immediately(self):
        d = Dictionary(np.eye(25))
        packing = build_packing(d, 4, SeededStream(1))
        pts = d.points.astype(np.float64)
        for v in packing.signed_vectors:
            mu = pts @ v.astype(np.float64)
            assert np.dot(mu, mu) == pytest.approx(4.0, abs=1e-9)

    def test_reaches_guaranteed_cardinality(self):
        d = Dictionary(np.eye(128))
        packing = build_packing(d, 4, SeededStream(7))
        guaranteed = math.exp((4 / 2) * math.log(128 / 20))
        assert packing.size >= guaranteed
        assert packing.size >= 41

    def test_pairwise_distance_validated(self):
        bad = np.zeros((2, 6), dtype=np.int8)
        bad[0, :4] = 1
        bad[1, :4] = 1
        with pytest.raises(InvalidInput):
            Packing(signed_vectors=bad, m=4)

    def test_requires_unit_norm_columns(self):
        with pytest.raises(InvalidInput):
            build_packing(Dictionary(2.0 * np.eye(8)), 2, SeededStream(0))

    def test_deterministic(self):
        d = Dictionary(np.eye(32))
        a = build_packing(d, 2, SeededStream(12))
        b = build_packing(d, 2, SeededStream(12))
        assert np.array_equal(a.signed_vectors, b.signed_vectors)
