"""Tests for indicatrix sampling, the minimum-volume ellipsoid, and the
Loewner metric."""

import math

import numpy as np
import pytest

from finslerkit import (ConvergenceError, DegeneratePointsError,
                        EvaluationDomainError, averaged_metric,
                        from_expression, loewner_metric, mvee_centered,
                        proportionality_check, sample_indicatrix)

ROOT_HALF = 2.0 ** -0.5
MVEE_SLACK = 1e-7


class TestSampleIndicatrix:
    def test_euclidean_samples_lie_on_unit_circle(self, euclidean2):
        points = sample_indicatrix(euclidean2, np.zeros(2), count=16)
        np.testing.assert_allclose(np.linalg.norm(points, axis=1), 1.0,
                                   atol=1e-12)

    def test_samples_have_unit_norm_in_the_field(self, quartic):
        points = sample_indicatrix(quartic, np.zeros(2), count=32)
        values = [float(quartic(np.zeros(2), p)) for p in points]
        np.testing.assert_allclose(values, 1.0, atol=1e-12)

    def test_quartic_diagonal_sample_reaches_fourth_root_of_two(self, quartic):
        # the angle grid includes the diagonal, where the radius is 2^(1/4)
        points = sample_indicatrix(quartic, np.zeros(2), count=16)
        radii = np.linalg.norm(points, axis=1)
        assert radii.max() == pytest.approx(2.0 ** 0.25, abs=1e-12)

    def test_count_floor_enforced(self, euclidean2):
        with pytest.raises(ValueError):
            sample_indicatrix(euclidean2, np.zeros(2), count=11)

    def test_nonpositive_norm_rejected(self):
        bad = from_expression("y1", 2, name="halfplane",
                              declared_class="pre_finsler")
        with pytest.raises(EvaluationDomainError):
            sample_indicatrix(bad, np.zeros(2))

    def test_three_dimensional_sampling_is_seeded(self):
        field = from_expression("sqrt(y1^2 + y2^2 + y3^2)", 3,
                                name="euclidean3")
        a = sample_indicatrix(field, np.zeros(3), count=64, seed=3)
        b = sample_indicatrix(field, np.zeros(3), count=64, seed=3)
        c = sample_indicatrix(field, np.zeros(3), count=64, seed=4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0, atol=1e-12)


class TestMveeCentered:
    def test_axis_points_give_identity(self):
        points = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        form = mvee_centered(points)
        np.testing.assert_allclose(form.matrix, np.eye(2), atol=1e-6)

    def test_ellipse_samples_recover_quadratic_form(self):
        # y1^2/4 + y2^2 = 1 sampled densely
        theta = np.linspace(0.0, 2.0 * math.pi, 400, endpoint=False)
        points = np.stack([2.0 * np.cos(theta), np.sin(theta)], axis=1)
        form = mvee_centered(points)
        np.testing.assert_allclose(form.matrix, np.diag([0.25, 1.0]),
                                   atol=1e-4)

    def test_degenerate_points_rejected(self):
        points = np.array([[1.0, 2.0], [-2.0, -4.0], [0.5, 1.0]])
        with pytest.raises(DegeneratePointsError):
            mvee_centered(points)

    def test_iteration_cap_raises(self, quartic):
        points = sample_indicatrix(quartic, np.zeros(2))
        with pytest.raises(ConvergenceError):
            mvee_centered(points, max_iterations=10)

    def test_uniform_angle_grid_on_ellipse_converges_immediately(self):
        # uniform weights are already optimal for an angle-uniform grid on
        # an axis-aligned ellipse, so the first residual check passes
        theta = np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)
        points = np.stack([2.0 * np.cos(theta), np.sin(theta)], axis=1)
        form = mvee_centered(points)
        assert form.iterations == 1

    def test_offset_indicatrix_converges(self, randers_flat):
        # asymmetric clouds drive weights toward a small support set and
        # exercise the drop step of the ascent
        points = sample_indicatrix(randers_flat, np.zeros(2))
        form = mvee_centered(points)
        assert form.residual <= MVEE_SLACK
        assert form.contains(points, slack=1e-6)

    def test_containment_and_tightness(self, quartic):
        points = sample_indicatrix(quartic, np.zeros(2))
        form = mvee_centered(points)
        quad = np.einsum("ki,ij,kj->k", points, form.matrix, points)
        # every sample inside, and the boundary is touched
        assert quad.max() <= 1.0 + 10.0 * MVEE_SLACK
        assert quad.max() >= 1.0 - 1e-4

    def test_shrunk_ellipsoid_loses_containment(self, quartic):
        # minimality probe: scaling the form up by more than the slack
        # must push some sample outside
        points = sample_indicatrix(quartic, np.zeros(2))
        form = mvee_centered(points)
        inflated = form.matrix * (1.0 + 1e-3)
        quad = np.einsum("ki,ij,kj->k", points, inflated, points)
        assert quad.max() > 1.0 + 10.0 * MVEE_SLACK

    def test_diagnostics_reported(self):
        points = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0],
                           [ROOT_HALF, ROOT_HALF], [-ROOT_HALF, -ROOT_HALF]])
        form = mvee_centered(points)
        assert form.iterations >= 1
        assert form.residual <= MVEE_SLACK
        assert form.contains(points, slack=1e-9)


class TestLoewnerMetric:
    def test_quartic_form_is_scaled_identity(self, quartic):
        form = loewner_metric(quartic, np.zeros(2))
        np.testing.assert_allclose(form.matrix, ROOT_HALF * np.eye(2),
                                   atol=1e-3)

    def test_riemannian_form_recovers_metric(self, conformal):
        x = np.array([0.4, -0.1])
        form = loewner_metric(conformal, x)
        np.testing.assert_allclose(form.matrix, conformal.metric_matrix(x),
                                   atol=1e-3)

    def test_diagnostics_include_containment(self, randers_flat):
        form = loewner_metric(randers_flat, np.zeros(2))
        diag = form.diagnostics
        assert diag["contained"] is True
        assert diag["max_quadratic"] <= 1.0 + 10.0 * MVEE_SLACK
        assert diag["count"] >= 12

    def test_equivariance_under_linear_maps(self, quartic, rng):
        # mapping the samples through Phi maps the form by the
        # inverse-transpose congruence
        points = sample_indicatrix(quartic, np.zeros(2))
        base = mvee_centered(points).matrix
        for _ in range(3):
            phi = rng.normal(size=(2, 2))
            while abs(np.linalg.det(phi)) < 0.3:
                phi = rng.normal(size=(2, 2))
            mapped = points @ phi.T
            got = mvee_centered(mapped).matrix
            phi_inv = np.linalg.inv(phi)
            expected = phi_inv.T @ base @ phi_inv
            np.testing.assert_allclose(got, expected, atol=1e-4)


class TestProportionalityCheck:
    def test_scaled_identity_succeeds(self):
        report = proportionality_check(np.eye(2), 2.0 * np.eye(2))
        assert report["success"] is True
        assert report["lambda"] == pytest.approx(0.5, abs=1e-12)
        assert report["deviation"] == pytest.approx(0.0, abs=1e-12)

    def test_incompatible_shapes_fail(self):
        report = proportionality_check(np.diag([1.0, 1.0]),
                                       np.diag([1.0, 4.0]))
        assert report["success"] is False
        assert report["deviation"] > 0.1

    def test_riemannian_member_gives_inverse_dimension(self, conformal):
        x = np.array([0.2, 0.3])
        g_l = loewner_metric(conformal, x)
        g_m = averaged_metric(conformal, x)
        report = proportionality_check(g_l, g_m)
        assert report["success"] is True
        assert report["lambda"] == pytest.approx(0.5, rel=1e-3)

    def test_quartic_ratio_matches_frozen_constant(self, quartic):
        g_l = loewner_metric(quartic, np.zeros(2))
        g_m = averaged_metric(quartic, np.zeros(2))
        report = proportionality_check(g_l, g_m)
        assert report["success"] is True
        assert report["lambda"] == pytest.approx(0.393446867188657, rel=1e-4)
