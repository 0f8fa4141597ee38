import math

import numpy as np
import pytest

from finslerkit import (BaseConnection, CircleArc, ParametricCurve, Polyline,
                        Segment, holonomy_loop, integrate_geodesic,
                        levi_civita_connection, norm_preservation_residual,
                        parallel_transport, rotation_angle)
from finslerkit.errors import ChartBoxError


class TestCurves:
    def test_segment_linear(self):
        seg = Segment(np.zeros(2), np.array([2.0, 4.0]))
        np.testing.assert_allclose(seg.position(0.25), [0.5, 1.0])
        np.testing.assert_allclose(seg.velocity(0.9), [2.0, 4.0])
        assert not seg.is_closed()

    def test_polyline_arclength_proportional(self):
        # first leg has length 3, second length 1
        poly = Polyline([np.zeros(2), np.array([3.0, 0.0]), np.array([3.0, 1.0])])
        np.testing.assert_allclose(poly.position(0.75), [3.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(poly.velocity(0.5), [4.0, 0.0])
        np.testing.assert_allclose(poly.velocity(0.9), [0.0, 4.0])
        assert poly.breakpoints == pytest.approx((0.0, 0.75, 1.0))

    def test_polyline_closed(self):
        square = Polyline([np.zeros(2), np.array([1.0, 0.0]),
                           np.array([1.0, 1.0]), np.array([0.0, 1.0]),
                           np.zeros(2)])
        assert square.is_closed()

    def test_polyline_rejects_degenerate_input(self):
        with pytest.raises(ValueError):
            Polyline([np.zeros(2)])
        with pytest.raises(ValueError):
            Polyline([np.zeros(2), np.zeros(2), np.ones(2)])

    def test_circle_arc(self):
        arc = CircleArc(center=np.zeros(2), radius=2.0,
                        angle_start=0.0, angle_sweep=math.pi)
        np.testing.assert_allclose(arc.position(0.0), [2.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(arc.position(1.0), [-2.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(arc.velocity(0.0), [0.0, 2.0 * math.pi],
                                   atol=1e-12)
        full = CircleArc(center=np.ones(2), radius=0.5)
        assert full.is_closed()

    def test_parametric_curve_fd_velocity(self):
        curve = ParametricCurve(lambda t: np.array([t ** 2, t]))
        np.testing.assert_allclose(curve.velocity(0.5), [1.0, 1.0], atol=1e-6)


def test_conformal_geodesic_matches_log_chart_straight_line(conformal):
    # exp(x1)|y| is the pullback of the flat plane under w = e^(x1+i x2),
    # so the geodesic from the origin with y0 = (0, 1) is w(t) = 1 + i t
    T = 0.5
    traj = integrate_geodesic(conformal, np.zeros(2), np.array([0.0, 1.0]),
                              T=T, step=1e-3)
    expected = np.array([0.5 * math.log(1.0 + T * T), math.atan(T)])
    np.testing.assert_allclose(traj.final_position, expected, atol=1e-6)
    assert traj.max_drift < 1e-9  # energy is conserved along geodesics


def test_geodesic_energy_diagnostic_name(conformal):
    traj = integrate_geodesic(conformal, np.zeros(2), np.array([0.3, 0.4]),
                              T=0.2, step=1e-3)
    assert traj.diagnostic_name == "energy"
    assert len(traj.times) == len(traj.positions) == len(traj.vectors)


def test_euclidean_geodesics_are_straight(euclidean2):
    traj = integrate_geodesic(euclidean2, np.array([0.1, 0.2]),
                              np.array([0.5, -0.25]), T=1.0, step=1e-2)
    np.testing.assert_allclose(traj.final_position, [0.6, -0.05], atol=1e-12)


def test_base_connection_geodesic_agrees_with_canonical(conformal):
    x0, y0 = np.zeros(2), np.array([0.4, 0.9])
    canonical = integrate_geodesic(conformal, x0, y0, T=0.4, step=2e-3)
    base = integrate_geodesic(conformal, x0, y0, T=0.4, step=2e-3,
                              connection=levi_civita_connection(conformal))
    np.testing.assert_allclose(base.final_position, canonical.final_position,
                               atol=1e-5)


def test_chart_box_enforced(euclidean2):
    box = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    with pytest.raises(ChartBoxError):
        integrate_geodesic(euclidean2, np.zeros(2), np.array([4.0, 0.0]),
                           T=1.0, step=1e-2, chart_box=box)


def test_bad_step_rejected(euclidean2):
    with pytest.raises(ValueError):
        integrate_geodesic(euclidean2, np.zeros(2), np.ones(2), T=1.0, step=0.0)


@pytest.mark.parametrize("name", ["quartic2", "conformal_exp", "randers_flat"])
def test_canonical_transport_preserves_norm(corpus, name):
    field = corpus[name]
    curve = Polyline([np.zeros(2), np.array([0.5, 0.2]), np.array([0.3, 0.6])])
    traj = parallel_transport(field, curve, np.array([1.0, 0.3]), step=2e-3)
    assert traj.diagnostic_name == "norm"
    assert traj.max_drift <= 1e-7
    assert norm_preservation_residual(field, traj) == traj.max_drift


def test_transport_independent_of_connection_on_berwald_member(conformal):
    curve = Polyline([np.zeros(2), np.array([0.4, 0.1]), np.array([0.2, 0.5])])
    v0 = np.array([0.8, -0.1])
    canonical = parallel_transport(conformal, curve, v0, step=2e-3)
    base = parallel_transport(conformal, curve, v0, step=2e-3,
                              connection=levi_civita_connection(conformal))
    np.testing.assert_allclose(base.final_vector, canonical.final_vector,
                               atol=1e-5)


def test_extracted_connection_transport_spot_check(conformal):
    # from_berwald extracts at every integrator stage, so keep it short
    # and coarse; it must agree with the analytic Levi-Civita route
    curve = Segment(np.zeros(2), np.array([0.2, 0.1]))
    v0 = np.array([0.5, 0.4])
    via_extraction = parallel_transport(
        conformal, curve, v0, step=0.05,
        connection=BaseConnection.from_berwald(conformal))
    via_levi_civita = parallel_transport(
        conformal, curve, v0, step=0.05,
        connection=levi_civita_connection(conformal))
    np.testing.assert_allclose(via_extraction.final_vector,
                               via_levi_civita.final_vector, atol=1e-4)


def test_transport_across_corner_continuous(conformal):
    # integrating through a polyline corner must not sample the wrong
    # side's velocity at the shared breakpoint
    straight = Polyline([np.zeros(2), np.array([0.6, 0.6])])
    cornered = Polyline([np.zeros(2), np.array([0.3, 0.3]),
                         np.array([0.6, 0.6])])
    v0 = np.array([1.0, 0.0])
    a = parallel_transport(conformal, straight, v0, step=2e-3)
    b = parallel_transport(conformal, cornered, v0, step=2e-3)
    np.testing.assert_allclose(b.final_vector, a.final_vector, atol=1e-8)


def test_holonomy_flat_loop_is_identity(conformal):
    s = 0.1
    loop = Polyline([np.zeros(2), np.array([s, 0.0]), np.array([s, s]),
                     np.array([0.0, s]), np.zeros(2)])
    H = holonomy_loop(conformal, loop, step=2e-3)
    np.testing.assert_allclose(H, np.eye(2), atol=1e-5)


def test_holonomy_sphere_square_matches_curvature(stereo):
    # Gauss-Bonnet: rotation angle ~ K * area = 4 s^2 for the unit sphere
    s = 0.1
    loop = Polyline([np.zeros(2), np.array([s, 0.0]), np.array([s, s]),
                     np.array([0.0, s]), np.zeros(2)])
    H = holonomy_loop(stereo, loop, step=2e-3)
    angle = rotation_angle(H)
    assert angle == pytest.approx(4.0 * s * s, rel=0.2)


def test_holonomy_requires_closed_loop(euclidean2):
    open_curve = Polyline([np.zeros(2), np.ones(2)])
    with pytest.raises(ValueError):
        holonomy_loop(euclidean2, open_curve, step=1e-2)


def test_rotation_angle_of_known_rotation():
    theta = 0.3
    R = np.array([[math.cos(theta), -math.sin(theta)],
                  [math.sin(theta), math.cos(theta)]])
    assert rotation_angle(R) == pytest.approx(theta, abs=1e-12)


def test_trajectory_artifacts_round_trip(tmp_path, euclidean2):
    traj = integrate_geodesic(euclidean2, np.zeros(2), np.array([1.0, 2.0]),
                              T=0.1, step=1e-2)
    csv_path = tmp_path / "traj.csv"
    json_path = tmp_path / "traj.json"
    traj.write_csv(csv_path)
    traj.write_json(json_path)

    header = csv_path.read_text().splitlines()[0]
    assert header == "t,x1,x2,y1,y2,diagnostic"

    import json
    payload = json.loads(json_path.read_text())
    assert payload["diagnostic_name"] == "energy"
    np.testing.assert_allclose(payload["positions"][-1], traj.final_position)
