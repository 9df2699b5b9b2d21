import math

import numpy as np
import pytest

from ambientflow.geometry import (AngleProfile, ClosedCurve,
                                  ClosureConstructionError,
                                  ConvexityRequiredError, InvalidCurveError,
                                  build_parabola_closure, closure_gap,
                                  compute_geometry, curve_from_angle_profile,
                                  entropy, hausdorff_distance,
                                  median_curvature, resample_arclength,
                                  to_angle_param)

TWO_PI = 2.0 * math.pi


def uniform_profile(values):
    m = len(values)
    return AngleProfile(theta=np.arange(m) * (TWO_PI / m), k=np.asarray(values, float))


class TestComputeGeometry:
    def test_unit_circle(self):
        geom = compute_geometry(ClosedCurve.circle(1.0, 256))
        assert np.abs(geom.k - 1.0).max() <= 1e-3
        assert abs(geom.length - TWO_PI) <= 1e-3
        assert abs(geom.area - math.pi) <= 1e-3

    def test_ellipse_area_and_curvature(self):
        # closed-form ellipse curvature at (a, 0) is a/b^2
        geom = compute_geometry(ClosedCurve.ellipse(2.0, 1.0, 512))
        assert abs(geom.area - 2.0 * math.pi) <= 1e-3
        i = np.argmax(geom.vertices[:, 0])
        assert abs(geom.k[i] - 2.0) <= 1e-2

    def test_turning_number_of_convex_curves(self):
        for curve in (ClosedCurve.circle(0.3, 64), ClosedCurve.ellipse(2.0, 0.5, 128),
                      build_parabola_closure(0.05, 0.5, 256)):
            geom = compute_geometry(curve)
            assert abs(geom.turning - 1.0) <= 1e-9

    def test_orthonormal_frame_everywhere(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            th = np.arange(128) * (TWO_PI / 128)
            r = 1.0 + 0.3 * np.sin(3 * th + rng.uniform(0, TWO_PI))
            curve = ClosedCurve(np.column_stack((r * np.cos(th), r * np.sin(th))))
            geom = compute_geometry(curve)
            dot = (geom.tau * geom.nu).sum(axis=1)
            assert np.abs(dot).max() <= 1e-12
            assert np.abs(np.hypot(geom.tau[:, 0], geom.tau[:, 1]) - 1).max() <= 1e-12
            assert np.abs(np.hypot(geom.nu[:, 0], geom.nu[:, 1]) - 1).max() <= 1e-12
            # nu is the +90 degree rotation of tau
            assert np.abs(geom.nu[:, 0] + geom.tau[:, 1]).max() <= 1e-15
            assert np.abs(geom.nu[:, 1] - geom.tau[:, 0]).max() <= 1e-15

    def test_circle_curvature_second_order(self):
        # r * err * N^2 stays bounded by the same constant for every radius
        for r in (0.5, 1.0, 2.0):
            for n in (64, 128, 256):
                geom = compute_geometry(ClosedCurve.circle(r, n))
                err = np.abs(geom.k - 1.0 / r).max()
                assert r * err * n * n <= 2.0

    def test_inward_normal_on_circle(self):
        geom = compute_geometry(ClosedCurve.circle(2.0, 64))
        # inward normal points to the center
        outward = geom.vertices / 2.0
        assert np.abs(geom.nu + outward).max() <= 1e-3

    def test_rejects_degenerate_edge(self):
        xy = ClosedCurve.circle(1.0, 16).vertices.copy()
        xy[3] = xy[4]
        with pytest.raises(InvalidCurveError):
            ClosedCurve(xy)

    def test_rejects_self_intersection(self):
        t = np.arange(16) * (TWO_PI / 16)
        bowtie = np.column_stack((np.cos(t), np.sin(2 * t)))
        with pytest.raises(InvalidCurveError):
            ClosedCurve(bowtie)

    def test_orientation_normalized(self):
        cw = ClosedCurve.circle(1.0, 32).vertices[::-1]
        curve = ClosedCurve(cw)
        assert compute_geometry(curve).area > 0


class TestResample:
    def test_circle_upsample_preserves_length(self):
        c = ClosedCurve.circle(1.0, 100)
        out = resample_arclength(c, 200)
        L_in = compute_geometry(c).length
        L_out = compute_geometry(out).length
        assert abs(L_out - L_in) <= 1e-6

    def test_idempotent_on_equispaced(self):
        c = ClosedCurve.circle(1.0, 128)
        out = resample_arclength(c, 128)
        assert np.abs(out.vertices - c.vertices).max() <= 1e-12

    def test_squareish_polygon_area_refinement(self):
        # enclosed (shoelace) area defect from corner cuts shrinks superlinearly
        def shoelace(c):
            x, y = c.vertices[:, 0], c.vertices[:, 1]
            return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)

        defects = []
        for m in (25, 100):
            side = np.linspace(0.0, 1.0, m, endpoint=False)
            pts = np.concatenate([
                np.column_stack((side, np.zeros(m))),
                np.column_stack((np.ones(m), side)),
                np.column_stack((1.0 - side, np.ones(m))),
                np.column_stack((np.zeros(m), 1.0 - side)),
            ])
            sq = ClosedCurve(pts)
            # the +2 offsets the targets so new points straddle the corners
            out = resample_arclength(sq, 4 * m + 2)
            defects.append(abs(shoelace(out) - shoelace(sq)))
        assert defects[0] <= 1e-2
        assert defects[1] <= defects[0] / 4.0

    def test_equispaced_output(self):
        c = ClosedCurve.ellipse(2.0, 1.0, 200)
        out = resample_arclength(c, 256)
        e = np.roll(out.vertices, -1, axis=0) - out.vertices
        ell = np.hypot(e[:, 0], e[:, 1])
        # arc positions along the input polygon are exactly uniform; chord
        # lengths agree to the corner-cut defect O(h^2)
        assert ell.std() / ell.mean() <= 1e-3

    def test_hausdorff_to_input_below_max_edge(self):
        c = ClosedCurve.ellipse(2.0, 1.0, 64)
        e = np.roll(c.vertices, -1, axis=0) - c.vertices
        max_edge = np.hypot(e[:, 0], e[:, 1]).max()
        out = resample_arclength(c, 97)
        assert hausdorff_distance(c, out) <= max_edge

    def test_geometry_preserving_at_matched_resolution(self):
        base = resample_arclength(ClosedCurve.ellipse(1.5, 0.8, 400), 400)
        out = resample_arclength(base, 400)
        g0, g1 = compute_geometry(base), compute_geometry(out)
        assert abs(g1.length - g0.length) / g0.length <= 1e-6
        assert abs(g1.area - g0.area) / abs(g0.area) <= 1e-4

    def test_rejects_tiny_n(self):
        with pytest.raises(InvalidCurveError):
            resample_arclength(ClosedCurve.circle(1.0, 32), 4)


class TestAngleParam:
    def test_circle_constant_profile(self):
        geom = compute_geometry(ClosedCurve.circle(2.0, 2048))
        prof = to_angle_param(geom, 256)
        assert np.abs(prof.k - 0.5).max() <= 1e-6

    def test_ellipse_extremes(self):
        geom = compute_geometry(ClosedCurve.ellipse(2.0, 1.0, 1024))
        prof = to_angle_param(geom, 512)
        assert abs(prof.k.max() - 2.0) <= 1e-2      # a/b^2
        assert abs(prof.k.min() - 0.25) <= 1e-2     # b/a^2

    def test_ellipse_closure_gap(self):
        geom = compute_geometry(ClosedCurve.ellipse(2.0, 1.0, 1024))
        prof = to_angle_param(geom, 512)
        assert closure_gap(prof) <= 1e-3 * geom.length

    def test_requires_convexity(self):
        geom = compute_geometry(ClosedCurve.ellipse(2.0, 1.0, 64))
        hollow = geom.vertices.copy()
        hollow[0] = 0.55 * hollow[0]     # dent makes a concave vertex
        with pytest.raises(ConvexityRequiredError):
            to_angle_param(compute_geometry(ClosedCurve(hollow)), 64)

    def test_reconstruction_roundtrip(self):
        # profile -> curve returns the original up to rigid translation
        base = ClosedCurve.ellipse(1.4, 0.9, 1024)
        geom = compute_geometry(base)
        prof = to_angle_param(geom, 1024)
        rec = curve_from_angle_profile(prof)
        shift = compute_geometry(base).centroid() - compute_geometry(rec).centroid()
        moved = rec.vertices + shift
        assert hausdorff_distance(moved, base.vertices) <= 1e-2 * geom.length


class TestMedianCurvature:
    def test_constant(self):
        assert median_curvature(uniform_profile(np.full(256, 3.7))) == 3.7

    def test_step_profile_aligned_window(self):
        m = 256
        k = np.where(np.arange(m) < m // 2, 2.0, 1.0)
        assert median_curvature(uniform_profile(k)) == 2.0

    def test_sine_profile(self):
        th = np.arange(1024) * (TWO_PI / 1024)
        assert abs(median_curvature(uniform_profile(1.0 + 0.5 * np.sin(th))) - 1.0) <= 1e-12

    def test_matches_bruteforce_on_random_profiles(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            m = int(rng.integers(16, 96))
            th = np.arange(m) * (TWO_PI / m)
            k = 1.5 + rng.uniform(0.1, 1.0) * np.sin(th + rng.uniform(0, TWO_PI)) \
                + rng.uniform(0.1, 0.5) * np.cos(2 * th)
            prof = uniform_profile(k)
            w = math.ceil(m / 2)
            brute = max(min(np.concatenate((k, k))[j:j + w]) for j in range(m))
            assert median_curvature(prof) == brute

    def test_bounds(self):
        rng = np.random.default_rng(3)
        k = rng.uniform(0.5, 2.0, 64)
        val = median_curvature(uniform_profile(k))
        assert k.min() <= val <= k.max()


class TestEntropy:
    def test_constant_one(self):
        assert abs(entropy(uniform_profile(np.ones(128)))) <= 1e-14

    def test_constant_e(self):
        assert abs(entropy(uniform_profile(np.full(128, math.e))) - TWO_PI) <= 1e-12

    def test_ellipse_matches_quadrature(self):
        # exact ellipse curvature as a function of the tangent angle:
        # k(theta) = a b (cos^2/a^2 + sin^2/b^2)^(3/2)
        a, b = 2.0, 1.0

        def k_exact(th):
            return a * b * (np.cos(th) ** 2 / (a * a)
                            + np.sin(th) ** 2 / (b * b)) ** 1.5

        m = 1024
        prof = uniform_profile(k_exact(np.arange(m) * (TWO_PI / m)))
        # high-resolution quadrature oracle on the same integrand
        dense = np.arange(1 << 18) * (TWO_PI / (1 << 18))
        oracle = float(np.log(k_exact(dense)).sum() * (TWO_PI / len(dense)))
        assert abs(entropy(prof) - oracle) <= 1e-6

        # the full discrete chain lands within discretization error of it
        geom = compute_geometry(ClosedCurve.ellipse(a, b, 2048))
        val = entropy(to_angle_param(geom, 1024))
        assert abs(val - oracle) <= 5e-4

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            entropy(uniform_profile(np.array([1.0, -1.0, 1.0, 1.0])))


class TestHausdorff:
    def test_identical(self):
        c = ClosedCurve.ellipse(2.0, 1.0, 64)
        assert hausdorff_distance(c, c) == 0.0

    def test_concentric_circles(self):
        a = ClosedCurve.circle(1.0, 512)
        b = ClosedCurve.circle(2.0, 512)
        assert abs(hausdorff_distance(a, b) - 1.0) <= 1e-3

    def test_shifted_circles_vs_bruteforce(self):
        a = ClosedCurve.circle(1.0, 256)
        b = ClosedCurve.circle(1.0, 256, center=(0.5, 0.0))
        got = hausdorff_distance(a, b)
        # dense point-sample brute force
        ta = np.linspace(0, TWO_PI, 4096, endpoint=False)
        pa = np.column_stack((np.cos(ta), np.sin(ta)))
        pb = pa + np.array([0.5, 0.0])
        d = np.hypot(pa[:, None, 0] - pb[None, :, 0], pa[:, None, 1] - pb[None, :, 1])
        brute = max(d.min(axis=1).max(), d.min(axis=0).max())
        assert abs(got - 0.5) <= 1e-3
        assert abs(got - brute) <= 2e-3

    def test_symmetry(self):
        a = ClosedCurve.circle(1.0, 128)
        b = ClosedCurve.ellipse(2.0, 0.7, 96)
        assert hausdorff_distance(a, b) == hausdorff_distance(b, a)


class TestParabolaClosure:
    def test_vertex_curvature_at_origin(self):
        # graph curvature u_xx/(1+u_x^2)^(3/2) at x=0 equals 2 eps
        curve = build_parabola_closure(0.05, 0.5, 512)
        geom = compute_geometry(curve)
        i = np.argmin(np.abs(curve.vertices[:, 0]) + np.abs(curve.vertices[:, 1]))
        assert abs(geom.k[i] - 0.1) <= 1e-3

    def test_strictly_convex(self):
        for eps in (0.1, 0.05):
            geom = compute_geometry(build_parabola_closure(eps, 0.5, 512))
            assert geom.k.min() > 0.0

    def test_min_curvature_near_parabola_end_value(self):
        # the curve's min curvature is attained on the parabola at |x| = delta,
        # where k = 2 eps / (1 + 4 eps^2 delta^2)^(3/2)
        eps, delta = 0.1, 0.5
        geom = compute_geometry(build_parabola_closure(eps, delta, 1024))
        k_end = 2 * eps / (1 + 4 * eps * eps * delta * delta) ** 1.5
        assert geom.k.min() > 0.9 * k_end

    def test_agrees_with_parabola_pointwise(self):
        for eps in (0.05, 0.025):
            curve = build_parabola_closure(eps, 0.5, 512)
            xy = curve.vertices
            on_window = np.abs(xy[:, 0]) <= 0.5
            # the bottom branch: everything below the blend start height
            bottom = on_window & (xy[:, 1] <= eps * 0.25 + 1e-9)
            assert bottom.sum() >= 9
            x = xy[bottom, 0]
            assert np.abs(xy[bottom, 1] - eps * x * x).max() <= 1e-10

    def test_bad_parameters_raise(self):
        with pytest.raises(ClosureConstructionError):
            build_parabola_closure(0.05, 0.5, 32)          # too coarse
        with pytest.raises(ClosureConstructionError):
            build_parabola_closure(1.5, 0.5, 512)          # eps > 1
        with pytest.raises(ClosureConstructionError):
            build_parabola_closure(0.05, 0.5, 512, junction_angle=0.01)


class TestCurveIO:
    def test_csv_roundtrip(self, tmp_path):
        c = ClosedCurve.ellipse(1.3, 0.7, 64)
        path = tmp_path / "curve.csv"
        c.to_csv(path)
        back = ClosedCurve.from_csv(path)
        assert np.array_equal(back.vertices, c.vertices)

    def test_json_roundtrip(self, tmp_path):
        c = ClosedCurve.circle(2.0, 32)
        path = tmp_path / "curve.json"
        c.to_json(path)
        back = ClosedCurve.from_json(path)
        assert np.array_equal(back.vertices, c.vertices)

    def test_csv_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,0\n1,0\n1,1\n0,1\n")
        with pytest.raises(InvalidCurveError):
            ClosedCurve.from_csv(path)
