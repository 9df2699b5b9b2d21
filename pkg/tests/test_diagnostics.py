import math

import numpy as np
import pytest

from ambientflow import diagnostics as dg
from ambientflow import flow as fw
from ambientflow.field import AmbientField, estimate_bounds
from ambientflow.geometry import ClosedCurve, compute_geometry, to_angle_param

PARAMS = fw.FlowParams(1.0)
TWO_PI = 2.0 * math.pi


def dense_run(curve, fld, params=PARAMS, max_time=0.01, c_cfl=0.2):
    return fw.evolve(curve, fld, params,
                     fw.StepControl(snapshot_every=1, max_time=max_time, c_cfl=c_cfl))


class TestIdentityResiduals:
    def test_circle_vanilla_area_slope(self):
        traj = dense_run(ClosedCurve.circle(1.0, 256), AmbientField.zero())
        rep = dg.identity_residuals(traj, traj.fld, traj.params)
        # A' = -2 pi sigma1 exactly; residual within 1e-3 of that scale
        assert rep.res_area.max() <= 1e-3 * TWO_PI
        assert rep.rel_length <= 1e-3
        assert rep.max_winding <= 1e-6

    def test_circle_length_slope_closed_form(self):
        traj = dense_run(ClosedCurve.circle(1.0, 256), AmbientField.zero())
        rep = dg.identity_residuals(traj, traj.fld, traj.params)
        # L' = -2 pi sigma1 / r
        assert abs(rep.scale_length - TWO_PI) <= 0.1
        assert rep.rel_length <= 1e-3

    def test_winding_rate_tiny_for_every_field(self):
        for fld in (AmbientField.saddle(), AmbientField.killing(1.0, 0.2, 0.1),
                    AmbientField.radial_linear((0.5, 0.5))):
            traj = dense_run(ClosedCurve.ellipse(0.9, 0.6, 128), fld, max_time=5e-3)
            rep = dg.identity_residuals(traj, fld, traj.params)
            assert rep.max_winding <= 1e-6

    def test_order_one_under_dt_halving(self):
        # halving dt along the CFL family (h tied to dt)
        rl, ra = [], []
        for n in (181, 256):
            traj = dense_run(ClosedCurve.ellipse(0.8, 0.5, n), AmbientField.saddle())
            rep = dg.identity_residuals(traj, traj.fld, traj.params)
            rl.append(rep.rel_length)
            ra.append(rep.rel_area)
        for coarse, fine in ((rl[0], rl[1]), (ra[0], ra[1])):
            order = dg.convergence_order(coarse, fine)
            assert order is None or order >= 0.58, (coarse, fine)

    def test_insufficient_snapshots(self):
        traj = fw.evolve(ClosedCurve.circle(1.0, 128), AmbientField.zero(), PARAMS,
                         fw.StepControl(max_time=1e-4))
        with pytest.raises(dg.InsufficientDataError):
            dg.identity_residuals(traj, traj.fld, PARAMS)


class TestGeometricEstimate:
    def test_circle(self):
        traj = fw.evolve(ClosedCurve.circle(2.0, 256), AmbientField.zero(), PARAMS,
                         fw.StepControl(max_time=0.05, snapshot_every=200))
        rep = dg.geometric_estimate(traj)
        assert rep.all_hold
        # k* = 1/r < 2/r = L/A
        assert abs(rep.k_star[0] - 0.5) <= 1e-2
        assert abs(rep.length_over_area[0] - 1.0) <= 1e-2

    def test_ellipse_and_bruteforce_window(self):
        traj = fw.evolve(ClosedCurve.ellipse(2.0, 1.0, 1024), AmbientField.zero(),
                         PARAMS, fw.StepControl(max_time=1e-4, snapshot_every=10))
        rep = dg.geometric_estimate(traj, m_theta=512)
        assert rep.all_hold
        # brute-force window scan on the very profile the monitor saw
        prof = to_angle_param(traj.snapshots[0].geometry, 512)
        m = prof.grid_size
        w = math.ceil(m / 2)
        tiled = np.concatenate((prof.k, prof.k[:w - 1]))
        brute = max(tiled[j:j + w].min() for j in range(m))
        assert abs(rep.k_star[0] - brute) <= 1e-12

    def test_skips_nonconvex(self):
        traj = fw.evolve(ClosedCurve.ellipse(1.0, 0.6, 128), AmbientField.zero(),
                         PARAMS, fw.StepControl(max_time=1e-4, snapshot_every=10))
        dent = traj.snapshots[0].curve.vertices.copy()
        dent[0] *= 0.8
        bad = ClosedCurve(dent)
        traj.snapshots.append(fw.FlowState(curve=bad,
                                           geometry=compute_geometry(bad), t=1.0))
        rep = dg.geometric_estimate(traj)
        assert rep.skipped == 1


class TestSpeedMonitor:
    def test_circle_no_violations(self):
        traj = fw.evolve(ClosedCurve.circle(1.0, 256), AmbientField.zero(), PARAMS,
                         fw.StepControl(max_time=0.3, snapshot_dt=0.05))
        bounds = estimate_bounds(AmbientField.zero(), 2.0, grid=64)
        mon = dg.speed_monitor(traj, bounds, PARAMS, K=0.0)
        assert not mon.violations
        assert mon.corr == 0.0

    def test_near_extinction_margins_positive(self):
        traj = fw.evolve(ClosedCurve.circle(1.0, 256), AmbientField.zero(), PARAMS,
                         fw.StepControl(area_floor=math.pi * 1e-3,
                                        snapshot_area_ratio=0.9))
        bounds = estimate_bounds(AmbientField.zero(), 2.0, grid=64)
        mon = dg.speed_monitor(traj, bounds, PARAMS, K=0.0)
        assert not mon.violations
        assert np.all(mon.margin_max > 0.0)
        assert np.all(mon.margin_pointwise > 0.0)

    def test_initial_gradient_margin_by_construction(self):
        traj = fw.evolve(ClosedCurve.ellipse(1.0, 0.7, 512), AmbientField.zero(),
                         PARAMS, fw.StepControl(max_time=1e-4, snapshot_every=10))
        bounds = estimate_bounds(AmbientField.zero(), 2.0, grid=64)
        mon = dg.speed_monitor(traj, bounds, PARAMS, K=0.0)
        # M dominates the initial data, so the t=0 margin is at least int|F|
        assert mon.margin_gradient[0] >= 0.0


@pytest.fixture(scope="module")
def rescaled_ellipse():
    traj = fw.evolve(ClosedCurve.ellipse(1.0, 0.7, 384), AmbientField.zero(),
                     PARAMS, fw.StepControl(area_floor=0.7 * math.pi * 2e-3,
                                            snapshot_area_ratio=0.98))
    T, O = fw.estimate_extinction(traj)
    return fw.rescale_trajectory(traj, T, O)


class TestGaussianMonitor:

    def test_identity_residual_small(self, rescaled_ellipse):
        mon = dg.gaussian_monitor(rescaled_ellipse, PARAMS)
        assert mon.max_relative_residual <= 1e-3

    def test_R_non_increasing(self, rescaled_ellipse):
        mon = dg.gaussian_monitor(rescaled_ellipse, PARAMS)
        dR = np.diff(mon.R)
        assert np.all(dR <= 1e-3 * mon.R[:-1])

    def test_self_shrinker_circle(self):
        # radius sqrt(sigma1): Q = 0 and R = 2 pi sqrt(sigma1) e^{-1/2}
        curve = ClosedCurve.circle(1.0, 512)
        geom = compute_geometry(curve)
        rho = np.exp(-(curve.vertices ** 2).sum(axis=1) / 2.0)
        Q = (curve.vertices * geom.nu).sum(axis=1) + geom.k
        assert np.abs(Q).max() <= 1e-3
        R = float((rho * geom.ds).sum())
        assert abs(R - TWO_PI * math.exp(-0.5)) <= 1e-3

    def test_order_in_that_step(self):
        # halving the that spacing at least halves the identity residual
        res = []
        for ratio in (0.96, 0.98):
            traj = fw.evolve(ClosedCurve.ellipse(1.0, 0.7, 256),
                             AmbientField.zero(), PARAMS,
                             fw.StepControl(area_floor=0.7 * math.pi * 5e-3,
                                            snapshot_area_ratio=ratio))
            T, O = fw.estimate_extinction(traj)
            mon = dg.gaussian_monitor(fw.rescale_trajectory(traj, T, O), PARAMS)
            res.append(mon.max_relative_residual)
        order = dg.convergence_order(res[0], res[1], floor=1e-12)
        assert order is None or order >= 0.8


class TestRescaledRoundness:
    def test_self_shrinker_identities(self):
        # a run that is already the self-shrinker: Ahat = pi, ratio = 1, f = 0
        traj = fw.evolve(ClosedCurve.circle(1.0, 512), AmbientField.zero(), PARAMS,
                         fw.StepControl(area_floor=math.pi * 1e-2,
                                        snapshot_area_ratio=0.95))
        T, O = fw.estimate_extinction(traj)
        rep = dg.rescaled_roundness(fw.rescale_trajectory(traj, T, O))
        assert np.abs(rep.area - math.pi).max() <= 0.02 * math.pi
        assert rep.ratio.max() <= 1.0 + 1e-3
        assert np.nanmax(np.abs(rep.f)) <= 1e-2
        assert np.all(rep.convex)

    def test_reverse_isoperimetric_slack(self):
        traj = fw.evolve(ClosedCurve.ellipse(1.0, 0.6, 256), AmbientField.zero(),
                         PARAMS, fw.StepControl(area_floor=0.6 * math.pi * 5e-3,
                                                snapshot_area_ratio=0.95))
        T, O = fw.estimate_extinction(traj)
        rep = dg.rescaled_roundness(fw.rescale_trajectory(traj, T, O))
        assert rep.iso_slack.min() >= -1e-3

    def test_area_converges_for_ellipse(self):
        traj = fw.evolve(ClosedCurve.ellipse(1.0, 0.6, 256), AmbientField.zero(),
                         PARAMS, fw.StepControl(area_floor=0.6 * math.pi * 2e-3,
                                                snapshot_area_ratio=0.95))
        T, O = fw.estimate_extinction(traj)
        rep = dg.rescaled_roundness(fw.rescale_trajectory(traj, T, O))
        tail = rep.that >= 2.0
        assert np.abs(rep.area[tail] - math.pi).max() <= 0.02 * math.pi


class TestDerivativeBoundedness:
    def test_circle_flat(self):
        traj = fw.evolve(ClosedCurve.circle(1.0, 256), AmbientField.zero(), PARAMS,
                         fw.StepControl(max_time=0.1, snapshot_dt=0.02))
        rep = dg.derivative_boundedness(traj)
        ks = np.array([s.geometry.k.mean() for s in traj.snapshots])
        assert np.all(rep.max_k_s <= 1e-3 * ks)

    def test_ellipse_series_finite_and_continuous(self):
        traj = fw.evolve(ClosedCurve.ellipse(1.0, 0.6, 256), AmbientField.zero(),
                         PARAMS, fw.StepControl(max_time=0.08, snapshot_dt=0.005))
        rep = dg.derivative_boundedness(traj)
        assert np.all(np.isfinite(rep.max_k_s))
        assert np.all(np.isfinite(rep.max_k_ss))
        jumps = np.abs(np.diff(rep.max_k_s)) / (rep.max_k_s[:-1] + 1e-30)
        assert jumps.max() <= 0.5
        assert rep.bounded_before(0.06)

    def test_saddle_run_finite_until_stop(self):
        from ambientflow.geometry import build_parabola_closure
        curve = build_parabola_closure(0.05, 1.0, 512)
        traj = fw.evolve(curve, AmbientField.saddle(), PARAMS,
                         fw.StepControl(max_time=1.0, snapshot_every=500,
                                        stop_on_nonconvex=True))
        rep = dg.derivative_boundedness(traj)
        assert np.all(np.isfinite(rep.max_k_s))
