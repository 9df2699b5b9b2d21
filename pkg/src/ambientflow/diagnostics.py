"""Verification monitors over recorded trajectories.

Everything here is pure post-processing: finite differences in time of
recorded integral quantities against their analytic evolution laws, the
median-curvature geometric estimate, speed bounds in the angle
parametrization, and the rescaled-flow monitors (Gaussian density,
roundness, the entropy-production integrand f).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import AmbientField, FieldBounds
from .flow import FlowParams, RescaledTrajectory, Trajectory, normal_speed
from .geometry import (AngleProfile, compute_geometry, curvature_derivatives,
                       median_curvature, to_angle_param)

TWO_PI = 2.0 * math.pi


class InsufficientDataError(ValueError):
    """Raised when a monitor needs more snapshots than the trajectory has."""


def _central_fd(times, values):
    """(interior times, central difference slopes)."""
    t = np.asarray(times)
    v = np.asarray(values)
    return t[1:-1], (v[2:] - v[:-2]) / (t[2:] - t[:-2])


# ---------------------------------------------------------------------------
# evolution identities


@dataclass
class IdentityResidualReport:
    times: np.ndarray            # interior snapshot times
    res_length: np.ndarray       # |FD L' - analytic|
    res_area: np.ndarray
    res_winding: np.ndarray      # |FD (integral k ds)'|, law is zero
    scale_length: float          # max |analytic L'| over the run
    scale_area: float

    @property
    def rel_length(self) -> float:
        return float(self.res_length.max() / self.scale_length)

    @property
    def rel_area(self) -> float:
        return float(self.res_area.max() / self.scale_area)

    @property
    def max_winding(self) -> float:
        return float(self.res_winding.max())


def identity_residuals(traj: Trajectory, fld: AmbientField,
                       params: FlowParams) -> IdentityResidualReport:
    """FD slopes of L, A and loop(k ds) against the analytic right sides.

    L' = -sigma1 loop(k^2 ds) - 2 pi sigma2 W - loop(k <V, nu> ds),
    A' = -(2 pi sigma1 W + sigma2 L + loop(<V, nu> ds)),
    (loop k ds)' = 0.
    """
    if len(traj.snapshots) < 3:
        raise InsufficientDataError("need at least 3 snapshots")
    s1, s2 = params.sigma1, params.sigma2
    t, L, A, Th = [], [], [], []
    rhs_L, rhs_A = [], []
    for s in traj.snapshots:
        g = s.geometry
        v = fld.value(g.vertices)
        vnu = (v * g.nu).sum(axis=1)
        t.append(s.t)
        L.append(g.length)
        A.append(g.area)
        Th.append(float((g.k * g.ds).sum()))
        rhs_L.append(-s1 * float((g.k ** 2 * g.ds).sum())
                     - TWO_PI * s2 * g.turning
                     - float((g.k * vnu * g.ds).sum()))
        rhs_A.append(-(TWO_PI * s1 * g.turning + s2 * g.length
                       + float((vnu * g.ds).sum())))
    ti, dL = _central_fd(t, L)
    _, dA = _central_fd(t, A)
    _, dTh = _central_fd(t, Th)
    rhs_L = np.asarray(rhs_L)[1:-1]
    rhs_A = np.asarray(rhs_A)[1:-1]
    return IdentityResidualReport(
        times=ti,
        res_length=np.abs(dL - rhs_L),
        res_area=np.abs(dA - rhs_A),
        res_winding=np.abs(dTh),
        scale_length=float(np.abs(rhs_L).max()),
        scale_area=float(np.abs(rhs_A).max()))


def convergence_order(coarse: float, fine: float, floor: float = 1e-10):
    """log2 ratio of residuals under halving; None when both sit at the floor."""
    if coarse < floor and fine < floor:
        return None
    return math.log2(max(coarse, floor) / max(fine, floor))


# ---------------------------------------------------------------------------
# geometric estimate


@dataclass
class GeometricEstimateReport:
    times: np.ndarray
    k_star: np.ndarray
    length_over_area: np.ndarray
    verdicts: np.ndarray         # bool per convex snapshot
    skipped: int                 # non-convex snapshots

    @property
    def all_hold(self) -> bool:
        return bool(self.verdicts.all()) if len(self.verdicts) else True


def geometric_estimate(traj: Trajectory, m_theta: int = 256) -> GeometricEstimateReport:
    """k*(t) < L/A check on every convex snapshot."""
    times, ks, la, verdicts = [], [], [], []
    skipped = 0
    for s in traj.snapshots:
        g = s.geometry
        if g.k.min() <= 0.0:
            skipped += 1
            continue
        prof = to_angle_param(g, m_theta)
        kstar = median_curvature(prof)
        ratio = g.length / g.area
        times.append(s.t)
        ks.append(kstar)
        la.append(ratio)
        verdicts.append(kstar < ratio)
    return GeometricEstimateReport(
        times=np.array(times), k_star=np.array(ks),
        length_over_area=np.array(la),
        verdicts=np.array(verdicts, dtype=bool), skipped=skipped)


# ---------------------------------------------------------------------------
# speed estimates (angle parametrization)


@dataclass
class SpeedMonitor:
    times: np.ndarray
    M: float
    M1: float
    corr: float                        # C1/K correction used in F~
    margin_gradient: np.ndarray        # (M + int|F|) - sup|F_theta|
    margin_max: np.ndarray             # M1 (1 + int|F|) - F_max
    margin_pointwise: np.ndarray       # (2 F_min + M/2pi) - F_max
    skipped: int

    @property
    def violations(self) -> list[str]:
        out = []
        for name, margin in (("gradient", self.margin_gradient),
                             ("max", self.margin_max),
                             ("pointwise", self.margin_pointwise)):
            if len(margin) and margin.min() < 0.0:
                idx = int(margin.argmin())
                out.append(f"{name} estimate violated at t={self.times[idx]:g} "
                           f"(margin {margin[idx]:.3e})")
        return out


def _profile_speed(geom, fld, params, m_theta):
    prof = to_angle_param(geom, m_theta, with_positions=True)
    th = prof.theta
    N = np.column_stack((-np.sin(th), np.cos(th)))     # N = R T at angle theta
    v = fld.value(prof.positions)
    F = params.sigma1 * prof.k + params.sigma2 + (v * N).sum(axis=1)
    dth = TWO_PI / len(th)
    F_theta = (np.roll(F, -1) - np.roll(F, 1)) / (2.0 * dth)
    return F, F_theta, dth


def speed_monitor(traj: Trajectory, bounds: FieldBounds, params: FlowParams,
                  K: float, m_theta: int = 256) -> SpeedMonitor:
    """Evaluate the three speed estimates on every convex snapshot.

    M^2 = max{ sup (F~^2 + F~_theta^2)(., 0), (C1/K + |sigma2| + C0)^2 },
    F~ = F - C1/K; when K = 0 the field gradient bound C1 is zero as well
    and the correction is dropped.
    """
    if K == 0.0:
        corr = 0.0
    else:
        corr = bounds.c1 / K
    first = traj.snapshots[0].geometry
    if first.k.min() <= 0.0:
        raise ValueError("speed monitor needs a convex initial snapshot")
    F0, F0_theta, _ = _profile_speed(first, traj.fld, params, m_theta)
    Ft0 = F0 - corr
    M = math.sqrt(max(float((Ft0 ** 2 + F0_theta ** 2).max()),
                      (corr + abs(params.sigma2) + bounds.c0) ** 2))
    M1 = max(TWO_PI * M, TWO_PI + 1.0 / TWO_PI)

    times, mg, mm, mp = [], [], [], []
    skipped = 0
    for s in traj.snapshots:
        g = s.geometry
        if g.k.min() <= 0.0:
            skipped += 1
            continue
        F, F_theta, dth = _profile_speed(g, traj.fld, params, m_theta)
        int_absF = float(np.abs(F).sum() * dth)
        times.append(s.t)
        mg.append(M + int_absF - float(np.abs(F_theta).max()))
        mm.append(M1 * (1.0 + int_absF) - float(F.max()))
        mp.append(2.0 * float(F.min()) + M / TWO_PI - float(F.max()))
    return SpeedMonitor(times=np.array(times), M=M, M1=M1, corr=corr,
                        margin_gradient=np.array(mg), margin_max=np.array(mm),
                        margin_pointwise=np.array(mp), skipped=skipped)


# ---------------------------------------------------------------------------
# rescaled monitors


@dataclass
class GaussianMonitor:
    that: np.ndarray
    R: np.ndarray                  # integral of rho dshat per snapshot
    dissipation: np.ndarray        # integral of Q^2 rho dshat
    rhs: np.ndarray                # full analytic R'
    residual: np.ndarray           # |FD R' - rhs| on interior snapshots
    q_max: np.ndarray              # max |Q| per snapshot

    @property
    def max_relative_residual(self) -> float:
        scale = np.interp(self.that[1:-1], self.that, self.R)
        return float((self.residual / scale).max())


def gaussian_monitor(rescaled: RescaledTrajectory, params: FlowParams) -> GaussianMonitor:
    """Monitor R(that) = integral of exp(-|gamma_hat|^2 / 2 sigma1) dshat.

    The analytic slope is -integral(Q^2 rho) plus the sigma2- and V-terms
    of the evolution identity; those extra terms vanish identically for
    the wound-healing flow and are evaluated in full otherwise.
    """
    s1, s2 = params.sigma1, params.sigma2
    T = rescaled.T
    fld = rescaled.fld
    that, Rs, diss, rhs, qmax = [], [], [], [], []
    for s in rescaled.snapshots:
        g = s.geometry
        rho = np.exp(-(g.vertices ** 2).sum(axis=1) / (2.0 * s1))
        gam_nu = (g.vertices * g.nu).sum(axis=1)
        Q = gam_nu / math.sqrt(s1) + math.sqrt(s1) * g.k \
            + math.sqrt(2.0 * T) * s2 * math.exp(-s.that) / (2.0 * math.sqrt(s1))
        R = float((rho * g.ds).sum())
        D = float((Q * Q * rho * g.ds).sum())
        extra = 0.0
        if s2 != 0.0:
            extra += T * s2 * s2 / (2.0 * s1) * math.exp(-2.0 * s.that) * R
        if fld.kind != "zero":
            phi = math.exp(s.that) / math.sqrt(2.0 * T)
            orig_pts = g.vertices / phi + rescaled.origin
            _, dv, _ = fld.jet_arrays(orig_pts)
            v = fld.value(orig_pts)
            dtv_t = np.einsum("nij,nj,ni->n", dv, g.tau, g.tau)
            vdotg = (v * g.vertices).sum(axis=1)
            extra += float(((2.0 * T * math.exp(-2.0 * s.that) * dtv_t
                             - math.sqrt(2.0 * T) * math.exp(-s.that) / s1 * vdotg)
                            * rho * g.ds).sum())
        that.append(s.that)
        Rs.append(R)
        diss.append(D)
        rhs.append(-D + extra)
        qmax.append(float(np.abs(Q).max()))
    that = np.array(that)
    Rs = np.array(Rs)
    ti, dR = _central_fd(that, Rs)
    residual = np.abs(dR - np.asarray(rhs)[1:-1])
    return GaussianMonitor(that=that, R=Rs, dissipation=np.array(diss),
                           rhs=np.array(rhs), residual=residual,
                           q_max=np.array(qmax))


@dataclass
class RoundnessReport:
    that: np.ndarray
    area: np.ndarray               # A-hat, expected sigma1 pi in the limit
    length: np.ndarray
    k_min: np.ndarray
    k_max: np.ndarray
    ratio: np.ndarray              # k-hat max/min
    f: np.ndarray                  # entropy-production integrand, NaN if non-convex
    iso_slack: np.ndarray          # 2 k-hat-max A-hat - L-hat
    convex: np.ndarray             # per-snapshot flag


def rescaled_roundness(rescaled: RescaledTrajectory,
                       m_theta: int = 256) -> RoundnessReport:
    """Roundness indicators of the rescaled flow, per snapshot."""
    s1, s2 = rescaled.params.sigma1, rescaled.params.sigma2
    T = rescaled.T
    that, A, L, kmn, kmx, ratio, fs, slack, convex = ([] for _ in range(9))
    for s in rescaled.snapshots:
        g = s.geometry
        that.append(s.that)
        A.append(g.area)
        L.append(g.length)
        kmn.append(float(g.k.min()))
        kmx.append(float(g.k.max()))
        ratio.append(kmx[-1] / kmn[-1] if kmn[-1] > 0 else math.inf)
        slack.append(2.0 * kmx[-1] * g.area - g.length)
        is_convex = g.k.min() > 0.0
        convex.append(is_convex)
        if is_convex:
            prof = to_angle_param(g, m_theta)
            dth = TWO_PI / m_theta
            k = prof.k
            ktt = (np.roll(k, -1) - 2.0 * k + np.roll(k, 1)) / (dth * dth)
            u = -1.0 + s1 * k * (ktt + k) \
                - 2.0 * math.sqrt(2.0 * T) * s2 * math.exp(-s.that) * k
            fs.append(float(u.sum() * dth))
        else:
            fs.append(math.nan)
    return RoundnessReport(that=np.array(that), area=np.array(A),
                           length=np.array(L), k_min=np.array(kmn),
                           k_max=np.array(kmx), ratio=np.array(ratio),
                           f=np.array(fs), iso_slack=np.array(slack),
                           convex=np.array(convex, dtype=bool))


# ---------------------------------------------------------------------------
# derivative boundedness


@dataclass
class DerivativeBoundsReport:
    times: np.ndarray
    max_k_s: np.ndarray
    max_k_ss: np.ndarray

    def bounded_before(self, t_cut: float, blowup_factor: float = 50.0) -> bool:
        """True when the pre-t_cut window shows no runaway derivative growth."""
        sel = self.times <= t_cut
        if sel.sum() < 2:
            return True
        ks = self.max_k_s[sel]
        ref = np.median(ks) + 1e-30
        return bool(ks.max() <= blowup_factor * ref)


def derivative_boundedness(traj: Trajectory) -> DerivativeBoundsReport:
    """Track max |k_s| and |k_ss| over the run (monitored, not predicted)."""
    times, m1, m2 = [], [], []
    for s in traj.snapshots:
        k_s, k_ss = curvature_derivatives(s.geometry)
        times.append(s.t)
        m1.append(float(np.abs(k_s).max()))
        m2.append(float(np.abs(k_ss).max()))
    return DerivativeBoundsReport(times=np.array(times),
                                  max_k_s=np.array(m1), max_k_ss=np.array(m2))
