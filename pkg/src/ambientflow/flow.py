"""Time integration of the flow and its derived constructions.

The normal velocity is F = sigma1 k + sigma2 + <V, nu>; vertices move by
explicit Euler in the normal direction with periodic arclength
resampling standing in for any tangential velocity. Trajectories record
per-step diagnostics and snapshot states; extinction estimation,
parabolic rescaling, the Killing rigid-motion oracle and the local graph
flow live here too.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .field import AmbientField, killing_integral_curve
from .geometry import (ClosedCurve, CurveGeometry, compute_geometry,
                       curvature_derivatives, is_simple_polygon)

SERIES_COLUMNS = ("t", "L", "A", "W", "kmin", "kmax", "Fmin")


class EstimatorInapplicableError(RuntimeError):
    """Raised when extinction is estimated on a run that did not near-extinct."""


@dataclass(frozen=True)
class FlowParams:
    sigma1: float
    sigma2: float = 0.0

    def __post_init__(self):
        if not self.sigma1 > 0.0:
            raise ValueError("need sigma1 > 0")


@dataclass(frozen=True)
class StepControl:
    """Discretization policy: everything the flow equation leaves open."""

    dt: float | None = None             # fixed step; None selects the CFL rule
    c_cfl: float = 0.2                  # dt = c_cfl h^2 / sigma1, h = min edge
    resample_every: int = 1             # 0 disables arclength resampling
    max_time: float = math.inf
    area_floor: float = 1e-12
    max_steps: int = 5_000_000
    snapshot_every: int | None = None   # cadence in steps
    snapshot_dt: float | None = None    # cadence in time
    snapshot_area_ratio: float | None = None  # snapshot when A drops by this factor
    stop_on_nonconvex: bool = False
    nonconvex_threshold: float | None = None  # None: -10x discrete noise floor

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0.0:
            raise ValueError("need dt > 0")
        if not self.area_floor > 0.0:
            raise ValueError("need area_floor > 0")
        cadences = [self.snapshot_every, self.snapshot_dt, self.snapshot_area_ratio]
        if sum(c is not None for c in cadences) > 1:
            raise ValueError("choose a single snapshot cadence")


@dataclass(frozen=True)
class FlowState:
    curve: ClosedCurve
    geometry: CurveGeometry
    t: float


@dataclass
class Trajectory:
    params: FlowParams
    fld: AmbientField
    control: StepControl
    snapshots: list[FlowState]
    series: np.ndarray                  # (nsteps, 7), SERIES_COLUMNS
    stop_reason: str                    # extinct|nonembedded|nonconvex-event|max-time|steps
    nonconvex_time: float | None = None

    def col(self, name: str) -> np.ndarray:
        return self.series[:, SERIES_COLUMNS.index(name)]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def state_at_time(self, t: float) -> FlowState:
        """Snapshot with time closest to t."""
        ts = self.times
        return self.snapshots[int(np.argmin(np.abs(ts - t)))]


def normal_speed(geom: CurveGeometry, fld: AmbientField, params: FlowParams) -> np.ndarray:
    """F = sigma1 k + sigma2 + <V(gamma), nu> at every vertex."""
    return _kernels.normal_speed_arrays(
        geom.vertices, geom.nu, geom.k, params.sigma1, params.sigma2,
        fld.kernel_code, np.asarray(fld.params))


def noise_floor(geom: CurveGeometry) -> float:
    """Estimate of the discrete curvature error on this state.

    The turning-angle stencil has relative error of order (h k)^2/6, so
    the absolute error scales like k (h k)^2 / 6 at the sharpest spot.
    """
    e = np.roll(geom.vertices, -1, axis=0) - geom.vertices
    h = float(np.hypot(e[:, 0], e[:, 1]).max())
    kabs = float(np.abs(geom.k).max())
    return kabs * (h * kabs) ** 2 / 6.0 + 1e-14


def step(state: FlowState, fld: AmbientField, params: FlowParams,
         control: StepControl) -> FlowState:
    """One explicit Euler step (resampled only when resample_every == 1)."""
    series = np.empty((1, 7))
    xy, t, n, _ = _kernels.advance(
        state.curve.vertices, state.t, 1, params.sigma1, params.sigma2,
        fld.kernel_code, np.asarray(fld.params),
        control.dt or 0.0, control.c_cfl, control.resample_every,
        control.max_time, 0.0, series)
    if n == 0:
        return state
    curve = ClosedCurve(xy, check_simple=False)
    return FlowState(curve=curve, geometry=compute_geometry(curve), t=t)


def _snapshot_block(control: StepControl, state_A: float):
    """(nsteps, max_time, area_floor) bounds for the next kernel block."""
    nsteps = control.snapshot_every or 4096
    max_time = control.max_time
    floor = control.area_floor
    if control.snapshot_area_ratio is not None:
        floor = max(floor, state_A * control.snapshot_area_ratio)
    return nsteps, max_time, floor


def evolve(curve: ClosedCurve, fld: AmbientField, params: FlowParams,
           control: StepControl) -> Trajectory:
    """Run the flow until a stop condition; deterministic given inputs.

    The initial curve is redistributed to uniform arclength spacing first,
    so polygon quantities evolve without a parametrization transient.
    """
    xy = curve.vertices
    if control.resample_every > 0:
        xy = _kernels.redistribute_closed(xy, len(xy))
    t = 0.0
    snapshots = []
    blocks = []
    stop = "steps"
    nonconvex_time = None
    total_steps = 0
    state_geom = compute_geometry(ClosedCurve(xy, check_simple=False))

    def snap(geom, tt):
        snapshots.append(FlowState(curve=ClosedCurve(geom.vertices, check_simple=False),
                                   geometry=geom, t=tt))

    snap(state_geom, t)
    threshold = control.nonconvex_threshold
    next_time = control.snapshot_dt if control.snapshot_dt is not None else None

    while True:
        if threshold is None:
            thr = -10.0 * noise_floor(state_geom)
        else:
            thr = threshold
        nsteps, max_t, floor = _snapshot_block(control, state_geom.area)
        if next_time is not None:
            max_t = min(max_t, next_time)
        nsteps = min(nsteps, control.max_steps - total_steps)
        if nsteps <= 0:
            stop = "steps"
            break
        series = np.empty((nsteps, 7))
        xy, t, done, code = _kernels.advance(
            xy, t, nsteps, params.sigma1, params.sigma2,
            fld.kernel_code, np.asarray(fld.params),
            control.dt or 0.0, control.c_cfl,
            control.resample_every, max_t, floor, series)
        total_steps += done
        series = series[:done]
        blocks.append(series)

        # scan the block for the first nonconvex event
        if nonconvex_time is None and done:
            hit = np.nonzero(series[:, 4] < thr)[0]
            if len(hit):
                nonconvex_time = float(series[hit[0], 0])

        state_geom = compute_geometry(ClosedCurve(xy, check_simple=False))
        if done:                     # keep snapshot times strictly increasing
            snap(state_geom, t)

        if not is_simple_polygon(xy):
            stop = "nonembedded"
            break
        if nonconvex_time is not None and control.stop_on_nonconvex:
            stop = "nonconvex-event"
            break
        if state_geom.area <= control.area_floor:
            stop = "extinct"
            break
        if t >= control.max_time:
            stop = "max-time"
            break
        if code == _kernels.STOP_MAX_TIME and next_time is not None and t >= next_time:
            next_time += control.snapshot_dt
        if total_steps >= control.max_steps:
            stop = "steps"
            break

    series = np.vstack(blocks) if blocks else np.empty((0, 7))
    return Trajectory(params=params, fld=fld, control=control,
                      snapshots=snapshots, series=series,
                      stop_reason=stop, nonconvex_time=nonconvex_time)


# ---------------------------------------------------------------------------
# extinction and rescaling


def estimate_extinction(traj: Trajectory):
    """(T, O): extrapolate the area to zero, centroid of the final snapshot.

    A' = -(2 pi sigma1 W + sigma2 L + loop integral of <V, nu> ds) is
    evaluated analytically on the final snapshot; since A' = -loop(F ds),
    the extrapolation is exact for linear area decay.
    """
    if traj.stop_reason != "extinct":
        raise EstimatorInapplicableError(
            f"trajectory stopped with {traj.stop_reason!r}, not at the area floor")
    last = traj.snapshots[-1]
    geom = last.geometry
    F = normal_speed(geom, traj.fld, traj.params)
    slope = float((F * geom.ds).sum())          # -A'
    if slope <= 0.0:
        raise EstimatorInapplicableError("area is not shrinking at the final snapshot")
    T = last.t + geom.area / slope
    O = geom.centroid()
    return float(T), O


@dataclass(frozen=True)
class RescaledSnapshot:
    t: float
    that: float
    curve: ClosedCurve
    geometry: CurveGeometry


@dataclass
class RescaledTrajectory:
    T: float
    origin: np.ndarray
    params: FlowParams
    fld: AmbientField
    snapshots: list[RescaledSnapshot]

    @property
    def that(self) -> np.ndarray:
        return np.array([s.that for s in self.snapshots])

    def series(self):
        """(that, Lhat, Ahat, khat_min, khat_max) arrays over snapshots."""
        g = [s.geometry for s in self.snapshots]
        return (self.that,
                np.array([x.length for x in g]),
                np.array([x.area for x in g]),
                np.array([x.k.min() for x in g]),
                np.array([x.k.max() for x in g]))


def rescale_factor(T: float, t) -> np.ndarray:
    return 1.0 / np.sqrt(2.0 * T - 2.0 * np.asarray(t))


def rescale_trajectory(traj: Trajectory, T: float, origin) -> RescaledTrajectory:
    """Map snapshots through gamma_hat = e^that/sqrt(2T) (gamma - O)."""
    origin = np.asarray(origin, dtype=float)
    out = []
    for s in traj.snapshots:
        if s.t >= T:
            raise ValueError(f"snapshot at t={s.t} is not before T={T}")
        that = -0.5 * math.log1p(-s.t / T)
        phi = float(rescale_factor(T, s.t))
        xy = phi * (s.curve.vertices - origin)
        curve = ClosedCurve(xy, check_simple=False)
        out.append(RescaledSnapshot(t=s.t, that=that, curve=curve,
                                    geometry=compute_geometry(curve)))
    return RescaledTrajectory(T=float(T), origin=origin, params=traj.params,
                              fld=traj.fld, snapshots=out)


def rigid_motion_killing(base: Trajectory, a: float, b: float, c: float) -> Trajectory:
    """Predict the Killing(a, b, c) flow as a rigid motion of the V=0 flow.

    V = a (y, -x) + (b, c) spins the plane clockwise, so each snapshot is
    rotated by angle -a*t about the origin and translated along the
    integral curve of V itself (killing_integral_curve with the rotation
    parameter negated, which turns its ODE into w' = V(w)). Fmin in the
    per-step series is not rigid-motion covariant and is reported as NaN.
    """
    if base.fld.kind != "zero":
        raise ValueError("the rigid-motion oracle needs a V=0 base trajectory")
    mapped = []
    for s in base.snapshots:
        ang = -a * s.t
        ca, sa = math.cos(ang), math.sin(ang)
        rot = np.array([[ca, -sa], [sa, ca]])
        shift = killing_integral_curve(-a, b, c, s.t)
        xy = s.curve.vertices @ rot.T + shift
        curve = ClosedCurve(xy, check_simple=False)
        mapped.append(FlowState(curve=curve, geometry=compute_geometry(curve), t=s.t))
    series = base.series.copy()
    if len(series):
        series[:, 6] = np.nan
    return Trajectory(params=base.params, fld=AmbientField.killing(a, b, c),
                      control=base.control, snapshots=mapped, series=series,
                      stop_reason=base.stop_reason,
                      nonconvex_time=base.nonconvex_time)


# ---------------------------------------------------------------------------
# curvature evolution residual


def curvature_rhs(geom: CurveGeometry, fld: AmbientField, params: FlowParams) -> np.ndarray:
    """sigma1 k_ss + sigma1 k^3 + sigma2 k^2
    - k (2 <D_tau V, tau> - <D_nu V, nu>) + <D2_{tau,tau} V, nu> per vertex."""
    _, k_ss = curvature_derivatives(geom)
    k = geom.k
    v, dv, d2 = fld.jet_arrays(geom.vertices)
    dtv = np.einsum("nij,nj->ni", dv, geom.tau)
    dnv = np.einsum("nij,nj->ni", dv, geom.nu)
    d2tt = np.einsum("nijl,nj,nl->ni", d2, geom.tau, geom.tau)
    term = (2.0 * (dtv * geom.tau).sum(axis=1) - (dnv * geom.nu).sum(axis=1))
    return (params.sigma1 * k_ss + params.sigma1 * k ** 3 + params.sigma2 * k * k
            - k * term + (d2tt * geom.nu).sum(axis=1))


def curvature_residual(traj: Trajectory, fld: AmbientField, params: FlowParams,
                       dt: float | None = None):
    """max_vertex |FD k_t - analytic RHS| per snapshot.

    The time difference is taken over one resampling-free Euler substep
    with the full velocity (sigma1 k + sigma2) nu + V, whose tangential
    part only reparametrizes the curve; vertices are then material points
    of the parametrization the curvature evolution law is written in.
    """
    times = []
    residuals = []
    for s in traj.snapshots:
        geom = s.geometry
        e = np.roll(geom.vertices, -1, axis=0) - geom.vertices
        h = float(np.hypot(e[:, 0], e[:, 1]).min())
        dt_sub = dt if dt is not None else traj.control.c_cfl * h * h / params.sigma1
        vel = (params.sigma1 * geom.k + params.sigma2)[:, None] * geom.nu \
            + fld.value(geom.vertices)
        xy = geom.vertices + dt_sub * vel
        _, _, k_after, _, _, _, _, _ = _kernels.curve_metrics(xy)
        fd = (k_after - geom.k) / dt_sub
        rhs = curvature_rhs(geom, fld, params)
        times.append(s.t)
        residuals.append(float(np.abs(fd - rhs).max()))
    return np.array(times), np.array(residuals)


# ---------------------------------------------------------------------------
# local graph flow


@dataclass
class GraphState:
    """Graph patch gamma = p + x tau + u(x) R tau, pinned to a host curve.

    host=None freezes the boundary values at the initial data instead of
    sampling them from a co-evolved closed curve (short-time test mode).
    """

    x: np.ndarray
    u: np.ndarray
    anchor: np.ndarray
    tau: np.ndarray
    host: ClosedCurve | None
    t: float = 0.0


@dataclass
class GraphTrajectory:
    times: np.ndarray
    uxx0: np.ndarray            # center second derivative per step
    final: GraphState
    stop_reason: str            # max-time | nonGraphical | host-stop


def make_parabola_graph(eps: float, half_width: float, m: int,
                        host: ClosedCurve) -> GraphState:
    """u0 = eps x^2 on [-w, w] in the standard frame, with the given host."""
    if m % 2 == 0:
        m += 1
    x = np.linspace(-half_width, half_width, m)
    return GraphState(x=x, u=eps * x * x, anchor=np.zeros(2),
                      tau=np.array([1.0, 0.0]), host=host, t=0.0)


def _host_boundary_values(g: GraphState, pad: float):
    """Interpolated u at the interval endpoints from the host branch."""
    rt = np.array([-g.tau[1], g.tau[0]])
    rel = g.host.vertices - g.anchor
    X = rel @ g.tau
    U = rel @ rt
    w = g.x[-1]
    sel = np.abs(X) <= w + pad
    if sel.sum() < 4:
        raise ValueError("host curve does not cover the graph window")
    Xs, Us = X[sel], U[sel]
    # keep the branch through the anchor: lowest-u cluster
    center = np.abs(Xs) <= 0.5 * w
    if not center.any():
        raise ValueError("host curve has no points over the window center")
    u_ref = Us[center].min()
    spread = Us.max() - Us.min()
    branch = Us <= u_ref + 0.45 * max(spread, 1e-30)
    Xs, Us = Xs[branch], Us[branch]
    order = np.argsort(Xs)
    return (float(np.interp(-w, Xs[order], Us[order])),
            float(np.interp(w, Xs[order], Us[order])))


def evolve_graph(g: GraphState, fld: AmbientField, params: FlowParams,
                 control: StepControl, slope_cap: float = 10.0) -> GraphTrajectory:
    """Explicit scheme for the graph equation with host-pinned boundaries.

    u_t = sigma1 u_xx / (1 + u_x^2) + sqrt(1 + u_x^2) (sigma2 + <V(gamma), nu>),
    co-evolving the host closed curve for the Dirichlet values.
    """
    x = g.x.copy()
    u = g.u.copy()
    dx = float(x[1] - x[0])
    rt = np.array([-g.tau[1], g.tau[0]])
    host_state = None
    if g.host is not None:
        host_state = FlowState(curve=g.host, geometry=compute_geometry(g.host), t=g.t)
    u_left, u_right = float(u[0]), float(u[-1])
    t = g.t
    mid = len(x) // 2
    times, uxx0 = [], []
    stop = "max-time"
    while t < control.max_time:
        ux = np.gradient(u, dx, edge_order=2)
        if np.abs(ux).max() > slope_cap:
            stop = "nonGraphical"
            break
        uxx = np.empty_like(u)
        uxx[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dx * dx)
        uxx[0] = uxx[1]
        uxx[-1] = uxx[-2]
        times.append(t)
        uxx0.append(float(uxx[mid]))

        dt = control.dt if control.dt is not None else \
            control.c_cfl * dx * dx / params.sigma1
        if host_state is not None:
            host_h = host_state.geometry.min_edge
            dt = min(dt, control.c_cfl * host_h * host_h / params.sigma1)
        dt = min(dt, control.max_time - t)
        if dt <= 0.0:
            break

        pts = g.anchor + x[:, None] * g.tau + u[:, None] * rt
        root = np.sqrt(1.0 + ux * ux)
        nu = (rt[None, :] - ux[:, None] * g.tau[None, :]) / root[:, None]
        vdotnu = (fld.value(pts) * nu).sum(axis=1)
        du = params.sigma1 * uxx / (root * root) + root * (params.sigma2 + vdotnu)
        u = u + dt * du
        t += dt

        if host_state is None:
            u[0], u[-1] = u_left, u_right
        else:
            host_state = step(host_state, fld, params,
                              StepControl(dt=dt, resample_every=control.resample_every,
                                          area_floor=control.area_floor))
            g2 = GraphState(x=x, u=u, anchor=g.anchor, tau=g.tau,
                            host=host_state.curve, t=t)
            try:
                u[0], u[-1] = _host_boundary_values(g2, pad=4.0 * dx)
            except ValueError:
                stop = "host-stop"
                break
    final = GraphState(x=x, u=u, anchor=g.anchor, tau=g.tau,
                       host=host_state.curve if host_state else None, t=t)
    return GraphTrajectory(times=np.array(times), uxx0=np.array(uxx0),
                           final=final, stop_reason=stop)


# ---------------------------------------------------------------------------
# trajectory directory format


def save_trajectory(traj: Trajectory, dirpath) -> list[str]:
    """Write series.csv, snapshots/*.csv and trajectory.json; returns the file list."""
    os.makedirs(os.path.join(dirpath, "snapshots"), exist_ok=True)
    files = []

    spath = os.path.join(dirpath, "series.csv")
    with open(spath, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for row in traj.series:
            w.writerow([repr(float(v)) for v in row])
    files.append("series.csv")

    snap_times = []
    for i, s in enumerate(traj.snapshots):
        name = f"snapshots/snap_{i:05d}.csv"
        s.curve.to_csv(os.path.join(dirpath, name))
        files.append(name)
        snap_times.append(float(s.t))

    meta = {
        "schema": "ambientflow-trajectory-1",
        "params": {"sigma1": traj.params.sigma1, "sigma2": traj.params.sigma2},
        "field": traj.fld.to_descriptor(),
        "control": _control_dict(traj.control),
        "stop_reason": traj.stop_reason,
        "nonconvex_time": traj.nonconvex_time,
        "snapshot_times": snap_times,
    }
    with open(os.path.join(dirpath, "trajectory.json"), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
    files.append("trajectory.json")
    return files


def _control_dict(control: StepControl) -> dict:
    d = {}
    for name in ("dt", "c_cfl", "resample_every", "max_time", "area_floor",
                 "max_steps", "snapshot_every", "snapshot_dt",
                 "snapshot_area_ratio", "stop_on_nonconvex", "nonconvex_threshold"):
        v = getattr(control, name)
        if isinstance(v, float) and math.isinf(v):
            v = "inf"
        d[name] = v
    return d


def _control_from_dict(d: dict) -> StepControl:
    kw = dict(d)
    if kw.get("max_time") == "inf":
        kw["max_time"] = math.inf
    return StepControl(**kw)


def load_trajectory(dirpath) -> Trajectory:
    with open(os.path.join(dirpath, "trajectory.json")) as f:
        meta = json.load(f)
    series_rows = []
    with open(os.path.join(dirpath, "series.csv"), newline="") as f:
        rd = csv.reader(f)
        header = next(rd)
        assert tuple(header) == SERIES_COLUMNS
        for row in rd:
            series_rows.append([float(v) for v in row])
    snapshots = []
    for i, t in enumerate(meta["snapshot_times"]):
        curve = ClosedCurve.from_csv(
            os.path.join(dirpath, "snapshots", f"snap_{i:05d}.csv"))
        snapshots.append(FlowState(curve=curve, geometry=compute_geometry(curve), t=t))
    return Trajectory(
        params=FlowParams(**meta["params"]),
        fld=AmbientField.from_descriptor(meta["field"]),
        control=_control_from_dict(meta["control"]),
        snapshots=snapshots,
        series=np.array(series_rows).reshape(-1, 7),
        stop_reason=meta["stop_reason"],
        nonconvex_time=meta["nonconvex_time"])
