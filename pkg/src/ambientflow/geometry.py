"""Closed planar curves and their discrete intrinsic geometry.

Curves are simple, counterclockwise polygons; curvature is the turning
angle at each vertex divided by the average adjacent edge length, which
is second-order accurate on smooth, near-equispaced data. The inward
normal is the +90 degree rotation of the tangent (the unit circle has
k = +1).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LinearRing

from . import _kernels

TWO_PI = 2.0 * np.pi


class InvalidCurveError(ValueError):
    """Raised when vertex data cannot form a valid closed curve."""


class ConvexityRequiredError(ValueError):
    """Raised when an operation needs a strictly convex curve."""


class ClosureConstructionError(ValueError):
    """Raised when a convex parabola closure cannot be built."""


def _rot90(v):
    """Counterclockwise right-angle rotation R(x, y) = (-y, x)."""
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


def is_simple_polygon(vertices) -> bool:
    """Segment-intersection test for embeddedness (GEOS sweep)."""
    try:
        return bool(LinearRing(vertices).is_simple)
    except Exception:
        return False


class ClosedCurve:
    """An embedded closed polygon, normalized to counterclockwise orientation.

    ``vertices`` is an (n, 2) read-only float array, implicitly periodic.
    """

    __slots__ = ("vertices",)

    def __init__(self, vertices, check_simple: bool = True):
        xy = np.ascontiguousarray(vertices, dtype=float)
        if xy.ndim != 2 or xy.shape[1] != 2 or xy.shape[0] < 8:
            raise InvalidCurveError("need an (n, 2) array with n >= 8")
        if not np.all(np.isfinite(xy)):
            raise InvalidCurveError("non-finite vertex")
        edges = np.roll(xy, -1, axis=0) - xy
        ell = np.hypot(edges[:, 0], edges[:, 1])
        if ell.min() <= 0.0:
            raise InvalidCurveError("coincident consecutive vertices")
        # shoelace orientation; normalize to CCW
        x, y = xy[:, 0], xy[:, 1]
        shoelace = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        if shoelace == 0.0:
            raise InvalidCurveError("degenerate (zero-area) polygon")
        if shoelace < 0.0:
            xy = np.ascontiguousarray(xy[::-1])
        if check_simple and not is_simple_polygon(xy):
            raise InvalidCurveError("self-intersecting polygon")
        xy.setflags(write=False)
        self.vertices = xy

    def __len__(self):
        return len(self.vertices)

    @property
    def diameter(self) -> float:
        """Bounding-box diagonal (cheap upper bound on the true diameter)."""
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.hypot(span[0], span[1]))

    @staticmethod
    def circle(r: float, n: int, center=(0.0, 0.0)) -> "ClosedCurve":
        th = np.arange(n) * (TWO_PI / n)
        xy = np.column_stack((center[0] + r * np.cos(th), center[1] + r * np.sin(th)))
        return ClosedCurve(xy, check_simple=False)

    @staticmethod
    def ellipse(a: float, b: float, n: int, center=(0.0, 0.0)) -> "ClosedCurve":
        th = np.arange(n) * (TWO_PI / n)
        xy = np.column_stack((center[0] + a * np.cos(th), center[1] + b * np.sin(th)))
        return ClosedCurve(xy, check_simple=False)

    # ---- I/O: CSV with header x,y and JSON {"vertices": [[x, y], ...]} ----

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["x", "y"])
            for px, py in self.vertices:
                w.writerow([repr(float(px)), repr(float(py))])

    @staticmethod
    def from_csv(path) -> "ClosedCurve":
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        if not rows or [c.strip() for c in rows[0]] != ["x", "y"]:
            raise InvalidCurveError("curve CSV must start with header 'x,y'")
        xy = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r], dtype=float)
        return ClosedCurve(xy)

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump({"vertices": [[float(x), float(y)] for x, y in self.vertices]}, f)

    @staticmethod
    def from_json(path) -> "ClosedCurve":
        with open(path) as f:
            data = json.load(f)
        return ClosedCurve(np.array(data["vertices"], dtype=float))


@dataclass(frozen=True, eq=False)
class CurveGeometry:
    """Per-vertex frame and curvature plus integral quantities."""

    vertices: np.ndarray
    tau: np.ndarray       # unit tangent
    nu: np.ndarray        # unit inward normal, nu = R tau
    k: np.ndarray         # curvature, 1/length
    ds: np.ndarray        # arclength weight per vertex
    length: float
    area: float           # -1/2 sum <gamma, nu> ds
    turning: float        # (1/2pi) sum of turning angles

    @property
    def min_edge(self) -> float:
        e = np.roll(self.vertices, -1, axis=0) - self.vertices
        return float(np.hypot(e[:, 0], e[:, 1]).min())

    def centroid(self) -> np.ndarray:
        """ds-weighted vertex centroid."""
        return (self.vertices * self.ds[:, None]).sum(axis=0) / self.length


def compute_geometry(curve: ClosedCurve) -> CurveGeometry:
    xy = curve.vertices
    tau, nu, k, ds, ell, L, A, W = _kernels.curve_metrics(xy)
    for arr in (tau, nu, k, ds):
        arr.setflags(write=False)
    return CurveGeometry(vertices=xy, tau=tau, nu=nu, k=k, ds=ds,
                         length=L, area=A, turning=W)


def resample_arclength(curve: ClosedCurve, n: int) -> ClosedCurve:
    """Redistribute n vertices equispaced in arclength (anchored at vertex 0)."""
    if n < 8:
        raise InvalidCurveError("need n >= 8")
    xy = _kernels.resample_closed(curve.vertices, n)
    return ClosedCurve(xy, check_simple=False)


def _arc_diff(values, ell):
    """First arclength derivative, 3-point formula on nonuniform spacing."""
    a = np.roll(ell, 1)          # |gamma_i - gamma_{i-1}|
    b = ell                      # |gamma_{i+1} - gamma_i|
    vm = np.roll(values, 1)
    vp = np.roll(values, -1)
    return (vp * a * a - vm * b * b + values * (b * b - a * a)) / (a * b * (a + b))


def _arc_diff2(values, ell):
    """Second arclength derivative, 3-point formula on nonuniform spacing."""
    a = np.roll(ell, 1)
    b = ell
    vm = np.roll(values, 1)
    vp = np.roll(values, -1)
    return 2.0 * (vm * b + vp * a - values * (a + b)) / (a * b * (a + b))


def curvature_derivatives(geom: CurveGeometry):
    """(k_s, k_ss) by periodic central differences in arclength."""
    e = np.roll(geom.vertices, -1, axis=0) - geom.vertices
    ell = np.hypot(e[:, 0], e[:, 1])
    return _arc_diff(geom.k, ell), _arc_diff2(geom.k, ell)


@dataclass(frozen=True, eq=False)
class AngleProfile:
    """Curvature sampled on a uniform tangent-angle grid (convex curves)."""

    theta: np.ndarray          # m uniform angles in [0, 2pi)
    k: np.ndarray              # strictly positive samples
    positions: np.ndarray | None = field(default=None)

    @property
    def grid_size(self) -> int:
        return len(self.theta)


def to_angle_param(geom: CurveGeometry, m: int, with_positions: bool = False) -> AngleProfile:
    """Sample k (and optionally gamma) at m uniform tangent angles.

    Uses the monotone lift of the tangent angle (d theta / ds = k), so it
    requires k > 0 everywhere.
    """
    if np.any(geom.k <= 0.0):
        raise ConvexityRequiredError("angle parametrization needs k > 0 everywhere")
    # lift of the tangent angle along the curve; strictly increasing since k > 0
    phi0 = math.atan2(geom.tau[0, 1], geom.tau[0, 0])
    dpsi = geom.k * geom.ds                      # turning angle at each vertex
    # vertex i carries angle phi0 + sum of turning angles over vertices 1..i
    phi = phi0 + np.concatenate(([0.0], np.cumsum(dpsi[1:])))
    grid = np.arange(m) * (TWO_PI / m)
    # shift each grid angle into [phi[0], phi[0] + 2pi)
    shifted = phi[0] + np.mod(grid - phi[0], TWO_PI)
    phi_ext = np.concatenate((phi, [phi[0] + TWO_PI]))
    k_ext = np.concatenate((geom.k, [geom.k[0]]))
    ks = np.interp(shifted, phi_ext, k_ext)
    pos = None
    if with_positions:
        pos = np.empty((m, 2))
        for c in range(2):
            v_ext = np.concatenate((geom.vertices[:, c], [geom.vertices[0, c]]))
            pos[:, c] = np.interp(shifted, phi_ext, v_ext)
    return AngleProfile(theta=grid, k=ks, positions=pos)


def curve_from_angle_profile(profile: AngleProfile, start=(0.0, 0.0)) -> ClosedCurve:
    """Reconstruct a curve by integrating gamma_theta = (cos, sin)/k."""
    th, k = profile.theta, profile.k
    dth = TWO_PI / len(th)
    fx = np.cos(th) / k
    fy = np.sin(th) / k
    # midpoint-style cumulative sum (trapezoid between consecutive samples)
    x = start[0] + np.concatenate(([0.0], np.cumsum(0.5 * (fx[:-1] + fx[1:]) * dth)))
    y = start[1] + np.concatenate(([0.0], np.cumsum(0.5 * (fy[:-1] + fy[1:]) * dth)))
    return ClosedCurve(np.column_stack((x[:-1], y[:-1])), check_simple=False)


def closure_gap(profile: AngleProfile) -> float:
    """|integral of (cos, sin)/k dtheta| — zero for profiles of closed curves."""
    dth = TWO_PI / len(profile.theta)
    gx = float(np.sum(np.cos(profile.theta) / profile.k) * dth)
    gy = float(np.sum(np.sin(profile.theta) / profile.k) * dth)
    return math.hypot(gx, gy)


def median_curvature(profile: AngleProfile) -> float:
    """Largest b such that k > b on some angle window of length pi.

    Discretized as the max over all grid offsets of the minimum over a
    closed window of ceil(m/2) consecutive samples.
    """
    k = profile.k
    m = len(k)
    w = math.ceil(m / 2)
    tiled = np.concatenate((k, k[: w - 1]))
    windows = np.lib.stride_tricks.sliding_window_view(tiled, w)
    return float(windows.min(axis=1).max())


def entropy(profile: AngleProfile) -> float:
    """Periodic trapezoid of integral log k dtheta."""
    if np.any(profile.k <= 0.0):
        raise ValueError("entropy needs strictly positive curvature samples")
    return float(np.log(profile.k).sum() * (TWO_PI / len(profile.k)))


def _directed_hausdorff(pts, poly):
    """max over pts of distance to the closed polygon poly (point-to-segment)."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    e = b - a                                   # (m, 2) segments
    ee = (e * e).sum(axis=1)
    # project every point on every segment
    d = pts[:, None, :] - a[None, :, :]         # (n, m, 2)
    tproj = (d * e[None, :, :]).sum(axis=2) / ee[None, :]
    tproj = np.clip(tproj, 0.0, 1.0)
    closest = a[None, :, :] + tproj[:, :, None] * e[None, :, :]
    dist = np.hypot(pts[:, None, 0] - closest[:, :, 0], pts[:, None, 1] - closest[:, :, 1])
    return float(dist.min(axis=1).max())


def hausdorff_distance(c1, c2) -> float:
    """Symmetric Hausdorff distance between two closed polygons."""
    p1 = c1.vertices if isinstance(c1, ClosedCurve) else np.asarray(c1, dtype=float)
    p2 = c2.vertices if isinstance(c2, ClosedCurve) else np.asarray(c2, dtype=float)
    return max(_directed_hausdorff(p1, p2), _directed_hausdorff(p2, p1))


# ---------------------------------------------------------------------------
# parabola closure: the strictly convex initial curve that coincides with the
# graph u = eps x^2 near the origin


def _quintic_hermite(x0, x1, jet0, jet1):
    """Quintic with prescribed (value, slope, second derivative) at x0 and x1."""
    h = x1 - x0
    rows = []
    rhs = []
    for (xi, (v, s, c)) in ((0.0, jet0), (h, jet1)):
        rows.append([xi ** j for j in range(6)])
        rhs.append(v)
        rows.append([0.0] + [j * xi ** (j - 1) for j in range(1, 6)])
        rhs.append(s)
        rows.append([0.0, 0.0] + [j * (j - 1) * xi ** (j - 2) for j in range(2, 6)])
        rhs.append(c)
    coef = np.linalg.solve(np.array(rows), np.array(rhs))
    return coef  # polynomial in (x - x0), ascending order


def _polyval(coef, t):
    out = np.zeros_like(t)
    for c in coef[::-1]:
        out = out * t + c
    return out


def _polyder(coef):
    return np.array([j * coef[j] for j in range(1, len(coef))])


def _arclength_table(fx, fy, t0, t1, samples=4097):
    t = np.linspace(t0, t1, samples)
    x, y = fx(t), fy(t)
    seg = np.hypot(np.diff(x), np.diff(y))
    return t, np.concatenate(([0.0], np.cumsum(seg)))


def build_parabola_closure(eps: float, delta: float, n: int,
                           junction_angle: float = math.pi / 3) -> ClosedCurve:
    """Strictly convex closed curve coinciding with u = eps x^2 on |x| <= delta.

    The graph is continued on delta <= |x| <= 2 delta by a quintic blend
    matching second-order jets on both ends, and closed over the top by a
    circular arc whose curvature exceeds 2 eps. Construction fails if the
    requested parameters cannot produce a convex curve at resolution n.
    """
    if not (0.0 < eps <= 1.0) or not (0.0 < delta <= 1.0):
        raise ClosureConstructionError("need 0 < eps <= 1 and 0 < delta <= 1")
    if n < 64:
        raise ClosureConstructionError("need n >= 64 to resolve the closure")

    phi = junction_angle                     # tangent angle where arc takes over
    s1 = math.tan(phi)                       # junction slope
    s0 = 2.0 * eps * delta                   # parabola slope at delta
    if s1 <= s0:
        raise ClosureConstructionError("junction angle below parabola slope")
    rc = 2.0 * delta / math.sin(phi)         # closing arc radius
    if 1.0 / rc <= 2.0 * eps:
        raise ClosureConstructionError("closing arc curvature must exceed 2 eps")
    # junction height: chord slope midway between end slopes keeps the blend convex
    v0 = eps * delta * delta
    v1 = v0 + 0.5 * (s0 + s1) * delta
    c1 = rc * rc / (rc * rc - 4.0 * delta * delta) ** 1.5   # circle y'' at x = 2 delta
    coef = _quintic_hermite(delta, 2.0 * delta, (v0, s0, 2.0 * eps), (v1, s1, c1))
    dcoef = _polyder(coef)
    ddcoef = _polyder(dcoef)
    qgrid = np.linspace(0.0, delta, 512)
    if _polyval(ddcoef, qgrid).min() <= 0.0:
        raise ClosureConstructionError("blend lost convexity; adjust junction angle")

    yc = v1 + rc * math.cos(phi)             # arc center (0, yc)

    # piecewise parametrizations (left to right along the bottom, CCW overall)
    para_x = lambda t: t
    para_y = lambda t: eps * t * t
    blend_x = lambda t: t
    blend_y = lambda t: _polyval(coef, t - delta)
    # closing arc spans the central angle pi + 2(pi/2 - phi) over the top
    arc_len = rc * (2.0 * math.pi - 2.0 * phi)
    th_start = math.atan2(v1 - yc, 2.0 * delta)   # right junction, seen from center
    th_end = math.pi - th_start

    # arclength of each graph piece
    _, s_par = _arclength_table(para_x, para_y, -delta, delta)
    _, s_bl = _arclength_table(blend_x, blend_y, delta, 2.0 * delta)
    len_par, len_bl = s_par[-1], s_bl[-1]
    total = len_par + 2.0 * len_bl + arc_len

    # vertex budget per piece, parabola count odd so x = 0 is a vertex
    n_par = max(9, int(round(n * len_par / total)))
    if n_par % 2 == 0:
        n_par += 1
    n_bl = max(6, int(round(n * len_bl / total)))
    n_arc = n - n_par - 2 * n_bl
    if n_arc < 8:
        raise ClosureConstructionError("resolution too low for the closing arc")

    # parabola piece: n_par vertices equispaced in arclength, endpoints included
    t_tab, s_tab = _arclength_table(para_x, para_y, -delta, delta)
    tt = np.interp(np.linspace(0.0, s_tab[-1], n_par), s_tab, t_tab)
    tt[0], tt[-1] = -delta, delta
    tt[(n_par - 1) // 2] = 0.0
    px, py = tt, eps * tt * tt

    # right blend: open at the parabola end, includes junction with the arc
    t_tab, s_tab = _arclength_table(blend_x, blend_y, delta, 2.0 * delta)
    sb = np.linspace(0.0, s_tab[-1], n_bl + 1)[1:]
    tb = np.interp(sb, s_tab, t_tab)
    tb[-1] = 2.0 * delta
    bx, by = tb, _polyval(coef, tb - delta)

    # closing arc: open at both junction points
    th = np.linspace(th_start, th_end, n_arc + 2)[1:-1]
    ax_, ay_ = rc * np.cos(th), yc + rc * np.sin(th)

    xs = np.concatenate((px, bx, ax_, -bx[::-1]))
    ys = np.concatenate((py, by, ay_, by[::-1]))
    curve = ClosedCurve(np.column_stack((xs, ys)), check_simple=True)
    geom = compute_geometry(curve)
    if geom.k.min() <= 0.0:
        raise ClosureConstructionError("discrete closure not strictly convex at this resolution")
    return curve
