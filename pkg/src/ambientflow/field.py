"""Ambient force fields with exact derivative jets up to third order.

Six built-in descriptors; every derivative is closed-form so that the
evolution-identity residual tests are not polluted by differentiation
error. Fields are immutable and freely shareable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

_KIND_CODES = {
    "zero": _kernels.FIELD_ZERO,
    "constant": _kernels.FIELD_CONSTANT,
    "killing": _kernels.FIELD_KILLING,
    "saddle": _kernels.FIELD_SADDLE,
    "radial-power": _kernels.FIELD_RADIAL_POWER,
    "radial-linear": _kernels.FIELD_RADIAL_LINEAR,
}


class UnboundedFieldError(ValueError):
    """Raised when a field is non-finite on the sampled region."""


@dataclass(frozen=True)
class AmbientField:
    """Analytic planar vector field V with closed-form jets to order 3."""

    kind: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown field kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero() -> "AmbientField":
        return AmbientField("zero")

    @staticmethod
    def constant(b: float, c: float) -> "AmbientField":
        return AmbientField("constant", (b, c))

    @staticmethod
    def killing(a: float, b: float, c: float) -> "AmbientField":
        """V(x, y) = a (y, -x) + (b, c)."""
        return AmbientField("killing", (a, b, c))

    @staticmethod
    def saddle() -> "AmbientField":
        """V(x, y) = (x, -x^2)."""
        return AmbientField("saddle")

    @staticmethod
    def radial_power(p: float) -> "AmbientField":
        """V(x, y) = (1 + x^2 + y^2)^(p/2) (x, y)."""
        return AmbientField("radial-power", (p,))

    @staticmethod
    def radial_linear(alpha) -> "AmbientField":
        """V(gamma) = <alpha, gamma> gamma."""
        ax, ay = alpha
        return AmbientField("radial-linear", (ax, ay))

    # -- serialization ------------------------------------------------------

    def to_descriptor(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["b"], d["c"] = self.params
        elif self.kind == "killing":
            d["a"], d["b"], d["c"] = self.params
        elif self.kind == "radial-power":
            d["p"] = self.params[0]
        elif self.kind == "radial-linear":
            d["alpha"] = list(self.params)
        return d

    @staticmethod
    def from_descriptor(d: dict) -> "AmbientField":
        kind = d["kind"]
        if kind == "zero":
            return AmbientField.zero()
        if kind == "constant":
            return AmbientField.constant(d["b"], d["c"])
        if kind == "killing":
            return AmbientField.killing(d["a"], d["b"], d["c"])
        if kind == "saddle":
            return AmbientField.saddle()
        if kind == "radial-power":
            return AmbientField.radial_power(d["p"])
        if kind == "radial-linear":
            return AmbientField.radial_linear(d["alpha"])
        raise ValueError(f"unknown field descriptor kind {kind!r}")

    # -- evaluation ---------------------------------------------------------

    @property
    def kernel_code(self) -> int:
        return _KIND_CODES[self.kind]

    def value(self, pts):
        """V at one point (2,) or at rows of an (n, 2) array."""
        p = np.asarray(pts, dtype=float)
        single = p.ndim == 1
        out = _kernels.field_values(self.kernel_code, np.asarray(self.params), p.reshape(-1, 2))
        return out[0] if single else out

    def jet_arrays(self, pts):
        """(V, DV, D2V) at the rows of pts, vectorized.

        Index convention: DV[n, i, j] = dV_i/dx_j, D2[n, i, j, l] adds
        one more differentiation index; directional derivatives contract
        the trailing indices.
        """
        p = np.asarray(pts, dtype=float).reshape(-1, 2)
        n = len(p)
        x, y = p[:, 0], p[:, 1]
        v = self.value(p)
        dv = np.zeros((n, 2, 2))
        d2 = np.zeros((n, 2, 2, 2))
        if self.kind == "zero" or self.kind == "constant":
            pass
        elif self.kind == "killing":
            a = self.params[0]
            dv[:, 0, 1] = a
            dv[:, 1, 0] = -a
        elif self.kind == "saddle":
            dv[:, 0, 0] = 1.0
            dv[:, 1, 0] = -2.0 * x
            d2[:, 1, 0, 0] = -2.0
        elif self.kind == "radial-power":
            pw = self.params[0]
            w = 1.0 + x * x + y * y
            f = w ** (0.5 * pw)
            fw = 0.5 * pw * w ** (0.5 * pw - 1.0)
            fww = 0.5 * pw * (0.5 * pw - 1.0) * w ** (0.5 * pw - 2.0)
            eye = np.eye(2)
            xi = p  # (n, 2)
            dv = f[:, None, None] * eye[None] + 2.0 * fw[:, None, None] * xi[:, :, None] * xi[:, None, :]
            sym = (xi[:, None, None, :] * eye[None, :, :, None]
                   + xi[:, None, :, None] * eye[None, :, None, :]
                   + xi[:, :, None, None] * eye[None, None, :, :])
            d2 = (2.0 * fw[:, None, None, None] * sym
                  + 4.0 * fww[:, None, None, None]
                  * xi[:, :, None, None] * xi[:, None, :, None] * xi[:, None, None, :])
        elif self.kind == "radial-linear":
            ax, ay = self.params
            al = np.array([ax, ay])
            s = ax * x + ay * y
            eye = np.eye(2)
            dv = al[None, None, :] * p[:, :, None] + s[:, None, None] * eye[None]
            d2 = (al[None, None, :, None] * eye[None, :, None, :]
                  + al[None, None, None, :] * eye[None, :, :, None])
        return v, dv, d2

    def third_jet(self, pt):
        """D3V at a single point; D3[i, j, l, m]."""
        x, y = float(pt[0]), float(pt[1])
        d3 = np.zeros((2, 2, 2, 2))
        if self.kind == "radial-power":
            pw = self.params[0]
            w = 1.0 + x * x + y * y
            fw = 0.5 * pw * w ** (0.5 * pw - 1.0)
            fww = 0.5 * pw * (0.5 * pw - 1.0) * w ** (0.5 * pw - 2.0)
            fwww = 0.5 * pw * (0.5 * pw - 1.0) * (0.5 * pw - 2.0) * w ** (0.5 * pw - 3.0)
            xi = np.array([x, y])
            eye = np.eye(2)
            dd = (np.einsum("ij,lm->ijlm", eye, eye)
                  + np.einsum("il,jm->ijlm", eye, eye)
                  + np.einsum("jl,im->ijlm", eye, eye))
            sym6 = (np.einsum("m,l,ij->ijlm", xi, xi, eye)
                    + np.einsum("m,j,il->ijlm", xi, xi, eye)
                    + np.einsum("m,i,jl->ijlm", xi, xi, eye)
                    + np.einsum("j,l,im->ijlm", xi, xi, eye)
                    + np.einsum("i,l,jm->ijlm", xi, xi, eye)
                    + np.einsum("i,j,lm->ijlm", xi, xi, eye))
            d3 = (2.0 * fw * dd + 4.0 * fww * sym6
                  + 8.0 * fwww * np.einsum("i,j,l,m->ijlm", xi, xi, xi, xi))
        return d3

    def growth(self, r):
        """Exact R(r) = sup of |V| over the closed disk of radius r."""
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "constant":
            b, c = self.params
            return np.full_like(r, math.hypot(b, c))
        if self.kind == "killing":
            a, b, c = self.params
            return abs(a) * r + math.hypot(b, c)
        if self.kind == "saddle":
            return r * np.sqrt(1.0 + r * r)
        if self.kind == "radial-power":
            p = self.params[0]
            if p >= -1.0:
                return r * (1.0 + r * r) ** (0.5 * p)
            rstar = 1.0 / math.sqrt(-1.0 - p)
            rr = np.minimum(r, rstar)
            return rr * (1.0 + rr * rr) ** (0.5 * p)
        # radial-linear
        ax, ay = self.params
        return math.hypot(ax, ay) * r * r


def eval_jet(field: AmbientField, p, order: int = 3):
    """Jet of V at a single point, as (V, DV, D2V, D3V) truncated to order."""
    if not 0 <= order <= 3:
        raise ValueError("order must be in 0..3")
    v, dv, d2 = field.jet_arrays(np.asarray(p, dtype=float).reshape(1, 2))
    pieces = [v[0], dv[0], d2[0], field.third_jet(p)]
    return tuple(pieces[: order + 1])


def directional(field: AmbientField, pts, X):
    """D_X V at the rows of pts for per-row directions X."""
    _, dv, _ = field.jet_arrays(pts)
    return np.einsum("nij,nj->ni", dv, np.asarray(X, dtype=float).reshape(-1, 2))


def second_directional(field: AmbientField, pts, X, Y):
    """D^2_{X,Y} V at the rows of pts."""
    _, _, d2 = field.jet_arrays(pts)
    Xa = np.asarray(X, dtype=float).reshape(-1, 2)
    Ya = np.asarray(Y, dtype=float).reshape(-1, 2)
    return np.einsum("nijl,nj,nl->ni", d2, Xa, Ya)


def convexity_indicator(field: AmbientField, p, tau) -> float:
    """<D^2_{tau,tau} V(p), R tau>; strictly negative values drive convexity loss."""
    t = np.asarray(tau, dtype=float)
    d2tt = second_directional(field, np.asarray(p, dtype=float).reshape(1, 2),
                              t.reshape(1, 2), t.reshape(1, 2))[0]
    rt = np.array([-t[1], t[0]])
    return float(d2tt @ rt)


@dataclass(frozen=True)
class FieldBounds:
    """Sampled L-infinity bounds of V and its derivatives on B_{r0}(0).

    Sampling gives a lower bound on the true suprema; for the built-in
    descriptors the sample grid contains the maximizing rays, so the
    values are exact up to grid granularity.
    """

    c0: float
    c1: float
    c2: float
    r0: float
    growth_radii: np.ndarray
    growth_values: np.ndarray

    def growth(self, r):
        return np.interp(r, self.growth_radii, self.growth_values)


def _spectral_norm_2x2(m):
    """Largest singular value of (n, 2, 2) matrices."""
    a, b = m[:, 0, 0], m[:, 0, 1]
    c, d = m[:, 1, 0], m[:, 1, 1]
    with np.errstate(over="ignore", invalid="ignore"):
        s = a * a + b * b + c * c + d * d
        det = a * d - b * c
        disc = np.sqrt(np.maximum(s * s - 4.0 * det * det, 0.0))
        return np.sqrt(np.maximum(0.5 * (s + disc), 0.0))


def _refine_along_ray(f, direction, r_center, half_width, r0, levels: int = 5):
    """Nested 1-D scans of f(r * direction) around a discrete argmax radius."""
    best = 0.0
    lo = max(0.0, r_center - half_width)
    hi = min(r0, r_center + half_width)
    for _ in range(levels):
        rs = np.linspace(lo, hi, 33)
        vals = f(rs[:, None] * direction[None, :])
        i = int(np.argmax(vals))
        best = float(vals[i])
        w = (hi - lo) / 8.0
        lo = max(0.0, rs[i] - w)
        hi = min(r0, rs[i] + w)
    return best


def estimate_bounds(field: AmbientField, r0: float, grid: int = 256) -> FieldBounds:
    """C0, C1, C2 and the growth table R(r) by polar-grid sampling.

    After the grid pass, each supremum is refined radially along its
    winning ray, so non-monotone radial profiles (e.g. decaying radial
    powers) do not leave grid-placement jitter in the bounds.
    """
    if not r0 > 0.0:
        raise ValueError("need r0 > 0")
    if grid < 64:
        raise ValueError("need grid >= 64")
    radii = np.linspace(0.0, r0, grid)
    angles = np.arange(grid) * (2.0 * math.pi / grid)
    rr, aa = np.meshgrid(radii, angles, indexing="ij")
    pts = np.column_stack((np.ravel(rr * np.cos(aa)), np.ravel(rr * np.sin(aa))))

    dirs = np.arange(64) * (2.0 * math.pi / 64)
    X = np.column_stack((np.cos(dirs), np.sin(dirs)))
    RX = np.column_stack((-X[:, 1], X[:, 0]))

    c0 = c1 = c2 = 0.0
    arg0 = arg1 = arg2 = np.zeros(2)
    x2_best = 0
    ring_max = np.zeros(grid)
    chunk = 8192
    for lo in range(0, len(pts), chunk):
        block = pts[lo:lo + chunk]
        # overflow shows up as non-finite values and is reported explicitly
        with np.errstate(over="ignore", invalid="ignore"):
            v, dv, d2 = field.jet_arrays(block)
            mag = np.hypot(v[:, 0], v[:, 1])
        if not np.all(np.isfinite(v)):
            raise UnboundedFieldError("field is not finite on the sampled region")
        i = int(mag.argmax())
        if mag[i] > c0:
            c0, arg0 = float(mag[i]), block[i]
        norms = _spectral_norm_2x2(dv)
        i = int(norms.argmax())
        if norms[i] > c1:
            c1, arg1 = float(norms[i]), block[i]
        # |<D^2_{X,X} V, RX>| over the unit-direction fan
        d2xx = np.einsum("nijl,aj,al->nai", d2, X, X)
        ind = np.abs(np.einsum("nai,ai->na", d2xx, RX))
        flat = int(ind.argmax())
        if ind.flat[flat] > c2:
            c2 = float(ind.flat[flat])
            arg2 = block[flat // 64]
            x2_best = flat % 64
        # accumulate per-ring maxima of |V| (points are ordered ring-major)
        idx = (lo + np.arange(len(block))) // grid
        np.maximum.at(ring_max, idx, mag)

    dr = radii[1] - radii[0]

    def ray(p):
        r = math.hypot(p[0], p[1])
        return (np.array([1.0, 0.0]), 0.0) if r == 0.0 else (p / r, r)

    if c0 > 0.0:
        d, rc = ray(arg0)
        c0 = max(c0, _refine_along_ray(
            lambda q: np.hypot(*field.value(q).T), d, rc, dr, r0))
    if c1 > 0.0:
        d, rc = ray(arg1)
        c1 = max(c1, _refine_along_ray(
            lambda q: _spectral_norm_2x2(field.jet_arrays(q)[1]), d, rc, dr, r0))
    if c2 > 0.0:
        d, rc = ray(arg2)
        xb, rxb = X[x2_best], RX[x2_best]

        def ind_along(q):
            d2 = field.jet_arrays(q)[2]
            return np.abs(np.einsum("nijl,j,l,ni->n", d2, xb, xb,
                                    np.broadcast_to(rxb, (len(q), 2))))

        c2 = max(c2, _refine_along_ray(ind_along, d, rc, dr, r0))

    growth_values = np.maximum.accumulate(ring_max)
    return FieldBounds(c0=c0, c1=c1, c2=c2, r0=float(r0),
                       growth_radii=radii, growth_values=growth_values)


def killing_integral_curve(a: float, b: float, c: float, t):
    """Integral curve of the Killing field from the origin.

    Solves x' = -ya + b, y' = ax + c, (x, y)(0) = (0, 0); the a -> 0
    limit (bt, ct) is taken analytically.
    """
    t = np.asarray(t, dtype=float)
    if a == 0.0:
        out = np.stack((b * t, c * t), axis=-1)
        return out if out.ndim > 1 else out
    sa = np.sin(a * t)
    hv = 2.0 * np.sin(0.5 * a * t) ** 2        # 1 - cos(a t), cancellation-free
    return np.stack(((b * sa - c * hv) / a, (c * sa + b * hv) / a), axis=-1)


def verify_jet_fd(field: AmbientField, p, step: float = 1e-4) -> dict:
    """Central-difference cross-check of the analytic jets at a point.

    Each order n+1 is compared against finite differences of the analytic
    order-n jet; reports the max discrepancy per order, relative to
    max(|analytic|, 1).
    """
    p = np.asarray(p, dtype=float)
    h = step
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])

    def rel(err, ref):
        return float(err / max(ref, 1.0))

    v, dv, d2, d3 = eval_jet(field, p, 3)
    report = {}

    fd_dv = np.stack([
        (field.value(p + ex) - field.value(p - ex)) / (2 * h),
        (field.value(p + ey) - field.value(p - ey)) / (2 * h),
    ], axis=-1)
    report["order1"] = rel(np.abs(fd_dv - dv).max(), np.abs(dv).max())

    def dv_at(q):
        return field.jet_arrays(q.reshape(1, 2))[1][0]

    fd_d2 = np.stack([
        (dv_at(p + ex) - dv_at(p - ex)) / (2 * h),
        (dv_at(p + ey) - dv_at(p - ey)) / (2 * h),
    ], axis=-1)
    report["order2"] = rel(np.abs(fd_d2 - d2).max(), np.abs(d2).max())

    def d2_at(q):
        return field.jet_arrays(q.reshape(1, 2))[2][0]

    fd_d3 = np.stack([
        (d2_at(p + ex) - d2_at(p - ex)) / (2 * h),
        (d2_at(p + ey) - d2_at(p - ey)) / (2 * h),
    ], axis=-1)
    report["order3"] = rel(np.abs(fd_d3 - d3).max(), np.abs(d3).max())
    report["max"] = max(report.values())
    return report
