"""Explicit thresholds and confinement machinery.

K is the largest non-negative root of
    P(x) = sigma1 x^3 - (|sigma2| - sigma2)/2 x^2 - 3 C1 x - C2,
computed from the depressed-cubic closed forms and cross-validated
against bisection. M is the length threshold (finite or +inf); the
confinement IVP x'(r) = |sigma2| + R(x(r)) is integrated with an
adaptive classical RK4.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .field import AmbientField, FieldBounds, estimate_bounds
from .geometry import ClosedCurve, compute_geometry


class InternalConsistencyError(ArithmeticError):
    """Closed-form root and bisection oracle disagree beyond tolerance."""


# ---------------------------------------------------------------------------
# curvature threshold K


def _cubic_value(x, sigma1, sigma2, c1, c2):
    m = abs(sigma2) - sigma2
    return sigma1 * x ** 3 - 0.5 * m * x ** 2 - 3.0 * c1 * x - c2


def _largest_root_bisection(sigma1, sigma2, c1, c2):
    """Largest non-negative root by bisection; P(0) <= 0 <= P(hi)."""
    m = abs(sigma2) - sigma2
    hi = 1.0 + max(0.5 * m, 3.0 * c1, c2) / sigma1   # Cauchy-type bound
    lo = 0.0
    if _cubic_value(hi, sigma1, sigma2, c1, c2) <= 0.0:  # pragma: no cover
        hi *= 4.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _cubic_value(mid, sigma1, sigma2, c1, c2) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class CubicReport:
    coefficients: tuple[float, float, float, float]  # (a, b, c, d) of P
    p: float
    q: float
    discriminant: float
    branch: str                                      # trig | cosh | cbrt
    root: float


def curvature_threshold_K(sigma1: float, sigma2: float, c1: float, c2: float):
    """(K, CubicReport): closed-form largest non-negative root of P.

    Branch selected by the sign of Delta = -(4 p^3 + 27 q^2); q = 0 is
    routed to the trig branch. Bisection is the authority on any
    disagreement beyond 1e-9.
    """
    if not sigma1 > 0.0:
        raise ValueError("need sigma1 > 0")
    if c1 < 0.0 or c2 < 0.0:
        raise ValueError("need C1, C2 >= 0")
    m = abs(sigma2) - sigma2
    shift = m / (6.0 * sigma1)
    p = -(36.0 * sigma1 * c1 + m * m) / (12.0 * sigma1 ** 2)
    q = (-(0.25 * m ** 3) - 13.5 * sigma1 * m * c1 - 27.0 * sigma1 ** 2 * c2) \
        / (27.0 * sigma1 ** 3)
    delta = -(4.0 * p ** 3 + 27.0 * q * q)
    if p == 0.0:
        branch = "cbrt"
        root = shift + math.copysign(abs(q) ** (1.0 / 3.0), -q)
    elif delta >= 0.0 or q == 0.0:
        branch = "trig"
        arg = (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)
        arg = min(1.0, max(-1.0, arg))
        root = shift + 2.0 * math.sqrt(-p / 3.0) * math.cos(math.acos(arg) / 3.0)
    else:
        branch = "cosh"
        arg = (-3.0 * abs(q) / (2.0 * p)) * math.sqrt(-3.0 / p)
        root = shift - 2.0 * math.copysign(1.0, q) * math.sqrt(-p / 3.0) \
            * math.cosh(math.acosh(max(arg, 1.0)) / 3.0)
    root = max(root, 0.0)
    check = _largest_root_bisection(sigma1, sigma2, c1, c2)
    if abs(root - check) > 1e-9 * max(1.0, abs(check)):
        raise InternalConsistencyError(
            f"cubic branches disagree: closed form {root!r}, bisection {check!r}")
    report = CubicReport(
        coefficients=(sigma1, -0.5 * m, -3.0 * c1, -c2),
        p=p, q=q, discriminant=delta, branch=branch, root=root)
    return root, report


# ---------------------------------------------------------------------------
# length threshold M


def length_alpha_bound(alpha, sigma1, sigma2, c0, c1):
    """Length bound as a function of the splitting weight alpha in [0, 1)."""
    d = alpha * c1 + (1.0 - alpha) ** 2 * c0 * c0 / sigma1
    num = math.pi * sigma2 + math.sqrt((math.pi * sigma2) ** 2
                                       + 3.0 * math.pi ** 2 * sigma1 * d)
    return num / d if d > 0.0 else math.inf


def length_threshold_M(case: str, sigma1: float, sigma2: float,
                       c0: float = 0.0, c1: float = 0.0,
                       x_t0: float | None = None) -> float:
    """Length threshold for the confinement cases; may be +inf.

    Cases 'a' and 'b' share one formula (optimized over the splitting
    weight; constant fields give +inf). Case 'c' needs the confinement
    ODE value x(T0) at T0 = 1/(sigma1 pi).
    """
    if not sigma1 > 0.0:
        raise ValueError("need sigma1 > 0")
    if case in ("a", "b"):
        if c1 == 0.0:
            return math.inf
        if c0 == 0.0:
            # alpha -> 0 limit of the bound (the alpha* formula divides by c0^2)
            if sigma2 >= 0.0:
                return math.inf
            return 3.0 * math.pi * sigma1 / (2.0 * abs(sigma2))
        if sigma1 * c1 < 2.0 * c0 * c0:
            alpha = 1.0 - sigma1 * c1 / (2.0 * c0 * c0)
        else:
            alpha = 0.0
        return length_alpha_bound(alpha, sigma1, sigma2, c0, c1)
    if case == "c":
        if x_t0 is None:
            raise ValueError("case (c) needs x(T0) from the confinement ODE")
        m = abs(sigma2) - sigma2
        first = 4.0 * sigma1 * math.pi / (m + math.sqrt(m * m + 4.0 * math.pi * x_t0 ** 2))
        second = sigma1 * math.pi / (0.5 * m + x_t0)
        return min(first, second)
    raise ValueError(f"unknown confinement case {case!r}")


# ---------------------------------------------------------------------------
# confinement IVP


@dataclass(frozen=True)
class OdeSolution:
    r: np.ndarray
    x: np.ndarray
    dx: np.ndarray            # slopes |sigma2| + R(x) at the nodes
    blew_up: bool
    r_blow: float | None      # first r where x crossed the ceiling

    def at(self, r):
        """Cubic-Hermite dense output at a single r in the covered range."""
        r = float(r)
        if r < self.r[0] or r > self.r[-1]:
            raise ValueError("requested r outside the integrated range"
                             + (" (solution blew up)" if self.blew_up else ""))
        i = int(np.searchsorted(self.r, r, side="right") - 1)
        i = min(i, len(self.r) - 2)
        h = self.r[i + 1] - self.r[i]
        t = (r - self.r[i]) / h
        h00 = (1.0 + 2.0 * t) * (1.0 - t) ** 2
        h10 = t * (1.0 - t) ** 2
        h01 = t * t * (3.0 - 2.0 * t)
        h11 = t * t * (t - 1.0)
        return float(h00 * self.x[i] + h10 * h * self.dx[i]
                     + h01 * self.x[i + 1] + h11 * h * self.dx[i + 1])


def solve_confinement_ode(sigma2: float, growth, r0: float, r_max: float,
                          tol: float = 1e-9, ceiling: float = 1e12) -> OdeSolution:
    """Adaptive classical RK4 for x'(r) = |sigma2| + R(x(r)), x(0) = r0.

    Step doubling controls the local error per unit step at
    tol * (h/r_max) * max(1, |x|), which makes the accumulated error scale
    linearly with tol. Exceeding the ceiling is reported as blow-up, not
    an error.
    """
    if not r0 > 0.0:
        raise ValueError("need r0 > 0")

    s2 = abs(sigma2)

    def f(x):
        return s2 + float(growth(x))

    def rk4(x, h):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    r, x = 0.0, float(r0)
    rs, xs, fs = [r], [x], [f(x)]
    h = min(r_max, 1.0) / 64.0
    blew_up = False
    r_blow = None
    hmin = r_max * 1e-15
    while r < r_max:
        h = min(h, r_max - r)
        big = rk4(x, h)
        half = rk4(rk4(x, 0.5 * h), 0.5 * h)
        err = abs(big - half) / 15.0
        scale = tol * (h / r_max) * max(1.0, abs(half))
        if err <= scale or h <= hmin:
            r += h
            x = half + (half - big) / 15.0        # local extrapolation
            rs.append(r)
            xs.append(x)
            if not math.isfinite(x) or x >= ceiling:
                blew_up = True
                r_blow = r
                fs.append(fs[-1] if not math.isfinite(x) else f(x))
                break
            fs.append(f(x))
        if err > 0.0:
            h = min(4.0 * h, max(0.1 * h, 0.9 * h * (scale / err) ** 0.25))
        else:
            h *= 4.0
        if h < hmin:
            h = hmin
    return OdeSolution(r=np.array(rs), x=np.array(xs), dx=np.array(fs),
                       blew_up=blew_up, r_blow=r_blow)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ConstantsReport:
    sigma1: float
    sigma2: float
    c0: float
    c1: float
    c2: float
    K: float
    cubic: CubicReport
    case: str
    M: float                               # may be +inf
    t0: float | None = None                # case (c): 1/(sigma1 pi)
    x_t0: float | None = None
    ode_blew_up: bool | None = None

    def to_json(self) -> str:
        def num(v):
            if v is None:
                return None
            if math.isinf(v):
                return "inf"
            return float(f"{v:.17g}")

        d = {
            "sigma1": num(self.sigma1), "sigma2": num(self.sigma2),
            "C0": num(self.c0), "C1": num(self.c1), "C2": num(self.c2),
            "K": num(self.K),
            "cubic": {
                "coefficients": [num(c) for c in self.cubic.coefficients],
                "p": num(self.cubic.p), "q": num(self.cubic.q),
                "discriminant": num(self.cubic.discriminant),
                "branch": self.cubic.branch,
            },
            "case": self.case,
            "M": num(self.M),
            "T0": num(self.t0), "x_T0": num(self.x_t0),
            "ode_blew_up": self.ode_blew_up,
        }
        return json.dumps(d, indent=2, sort_keys=True)


def compute_constants(sigma1, sigma2, c0, c1, c2, case="a",
                      growth=None, r_start=None) -> ConstantsReport:
    """Assemble K and M for the given confinement case."""
    K, cubic = curvature_threshold_K(sigma1, sigma2, c1, c2)
    t0 = x_t0 = None
    blew = None
    if case == "c":
        if growth is None or r_start is None:
            raise ValueError("case (c) needs a growth function and a start radius")
        t0 = 1.0 / (sigma1 * math.pi)
        sol = solve_confinement_ode(sigma2, growth, r_start, t0)
        blew = sol.blew_up
        if sol.blew_up:
            M = 0.0
        else:
            x_t0 = sol.at(t0)
            M = length_threshold_M("c", sigma1, sigma2, c0, c1, x_t0=x_t0)
    else:
        M = length_threshold_M(case, sigma1, sigma2, c0, c1)
    return ConstantsReport(sigma1=sigma1, sigma2=sigma2, c0=c0, c1=c1, c2=c2,
                           K=K, cubic=cubic, case=case, M=M,
                           t0=t0, x_t0=x_t0, ode_blew_up=blew)


@dataclass(frozen=True)
class HypothesisReport:
    """Verdicts of the round-point convergence hypotheses for one initial curve."""

    min_k0: float
    length0: float
    area0: float
    max_radius0: float                    # max |gamma_0|
    r0: float
    constants: ConstantsReport
    curve_inside_region: bool
    condition_i: bool                     # min k(.,0) > K
    condition_ii: bool                    # L(gamma_0) < M
    case_satisfied: bool
    case_c_area_ok: bool | None = None    # A(gamma_0) <= 1
    case_c_radius_ok: bool | None = None  # R0 >= x(T0)

    @property
    def all_satisfied(self) -> bool:
        extras = [v for v in (self.case_c_area_ok, self.case_c_radius_ok)
                  if v is not None]
        return (self.condition_i and self.condition_ii and self.case_satisfied
                and self.curve_inside_region and all(extras))


def check_hypotheses(curve: ClosedCurve, fld: AmbientField, params,
                     r0: float, grid: int = 256,
                     bounds: FieldBounds | None = None) -> HypothesisReport:
    """Measure the initial curve and report every round-point hypothesis.

    The confinement case is chosen automatically: (a) for r0 = inf
    (bounds sampled on a large disk, recorded as a user assertion),
    (b) when r0 < sigma1/(|sigma2| + C0), else (c) via the growth ODE.
    """
    geom = compute_geometry(curve)
    max_r = float(np.hypot(curve.vertices[:, 0], curve.vertices[:, 1]).max())
    sigma1, sigma2 = params.sigma1, params.sigma2

    if math.isinf(r0):
        sample_r = max(10.0, 2.0 * max_r)
        bounds = bounds or estimate_bounds(fld, sample_r, grid)
        case = "a"
        case_ok = True
        inside = True
    else:
        bounds = bounds or estimate_bounds(fld, r0, grid)
        inside = max_r < r0
        if r0 < sigma1 / (abs(sigma2) + bounds.c0):
            case = "b"
            case_ok = True
        else:
            case = "c"
            case_ok = False  # refined below

    area_ok = radius_ok = None
    if case == "c":
        rep = compute_constants(sigma1, sigma2, bounds.c0, bounds.c1, bounds.c2,
                                case="c", growth=fld.growth, r_start=max_r)
        case_ok = not rep.ode_blew_up
        area_ok = geom.area <= 1.0
        radius_ok = (rep.x_t0 is not None) and (r0 >= rep.x_t0)
    else:
        rep = compute_constants(sigma1, sigma2, bounds.c0, bounds.c1, bounds.c2,
                                case=case)

    return HypothesisReport(
        min_k0=float(geom.k.min()), length0=geom.length, area0=geom.area,
        max_radius0=max_r, r0=r0, constants=rep,
        curve_inside_region=inside,
        condition_i=bool(geom.k.min() > rep.K),
        condition_ii=bool(geom.length < rep.M),
        case_satisfied=case_ok,
        case_c_area_ok=area_ok, case_c_radius_ok=radius_ok)
