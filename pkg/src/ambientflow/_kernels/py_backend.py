"""Pure-numpy implementation of the hot kernels.

The compiled extension (``_core``) mirrors these routines; tests assert
parity between the two backends. Everything here works on raw (n, 2)
float arrays, no domain types.
"""

import numpy as np

# field kind codes, shared with the compiled backend
FIELD_ZERO = 0
FIELD_CONSTANT = 1
FIELD_KILLING = 2
FIELD_SADDLE = 3
FIELD_RADIAL_POWER = 4
FIELD_RADIAL_LINEAR = 5

# advance() stop codes
STOP_STEPS = 0
STOP_MAX_TIME = 1
STOP_AREA_FLOOR = 2

COMPILED = False


def field_values(kind, params, xy):
    """Evaluate the ambient field V at each row of xy. Returns (n, 2)."""
    x = xy[:, 0]
    y = xy[:, 1]
    out = np.empty_like(xy)
    if kind == FIELD_ZERO:
        out[:] = 0.0
    elif kind == FIELD_CONSTANT:
        out[:, 0] = params[0]
        out[:, 1] = params[1]
    elif kind == FIELD_KILLING:
        a, b, c = params[0], params[1], params[2]
        out[:, 0] = a * y + b
        out[:, 1] = -a * x + c
    elif kind == FIELD_SADDLE:
        out[:, 0] = x
        out[:, 1] = -x * x
    elif kind == FIELD_RADIAL_POWER:
        p = params[0]
        w = (1.0 + x * x + y * y) ** (0.5 * p)
        out[:, 0] = w * x
        out[:, 1] = w * y
    elif kind == FIELD_RADIAL_LINEAR:
        ax, ay = params[0], params[1]
        s = ax * x + ay * y
        out[:, 0] = s * x
        out[:, 1] = s * y
    else:
        raise ValueError(f"unknown field kind {kind}")
    return out


def curve_metrics(xy):
    """Discrete geometry of a closed CCW polygon.

    Returns (tau, nu, k, ds, ell, L, A, W) where tau/nu are unit
    tangent/inward normal per vertex, k the turning-angle curvature,
    ds the per-vertex arclength weight, ell the edge lengths, and
    L, A, W the length, signed-area integral -1/2 sum <gamma,nu> ds
    and turning number.
    """
    e = np.roll(xy, -1, axis=0) - xy          # e[i] = gamma[i+1] - gamma[i]
    ell = np.hypot(e[:, 0], e[:, 1])
    ep = np.roll(e, 1, axis=0)                # e[i-1]
    # turning angle at vertex i, from e[i-1] to e[i]
    cross = ep[:, 0] * e[:, 1] - ep[:, 1] * e[:, 0]
    dot = ep[:, 0] * e[:, 0] + ep[:, 1] * e[:, 1]
    psi = np.arctan2(cross, dot)
    ds = 0.5 * (np.roll(ell, 1) + ell)
    k = psi / ds
    # central-difference tangent
    ch = np.roll(xy, -1, axis=0) - np.roll(xy, 1, axis=0)
    chn = np.hypot(ch[:, 0], ch[:, 1])
    tau = ch / chn[:, None]
    nu = np.empty_like(tau)                   # nu = R tau = (-tau_y, tau_x)
    nu[:, 0] = -tau[:, 1]
    nu[:, 1] = tau[:, 0]
    L = float(ell.sum())
    A = -0.5 * float(((xy[:, 0] * nu[:, 0] + xy[:, 1] * nu[:, 1]) * ds).sum())
    W = float(psi.sum()) / (2.0 * np.pi)
    return tau, nu, k, ds, ell, L, A, W


def resample_closed(xy, n):
    """Equispace n vertices along the polygon's arclength, anchored at vertex 0.

    New vertices lie on the polygon (piecewise-linear interpolation)."""
    e = np.roll(xy, -1, axis=0) - xy
    ell = np.hypot(e[:, 0], e[:, 1])
    s = np.concatenate(([0.0], np.cumsum(ell)))
    L = s[-1]
    target = np.arange(n) * (L / n)
    idx = np.searchsorted(s, target, side="right") - 1
    idx = np.clip(idx, 0, len(xy) - 1)
    frac = (target - s[idx]) / ell[idx]
    return xy[idx] + frac[:, None] * e[idx]


def redistribute_closed(xy, n):
    """Equispaced redistribution through a local cubic (Catmull-Rom) interpolant.

    Unlike resample_closed, the interpolant passes through the vertices and
    bulges with the curve, so per-step use does not systematically shorten
    smooth curves. Knot targets reproduce the vertices exactly.
    """
    m = len(xy)
    e = np.roll(xy, -1, axis=0) - xy
    ell = np.hypot(e[:, 0], e[:, 1])
    s = np.concatenate(([0.0], np.cumsum(ell)))
    L = s[-1]
    # chordal finite-difference tangent (w.r.t. the chord parameter)
    tang = (np.roll(xy, -1, axis=0) - np.roll(xy, 1, axis=0)) \
        / (ell + np.roll(ell, 1))[:, None]
    target = np.arange(n) * (L / n)
    idx = np.searchsorted(s, target, side="right") - 1
    idx = np.clip(idx, 0, m - 1)
    u = ((target - s[idx]) / ell[idx])[:, None]
    h = ell[idx][:, None]
    p1 = xy[idx]
    p2 = xy[(idx + 1) % m]
    m1 = tang[idx]
    m2 = tang[(idx + 1) % m]
    u2 = u * u
    u3 = u2 * u
    return ((2.0 * u3 - 3.0 * u2 + 1.0) * p1 + (u3 - 2.0 * u2 + u) * h * m1
            + (-2.0 * u3 + 3.0 * u2) * p2 + (u3 - u2) * h * m2)


def normal_speed_arrays(xy, nu, k, sigma1, sigma2, kind, params):
    """F = sigma1 k + sigma2 + <V(gamma), nu> per vertex."""
    v = field_values(kind, params, xy)
    return sigma1 * k + sigma2 + v[:, 0] * nu[:, 0] + v[:, 1] * nu[:, 1]


def advance(xy, t, nsteps, sigma1, sigma2, kind, params,
            dt_fixed, c_cfl, resample_every, max_time, area_floor, series):
    """Run up to nsteps explicit Euler steps of the flow.

    series is a preallocated (nsteps, 7) array; row j gets
    (t, L, A, W, kmin, kmax, Fmin) for the state at the start of step j.
    Returns (xy, t, steps_done, stop_code). Stops before a step whose
    starting state violates the area floor or reaches max_time.
    """
    steps = 0
    code = STOP_STEPS
    for j in range(nsteps):
        tau, nu, k, ds, ell, L, A, W = curve_metrics(xy)
        if A <= area_floor:
            code = STOP_AREA_FLOOR
            break
        if t >= max_time:
            code = STOP_MAX_TIME
            break
        F = normal_speed_arrays(xy, nu, k, sigma1, sigma2, kind, params)
        dt = dt_fixed if dt_fixed > 0.0 else c_cfl * float(ell.min()) ** 2 / sigma1
        if t + dt > max_time:
            dt = max_time - t
        series[j, 0] = t
        series[j, 1] = L
        series[j, 2] = A
        series[j, 3] = W
        series[j, 4] = k.min()
        series[j, 5] = k.max()
        series[j, 6] = F.min()
        xy = xy + (dt * F)[:, None] * nu
        t += dt
        steps = j + 1
        if resample_every > 0 and steps % resample_every == 0:
            xy = redistribute_closed(xy, len(xy))
    return xy, t, steps, code
