"""Compiled kernels: the torus maps, their derivative cocycle and the psi fields.

Every kernel works on a packed float64 parameter vector (see ``pack`` in
``systems``) so that numba sees one concrete signature for all map kinds.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LINEAR = 0
SHEAR = 1
DA = 2

TWO_PI = 2.0 * math.pi
TORUS_DIAMETER = math.sqrt(0.5)

# packed parameter layout
P_KIND = 0
P_A, P_B, P_C, P_D = 1, 2, 3, 4
P_IA, P_IB, P_IC, P_ID = 5, 6, 7, 8
P_EPS = 9
P_CX, P_CY = 10, 11
P_RAD = 12
P_UX, P_UY = 13, 14
N_PARAMS = 15

_opts = dict(cache=True, nogil=True)


@njit(**_opts)
def frac(t):
    r = t - math.floor(t)
    if r >= 1.0:
        r = 0.0
    return r


@njit(**_opts)
def wrap(t):
    # representative in [-0.5, 0.5)
    return t - math.floor(t + 0.5)


@njit(**_opts)
def bump(rho, radius):
    """Radial C^2 bump (1 - (rho/R)^2)^3 and g'(rho)/rho."""
    s = (rho / radius) ** 2
    if s >= 1.0:
        return 0.0, 0.0
    q = 1.0 - s
    return q * q * q, -6.0 * q * q / (radius * radius)


@njit(**_opts)
def _bump_apply(P, x, y):
    dx = wrap(x - P[P_CX])
    dy = wrap(y - P[P_CY])
    g, _ = bump(math.hypot(dx, dy), P[P_RAD])
    if g == 0.0:
        return x, y
    ux, uy = P[P_UX], P[P_UY]
    k = P[P_EPS] * g * (dx * ux + dy * uy)
    return x - k * ux, y - k * uy


@njit(**_opts)
def _bump_invert(P, x, y):
    ux, uy = P[P_UX], P[P_UY]
    radius = P[P_RAD]
    eps = P[P_EPS]
    dx = wrap(x - P[P_CX])
    dy = wrap(y - P[P_CY])
    target = dx * ux + dy * uy
    w = -dx * uy + dy * ux
    if target * target + w * w >= radius * radius:
        return x, y
    # the bump only rescales the e_u coordinate: solve h(u) = u (1 - eps g) = target
    umax = math.sqrt(radius * radius - w * w)
    lo, hi = -umax, umax
    u = target
    for _ in range(100):
        g, gp = bump(math.hypot(u, w), radius)
        val = u * (1.0 - eps * g) - target
        if val == 0.0:
            break
        if val > 0.0:
            hi = u
        else:
            lo = u
        slope = 1.0 - eps * g - eps * u * u * gp
        u_new = u - val / slope
        if not (lo <= u_new <= hi):
            u_new = 0.5 * (lo + hi)
        if abs(u_new - u) <= 1e-16:
            u = u_new
            break
        u = u_new
    else:
        raise RuntimeError("bump inversion did not converge in 100 iterations")
    shift = u - target
    return x + shift * ux, y + shift * uy


@njit(**_opts)
def fwd(P, x, y):
    kind = P[P_KIND]
    if kind == SHEAR:
        y = y + P[P_EPS] * math.sin(TWO_PI * x)
    elif kind == DA:
        x, y = _bump_apply(P, x, y)
    return frac(P[P_A] * x + P[P_B] * y), frac(P[P_C] * x + P[P_D] * y)


@njit(**_opts)
def inv(P, x, y):
    u = frac(P[P_IA] * x + P[P_IB] * y)
    v = frac(P[P_IC] * x + P[P_ID] * y)
    kind = P[P_KIND]
    if kind == SHEAR:
        v = frac(v - P[P_EPS] * math.sin(TWO_PI * u))
    elif kind == DA:
        u, v = _bump_invert(P, u, v)
        u, v = frac(u), frac(v)
    return u, v


@njit(**_opts)
def jac(P, x, y):
    a, b, c, d = P[P_A], P[P_B], P[P_C], P[P_D]
    kind = P[P_KIND]
    if kind == SHEAR:
        s = TWO_PI * P[P_EPS] * math.cos(TWO_PI * x)
        return a + b * s, b, c + d * s, d
    if kind == DA:
        dx = wrap(x - P[P_CX])
        dy = wrap(y - P[P_CY])
        g, gp = bump(math.hypot(dx, dy), P[P_RAD])
        if g == 0.0:
            return a, b, c, d
        ux, uy = P[P_UX], P[P_UY]
        u = dx * ux + dy * uy
        gx = g * ux + u * gp * dx
        gy = g * uy + u * gp * dy
        eps = P[P_EPS]
        b00 = 1.0 - eps * ux * gx
        b01 = -eps * ux * gy
        b10 = -eps * uy * gx
        b11 = 1.0 - eps * uy * gy
        return (a * b00 + b * b10, a * b01 + b * b11,
                c * b00 + d * b10, c * b01 + d * b11)
    return a, b, c, d


@njit(**_opts)
def inv2(a, b, c, d):
    det = a * d - b * c
    return d / det, -b / det, -c / det, a / det


@njit(**_opts)
def major_axis(a, b, c, d):
    """Dominant left singular direction of [[a, b], [c, d]], first component >= 0."""
    s00 = a * a + b * b
    s11 = c * c + d * d
    s01 = a * c + b * d
    th = 0.5 * math.atan2(2.0 * s01, s00 - s11)
    return math.cos(th), math.sin(th)


@njit(**_opts)
def _renorm(a, b, c, d):
    m = max(abs(a), abs(b), abs(c), abs(d))
    return a / m, b / m, c / m, d / m


@njit(**_opts)
def sv_ratio(a, b, c, d):
    """sigma_2 / sigma_1; bounds the distance of the major axis from the limit direction."""
    det = abs(a * d - b * c)
    s = a * a + b * b + c * c + d * d
    top = 0.5 * (s + math.hypot(a * a + b * b - c * c - d * d, 2.0 * (a * c + b * d)))
    return det / top


@njit(**_opts)
def eplus(P, x, y, n_iter, stop_tol):
    """Unstable direction at (x, y) from Df^n along the backward orbit.

    Returns (ex, ey, last_angle_change, iterations).
    """
    bx, by = inv(P, x, y)
    pa, pb, pc, pd = jac(P, bx, by)
    ex, ey = major_axis(pa, pb, pc, pd)
    change = 1.0
    it = 1
    while it < n_iter:
        bx, by = inv(P, bx, by)
        a, b, c, d = jac(P, bx, by)
        pa, pb, pc, pd = _renorm(pa * a + pb * c, pa * b + pb * d,
                                 pc * a + pd * c, pc * b + pd * d)
        nx, ny = major_axis(pa, pb, pc, pd)
        change = abs(nx * ey - ny * ex)
        ex, ey = nx, ny
        it += 1
        # a stretch of constant Jacobians leaves the axis unchanged long before
        # the product has forgotten its start, so also require a small ratio
        if change < stop_tol and sv_ratio(pa, pb, pc, pd) < stop_tol:
            break
    return ex, ey, change, it


@njit(**_opts)
def eminus(P, x, y, n_iter, stop_tol):
    """Stable direction at (x, y) from Df^{-n} along the forward orbit."""
    a, b, c, d = jac(P, x, y)
    qa, qb, qc, qd = inv2(a, b, c, d)
    ex, ey = major_axis(qa, qb, qc, qd)
    fx, fy = fwd(P, x, y)
    change = 1.0
    it = 1
    while it < n_iter:
        a, b, c, d = jac(P, fx, fy)
        a, b, c, d = inv2(a, b, c, d)
        qa, qb, qc, qd = _renorm(qa * a + qb * c, qa * b + qb * d,
                                 qc * a + qd * c, qc * b + qd * d)
        nx, ny = major_axis(qa, qb, qc, qd)
        change = abs(nx * ey - ny * ex)
        ex, ey = nx, ny
        fx, fy = fwd(P, fx, fy)
        it += 1
        if change < stop_tol and sv_ratio(qa, qb, qc, qd) < stop_tol:
            break
    return ex, ey, change, it


@njit(**_opts)
def log_psi(P, x, y, sign, n, n_iter, stop_tol, conv_tol):
    """log psi^n_sign(x, y) and a convergence flag.

    Plus pushes e_plus(x) forward through Df^n; minus pulls e_minus(f^n x)
    back through Df^{-n}, which is the numerically stable direction.
    """
    if sign > 0:
        ex, ey, change, _ = eplus(P, x, y, n_iter, stop_tol)
        total = 0.0
        for _ in range(n):
            a, b, c, d = jac(P, x, y)
            vx = a * ex + b * ey
            vy = c * ex + d * ey
            nv = math.hypot(vx, vy)
            total += math.log(nv)
            ex, ey = vx / nv, vy / nv
            x, y = fwd(P, x, y)
        return total, change < conv_tol
    xs = np.empty(n)
    ys = np.empty(n)
    for k in range(n):
        xs[k] = x
        ys[k] = y
        x, y = fwd(P, x, y)
    ex, ey, change, _ = eminus(P, x, y, n_iter, stop_tol)
    total = 0.0
    for k in range(n - 1, -1, -1):
        a, b, c, d = jac(P, xs[k], ys[k])
        a, b, c, d = inv2(a, b, c, d)
        vx = a * ex + b * ey
        vy = c * ex + d * ey
        nv = math.hypot(vx, vy)
        total -= math.log(nv)
        ex, ey = vx / nv, vy / nv
    return total, change < conv_tol


@njit(**_opts)
def log_psi_many(P, xs, ys, sign, n, n_iter, stop_tol, conv_tol):
    out = np.empty(xs.shape[0])
    ok = np.empty(xs.shape[0], dtype=np.bool_)
    for i in range(xs.shape[0]):
        out[i], ok[i] = log_psi(P, xs[i], ys[i], sign, n, n_iter, stop_tol, conv_tol)
    return out, ok


@njit(**_opts)
def split_many(P, xs, ys, n_iter, stop_tol):
    n = xs.shape[0]
    out = np.empty((n, 8))
    for i in range(n):
        ex, ey, ch, it = eplus(P, xs[i], ys[i], n_iter, stop_tol)
        fx, fy, ch2, it2 = eminus(P, xs[i], ys[i], n_iter, stop_tol)
        out[i, 0] = ex
        out[i, 1] = ey
        out[i, 2] = ch
        out[i, 3] = it
        out[i, 4] = fx
        out[i, 5] = fy
        out[i, 6] = ch2
        out[i, 7] = it2
    return out


@njit(**_opts)
def ball_extreme(P, x, y, radius, offsets, sign, order, n_iter, stop_tol, conv_tol):
    """Min (plus) / max (minus) of log psi_sign over the disk grid around (x, y).

    ``offsets`` are integer lattice offsets scaled so that the outermost ring
    sits at distance 1; they are multiplied by ``radius``.
    """
    best = math.inf if sign > 0 else -math.inf
    ok = True
    for i in range(offsets.shape[0]):
        px = frac(x + radius * offsets[i, 0])
        py = frac(y + radius * offsets[i, 1])
        v, conv = log_psi(P, px, py, sign, order, n_iter, stop_tol, conv_tol)
        ok = ok and conv
        if sign > 0:
            if v < best:
                best = v
        elif v > best:
            best = v
    return best, ok


@njit(**_opts)
def radius_recursion(P, xs, ys, r0, offsets, global_log_min, chart, clamp,
                     n_iter, stop_tol, conv_tol):
    """r_{k+1} = psi_+(x_k, r_k) r_k along the given points.

    Balls of radius >= the torus diameter are the whole torus; their minimum is
    the precomputed ``global_log_min``. With ``clamp`` radii are capped at
    ``chart``. ``exceeded`` reports whether any radius passed ``chart``.
    """
    n = xs.shape[0]
    r = np.empty(n + 1)
    m = np.empty(n)
    r[0] = r0
    ok = True
    exceeded = r0 > chart
    for k in range(n):
        rk = r[k]
        if rk >= TORUS_DIAMETER:
            lm = global_log_min
        else:
            lm, conv = ball_extreme(P, xs[k], ys[k], rk, offsets, 1, 1, n_iter, stop_tol, conv_tol)
            ok = ok and conv
        m[k] = math.exp(lm)
        nxt = m[k] * rk
        if nxt > chart:
            exceeded = True
            if clamp:
                nxt = chart
        r[k + 1] = nxt
    return r, m, ok, exceeded


@njit(**_opts)
def orbit(P, x, y, n, backward):
    xs = np.empty(n + 1)
    ys = np.empty(n + 1)
    xs[0] = x
    ys[0] = y
    for k in range(n):
        if backward:
            x, y = inv(P, x, y)
        else:
            x, y = fwd(P, x, y)
        xs[k + 1] = x
        ys[k + 1] = y
    return xs, ys


@njit(**_opts)
def birkhoff_terms(P, x, y, sign, n, n_iter, stop_tol, conv_tol):
    """log psi_sign(f^k x) for k < n, propagating the bundle along the orbit."""
    out = np.empty(n)
    if sign > 0:
        ex, ey, change, _ = eplus(P, x, y, n_iter, stop_tol)
        for k in range(n):
            a, b, c, d = jac(P, x, y)
            vx = a * ex + b * ey
            vy = c * ex + d * ey
            nv = math.hypot(vx, vy)
            out[k] = math.log(nv)
            ex, ey = vx / nv, vy / nv
            x, y = fwd(P, x, y)
        return out, change < conv_tol
    xs, ys = orbit(P, x, y, n, False)
    ex, ey, change, _ = eminus(P, xs[n], ys[n], n_iter, stop_tol)
    for k in range(n - 1, -1, -1):
        a, b, c, d = jac(P, xs[k], ys[k])
        a, b, c, d = inv2(a, b, c, d)
        vx = a * ex + b * ey
        vy = c * ex + d * ey
        nv = math.hypot(vx, vy)
        out[k] = -math.log(nv)
        ex, ey = vx / nv, vy / nv
    return out, change < conv_tol


@njit(**_opts)
def in_region(x, y, cx, cy, radius, mask):
    if radius < math.inf:
        if math.hypot(wrap(x - cx), wrap(y - cy)) > radius:
            return False
    g = mask.shape[0]
    if g > 0:
        i = min(int(x * g), g - 1)
        j = min(int(y * g), g - 1)
        return mask[i, j]
    return True


@njit(**_opts)
def first_return(P, x, y, backward, cx, cy, radius, mask, cap):
    """min{n > 1 : f^{+-n}(x) in A}; returns cap + 1 when not found."""
    for n in range(1, cap + 1):
        if backward:
            x, y = inv(P, x, y)
        else:
            x, y = fwd(P, x, y)
        if n > 1 and in_region(x, y, cx, cy, radius, mask):
            return n
    return cap + 1


@njit(**_opts)
def kac_excursion(P, x, y, cx, cy, radius, mask, cap, psi_kind, field,
                  n_iter, stop_tol, conv_tol):
    """Return time phi (n > 1 convention) and sum_{k < phi} psi(f^k x).

    psi_kind: 0 constant one, 1 log psi_+, 2 nearest-cell lookup in ``field``.
    """
    total = 0.0
    ok = True
    ex, ey = 1.0, 0.0
    if psi_kind == 1:
        ex, ey, change, _ = eplus(P, x, y, n_iter, stop_tol)
        ok = change < conv_tol
    g = field.shape[0]
    for n in range(1, cap + 1):
        if psi_kind == 0:
            total += 1.0
        elif psi_kind == 1:
            a, b, c, d = jac(P, x, y)
            vx = a * ex + b * ey
            vy = c * ex + d * ey
            nv = math.hypot(vx, vy)
            total += math.log(nv)
            ex, ey = vx / nv, vy / nv
        else:
            total += field[min(int(x * g), g - 1), min(int(y * g), g - 1)]
        x, y = fwd(P, x, y)
        if n > 1 and in_region(x, y, cx, cy, radius, mask):
            return n, total, ok
    return cap + 1, total, ok


@njit(**_opts)
def region_hits(xs, ys, cx, cy, radius, mask):
    out = np.empty(xs.shape[0], dtype=np.bool_)
    for i in range(xs.shape[0]):
        out[i] = in_region(xs[i], ys[i], cx, cy, radius, mask)
    return out


@njit(**_opts)
def jac_many(P, xs, ys):
    out = np.empty((4, xs.shape[0]))
    for i in range(xs.shape[0]):
        out[0, i], out[1, i], out[2, i], out[3, i] = jac(P, xs[i], ys[i])
    return out


@njit(**_opts)
def fwd_many(P, xs, ys, backward):
    ox = np.empty(xs.shape[0])
    oy = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        if backward:
            ox[i], oy[i] = inv(P, xs[i], ys[i])
        else:
            ox[i], oy[i] = fwd(P, xs[i], ys[i])
    return ox, oy
