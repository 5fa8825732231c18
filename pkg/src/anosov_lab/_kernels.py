"""Compiled kernels: profile curves, surface-of-revolution metrics and a
Dormand-Prince 5(4) integrator for the coupled geodesic/Jacobi system.

A profile is a planar curve parametrized by arclength ``a >= 0`` whose tangent
angle ``alpha(a)`` is piecewise polynomial.  Packed parameters:

``prm``  : [kind, mirror, eps, ambient, x0, y0, node_step, n_nodes]
``bp``   : start of each polynomial piece
``coef`` : (pieces, 8) coefficients of alpha in ``a - bp[k]``, lowest first
``nx, ny``: positions at the nodes ``a = k * node_step``

kind 0: (x, y) = (phi, lambda), spherical angle from the axis and log of the
        Euclidean radius; ambient 0 is the round S^3 metric
        (dlambda^2 + dphi^2 + sin^2 phi dtheta^2) / cosh^2 lambda and ambient 1
        the Euclidean metric exp(2 lambda) (...).  ``eps`` applies the
        flattening |q| -> eps |q| + 1 - eps.
kind 1: (x, y) = (r, z) cylindrical coordinates in Euclidean space.
``mirror`` extends the curve to a < 0 by (x, y)(-a) = (x, -y)(a).
"""
import math

import numpy as np
from numba import njit

# 8-point Gauss-Legendre on [0, 1]
_gx, _gw = np.polynomial.legendre.leggauss(8)
GL_X = (_gx + 1.0) / 2.0
GL_W = _gw / 2.0

# Dormand-Prince 5(4) tableau with the dense output of scipy's RK45
DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
DP_A = np.array([
    [0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
])
DP_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
DP_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
DP_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

NDIM = 6


@njit(cache=True)
def alpha_kappa(a, bp, coef):
    n = bp.shape[0]
    k = n - 1
    for i in range(1, n):
        if a < bp[i]:
            k = i - 1
            break
    v = a - bp[k]
    al = 0.0
    ka = 0.0
    for d in range(coef.shape[1] - 1, -1, -1):
        al = al * v + coef[k, d]
    for d in range(coef.shape[1] - 1, 0, -1):
        ka = ka * v + d * coef[k, d]
    return al, ka


@njit(cache=True)
def _gl_segment(a0, a1, bp, coef):
    h = a1 - a0
    sx = 0.0
    sy = 0.0
    for i in range(8):
        al, _ = alpha_kappa(a0 + h * GL_X[i], bp, coef)
        sx += GL_W[i] * math.cos(al)
        sy += GL_W[i] * math.sin(al)
    return sx * h, sy * h


@njit(cache=True)
def build_nodes(x0, y0, step, n, bp, coef):
    nx = np.empty(n)
    ny = np.empty(n)
    nx[0] = x0
    ny[0] = y0
    for k in range(1, n):
        dx, dy = _gl_segment((k - 1) * step, k * step, bp, coef)
        nx[k] = nx[k - 1] + dx
        ny[k] = ny[k - 1] + dy
    return nx, ny


@njit(cache=True)
def position(a, prm, bp, coef, nx, ny):
    step = prm[6]
    n = int(prm[7])
    k = int(math.floor(a / step))
    if k < 0:
        k = 0
    if k > n - 1:
        k = n - 1
    a0 = k * step
    dx, dy = _gl_segment(a0, a, bp, coef)
    return nx[k] + dx, ny[k] + dy


@njit(cache=True)
def profile_jet(u, prm, bp, coef, nx, ny):
    """(x, y, x', y', x'', y'') of the profile at parameter ``u``."""
    s = 1.0
    a = u
    if prm[1] > 0.5 and u < 0.0:
        s = -1.0
        a = -u
    al, ka = alpha_kappa(a, bp, coef)
    x, y = position(a, prm, bp, coef, nx, ny)
    ca = math.cos(al)
    sa = math.sin(al)
    xp = ca
    yp = sa
    xpp = -ka * sa
    ypp = ka * ca
    if s < 0.0:
        return x, -y, -xp, yp, xpp, -ypp
    return x, y, xp, yp, xpp, ypp


@njit(cache=True)
def surface_eval(u, prm, bp, coef, nx, ny):
    """Metric ``E du^2 + G dtheta^2`` with derivatives, Gauss curvature and the
    two principal curvatures ``(k_rot, k_prof)``.

    Returns (E, E', G, G', K, k_rot, k_prof).
    """
    x, y, xp, yp, xpp, ypp = profile_jet(u, prm, bp, coef, nx, ny)
    if prm[0] > 0.5:
        # cylindrical Euclidean profile
        E = xp * xp + yp * yp
        Ep = 2.0 * (xp * xpp + yp * ypp)
        G = x * x
        Gp = 2.0 * x * xp
        sp = math.sqrt(E)
        kprof = (xp * ypp - yp * xpp) / (sp * sp * sp)
        krot = -yp / (sp * x)
        # K = -(d cos(alpha)/ds) / r
        K = (yp / sp) * kprof / x
        return E, Ep, G, Gp, K, krot, -kprof

    eps = prm[2]
    phi = x
    if eps == 1.0:
        lam = y
        lp = yp
        lpp = ypp
    else:
        ey = math.exp(y)
        den = eps * ey + 1.0 - eps
        lam = math.log(den)
        f1 = eps * ey / den
        f2 = f1 * (1.0 - f1)
        lp = f1 * yp
        lpp = f2 * yp * yp + f1 * ypp
    if prm[3] < 0.5:
        ch = math.cosh(lam)
        om2 = 1.0 / (ch * ch)
        th = math.tanh(lam)
        dom2 = -2.0 * th * om2
        dw = -th
        k0 = 1.0
    else:
        om2 = math.exp(2.0 * lam)
        dom2 = 2.0 * om2
        dw = 1.0
        k0 = 0.0
    P = xp * xp + lp * lp
    Pp = 2.0 * (xp * xpp + lp * lpp)
    E = om2 * P
    Ep = dom2 * lp * P + om2 * Pp
    sphi = math.sin(phi)
    cphi = math.cos(phi)
    G = om2 * sphi * sphi
    Gp = dom2 * lp * sphi * sphi + om2 * 2.0 * sphi * cphi * xp
    sP = math.sqrt(P)
    n_phi = lp / sP
    n_lam = -xp / sP
    ks = (xp * lpp - lp * xpp) / (P * sP)
    k_prof = -ks
    k_rot = -n_phi * cphi / sphi
    om = math.sqrt(om2)
    corr = dw * n_lam
    k1 = (k_rot - corr) / om
    k2 = (k_prof - corr) / om
    return E, Ep, G, Gp, k1 * k2 + k0, k1, k2


@njit(cache=True)
def rhs(t, y, prm, bp, coef, nx, ny, out):
    E, Ep, G, Gp, K, _, _ = surface_eval(y[0], prm, bp, coef, nx, ny)
    du = y[2]
    dth = y[3]
    out[0] = du
    out[1] = dth
    out[2] = (-Ep * du * du + Gp * dth * dth) / (2.0 * E)
    out[3] = -Gp * du * dth / G
    out[4] = y[5]
    out[5] = -K * y[4]


@njit(cache=True)
def _dense(y, h, Kst, theta, out):
    for i in range(NDIM):
        acc = 0.0
        for s in range(7):
            q = theta * (DP_P[s, 0] + theta * (DP_P[s, 1] + theta * (DP_P[s, 2] + theta * DP_P[s, 3])))
            acc += Kst[s, i] * q
        out[i] = y[i] + h * acc


@njit(cache=True)
def integrate(y0, t0, t_stop, u_lo, u_hi, tol, h0, prm, bp, coef, nx, ny,
              zeros, buf, max_steps):
    """Integrate from ``t0`` until ``t_stop`` or until ``u`` leaves
    ``[u_lo, u_hi]``.

    Returns (status, t, y, nsteps, n_zeros, n_buf, L_drift, speed_err, h_last)
    with status 0 = reached t_stop, 1 = exit through u_hi, 2 = exit through
    u_lo, 3 = step underflow, 4 = too many steps.  Zeros of ``j`` are written
    to ``zeros``; accepted steps (t, y...) to ``buf`` while it has room.
    """
    y = y0.copy()
    t = t0
    Kst = np.zeros((7, NDIM))
    tmp = np.zeros(NDIM)
    ynew = np.zeros(NDIM)
    yint = np.zeros(NDIM)
    f = np.zeros(NDIM)
    rhs(t, y, prm, bp, coef, nx, ny, f)
    E, _, G, _, _, _, _ = surface_eval(y[0], prm, bp, coef, nx, ny)
    L0 = G * y[3]
    drift = 0.0
    speed_err = abs(E * y[2] * y[2] + G * y[3] * y[3] - 1.0)
    h = h0
    nz = 0
    nb = 0
    if buf.shape[0] > 0:
        buf[0, 0] = t
        for i in range(NDIM):
            buf[0, 1 + i] = y[i]
        nb = 1
    atol = tol * 1e-4
    steps = 0
    while True:
        if t >= t_stop:
            return 0, t, y, steps, nz, nb, drift, speed_err, h
        if steps >= max_steps:
            return 4, t, y, steps, nz, nb, drift, speed_err, h
        if h > t_stop - t:
            h = t_stop - t
        if h < 1e-14:
            if t_stop - t < 1e-14:
                return 0, t_stop, y, steps, nz, nb, drift, speed_err, h
            return 3, t, y, steps, nz, nb, drift, speed_err, h
        for i in range(NDIM):
            Kst[0, i] = f[i]
        for s in range(1, 6):
            for i in range(NDIM):
                acc = 0.0
                for r in range(s):
                    acc += DP_A[s, r] * Kst[r, i]
                tmp[i] = y[i] + h * acc
            rhs(t + DP_C[s] * h, tmp, prm, bp, coef, nx, ny, f)
            for i in range(NDIM):
                Kst[s, i] = f[i]
        for i in range(NDIM):
            acc = 0.0
            for r in range(6):
                acc += DP_B[r] * Kst[r, i]
            ynew[i] = y[i] + h * acc
        rhs(t + h, ynew, prm, bp, coef, nx, ny, f)
        for i in range(NDIM):
            Kst[6, i] = f[i]
        err = 0.0
        for i in range(NDIM):
            acc = 0.0
            for r in range(7):
                acc += DP_E[r] * Kst[r, i]
            sc = atol + tol * max(abs(y[i]), abs(ynew[i]))
            e = h * acc / sc
            err += e * e
        err = math.sqrt(err / NDIM)
        if not (err <= 1.0):
            fac = 0.9 * err ** -0.2 if err == err else 0.1
            if fac < 0.1:
                fac = 0.1
            h *= fac
            rhs(t, y, prm, bp, coef, nx, ny, f)
            continue
        steps += 1
        # exits through the ends of the coordinate range
        status = 0
        if ynew[0] > u_hi:
            status = 1
        elif ynew[0] < u_lo:
            status = 2
        th_end = 1.0
        if status != 0:
            bound = u_hi if status == 1 else u_lo
            sgn = 1.0 if status == 1 else -1.0
            # a step may start on the bound (entry) and dip inside before
            # leaving: bracket the first strictly outside sample, then bisect
            lo = 0.0
            hi = 1.0
            for k in range(1, 33):
                _dense(y, h, Kst, k / 32.0, yint)
                if sgn * (yint[0] - bound) > 0.0:
                    hi = k / 32.0
                    break
                lo = k / 32.0
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                _dense(y, h, Kst, mid, yint)
                if sgn * (yint[0] - bound) > 0.0:
                    hi = mid
                else:
                    lo = mid
            th_end = hi
            _dense(y, h, Kst, th_end, ynew)
            ynew[0] = bound
        # zeros of the Jacobi field inside the (possibly truncated) step
        if (y[4] > 0.0) != (ynew[4] > 0.0) and ynew[4] != 0.0:
            lo = 0.0
            hi = th_end
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                _dense(y, h, Kst, mid, yint)
                if (yint[4] > 0.0) == (y[4] > 0.0):
                    lo = mid
                else:
                    hi = mid
            if nz < zeros.shape[0]:
                zeros[nz] = t + 0.5 * (lo + hi) * h
            nz += 1
        t = t + th_end * h
        for i in range(NDIM):
            y[i] = ynew[i]
        E, _, G, _, _, _, _ = surface_eval(y[0], prm, bp, coef, nx, ny)
        d = abs(G * y[3] - L0)
        if d > drift:
            drift = d
        se = abs(E * y[2] * y[2] + G * y[3] * y[3] - 1.0)
        if se > speed_err:
            speed_err = se
        if nb < buf.shape[0]:
            buf[nb, 0] = t
            for i in range(NDIM):
                buf[nb, 1 + i] = y[i]
            nb += 1
        if status != 0:
            return status, t, y, steps, nz, nb, drift, speed_err, h
        fac = 0.9 * err ** -0.2 if err > 0.0 else 5.0
        if fac > 5.0:
            fac = 5.0
        if fac < 0.2:
            fac = 0.2
        h *= fac
        rhs(t, y, prm, bp, coef, nx, ny, f)
