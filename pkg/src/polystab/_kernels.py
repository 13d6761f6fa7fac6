"""Compiled point-wise kernels: surface distance and Lipschitz extension."""

import numba
import numpy as np


@numba.njit(cache=True)
def _closest_on_triangle(px, py, pz, a, b, c):
    abx, aby, abz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    acx, acy, acz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    apx, apy, apz = px - a[0], py - a[1], pz - a[2]
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return a[0], a[1], a[2]
    bpx, bpy, bpz = px - b[0], py - b[1], pz - b[2]
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return b[0], b[1], b[2]
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return a[0] + v * abx, a[1] + v * aby, a[2] + v * abz
    cpx, cpy, cpz = px - c[0], py - c[1], pz - c[2]
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return c[0], c[1], c[2]
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return a[0] + w * acx, a[1] + w * acy, a[2] + w * acz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b[0] + w * (c[0] - b[0]), b[1] + w * (c[1] - b[1]), b[2] + w * (c[2] - b[2])
    den = 1.0 / (va + vb + vc)
    v = vb * den
    w = vc * den
    return a[0] + abx * v + acx * w, a[1] + aby * v + acy * w, a[2] + abz * v + acz * w


@numba.njit(cache=True)
def surface_closest(points, tri):
    """Distance to a triangle soup (T, 3, 3) and the closest point."""
    n = points.shape[0]
    dist = np.empty(n)
    foot = np.empty((n, 3))
    for i in range(n):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        best = np.inf
        fx = fy = fz = 0.0
        for t in range(tri.shape[0]):
            qx, qy, qz = _closest_on_triangle(px, py, pz, tri[t, 0], tri[t, 1], tri[t, 2])
            d2 = (qx - px) ** 2 + (qy - py) ** 2 + (qz - pz) ** 2
            if d2 < best:
                best = d2
                fx, fy, fz = qx, qy, qz
        dist[i] = best ** 0.5
        foot[i, 0] = fx
        foot[i, 1] = fy
        foot[i, 2] = fz
    return dist, foot


@numba.njit(cache=True)
def _edge_min(x, p, q, fp, fq, L):
    """min over s in [0,1] of f(p + s(q-p)) + L |x - p - s(q-p)| (affine f)."""
    ex, ey, ez = q[0] - p[0], q[1] - p[1], q[2] - p[2]
    C = ex * ex + ey * ey + ez * ez
    wx, wy, wz = x[0] - p[0], x[1] - p[1], x[2] - p[2]
    B = wx * ex + wy * ey + wz * ez
    A = wx * wx + wy * wy + wz * wz
    s0 = B / C
    delta2 = max(A - B * B / C, 0.0)
    kappa = -(fq - fp) / L
    lim = C - kappa * kappa
    if lim <= 0.0:
        s = 1.0 if kappa > 0 else 0.0
    else:
        u = kappa * delta2 ** 0.5 / (C * lim) ** 0.5
        s = min(1.0, max(0.0, s0 + u))
    ax, ay, az = p[0] + s * ex, p[1] + s * ey, p[2] + s * ez
    r = ((x[0] - ax) ** 2 + (x[1] - ay) ** 2 + (x[2] - az) ** 2) ** 0.5
    return fp + s * (fq - fp) + L * r, ax, ay, az


@numba.njit(cache=True)
def triangle_frames(tri):
    """Unit normals and barycentric gradients (T, 3, 3) of each triangle."""
    T = tri.shape[0]
    nrm = np.empty((T, 3))
    grads = np.empty((T, 3, 3))
    for t in range(T):
        a, b, c = tri[t, 0], tri[t, 1], tri[t, 2]
        e1 = b - a
        e2 = c - a
        n = np.cross(e1, e2)
        area2 = (n[0] ** 2 + n[1] ** 2 + n[2] ** 2) ** 0.5
        n = n / area2
        nrm[t] = n
        # grad lambda_i = n x (opposite edge) / (2 area), edges counter-clockwise
        grads[t, 0] = np.cross(n, c - b) / area2
        grads[t, 1] = np.cross(n, a - c) / area2
        grads[t, 2] = np.cross(n, b - a) / area2
    return nrm, grads


@numba.njit(cache=True)
def inf_convolution(points, tri, vals, L, nrm, grads, active):
    """Upper McShane extension ``inf_a f(a) + L |x - a|`` of affine data.

    ``vals`` (T, 3, m) holds m scalar channels at the corners of each
    triangle and ``L`` (m,) their Lipschitz constants (must exceed every
    in-plane gradient).  Returns values (n, m) and gradients (n, m, 3); the
    gradient is ``L (x - a*) / |x - a*|`` off the anchor set and the
    in-plane gradient of the owning triangle on it.
    """
    n = points.shape[0]
    T = tri.shape[0]
    m = vals.shape[2]
    out = np.zeros((n, m))
    gout = np.zeros((n, m, 3))
    lam = np.empty(3)
    for i in range(n):
        if not active[i]:
            continue
        x = points[i]
        for ch in range(m):
            Lc = L[ch]
            best = np.inf
            bx = by = bz = 0.0
            bt = -1
            for t in range(T):
                a = tri[t, 0]
                d = (x[0] - a[0]) * nrm[t, 0] + (x[1] - a[1]) * nrm[t, 1] + (x[2] - a[2]) * nrm[t, 2]
                xp0 = x[0] - d * nrm[t, 0]
                xp1 = x[1] - d * nrm[t, 1]
                xp2 = x[2] - d * nrm[t, 2]
                g0 = g1 = g2 = 0.0
                for k in range(3):
                    g0 += vals[t, k, ch] * grads[t, k, 0]
                    g1 += vals[t, k, ch] * grads[t, k, 1]
                    g2 += vals[t, k, ch] * grads[t, k, 2]
                gn = (g0 * g0 + g1 * g1 + g2 * g2) ** 0.5
                root = (max(Lc * Lc - gn * gn, 0.0)) ** 0.5
                ad = abs(d)
                if gn > 0.0 and root > 0.0:
                    rho = ad * gn / root
                    ax = xp0 - rho * g0 / gn
                    ay = xp1 - rho * g1 / gn
                    az = xp2 - rho * g2 / gn
                else:
                    ax, ay, az = xp0, xp1, xp2
                inside = True
                fx = 0.0
                # lambda_k(y) = 1/3 + grad_k . (y - centroid)
                cx = (tri[t, 0, 0] + tri[t, 1, 0] + tri[t, 2, 0]) / 3.0
                cy = (tri[t, 0, 1] + tri[t, 1, 1] + tri[t, 2, 1]) / 3.0
                cz = (tri[t, 0, 2] + tri[t, 1, 2] + tri[t, 2, 2]) / 3.0
                for k in range(3):
                    lam[k] = 1.0 / 3.0 + grads[t, k, 0] * (ax - cx) + grads[t, k, 1] * (ay - cy) + grads[t, k, 2] * (az - cz)
                    if lam[k] < -1e-14:
                        inside = False
                    fx += lam[k] * vals[t, k, ch]
                if inside:
                    r = ((x[0] - ax) ** 2 + (x[1] - ay) ** 2 + (x[2] - az) ** 2) ** 0.5
                    val = fx + Lc * r
                    if val < best:
                        best = val
                        bx, by, bz = ax, ay, az
                        bt = t
                else:
                    for e in range(3):
                        p = tri[t, e]
                        q = tri[t, (e + 1) % 3]
                        val, ax2, ay2, az2 = _edge_min(x, p, q, vals[t, e, ch], vals[t, (e + 1) % 3, ch], Lc)
                        if val < best:
                            best = val
                            bx, by, bz = ax2, ay2, az2
                            bt = t
            out[i, ch] = best
            r = ((x[0] - bx) ** 2 + (x[1] - by) ** 2 + (x[2] - bz) ** 2) ** 0.5
            if r > 1e-13:
                gout[i, ch, 0] = Lc * (x[0] - bx) / r
                gout[i, ch, 1] = Lc * (x[1] - by) / r
                gout[i, ch, 2] = Lc * (x[2] - bz) / r
            else:
                for k in range(3):
                    gout[i, ch, 0] += vals[bt, k, ch] * grads[bt, k, 0]
                    gout[i, ch, 1] += vals[bt, k, ch] * grads[bt, k, 1]
                    gout[i, ch, 2] += vals[bt, k, ch] * grads[bt, k, 2]
    return out, gout
