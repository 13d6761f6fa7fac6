"""Vectorised point/segment/triangle primitives shared by several modules."""

import numpy as np

_CHUNK = 1 << 21  # max number of (point, primitive) pairs per block


def _blocks(n_points, n_prims):
    step = max(1, _CHUNK // max(n_prims, 1))
    for start in range(0, n_points, step):
        yield slice(start, min(start + step, n_points))


def closest_on_triangles(p, a, b, c):
    """Closest points on triangles ``(a, b, c)`` to points ``p``.

    ``p`` has shape (n, 3), the corners (m, 3).  Returns an array (n, m, 3).
    Region logic follows the Voronoi-region classification of Ericson's
    Real-Time Collision Detection.
    """
    p = p[:, None, :]
    ab = (b - a)[None]
    ac = (c - a)[None]
    ap = p - a[None]
    d1 = np.einsum("ijk,ijk->ij", np.broadcast_to(ab, ap.shape), ap)
    d2 = np.einsum("ijk,ijk->ij", np.broadcast_to(ac, ap.shape), ap)
    bp = p - b[None]
    d3 = np.einsum("ijk,ijk->ij", np.broadcast_to(ab, bp.shape), bp)
    d4 = np.einsum("ijk,ijk->ij", np.broadcast_to(ac, bp.shape), bp)
    cp = p - c[None]
    d5 = np.einsum("ijk,ijk->ij", np.broadcast_to(ab, cp.shape), cp)
    d6 = np.einsum("ijk,ijk->ij", np.broadcast_to(ac, cp.shape), cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
        # barycentric (u, v, w) for each region, applied in reverse priority
        u = 1.0 - v - w
        s_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        m = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        u = np.where(m, 0.0, u)
        v = np.where(m, 1.0 - s_bc, v)
        w = np.where(m, s_bc, w)
        s_ac = d2 / (d2 - d6)
        m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        u = np.where(m, 1.0 - s_ac, u)
        v = np.where(m, 0.0, v)
        w = np.where(m, s_ac, w)
        m = (d6 >= 0) & (d5 <= d6)
        u = np.where(m, 0.0, u)
        v = np.where(m, 0.0, v)
        w = np.where(m, 1.0, w)
        s_ab = d1 / (d1 - d3)
        m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        u = np.where(m, 1.0 - s_ab, u)
        v = np.where(m, s_ab, v)
        w = np.where(m, 0.0, w)
        m = (d3 >= 0) & (d4 <= d3)
        u = np.where(m, 0.0, u)
        v = np.where(m, 1.0, v)
        w = np.where(m, 0.0, w)
        m = (d1 <= 0) & (d2 <= 0)
        u = np.where(m, 1.0, u)
        v = np.where(m, 0.0, v)
        w = np.where(m, 0.0, w)
    return u[..., None] * a[None] + v[..., None] * b[None] + w[..., None] * c[None]


def distance_to_triangles(points, a, b, c, return_index=False):
    """Minimum Euclidean distance from each point to a set of triangles."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    out = np.empty(n)
    idx = np.empty(n, dtype=np.int64)
    for sl in _blocks(n, len(a)):
        q = closest_on_triangles(points[sl], a, b, c)
        d2 = np.sum((q - points[sl, None, :]) ** 2, axis=-1)
        j = np.argmin(d2, axis=1)
        idx[sl] = j
        out[sl] = np.sqrt(d2[np.arange(len(j)), j])
    if return_index:
        return out, idx
    return out


def closest_point_on_surface(points, a, b, c):
    """Closest surface point and the index of the triangle attaining it."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    out = np.empty((n, 3))
    idx = np.empty(n, dtype=np.int64)
    for sl in _blocks(n, len(a)):
        q = closest_on_triangles(points[sl], a, b, c)
        d2 = np.sum((q - points[sl, None, :]) ** 2, axis=-1)
        j = np.argmin(d2, axis=1)
        idx[sl] = j
        out[sl] = q[np.arange(len(j)), j]
    return out, idx


def distance_to_segments(points, a, b):
    """Minimum distance from points (n, 3) to segments ``[a_j, b_j]``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    out = np.empty(n)
    ab = b - a
    ll = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    for sl in _blocks(n, len(a)):
        ap = points[sl, None, :] - a[None]
        s = np.clip(np.einsum("ijk,jk->ij", ap, ab) / ll, 0.0, 1.0)
        d = ap - s[..., None] * ab[None]
        out[sl] = np.sqrt(np.min(np.sum(d * d, axis=-1), axis=1))
    return out


def winding_number(points, a, b, c):
    """Generalised winding number of a closed oriented triangle surface.

    Sum of signed solid angles (Van Oosterom and Strackee) over 4 pi.  It is
    +1 inside and 0 outside a positively oriented closed surface and is
    insensitive to ray degeneracies.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    out = np.empty(n)
    for sl in _blocks(n, len(a)):
        pa = a[None] - points[sl, None, :]
        pb = b[None] - points[sl, None, :]
        pc = c[None] - points[sl, None, :]
        la = np.linalg.norm(pa, axis=-1)
        lb = np.linalg.norm(pb, axis=-1)
        lc = np.linalg.norm(pc, axis=-1)
        num = np.einsum("ijk,ijk->ij", pa, np.cross(pb, pc))
        den = (
            la * lb * lc
            + np.einsum("ijk,ijk->ij", pa, pb) * lc
            + np.einsum("ijk,ijk->ij", pa, pc) * lb
            + np.einsum("ijk,ijk->ij", pb, pc) * la
        )
        out[sl] = np.sum(2.0 * np.arctan2(num, den), axis=1) / (4.0 * np.pi)
    return out


def sample_triangles(a, b, c, spacing):
    """Barycentric lattice samples of each triangle with edge step <= spacing.

    Returns ``(points, weights, owner)``: weights are area weights of a
    composite rule summing to each triangle's area.
    """
    pts, wts, own = [], [], []
    for j in range(len(a)):
        ell = max(
            np.linalg.norm(b[j] - a[j]),
            np.linalg.norm(c[j] - b[j]),
            np.linalg.norm(a[j] - c[j]),
        )
        n = max(1, int(np.ceil(ell / spacing - 1e-9)))
        i, k = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = i + k <= n
        s = i[keep] / n
        t = k[keep] / n
        p = a[j] + s[:, None] * (b[j] - a[j]) + t[:, None] * (c[j] - a[j])
        area = 0.5 * np.linalg.norm(np.cross(b[j] - a[j], c[j] - a[j]))
        pts.append(p)
        wts.append(np.full(len(p), area / len(p)))
        own.append(np.full(len(p), j))
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(own)


def triangle_centroid_rule(a, b, c, levels):
    """Composite centroid rule on ``4**levels`` congruent sub-triangles.

    Exact for affine integrands; returns ``(points, weights, owner)``.
    """
    n = 2 ** levels
    bary = []
    for i in range(n):
        for j in range(n - i):
            bary.append(((i + 1 / 3) / n, (j + 1 / 3) / n))
            if i + j < n - 1:
                bary.append(((i + 2 / 3) / n, (j + 2 / 3) / n))
    st = np.array(bary)
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    p = (
        a[:, None, :]
        + st[None, :, 0, None] * (b - a)[:, None, :]
        + st[None, :, 1, None] * (c - a)[:, None, :]
    )
    w = np.repeat(area[:, None] / len(st), len(st), axis=1)
    own = np.repeat(np.arange(len(a))[:, None], len(st), axis=1)
    return p.reshape(-1, 3), w.ravel(), own.ravel()


def fibonacci_sphere(n):
    """Quasi-uniform unit vectors on the sphere."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = np.pi * (1.0 + 5 ** 0.5) * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def newell_normal(loop):
    """Area-weighted normal of a closed polygon (not normalised)."""
    nxt = np.roll(loop, -1, axis=0)
    return 0.5 * np.sum(np.cross(loop, nxt), axis=0)
