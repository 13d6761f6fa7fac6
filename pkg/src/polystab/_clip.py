"""Exact volumes of tetrahedra clipped by half-spaces.

A convex region is kept as a list of tetrahedra; clipping one tetrahedron by
a plane leaves at most three tetrahedra, so intersecting with a second
tetrahedron (four planes) never needs more than 81 pieces.
"""

import numba
import numpy as np

_CAP = 96


@numba.njit(cache=True)
def _tet_volume(a, b, c, d):
    u0 = b[0] - a[0]
    u1 = b[1] - a[1]
    u2 = b[2] - a[2]
    v0 = c[0] - a[0]
    v1 = c[1] - a[1]
    v2 = c[2] - a[2]
    w0 = d[0] - a[0]
    w1 = d[1] - a[1]
    w2 = d[2] - a[2]
    det = u0 * (v1 * w2 - v2 * w1) - u1 * (v0 * w2 - v2 * w0) + u2 * (v0 * w1 - v1 * w0)
    return abs(det) / 6.0


@numba.njit(cache=True)
def _lerp(p, q, sp, sq, out):
    t = sp / (sp - sq)
    for k in range(3):
        out[k] = p[k] + t * (q[k] - p[k])


@numba.njit(cache=True)
def _push(stack, n, a, b, c, d):
    for k in range(3):
        stack[n, 0, k] = a[k]
        stack[n, 1, k] = b[k]
        stack[n, 2, k] = c[k]
        stack[n, 3, k] = d[k]
    return n + 1


@numba.njit(cache=True)
def _push_prism(stack, n, a0, a1, a2, b0, b1, b2):
    n = _push(stack, n, a0, a1, a2, b0)
    n = _push(stack, n, a1, a2, b0, b1)
    n = _push(stack, n, a2, b0, b1, b2)
    return n


@numba.njit(cache=True)
def _clip_volume(tet, normals, offsets, nplanes, work_a, work_b):
    """Volume of ``tet`` intersected with {x : n_i . x <= o_i}."""
    cur = work_a
    nxt = work_b
    for k in range(3):
        for j in range(4):
            cur[0, j, k] = tet[j, k]
    ncur = 1
    s = np.empty(4)
    pa = np.empty(3)
    pb = np.empty(3)
    pc = np.empty(3)
    pd = np.empty(3)
    for ip in range(nplanes):
        nn = 0
        for it in range(ncur):
            nin = 0
            for j in range(4):
                s[j] = (
                    normals[ip, 0] * cur[it, j, 0]
                    + normals[ip, 1] * cur[it, j, 1]
                    + normals[ip, 2] * cur[it, j, 2]
                    - offsets[ip]
                )
                if s[j] <= 0.0:
                    nin += 1
            if nin == 0:
                continue
            if nin == 4:
                nn = _push(nxt, nn, cur[it, 0], cur[it, 1], cur[it, 2], cur[it, 3])
                continue
            ins = np.empty(4, dtype=np.int64)
            outs = np.empty(4, dtype=np.int64)
            ni = 0
            no = 0
            for j in range(4):
                if s[j] <= 0.0:
                    ins[ni] = j
                    ni += 1
                else:
                    outs[no] = j
                    no += 1
            if nin == 1:
                a = ins[0]
                _lerp(cur[it, a], cur[it, outs[0]], s[a], s[outs[0]], pa)
                _lerp(cur[it, a], cur[it, outs[1]], s[a], s[outs[1]], pb)
                _lerp(cur[it, a], cur[it, outs[2]], s[a], s[outs[2]], pc)
                nn = _push(nxt, nn, cur[it, a], pa, pb, pc)
            elif nin == 3:
                d = outs[0]
                _lerp(cur[it, ins[0]], cur[it, d], s[ins[0]], s[d], pa)
                _lerp(cur[it, ins[1]], cur[it, d], s[ins[1]], s[d], pb)
                _lerp(cur[it, ins[2]], cur[it, d], s[ins[2]], s[d], pc)
                nn = _push_prism(nxt, nn, cur[it, ins[0]], cur[it, ins[1]], cur[it, ins[2]], pa, pb, pc)
            else:
                a = ins[0]
                b = ins[1]
                c = outs[0]
                d = outs[1]
                _lerp(cur[it, a], cur[it, c], s[a], s[c], pa)
                _lerp(cur[it, a], cur[it, d], s[a], s[d], pb)
                _lerp(cur[it, b], cur[it, c], s[b], s[c], pc)
                _lerp(cur[it, b], cur[it, d], s[b], s[d], pd)
                nn = _push_prism(nxt, nn, cur[it, a], pa, pb, cur[it, b], pc, pd)
        tmp = cur
        cur = nxt
        nxt = tmp
        ncur = nn
        if ncur == 0:
            return 0.0
    vol = 0.0
    for it in range(ncur):
        vol += _tet_volume(cur[it, 0], cur[it, 1], cur[it, 2], cur[it, 3])
    return vol


@numba.njit(cache=True)
def _tet_planes(t, normals, offsets):
    """Outward face planes of tetrahedron t; False if degenerate."""
    cx = (t[0, 0] + t[1, 0] + t[2, 0] + t[3, 0]) / 4.0
    cy = (t[0, 1] + t[1, 1] + t[2, 1] + t[3, 1]) / 4.0
    cz = (t[0, 2] + t[1, 2] + t[2, 2] + t[3, 2]) / 4.0
    for f in range(4):
        i0 = (f + 1) % 4
        i1 = (f + 2) % 4
        i2 = (f + 3) % 4
        ux = t[i1, 0] - t[i0, 0]
        uy = t[i1, 1] - t[i0, 1]
        uz = t[i1, 2] - t[i0, 2]
        vx = t[i2, 0] - t[i0, 0]
        vy = t[i2, 1] - t[i0, 1]
        vz = t[i2, 2] - t[i0, 2]
        nx = uy * vz - uz * vy
        ny = uz * vx - ux * vz
        nz = ux * vy - uy * vx
        ln = (nx * nx + ny * ny + nz * nz) ** 0.5
        if ln == 0.0:
            return False
        nx /= ln
        ny /= ln
        nz /= ln
        off = nx * t[i0, 0] + ny * t[i0, 1] + nz * t[i0, 2]
        if nx * cx + ny * cy + nz * cz > off:
            nx = -nx
            ny = -ny
            nz = -nz
            off = -off
        normals[f, 0] = nx
        normals[f, 1] = ny
        normals[f, 2] = nz
        offsets[f] = off
    return True


@numba.njit(cache=True)
def pair_volumes(tets, cones, pair_tet, pair_cone, out):
    """Accumulate vol(tets[i] intersect cones[j]) * sign into out[i]."""
    work_a = np.empty((_CAP, 4, 3))
    work_b = np.empty((_CAP, 4, 3))
    normals = np.empty((4, 3))
    offsets = np.empty(4)
    for p in range(len(pair_tet)):
        j = pair_cone[p]
        if not _tet_planes(cones[j], normals, offsets):
            continue
        out[pair_tet[p]] += _clip_volume(tets[pair_tet[p]], normals, offsets, 4, work_a, work_b)


@numba.njit(cache=True)
def halfspace_volumes(tets, normal, offset, out):
    """vol(tets[i] intersect {normal . x <= offset}) for every tetrahedron."""
    work_a = np.empty((_CAP, 4, 3))
    work_b = np.empty((_CAP, 4, 3))
    normals = np.empty((1, 3))
    offsets = np.empty(1)
    for k in range(3):
        normals[0, k] = normal[k]
    offsets[0] = offset
    for i in range(len(tets)):
        out[i] = _clip_volume(tets[i], normals, offsets, 1, work_a, work_b)


def tet_volumes(tets):
    a = tets[:, 1] - tets[:, 0]
    b = tets[:, 2] - tets[:, 0]
    c = tets[:, 3] - tets[:, 0]
    return np.abs(np.einsum("ij,ij->i", a, np.cross(b, c))) / 6.0


def polyhedron_fractions(poly, tets, tol=1e-12):
    """Exact volume fraction of each tetrahedron (m, 4, 3) inside ``poly``.

    The solid is written as a signed sum of cones from its volume centroid
    over the surface triangles; only tetrahedra that can meet the surface
    are clipped, the rest are classified by their centroid.
    """
    from ._primitives import distance_to_triangles, winding_number

    tets = np.ascontiguousarray(tets, dtype=float)
    m = len(tets)
    frac = np.zeros(m)
    vol = tet_volumes(tets)
    cen = tets.mean(axis=1)
    rad = np.max(np.linalg.norm(tets - cen[:, None], axis=-1), axis=1)
    lo = poly.vertices.min(axis=0)
    hi = poly.vertices.max(axis=0)
    near = np.all((cen + rad[:, None] >= lo) & (cen - rad[:, None] <= hi), axis=1)
    idx = np.flatnonzero(near)
    if len(idx) == 0:
        return frac
    a, b, c = poly.triangle_corners
    d = distance_to_triangles(cen[idx], a, b, c)
    cut = d <= rad[idx] * (1 + 1e-9) + 1e-14
    whole = idx[~cut]
    if len(whole):
        frac[whole] = (winding_number(cen[whole], a, b, c) > 0.5).astype(float)
    cut_idx = idx[cut]
    if len(cut_idx):
        apex = poly.centroid
        cones = np.stack([np.broadcast_to(apex, a.shape), a, b, c], axis=1)
        sign = np.sign(np.einsum("ij,ij->i", a - apex, np.cross(b - apex, c - apex)))
        clo = cones.min(axis=1)
        chi = cones.max(axis=1)
        tl = tets[cut_idx].min(axis=1)
        th = tets[cut_idx].max(axis=1)
        ov = np.all((tl[:, None] <= chi[None]) & (th[:, None] >= clo[None]), axis=-1)
        pt, pc = np.nonzero(ov)
        pos = np.zeros(len(cut_idx))
        neg = np.zeros(len(cut_idx))
        sel = sign[pc] > 0
        sub = tets[cut_idx]
        pair_volumes(sub, np.ascontiguousarray(cones), pt[sel], pc[sel], pos)
        pair_volumes(sub, np.ascontiguousarray(cones), pt[~sel], pc[~sel], neg)
        frac[cut_idx] = (pos - neg) / vol[cut_idx]
    frac[np.abs(frac) < tol] = 0.0
    frac[np.abs(frac - 1) < tol] = 1.0
    return np.clip(frac, 0.0, 1.0)


def halfspace_fractions(tets, normal, offset):
    """Fraction of each tetrahedron in {normal . x <= offset}."""
    tets = np.ascontiguousarray(tets, dtype=float)
    out = np.zeros(len(tets))
    halfspace_volumes(tets, np.asarray(normal, dtype=float), float(offset), out)
    return np.clip(out / tet_volumes(tets), 0.0, 1.0)
