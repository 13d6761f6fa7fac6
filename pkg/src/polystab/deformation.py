"""Vector fields that carry one polyhedron onto another, and their flows.

Each face of the reference polyhedron gets a collar of isosceles triangles
standing on its sides.  Vertex displacements are interpolated affinely on
those triangles, extended to all of space by a Lipschitz (McShane) extension
and multiplied by a smooth cutoff supported in a tube around the surface.
The flow ``Phi_t = I + t U`` and the material matrices derived from it feed
the shape-derivative formulas.
"""

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import CollarMismatch, InadmissibleFace, NotContractive
from .geometry import AprioriData, Polyhedron, VertexPairing, boundary_samples


# ------------------------------------------------------------------ collar


@dataclass(frozen=True)
class TriangleCollar:
    """Isosceles triangles of common height ``h0`` on the sides of each face.

    ``base`` (T, 2) holds the vertex indices of each triangle's base (in the
    face's orientation), ``apex`` (T, 3) the apex points and ``face`` (T,)
    the owning face.
    """

    base: np.ndarray
    apex: np.ndarray
    face: np.ndarray
    h0: float

    def __len__(self):
        return len(self.base)

    def corners(self, vertices):
        """Triangle corner coordinates (T, 3, 3): base start, base end, apex."""
        v = np.asarray(vertices, dtype=float)
        return np.stack([v[self.base[:, 0]], v[self.base[:, 1]], self.apex], axis=1)


def collar_height(prior):
    return prior.r0 * min(1.0, np.tan(prior.theta0 / 2)) / 2


def _plane_basis(normal):
    a = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(normal, a)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(normal, e1)


def _separated(p, q, tol):
    """True if convex 2-D polygons p, q have disjoint interiors."""
    for poly in (p, q):
        for i in range(len(poly)):
            e = poly[(i + 1) % len(poly)] - poly[i]
            axis = np.array([-e[1], e[0]]) / np.linalg.norm(e)
            sp, sq = p @ axis, q @ axis
            if sp.max() <= sq.min() + tol or sq.max() <= sp.min() + tol:
                return True
    return False


def _segments_cross(a, b, c, d, tol):
    """Proper crossing of 2-D segments ab and cd (touching does not count)."""

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return o1 * o2 < -tol and o3 * o4 < -tol


def _inside_polygon(x, poly):
    a = poly - x
    b = np.roll(poly, -1, axis=0) - x
    ang = np.arctan2(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0], np.einsum("ij,ij->i", a, b))
    return abs(ang.sum()) > np.pi


def collar_triangulation(poly: Polyhedron, prior: AprioriData) -> TriangleCollar:
    """Collar of isosceles triangles, one per face side, pointing inward."""
    h0 = collar_height(prior)
    tol = 1e-12 * poly.diameter
    base, apex, owner = [], [], []
    for fi, loop in enumerate(poly.faces):
        n = poly.face_normals[fi]
        e1, e2 = _plane_basis(n)
        pts = poly.face_loop(fi)
        origin = pts.mean(axis=0)
        flat = np.stack([(pts - origin) @ e1, (pts - origin) @ e2], axis=1)
        tris2d = []
        K = len(loop)
        for j in range(K):
            a, b = loop[j], loop[(j + 1) % K]
            pa, pb = poly.vertices[a], poly.vertices[b]
            d = (pb - pa) / np.linalg.norm(pb - pa)
            ap = 0.5 * (pa + pb) + h0 * np.cross(n, d)
            base.append((a, b))
            apex.append(ap)
            owner.append(fi)
            tris2d.append(np.array([flat[j], flat[(j + 1) % K], [(ap - origin) @ e1, (ap - origin) @ e2]]))
        for j, t in enumerate(tris2d):
            if not _inside_polygon(t[2], flat):
                raise InadmissibleFace(f"face {fi}: collar apex {j} leaves the face")
            for s in range(K):
                if s in (j, (j - 1) % K, (j + 1) % K):
                    continue
                p, q = flat[s], flat[(s + 1) % K]
                if _segments_cross(t[0], t[2], p, q, tol) or _segments_cross(t[1], t[2], p, q, tol):
                    raise InadmissibleFace(f"face {fi}: collar triangle {j} crosses side {s}")
            for i in range(j):
                if not _separated(t, tris2d[i], tol):
                    raise InadmissibleFace(f"face {fi}: collar triangles {i} and {j} overlap")
    return TriangleCollar(
        np.array(base, dtype=np.int64), np.array(apex), np.array(owner, dtype=np.int64), float(h0)
    )


# ------------------------------------------------------------------ field


def _anchor_lipschitz(corners, values, per_edge=6):
    """Lipschitz constant (per component) of piecewise-affine collar data."""
    nrm, grads = _kernels.triangle_frames(corners)
    grad_norm = np.linalg.norm(np.einsum("tkc,tkj->tcj", values, grads), axis=-1).max(axis=0)
    # sample each triangle on a barycentric lattice
    ij = [(i, j) for i in range(per_edge + 1) for j in range(per_edge + 1 - i)]
    lam = np.array([(i, j, per_edge - i - j) for i, j in ij], dtype=float) / per_edge
    pts = np.einsum("sk,tkx->tsx", lam, corners).reshape(-1, 3)
    val = np.einsum("sk,tkc->tsc", lam, values).reshape(-1, 3)
    pts, idx = np.unique(np.round(pts, 13), axis=0, return_index=True)
    val = val[idx]
    dist = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    np.fill_diagonal(dist, np.inf)
    ratio = np.abs(val[:, None] - val[None]) / dist[..., None]
    return np.maximum(grad_norm, ratio.max(axis=(0, 1)))


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s * s * (3.0 - 2.0 * s), -6.0 * s * (1.0 - s)


@dataclass(frozen=True, eq=False)
class DeformationField:
    """Lipschitz vector field ``U`` moving the vertices of ``p0``.

    ``U = phi * E`` where ``E`` is the midrange of the upper and lower
    McShane extensions of the affine collar data and ``phi`` is a C1
    smoothstep equal to 1 within ``r0 / 8`` of the surface and 0 beyond
    ``r0 / 4``.
    """

    p0: Polyhedron
    collar: TriangleCollar
    displacements: np.ndarray
    corners: np.ndarray
    values: np.ndarray
    lipschitz_data: np.ndarray
    prior: AprioriData
    stats: dict = field(default_factory=dict)

    @property
    def inner_radius(self):
        return self.prior.r0 / 8

    @property
    def outer_radius(self):
        return self.prior.r0 / 4

    @cached_property
    def _frames(self):
        return _kernels.triangle_frames(self.corners)

    @cached_property
    def _surface(self):
        a, b, c = self.p0.triangle_corners
        return np.ascontiguousarray(np.stack([a, b, c], axis=1))

    @cached_property
    def is_zero(self):
        return not np.any(self.values)

    def _extension(self, x, active):
        nrm, grads = self._frames
        vals = np.concatenate([self.values, -self.values], axis=2)
        L = np.concatenate([self.lipschitz_data, self.lipschitz_data])
        out, g = _kernels.inf_convolution(x, self.corners, np.ascontiguousarray(vals), L, nrm, grads, active)
        return 0.5 * (out[:, :3] - out[:, 3:]), 0.5 * (g[:, :3] - g[:, 3:])

    def cutoff(self, x):
        """Cutoff value and gradient at points (n, 3)."""
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=float)
        dist, foot = _kernels.surface_closest(x, self._surface)
        width = self.outer_radius - self.inner_radius
        val, dval = _smoothstep((dist - self.inner_radius) / width)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(dist[:, None] > 0, (x - foot) / dist[:, None], 0.0)
        return val, (dval / width)[:, None] * unit

    def evaluate(self, x, jacobian=False):
        """Field values (n, 3) and, optionally, Jacobians (n, 3, 3).

        Row ``c`` of the Jacobian is the gradient of component ``c``.
        """
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=float)
        n = len(x)
        u = np.zeros((n, 3))
        du = np.zeros((n, 3, 3))
        if self.is_zero or n == 0:
            return (u, du) if jacobian else u
        phi, dphi = self.cutoff(x)
        active = phi > 0
        if np.any(active):
            e, de = self._extension(x, active)
            u = phi[:, None] * e
            du = phi[:, None, None] * de + e[:, :, None] * dphi[:, None, :]
        return (u, du) if jacobian else u

    def jacobian_fd(self, x, step=None):
        """Central-difference Jacobian with step ``sqrt(eps_geom) * r0``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if step is None:
            step = np.sqrt(self.prior.eps_geom) * self.prior.r0
        out = np.empty((len(x), 3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = step
            out[:, :, j] = (self.evaluate(x + e) - self.evaluate(x - e)) / (2 * step)
        return out

    def sample_points(self, spacing=None, seed=0):
        """Points spread through the support tube, on both sides of the surface."""
        if spacing is None:
            spacing = self.prior.r0 / 6
        pts, _, face = boundary_samples(self.p0, spacing)
        nrm = self.p0.face_normals[face]
        shells = self.outer_radius * np.array([0.0, 0.25, 0.5, 0.6, 0.75, 0.875, 1.0])
        out = [pts + s * sign * nrm for s in shells for sign in (1.0, -1.0)]
        out.append(self.p0.vertices)
        out.append(self.corners.mean(axis=1))
        rng = np.random.default_rng(seed)
        k = rng.integers(0, len(pts), size=len(pts))
        off = rng.normal(size=(len(pts), 3))
        off *= (rng.random(len(pts)) * self.outer_radius / np.linalg.norm(off, axis=1))[:, None]
        out.append(pts[k] + off)
        return np.concatenate(out)

    @property
    def sup_norm(self):
        return self.stats["sup_norm"]

    @property
    def lipschitz(self):
        return self.stats["lipschitz"]

    def lipschitz_bound(self):
        """Rigorous bound sqrt(sum L_c^2) + |grad phi|_max * sup|E|."""
        sup_e = float(np.linalg.norm(np.abs(self.values).max(axis=(0, 1))))
        grad_phi = 1.5 / (self.outer_radius - self.inner_radius)
        return float(np.linalg.norm(self.lipschitz_data) + grad_phi * sup_e)


def _estimate_stats(U):
    if U.is_zero:
        return {"sup_norm": 0.0, "lipschitz": 0.0}
    x = U.sample_points()
    u, du = U.evaluate(x, jacobian=True)
    sup = max(float(np.linalg.norm(u, axis=1).max()), float(np.linalg.norm(U.displacements, axis=1).max()))
    lip = float(np.linalg.norm(du, ord=2, axis=(1, 2)).max())
    return {"sup_norm": sup, "lipschitz": lip}


def field_from_displacements(p0: Polyhedron, displacements, prior: AprioriData, collar=None):
    """Field with prescribed vertex displacements (V, 3) on ``p0``.

    Apexes move with the midpoint of their base, so every collar triangle
    carries the affine map fixed by its two base vertices.
    """
    if collar is None:
        collar = collar_triangulation(p0, prior)
    disp = np.asarray(displacements, dtype=float)
    if disp.shape != p0.vertices.shape:
        raise ValueError(f"displacements must have shape {p0.vertices.shape}")
    corners = np.ascontiguousarray(collar.corners(p0.vertices))
    da, db = disp[collar.base[:, 0]], disp[collar.base[:, 1]]
    values = np.ascontiguousarray(np.stack([da, db, 0.5 * (da + db)], axis=1))
    if np.any(values):
        lip = _anchor_lipschitz(corners, values) * 1.02
        lip = np.maximum(lip, 1e-12 * max(1.0, float(np.abs(values).max())))
    else:
        lip = np.zeros(3)
    U = DeformationField(p0, collar, disp, corners, values, lip, prior)
    U.stats.update(_estimate_stats(U))
    return U


def _cyclic_equal(a, b):
    if len(a) != len(b):
        return False
    if set(a) != set(b):
        return False
    k = b.index(a[0])
    return tuple(b[k:] + b[:k]) == tuple(a)


def build_field(p0: Polyhedron, p1: Polyhedron, pairing: VertexPairing, prior: AprioriData):
    """Field carrying the vertices of ``p0`` onto their partners in ``p1``."""
    perm = np.asarray(pairing.permutation)
    faces1 = {}
    for loop in p1.faces:
        faces1.setdefault(frozenset(loop), []).append(list(loop))
    for fi, loop in enumerate(p0.faces):
        image = [int(perm[v]) for v in loop]
        cands = faces1.get(frozenset(image), [])
        if not any(_cyclic_equal(image, c) for c in cands):
            raise CollarMismatch(f"face {fi} of p0 has no matching face in p1 under the pairing")
    collar_triangulation(p1, prior)
    disp = p1.vertices[perm] - p0.vertices
    return field_from_displacements(p0, disp, prior)


def vertex_field(p0: Polyhedron, vertex: int, direction, prior: AprioriData, collar=None):
    """Elementary field moving a single vertex along ``direction``."""
    disp = np.zeros_like(p0.vertices)
    disp[vertex] = direction
    return field_from_displacements(p0, disp, prior, collar=collar)


# ------------------------------------------------------------------ flow


def _as_points(x):
    x = np.asarray(x, dtype=float)
    return np.atleast_2d(x), x.ndim == 1


def eval_field(U: DeformationField, x):
    p, single = _as_points(x)
    u = U.evaluate(p)
    return u[0] if single else u


def eval_jacobian(U: DeformationField, x, method="analytic"):
    """Jacobian of ``U``; ``method='fd'`` uses central differences."""
    p, single = _as_points(x)
    du = U.evaluate(p, jacobian=True)[1] if method == "analytic" else U.jacobian_fd(p)
    return du[0] if single else du


def _check_contractive(U, t):
    if t * U.lipschitz >= 1.0:
        raise NotContractive(f"t * Lip(U) = {t * U.lipschitz:.3g} >= 1")


def phi(U: DeformationField, t, x):
    p, single = _as_points(x)
    y = p + t * U.evaluate(p)
    return y[0] if single else y


def phi_inverse(U: DeformationField, t, y, tol=None, max_iter=500):
    """Solve ``y = x + t U(x)`` by the fixed-point iteration ``x <- y - t U(x)``."""
    _check_contractive(U, t)
    q, single = _as_points(y)
    if tol is None:
        tol = U.prior.eps_geom
    x = q.copy()
    for _ in range(max_iter):
        nxt = q - t * U.evaluate(x)
        step = np.linalg.norm(nxt - x, axis=1).max()
        x = nxt
        if step <= tol:
            break
    return x[0] if single else x


def material_matrix(U: DeformationField, t, x, jacobian=None):
    """``A(t) = DPhi^-1 DPhi^-T det DPhi`` at reference points."""
    _check_contractive(U, t)
    p, single = _as_points(x)
    du = U.evaluate(p, jacobian=True)[1] if jacobian is None else jacobian
    A = material_from_jacobian(du, t)
    return A[0] if single else A


def material_from_jacobian(du, t):
    F = np.eye(3) + t * np.asarray(du)
    inv = np.linalg.inv(F)
    return np.einsum("nij,nkj->nik", inv, inv) * np.linalg.det(F)[:, None, None]


def cal_A_from_jacobian(du):
    du = np.asarray(du)
    div = np.trace(du, axis1=-2, axis2=-1)
    return div[..., None, None] * np.eye(3) - (du + np.swapaxes(du, -1, -2))


def cal_A(U: DeformationField, x):
    """First variation ``div U I - (DU + DU^T)`` of the material matrix."""
    p, single = _as_points(x)
    A = cal_A_from_jacobian(U.evaluate(p, jacobian=True)[1])
    return A[0] if single else A


def write_field_csv(U: DeformationField, points, path):
    """Dump sampled ``(x, U(x))`` rows."""
    p, _ = _as_points(points)
    u = U.evaluate(p)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", "u", "v", "w"])
        for row in np.hstack([p, u]):
            w.writerow([repr(float(v)) for v in row])
