"""Shape derivatives of the local DtN pairing along a deformation field.

``F(t, f, g)`` is the DtN pairing for the inclusion ``Phi_t(D0)``.  It is
evaluated either by pulling the problem back to the reference configuration
(conductivity ``gamma A(t)`` on the fixed mesh) or by transporting the
inclusion surface and recomputing volume fractions.  The derivative at
``t = 0`` is available in distributed form (a volume integral of the
material matrix variation) and in boundary form (a surface integral with
the polarization tensor plus corrections near the edges).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _clip, _kernels
from . import _primitives as prim
from . import fem
from .deformation import (
    cal_A,
    DeformationField,
    cal_A_from_jacobian,
    material_from_jacobian,
)
from .dtn import BoundaryBasis, dtn_matrix, surrogate_norm
from .errors import EdgeCollarTooWide, NotContractive
from .geometry import Polyhedron, distance_to_boundary, distance_to_edges, hausdorff_boundary

_FACE_LOCAL = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


# ------------------------------------------------------------------ element averages


def support_elements(U: DeformationField, mesh: fem.TetMesh):
    """Elements that can meet the support tube of ``U``."""
    if U.is_zero:
        return np.zeros(0, dtype=np.int64)
    cen = np.ascontiguousarray(mesh.centroids)
    lo = U.p0.vertices.min(axis=0) - U.outer_radius - 2 * mesh.h
    hi = U.p0.vertices.max(axis=0) + U.outer_radius + 2 * mesh.h
    cand = np.flatnonzero(np.all((cen >= lo) & (cen <= hi), axis=1))
    dist, _ = _kernels.surface_closest(cen[cand], U._surface)
    reach = np.max(np.linalg.norm(mesh.element_points[cand] - cen[cand, None], axis=-1), axis=1)
    return cand[dist <= U.outer_radius + reach * (1 + 1e-9)]


def element_jacobians(U: DeformationField, mesh: fem.TetMesh, elements=None, levels=1):
    """Element means of ``DU`` from face fluxes ``(1/|e|) sum_f int_f U (x) n``.

    Exact for any Lipschitz field up to the face quadrature (composite
    centroid rule with ``4**levels`` points per face).  Returns the element
    indices and their mean Jacobians (m, 3, 3).
    """
    if elements is None:
        elements = support_elements(U, mesh)
    elements = np.asarray(elements, dtype=np.int64)
    if len(elements) == 0:
        return elements, np.zeros((0, 3, 3))
    tets = mesh.tets[elements]
    faces = np.sort(tets[:, _FACE_LOCAL].reshape(-1, 3), axis=1)
    uniq, inv = np.unique(faces, axis=0, return_inverse=True)
    inv = inv.ravel()
    x = mesh.nodes
    a, b, c = x[uniq[:, 0]], x[uniq[:, 1]], x[uniq[:, 2]]
    pts, w, own = prim.triangle_centroid_rule(a, b, c, levels)
    vals = U.evaluate(pts)
    mean_u = np.zeros((len(uniq), 3))
    np.add.at(mean_u, own, w[:, None] * vals)  # integral of U over each face
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    nrm = np.cross(b - a, c - a) / (2 * area[:, None])
    # orient each face outward from its element
    opposite = x[tets]
    fidx = inv.reshape(-1, 4)
    out = np.zeros((len(elements), 3, 3))
    for f in range(4):
        n = nrm[fidx[:, f]]
        away = x[uniq[fidx[:, f], 0]] - opposite[:, f]
        n = n * np.sign(np.einsum("ij,ij->i", n, away))[:, None]
        out += np.einsum("ic,ij->icj", mean_u[fidx[:, f]], n)
    return elements, out / mesh.volumes[elements][:, None, None]


# ------------------------------------------------------------------ F(t)


def _boundary_data(mesh, f):
    """Full nodal boundary vector from a callable, basis coefficients or nodal data."""
    nodes = mesh.basis_nodes
    out = np.zeros(mesh.n_nodes)
    if callable(f):
        out[nodes] = np.asarray(f(mesh.nodes[nodes]), dtype=float)
        return out
    f = np.asarray(f, dtype=float)
    if f.shape == (mesh.n_nodes,):
        out[nodes] = f[nodes]
    elif f.shape == (len(nodes),):
        out[nodes] = f
    else:
        raise ValueError("boundary data must be callable, per basis node or per mesh node")
    return out


@dataclass
class _Prepared:
    elements: np.ndarray
    jacobians: np.ndarray


def _prepare(U, mesh, levels=1):
    key = ("jac", U, levels)
    if key not in mesh.cache:
        e, j = element_jacobians(U, mesh, levels=levels)
        mesh.cache[key] = _Prepared(e, j)
    return mesh.cache[key]


def pullback_coefficient(U, mesh, t, prepared=None):
    """Tensor conductivity ``gamma A(t)`` on the reference mesh."""
    if abs(t) * U.lipschitz >= 1.0:
        raise NotContractive(f"|t| Lip(U) = {abs(t) * U.lipschitz:.3g} >= 1")
    prep = _prepare(U, mesh) if prepared is None else prepared
    coef = mesh.conductivity[:, None, None] * np.eye(3)
    if len(prep.elements):
        A = material_from_jacobian(prep.jacobians, t)
        coef[prep.elements] = mesh.conductivity[prep.elements, None, None] * A
    return coef


def refined_surface(poly: Polyhedron, spacing):
    """Closed triangle surface of ``poly`` with edges no longer than ``spacing``."""
    a, b, c = poly.triangle_corners
    verts, tris = [], []
    offset = 0
    for j in range(len(a)):
        ell = max(np.linalg.norm(b[j] - a[j]), np.linalg.norm(c[j] - b[j]), np.linalg.norm(a[j] - c[j]))
        n = max(1, int(np.ceil(ell / spacing - 1e-9)))
        index = {}
        for i in range(n + 1):
            for k in range(n + 1 - i):
                index[(i, k)] = offset + len(index)
                verts.append(a[j] + (i / n) * (b[j] - a[j]) + (k / n) * (c[j] - a[j]))
        for i in range(n):
            for k in range(n - i):
                tris.append((index[(i, k)], index[(i + 1, k)], index[(i, k + 1)]))
                if i + k < n - 1:
                    tris.append((index[(i + 1, k)], index[(i + 1, k + 1)], index[(i, k + 1)]))
        offset += len(index)
    verts = np.array(verts)
    # merge duplicated points along shared edges
    key = np.round(verts / (1e-9 * poly.diameter)).astype(np.int64)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    tris = inv.ravel()[np.array(tris)]
    return verts[first], tris


def transported_polyhedron(U, t, spacing):
    """Triangulated image ``Phi_t(D0)`` of a refined copy of the surface."""
    if abs(t) * U.lipschitz >= 1.0:
        raise NotContractive(f"|t| Lip(U) = {abs(t) * U.lipschitz:.3g} >= 1")
    verts, tris = refined_surface(U.p0, spacing)
    moved = verts + t * U.evaluate(verts)
    return Polyhedron(moved, tuple(tuple(int(i) for i in tri) for tri in tris))


def pullback_dtn(U, t, basis: BoundaryBasis, mesh):
    """DtN matrix of ``Phi_t(D0)`` from the pulled-back tensor conductivity.

    ``Phi_t`` is the identity near the accessible boundary, so this is a
    discretisation of the DtN map of the moved inclusion on the fixed mesh.
    """
    K = fem.assemble(mesh, pullback_coefficient(U, mesh, t))
    solver = fem.DirichletSolver(mesh, K, method="lu")
    out = dtn_matrix(mesh, basis, solver=solver)
    out.metadata.update({"t": float(t), "conductivity": "pullback"})
    return out


def _pairing(mesh, K, f, g, method="cg"):
    fb = _boundary_data(mesh, f)
    gb = _boundary_data(mesh, g)
    u = fem.DirichletSolver(mesh, K, method=method).solve(fb)
    return float(gb @ (K @ u))


def F_value(U, t, f, g, mesh, method="pullback", spacing=None):
    """DtN pairing ``<Lambda_t f, g>`` of the inclusion ``Phi_t(D0)``.

    ``method="pullback"`` solves with the conductivity ``gamma A(t)`` on the
    reference mesh (the exact change of variables, discretised with element
    mean Jacobians); ``method="transport"`` moves a refined copy of the
    surface through ``Phi_t`` and recomputes volume fractions.  Negative
    ``t`` corresponds to the reflected field ``-U``.
    """
    if t == 0 or U.is_zero:
        return _pairing(mesh, fem.assemble(mesh), f, g)
    if method == "pullback":
        K = fem.assemble(mesh, pullback_coefficient(U, mesh, t))
    elif method == "transport":
        spacing = mesh.h / 4 if spacing is None else spacing
        poly = transported_polyhedron(U, t, spacing)
        frac = fem.inclusion_fractions(mesh, [poly])
        K = fem.assemble(mesh, 1.0 + (mesh.k - 1.0) * frac)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _pairing(mesh, K, f, g)


# ------------------------------------------------------------------ derivatives


@dataclass
class ShapeDerivativeResult:
    value: float
    form: str
    metadata: dict = field(default_factory=dict)
    per_face: np.ndarray = None


def _solutions(mesh, f, g):
    solver = fem.DirichletSolver(mesh, fem.assemble(mesh))
    u = solver.solve(_boundary_data(mesh, f))
    v = solver.solve(_boundary_data(mesh, g))
    return u, v


def _element_gradients(mesh, u, elements):
    return np.einsum("eij,ei->ej", mesh.gradients[elements], u[mesh.tets[elements]])


def F_prime_distributed(U, f, g, mesh, solutions=None):
    """``F'(0) = int gamma (div U I - DU - DU^T) grad u0 . grad v0``.

    Element means of ``DU`` make the sum the exact derivative of the
    pulled-back discrete pairing.
    """
    prep = _prepare(U, mesh)
    if len(prep.elements) == 0:
        return ShapeDerivativeResult(0.0, "distributed", {"elements": 0})
    u, v = _solutions(mesh, f, g) if solutions is None else solutions
    e = prep.elements
    gu = _element_gradients(mesh, u, e)
    gv = _element_gradients(mesh, v, e)
    A = cal_A_from_jacobian(prep.jacobians)
    w = mesh.conductivity[e] * mesh.volumes[e]
    val = float(np.sum(w * np.einsum("ei,eij,ej->e", gu, A, gv)))
    return ShapeDerivativeResult(val, "distributed", {"elements": int(len(e)), "h": mesh.h})


# ------------------------------------------------------------------ boundary form


def _harmonic_quadratic(y):
    """Harmonic polynomials of degree <= 2 in local coordinates (n, 9)."""
    y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
    one = np.ones_like(y1)
    return np.stack([one, y1, y2, y3, y1 * y2, y2 * y3, y1 * y3, y1**2 - y2**2, y1**2 - y3**2], axis=-1)


def interior_trace_weights(mesh, poly, points, depth=0.5, radius=3.0, min_nodes=15):
    """Linear maps from nodal values to one-sided gradients at surface points.

    Nodes of the interior phase at least ``depth * h`` below the surface
    and within ``radius * h`` of each point are fitted by a harmonic
    quadratic in the least-squares sense; the fitted gradient at the point
    is the interior trace.  Returns ``(node_lists, weights)`` with weights
    of shape (n_nodes_i, 3) per point.
    """
    from scipy.spatial import cKDTree

    from .geometry import INSIDE, contains, distance_to_boundary

    h = mesh.h
    lo = poly.vertices.min(axis=0) - h
    hi = poly.vertices.max(axis=0) + h
    cand = np.flatnonzero(np.all((mesh.nodes >= lo) & (mesh.nodes <= hi), axis=1))
    x = mesh.nodes[cand]
    keep = (contains(poly, x) == INSIDE) & (distance_to_boundary(poly, x) >= depth * h)
    nodes = cand[keep]
    tree = cKDTree(mesh.nodes[nodes])
    lists, weights = [], []
    for p in points:
        r = radius * h
        idx = tree.query_ball_point(p, r)
        while len(idx) < min_nodes:
            r *= 1.25
            idx = tree.query_ball_point(p, r)
        idx = np.array(idx)
        B = _harmonic_quadratic((mesh.nodes[nodes[idx]] - p) / h)
        pinv = np.linalg.pinv(B)
        lists.append(nodes[idx])
        weights.append(pinv[1:4].T / h)
    return lists, weights


def _apply_trace(lists, weights, u):
    return np.array([u[i] @ w for i, w in zip(lists, weights)])


def _face_quadrature(poly, spacing):
    a, b, c = poly.triangle_corners
    ell = max(np.linalg.norm(b - a, axis=1).max(), np.linalg.norm(c - a, axis=1).max(), np.linalg.norm(c - b, axis=1).max())
    levels = max(0, int(np.ceil(np.log2(ell / spacing))))
    pts, w, own = prim.triangle_centroid_rule(a, b, c, levels)
    return pts, w, poly.triangle_face[own]


def edge_tube_surface(poly: Polyhedron, width, spacing):
    """Quadrature on the boundary of the tube of radius ``width`` around the edges.

    Returns points, area weights and outward unit normals.
    """
    v = poly.vertices
    pts, wts, nrm = [], [], []
    for i, j in poly.edges:
        p, q = v[i], v[j]
        L = np.linalg.norm(q - p)
        d = (q - p) / L
        e1 = np.cross(d, [1.0, 0.0, 0.0] if abs(d[0]) < 0.9 else [0.0, 1.0, 0.0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(d, e1)
        ns = max(2, int(np.ceil(L / spacing)))
        nt = max(24, int(np.ceil(2 * np.pi * width / spacing)))
        s = (np.arange(ns) + 0.5) * L / ns
        th = (np.arange(nt) + 0.5) * 2 * np.pi / nt
        S, T = np.meshgrid(s, th, indexing="ij")
        radial = np.cos(T)[..., None] * e1 + np.sin(T)[..., None] * e2
        x = p + S[..., None] * d + width * radial
        pts.append(x.reshape(-1, 3))
        nrm.append(radial.reshape(-1, 3))
        wts.append(np.full(ns * nt, width * (2 * np.pi / nt) * (L / ns)))
    nsph = max(200, int(np.ceil(4 * np.pi * width**2 / spacing**2)) * 4)
    sph = prim.fibonacci_sphere(nsph)
    for vi in range(len(v)):
        inc = poly.edges[np.any(poly.edges == vi, axis=1)]
        dirs = v[np.where(inc[:, 0] == vi, inc[:, 1], inc[:, 0])] - v[vi]
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        own = np.all(sph @ dirs.T <= 0, axis=1)
        pts.append(v[vi] + width * sph[own])
        nrm.append(sph[own])
        wts.append(np.full(int(own.sum()), 4 * np.pi * width**2 / nsph))
    pts, wts, nrm = np.concatenate(pts), np.concatenate(wts), np.concatenate(nrm)
    outside = distance_to_edges(poly, pts) >= width * (1 - 1e-9)
    return pts[outside], wts[outside], nrm[outside]


def polarization_tensor(normal, k, swapped=False):
    """``k`` along the normal and 1 on the tangent plane (or the reverse)."""
    nn = np.einsum("...i,...j->...ij", normal, normal)
    a, b = (1.0, k) if swapped else (k, 1.0)
    return a * nn + b * (np.eye(3) - nn)


def F_prime_boundary(U, f, g, mesh, edge_width=None, swapped=False, spacing=None, solutions=None, volume_levels=2):
    """Boundary form of ``F'(0)`` with corrections near the edges.

    ``int_{dD0 \\ B} (U.nu)(k-1) M grad u_i . grad v_i`` over the faces
    outside the edge tube ``B`` of radius ``edge_width`` (default r0/8),
    plus ``int_B gamma cal_A grad u . grad v`` and the flux
    ``int_{dB} gamma b . nu`` of
    ``b = (U.grad u) grad v + (U.grad v) grad u - (grad u.grad v) U``.
    Interior traces come from harmonic fits of the discrete solutions.
    """
    from ._quadrature import points_and_weights
    from .geometry import face_inradius

    poly = U.p0
    k = mesh.k
    width = U.prior.r0 / 8 if edge_width is None else edge_width
    for i in range(len(poly.faces)):
        if face_inradius(poly, i) <= width:
            raise EdgeCollarTooWide(f"edge tube of width {width:.3g} covers face {i}")
    meta = {"edge_width": width, "h": mesh.h, "k": k, "swapped": bool(swapped)}
    if U.is_zero:
        return ShapeDerivativeResult(0.0, "boundary", meta, np.zeros(len(poly.faces)))
    u, v = _solutions(mesh, f, g) if solutions is None else solutions
    spacing = mesh.h / 2 if spacing is None else spacing

    # faces away from the edges
    pts, w, face = _face_quadrature(poly, spacing)
    keep = distance_to_edges(poly, pts) >= width
    pts, w, face = pts[keep], w[keep], face[keep]
    nu = poly.face_normals[face]
    lists, weights = interior_trace_weights(mesh, poly, pts)
    gu, gv = _apply_trace(lists, weights, u), _apply_trace(lists, weights, v)
    M = polarization_tensor(nu, k, swapped)
    un = np.einsum("ij,ij->i", U.evaluate(pts), nu)
    dens = w * un * (k - 1) * np.einsum("ni,nij,nj->n", gu, M, gv)
    per_face = np.bincount(face, weights=dens, minlength=len(poly.faces))
    face_term = float(per_face.sum())

    # volume of the edge tube
    cen = mesh.centroids
    reach = np.sqrt(3) * mesh.h
    near = np.flatnonzero(distance_to_edges(poly, cen) <= width + reach)
    qp, qw = points_and_weights(mesh.element_points[near], volume_levels, 2)
    qp = qp.reshape(len(near), -1, 3)
    qw = qw.reshape(len(near), -1)
    inside = distance_to_edges(poly, qp.reshape(-1, 3)).reshape(qw.shape) < width
    sel = np.nonzero(inside)
    x_in = qp[sel]
    el = near[sel[0]]
    A = cal_A(U, x_in)
    gu_e = _element_gradients(mesh, u, el)
    gv_e = _element_gradients(mesh, v, el)
    tube_volume = float(np.sum(qw[sel] * mesh.conductivity[el] * np.einsum("ni,nij,nj->n", gu_e, A, gv_e)))

    # flux through the tube surface
    sp, sw, sn = edge_tube_surface(poly, width, spacing / 2)
    el = mesh.locate(sp)
    gu_s = _element_gradients(mesh, u, el)
    gv_s = _element_gradients(mesh, v, el)
    Us = U.evaluate(sp)
    b = (
        np.einsum("ij,ij->i", Us, gu_s)[:, None] * gv_s
        + np.einsum("ij,ij->i", Us, gv_s)[:, None] * gu_s
        - np.einsum("ij,ij->i", gu_s, gv_s)[:, None] * Us
    )
    tube_flux = float(np.sum(sw * mesh.conductivity[el] * np.einsum("ij,ij->i", b, sn)))

    meta.update({"face_term": face_term, "tube_volume": tube_volume, "tube_flux": tube_flux,
                 "face_points": int(len(pts)), "tube_points": int(len(sp))})
    return ShapeDerivativeResult(face_term + tube_volume + tube_flux, "boundary", meta, per_face)


# ------------------------------------------------------------------ operator probes


@dataclass
class DerivativeOperatorProbe:
    """``F'(0, phi_i, phi_j)`` over a boundary basis and its surrogate norm."""

    matrix: np.ndarray
    norm: float
    d_hausdorff: float
    metadata: dict = field(default_factory=dict)

    @property
    def ratio(self):
        if self.d_hausdorff == 0:
            return float("nan")
        return self.norm / self.d_hausdorff


def derivative_matrix(U, mesh, lifts):
    """Symmetric matrix of distributed derivatives between lifted basis functions.

    Entry (i, j) is ``int gamma A grad w_i . grad w_j`` for the lifts ``w``,
    assembled as ``W^T K_A W`` with the sparse stiffness matrix of the
    tensor coefficient ``gamma A`` restricted to the elements where it is
    nonzero.
    """
    prep = _prepare(U, mesh)
    nb = lifts.shape[1]
    if len(prep.elements) == 0:
        return np.zeros((nb, nb))
    A = cal_A_from_jacobian(prep.jacobians)
    keep = np.any(A != 0, axis=(1, 2))
    e = prep.elements[keep]
    if len(e) == 0:
        return np.zeros((nb, nb))
    coef = np.zeros((mesh.n_elements, 3, 3))
    coef[e] = mesh.conductivity[e, None, None] * A[keep]
    K = fem.assemble(mesh, coef, elements=e)
    nodes = np.unique(mesh.tets[e])
    W = lifts[nodes]
    out = W.T @ (K[nodes][:, nodes] @ W)
    return 0.5 * (out + out.T)


def vertex_fraction_derivatives(poly: Polyhedron, mesh: fem.TetMesh, lifts, step=1e-4, band=3.0):
    """Derivatives of the discrete DtN pairing with respect to vertex coordinates.

    The mesh DtN pairing is the energy ``W^T K W`` of the discrete harmonic
    lifts, so its first variation is ``W^T dK W``.  Here ``dK`` comes from
    centred differences (step ``step``) of the exact volume fractions of the
    elements within ``band * h`` of the surface.  Returns an array of shape
    ``(N, 3, nb, nb)`` of symmetric matrices, one per vertex and axis.
    """
    idx = np.flatnonzero(mesh.in_omega)
    near = idx[np.abs(distance_to_boundary(poly, mesh.centroids[idx])) < band * mesh.h]
    pts = mesh.element_points[near]
    unit = fem.element_matrices(mesh, np.ones(mesh.n_elements), elements=near)
    tets = mesh.tets[near]
    nodes = np.unique(tets)
    loc = np.searchsorted(nodes, tets)
    rows = np.repeat(loc, 4, axis=1).ravel()
    cols = np.tile(loc, (1, 4)).ravel()
    W = lifts[nodes]
    nb = lifts.shape[1]
    out = np.zeros((poly.n_vertices, 3, nb, nb))

    def frac(vertices):
        return np.minimum(_clip.polyhedron_fractions(poly.moved(vertices), pts), 1.0)

    for v in range(poly.n_vertices):
        for axis in range(3):
            dv = np.zeros_like(poly.vertices)
            dv[v, axis] = step
            dfrac = (frac(poly.vertices + dv) - frac(poly.vertices - dv)) / (2 * step)
            vals = ((mesh.k - 1) * dfrac)[:, None, None] * unit
            K = sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(len(nodes), len(nodes))).tocsr()
            m = W.T @ (K @ W)
            out[v, axis] = 0.5 * (m + m.T)
    return out


def derivative_norm_probe(U, basis: BoundaryBasis, mesh, p1=None, dtn=None, spacing=None):
    """Surrogate operator norm of ``F'(0)`` on ``basis`` and ``d_H`` of the pair."""
    if dtn is None or dtn.lifts is None:
        dtn = dtn_matrix(mesh, basis, keep_lifts=True)
    mat = derivative_matrix(U, mesh, dtn.lifts)
    d_h = 0.0
    if p1 is not None:
        d_h = hausdorff_boundary(U.p0, p1, mesh.h / 4 if spacing is None else spacing)
    meta = {"h": mesh.h, "k": mesh.k, "n_basis": len(basis), "surrogate": "S^-1/4 M S^-1/4, S = stiffness + mass on Sigma"}
    return DerivativeOperatorProbe(mat, surrogate_norm(mat, basis), float(d_h), meta)


def F_prime_continuity_probe(U, f, g, mesh, t_list, rel_step=0.1, method="pullback"):
    """Table of ``|F'(t) - F'(0)|`` with ``F'(t)`` from centred differences of F.

    Returns ``(rows, exponent)`` where rows are ``(t, F'(t), |F'(t) - F'(0)|)``
    and the exponent is the least-squares slope of log gap against log t.
    """
    d0 = F_prime_distributed(U, f, g, mesh).value
    rows = []
    for t in t_list:
        dt = rel_step * t
        fp = (F_value(U, t + dt, f, g, mesh, method) - F_value(U, t - dt, f, g, mesh, method)) / (2 * dt)
        rows.append((float(t), float(fp), float(abs(fp - d0))))
    gaps = np.array([r[2] for r in rows])
    ts = np.array([r[0] for r in rows])
    ok = gaps > 0
    exponent = float(np.polyfit(np.log(ts[ok]), np.log(gaps[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    return rows, exponent
