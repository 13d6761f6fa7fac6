"""Structured tetrahedral meshes and piecewise-linear finite elements.

Every mesh is built from a cubic grid of step ``h``; each cube is split into
twelve tetrahedra joining its centre to two triangles per face.  The face
diagonal is picked from the parity of the face's lowest lattice corner, a
rule that both neighbouring cubes agree on, so the mesh is conforming.
Nodes carry integer lattice keys (units of h/2) so that a mesh of the
augmented domain restricts exactly to the mesh of the physical domain.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _clip, _quadrature
from ._primitives import distance_to_triangles
from .errors import FeatureUnderResolved, MeshMismatch, NoConvergence, SourceTooClose

SIGMA, OUTER, SHARP = 1, 2, 3

# cube corner index = dx + 2 dy + 4 dz; faces listed from their lowest corner
_CUBE_FACES = np.array(
    [
        (0, 2, 6, 4), (1, 3, 7, 5),
        (0, 1, 5, 4), (2, 3, 7, 6),
        (0, 1, 3, 2), (4, 5, 7, 6),
    ]
)
_CORNER_BITS = np.array([[(c >> d) & 1 for d in range(3)] for c in range(8)])


@dataclass(frozen=True)
class DomainSpec:
    """Outer domain, its accessible boundary part and the augmentation.

    ``shape="box"``: the box ``[lower, upper]``; the accessible part is the
    face ``x[sigma_axis] = upper`` (``sigma_side=1``) or ``= lower``.  The
    augmentation is a box of depth ``augment_depth`` glued on that face over
    its central ``augment_fraction`` (snapped to the grid).

    ``shape="ball"``: the ball of ``radius`` about ``center``; the accessible
    part is the cap of angular radius ``cap_angle`` about ``+e[sigma_axis]``.
    ``inner_radius > 0`` inserts a concentric spherical core of contrast k.
    """

    shape: str = "box"
    lower: tuple = (0.0, 0.0, 0.0)
    upper: tuple = (1.0, 1.0, 1.0)
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 0.5
    sigma_axis: int = 2
    sigma_side: int = 1
    cap_angle: float = np.pi
    inner_radius: float = 0.0
    augment_fraction: float = 0.6
    augment_depth: float = 0.3

    def __post_init__(self):
        if self.shape not in ("box", "ball"):
            raise ValueError(f"unknown domain shape {self.shape!r}")
        if self.sigma_side not in (-1, 1):
            raise ValueError("sigma_side must be +1 or -1")

    def contains(self, points):
        p = np.atleast_2d(points)
        if self.shape == "box":
            return np.all((p >= np.array(self.lower)) & (p <= np.array(self.upper)), axis=1)
        return np.linalg.norm(p - np.array(self.center), axis=1) <= self.radius

    def distance_to_boundary(self, points):
        """Unsigned distance to the outer boundary (for interior points)."""
        p = np.atleast_2d(points)
        if self.shape == "box":
            lo, hi = np.array(self.lower), np.array(self.upper)
            return np.min(np.minimum(p - lo, hi - p), axis=1)
        return np.abs(self.radius - np.linalg.norm(p - np.array(self.center), axis=1))

    def on_sigma(self, points, tol=1e-9):
        p = np.atleast_2d(points)
        if self.shape == "box":
            level = (self.upper if self.sigma_side > 0 else self.lower)[self.sigma_axis]
            return np.abs(p[:, self.sigma_axis] - level) <= tol
        q = p - np.array(self.center)
        r = np.linalg.norm(q, axis=1)
        cosang = q[:, self.sigma_axis] / np.maximum(r, 1e-300)
        return (np.abs(r - self.radius) <= tol) & (cosang >= np.cos(self.cap_angle) - 1e-12)

    def grid_counts(self, h):
        ext = np.array(self.upper) - np.array(self.lower)
        n = np.rint(ext / h).astype(int)
        if np.any(np.abs(n * h - ext) > 1e-9 * ext):
            raise ValueError(f"box extents {ext} are not multiples of h = {h}")
        return n

    def augmentation_cubes(self, h):
        """Index ranges (lo, hi) per axis of the augmentation cubes."""
        n = self.grid_counts(h)
        ax = self.sigma_axis
        lo = np.zeros(3, dtype=int)
        hi = n.copy()
        for d in range(3):
            if d == ax:
                continue
            a = int(np.rint(n[d] * (1 - self.augment_fraction) / 2))
            lo[d], hi[d] = a, n[d] - a
        nd = int(np.rint(self.augment_depth / h))
        if self.sigma_side > 0:
            lo[ax], hi[ax] = n[ax], n[ax] + nd
        else:
            lo[ax], hi[ax] = -nd, 0
        return lo, hi


@dataclass(eq=False)
class TetMesh:
    """Tetrahedral mesh with per-element conductivity.

    ``fraction`` is the exact volume fraction of each element inside the
    inclusion, and the conductivity is ``1 + (k - 1) * fraction``.
    ``in_omega`` flags elements of the physical domain (all of them unless
    the mesh covers the augmented domain).
    """

    nodes: np.ndarray
    tets: np.ndarray
    lattice: np.ndarray
    h: float
    domain: DomainSpec
    in_omega: np.ndarray
    fraction: np.ndarray
    k: float = 2.0
    augmented: bool = False
    polys: tuple = ()
    cache: dict = field(default_factory=dict, repr=False)

    def _cached(self, key, fn):
        if key not in self.cache:
            self.cache[key] = fn()
        return self.cache[key]

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.tets)

    @property
    def conductivity(self):
        return 1.0 + (self.k - 1.0) * self.fraction

    @property
    def element_points(self):
        return self._cached("element_points", lambda: self.nodes[self.tets])

    @property
    def centroids(self):
        return self._cached("centroids", lambda: self.element_points.mean(axis=1))

    @property
    def volumes(self):
        return self._cached("volumes", lambda: _clip.tet_volumes(self.element_points))

    @property
    def gradients(self):
        """Gradients of the four barycentric hat functions, (m, 4, 3)."""

        def make():
            x = self.element_points
            d = x[:, 1:] - x[:, :1]
            g = np.linalg.inv(d).transpose(0, 2, 1)
            return np.concatenate([-g.sum(axis=1, keepdims=True), g], axis=1)

        return self._cached("gradients", make)

    @property
    def boundary_faces(self):
        """Exterior triangles (f, 3) and their markers (f,)."""
        return self._cached("boundary_faces", lambda: _boundary_faces(self))

    @property
    def dirichlet_mask(self):
        def make():
            m = np.zeros(self.n_nodes, dtype=bool)
            m[self.boundary_faces[0].ravel()] = True
            return m

        return self._cached("dirichlet_mask", make)

    @property
    def sigma_nodes(self):
        """Nodes on the accessible boundary part (physical mesh only)."""

        def make():
            f, mk = self.boundary_faces
            return np.unique(f[mk == SIGMA])

        return self._cached("sigma_nodes", make)

    @property
    def basis_nodes(self):
        """Accessible-boundary nodes whose hat function is supported in it."""

        def make():
            f, mk = self.boundary_faces
            rim = np.unique(f[mk != SIGMA])
            return np.setdiff1d(self.sigma_nodes, rim)

        return self._cached("basis_nodes", make)

    def key_index(self):
        """Map from lattice key tuple to node index."""
        return self._cached("key_index", lambda: {tuple(k): i for i, k in enumerate(self.lattice.tolist())})

    def with_polyhedra(self, polys, k=None):
        """Same mesh with conductivity recomputed for new inclusions."""
        k = self.k if k is None else k
        frac = inclusion_fractions(self, polys)
        return dataclasses.replace(self, fraction=frac, k=k, polys=tuple(polys))

    def with_fraction(self, fraction, k=None):
        return dataclasses.replace(self, fraction=np.asarray(fraction, dtype=float), k=self.k if k is None else k, polys=())

    def locate(self, points):
        """Index of an element containing each point (-1 if outside)."""
        return _locate(self, np.atleast_2d(points))


def _boundary_faces(mesh):
    t = mesh.tets
    faces = np.concatenate([t[:, [1, 2, 3]], t[:, [0, 3, 2]], t[:, [0, 1, 3]], t[:, [0, 2, 1]]])
    key = np.sort(faces, axis=1)
    _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    ext = faces[cnt[inv.ravel()] == 1]
    if mesh.augmented:
        return ext, np.full(len(ext), SHARP, dtype=np.int8)
    on_sig = np.all(mesh.domain.on_sigma(mesh.nodes[ext.ravel()], tol=1e-9 * mesh.h).reshape(-1, 3), axis=1)
    mk = np.where(on_sig, SIGMA, OUTER).astype(np.int8)
    return ext, mk


def _locate(mesh, pts):
    """Point location on the structured grid via cube index and barycentrics."""
    if mesh.domain.shape != "box":
        return _locate_brute(mesh, pts)
    out = np.full(len(pts), -1, dtype=np.int64)
    origin, h, lo, table = mesh._cached("cube_lookup", lambda: _cube_lookup(mesh))
    inv = _barycentric_maps(mesh)
    x0 = mesh.element_points[:, 0]
    ijk = np.floor((pts - origin) / h).astype(np.int64) - lo
    shifts = [(0, 0, 0)] + [s for s in np.ndindex(3, 3, 3) if s != (1, 1, 1)]
    for shift in shifts:
        todo = np.flatnonzero(out < 0)
        if len(todo) == 0:
            break
        off = np.zeros(3, dtype=np.int64) if shift == (0, 0, 0) else np.array(shift) - 1
        for sl in range(0, len(todo), 65536):
            idx = todo[sl : sl + 65536]
            c = ijk[idx] + off
            valid = np.all((c >= 0) & (c < np.array(table.shape[:3])), axis=1)
            cand = np.full((len(idx), table.shape[3]), -1, dtype=np.int64)
            cand[valid] = table[c[valid, 0], c[valid, 1], c[valid, 2]]
            safe = np.maximum(cand, 0)
            lam = np.einsum("nsij,nsj->nsi", inv[safe], pts[idx, None] - x0[safe])
            ok = (cand >= 0) & np.all(lam >= -1e-10, axis=2) & (lam.sum(axis=2) <= 1 + 1e-10)
            hit = np.any(ok, axis=1)
            out[idx[hit]] = cand[hit, np.argmax(ok[hit], axis=1)]
    return out


def _barycentric_maps(mesh):
    return mesh._cached("barycentric_maps", lambda: np.linalg.inv(
        (mesh.element_points[:, 1:] - mesh.element_points[:, :1]).transpose(0, 2, 1)))


def barycentric(mesh, elements, pts):
    """Barycentric coordinates (n, 4) of points in the given elements."""
    inv = _barycentric_maps(mesh)
    lam = np.einsum("nij,nj->ni", inv[elements], pts - mesh.element_points[elements, 0])
    return np.column_stack([1.0 - lam.sum(axis=1), lam])


def _barycentric(x, p):
    d = x[:, 1:] - x[:, :1]
    l123 = np.linalg.solve(d.transpose(0, 2, 1), (p - x[:, 0])[..., None])[..., 0]
    return np.column_stack([1 - l123.sum(axis=1), l123])


def _locate_brute(mesh, pts):
    out = np.full(len(pts), -1, dtype=np.int64)
    for j, p in enumerate(pts):
        near = np.flatnonzero(np.linalg.norm(mesh.centroids - p, axis=1) < 2 * mesh.h)
        if len(near):
            lam = _barycentric(mesh.element_points[near], p)
            ok = np.all(lam >= -1e-10, axis=1)
            if np.any(ok):
                out[j] = near[np.argmax(ok)]
    return out


def _cube_lookup(mesh):
    """Dense table of the elements in each grid cube (padded with -1)."""
    origin = np.array(mesh.domain.lower, dtype=float)
    cube = np.floor(mesh.lattice[mesh.tets].mean(axis=1) / 2).astype(np.int64)
    lo = cube.min(axis=0)
    cube -= lo
    shape = cube.max(axis=0) + 1
    flat = np.ravel_multi_index(cube.T, shape)
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=int(np.prod(shape)))
    width = int(counts.max())
    slot = np.arange(len(flat)) - np.repeat(np.cumsum(counts) - counts, counts)
    table = np.full((int(np.prod(shape)), width), -1, dtype=np.int64)
    table[flat[order], slot] = order
    return origin, mesh.h, lo, table.reshape(*shape, width)


def _structured_tets(cubes, radial_center=None):
    """Lattice keys and connectivity for a set of unit cubes (integer ids).

    Face diagonals follow the lattice parity unless ``radial_center`` (in
    cube units) is given; then each diagonal is laid along the plane
    ``|a| = |b|`` through that centre so that no element straddles a kink
    of the max-norm, which the radial ball map would fold.
    """
    corner_keys = 2 * (cubes[:, None, :] + _CORNER_BITS[None])  # (c, 8, 3)
    center_keys = 2 * cubes + 1
    allkeys = np.concatenate([corner_keys.reshape(-1, 3), center_keys])
    lo = allkeys.min(axis=0)
    span = allkeys.max(axis=0) - lo + 1
    lin = ((allkeys - lo) * np.array([span[1] * span[2], span[2], 1])).sum(axis=1)
    uniq, inv = np.unique(lin, return_inverse=True)
    inv = inv.ravel()
    keys = np.empty((len(uniq), 3), dtype=np.int64)
    keys[inv] = allkeys
    nc = len(cubes)
    corner_id = inv[: 8 * nc].reshape(nc, 8)
    center_id = inv[8 * nc:]
    tets = []
    for face in _CUBE_FACES:
        q = corner_id[:, face]
        low = cubes + _CORNER_BITS[face[0]]
        if radial_center is None:
            even = (low.sum(axis=1) % 2) == 0
        else:
            span = _CORNER_BITS[face[2]] - _CORNER_BITS[face[0]]
            rel = (low + 0.5 * span - radial_center)[:, span == 1]
            even = rel[:, 0] * rel[:, 1] > 0
        t1 = np.where(even[:, None], q[:, [0, 1, 2]], q[:, [0, 1, 3]])
        t2 = np.where(even[:, None], q[:, [0, 2, 3]], q[:, [1, 2, 3]])
        tets.append(np.column_stack([center_id, t1]))
        tets.append(np.column_stack([center_id, t2]))
    tets = np.stack(tets, axis=1).reshape(-1, 4)
    return keys, tets


def _orient(nodes, tets):
    x = nodes[tets]
    det = np.einsum("ij,ij->i", x[:, 1] - x[:, 0], np.cross(x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]))
    neg = det < 0
    tets[neg] = tets[neg][:, [0, 2, 1, 3]]
    if np.any(det == 0):
        raise ValueError("degenerate element")
    return tets


def inclusion_fractions(mesh, polys):
    """Summed exact volume fractions of the polyhedra in each element."""
    frac = np.zeros(mesh.n_elements)
    idx = np.flatnonzero(mesh.in_omega)
    for poly in polys:
        frac[idx] += _clip.polyhedron_fractions(poly, mesh.element_points[idx])
    return np.minimum(frac, 1.0)


def check_resolution(polys, h, layers=4):
    """Each face must span at least ``layers`` cells across its inscribed disc."""
    from .geometry import face_inradius

    for poly in polys:
        for i in range(len(poly.faces)):
            r = face_inradius(poly, i)
            if 2 * r < layers * h:
                raise FeatureUnderResolved(f"face {i} has inscribed diameter {2 * r:.3g} < {layers} h")


def mesh_domain(spec, polys=(), h=1 / 24, k=2.0, augmented=False):
    """Mesh the physical (or augmented) domain and set conductivities."""
    polys = tuple(polys)
    if spec.shape == "ball":
        if augmented:
            raise ValueError("augmentation is only defined for box domains")
        return _ball_mesh(spec, h, k, polys)
    check_resolution(polys, h)
    n = spec.grid_counts(h)
    g = np.stack(np.meshgrid(*[np.arange(m) for m in n], indexing="ij"), axis=-1).reshape(-1, 3)
    cubes = [g]
    if augmented:
        lo, hi = spec.augmentation_cubes(h)
        a = np.stack(np.meshgrid(*[np.arange(lo[d], hi[d]) for d in range(3)], indexing="ij"), axis=-1).reshape(-1, 3)
        cubes.append(a)
    cubes = np.concatenate(cubes)
    in_omega_cube = np.zeros(len(cubes), dtype=bool)
    in_omega_cube[: len(g)] = True
    keys, tets = _structured_tets(cubes)
    nodes = np.array(spec.lower) + keys * (h / 2)
    tets = _orient(nodes, tets)
    in_omega = np.repeat(in_omega_cube, 12)
    mesh = TetMesh(nodes, tets, keys, h, spec, in_omega, np.zeros(len(tets)), k, augmented, polys)
    if polys:
        mesh.fraction = inclusion_fractions(mesh, polys)
    return mesh


def _ball_mesh(spec, h, k, polys):
    r = spec.radius
    n = int(np.rint(2 * r / h))
    if abs(n * h - 2 * r) > 1e-9 * r:
        raise ValueError("ball diameter must be a multiple of h")
    g = np.stack(np.meshgrid(*[np.arange(n)] * 3, indexing="ij"), axis=-1).reshape(-1, 3)
    keys, tets = _structured_tets(g, radial_center=np.full(3, n / 2))
    p = keys * (h / 2) - r
    inf = np.max(np.abs(p), axis=1)
    two = np.linalg.norm(p, axis=1)
    scale = np.divide(inf, two, out=np.zeros_like(inf), where=two > 0)
    nodes = np.array(spec.center) + p * scale[:, None]
    tets = _orient(nodes, tets)
    frac = np.zeros(len(tets))
    if spec.inner_radius > 0:
        cube_cent = p[tets].mean(axis=1)
        frac = (np.max(np.abs(cube_cent), axis=1) < spec.inner_radius).astype(float)
    mesh = TetMesh(nodes, tets, keys, h, spec, np.ones(len(tets), dtype=bool), frac, k, False, polys)
    if polys:
        check_resolution(polys, h)
        mesh.fraction = np.minimum(1.0, frac + inclusion_fractions(mesh, polys))
    return mesh


# ---------------------------------------------------------------- assembly


def element_matrices(mesh, coefficient=None, elements=None):
    """Local stiffness matrices (m, 4, 4) for scalar or tensor coefficients."""
    c = mesh.conductivity if coefficient is None else np.asarray(coefficient)
    g, vol = mesh.gradients, mesh.volumes
    if elements is not None:
        c, g, vol = c[elements], g[elements], vol[elements]
    if c.ndim == 1:
        return (c * vol)[:, None, None] * np.einsum("eik,ejk->eij", g, g)
    return vol[:, None, None] * np.einsum("eik,ekl,ejl->eij", g, c, g)


def assemble(mesh, coefficient=None, elements=None):
    """Global stiffness matrix (CSR) of ``-div(c grad u)``.

    ``coefficient`` defaults to the mesh conductivity and may be (m,) or a
    tensor field (m, 3, 3).  ``elements`` restricts the sum to a subset.
    """
    ke = element_matrices(mesh, coefficient, elements)
    t = mesh.tets if elements is None else mesh.tets[elements]
    rows = np.repeat(t, 4, axis=1).ravel()
    cols = np.tile(t, (1, 4)).ravel()
    k = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    k.sum_duplicates()
    return k


def mass_matrix(mesh):
    vol = mesh.volumes
    local = (np.ones((4, 4)) + np.eye(4)) / 20.0
    t = mesh.tets
    rows = np.repeat(t, 4, axis=1).ravel()
    cols = np.tile(t, (1, 4)).ravel()
    vals = (vol[:, None, None] * local[None]).ravel()
    return sp.coo_matrix((vals, (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()


@dataclass
class DiscreteField:
    """Nodal values of a piecewise-linear function on a mesh."""

    mesh: TetMesh
    values: np.ndarray
    role: str = "solution"

    def gradient(self):
        """Elementwise constant gradient (m, 3)."""
        return np.einsum("eij,ei->ej", self.mesh.gradients, self.values[self.mesh.tets])

    def __call__(self, points):
        pts = np.atleast_2d(points)
        e = self.mesh.locate(pts)
        if np.any(e < 0):
            raise ValueError("point outside the mesh")
        lam = barycentric(self.mesh, e, pts)
        return np.einsum("ij,ij->i", lam, self.values[self.mesh.tets[e]])


class DirichletSolver:
    """Repeated solves of ``K u = f`` with prescribed boundary values.

    ``method="cg"`` uses Jacobi-preconditioned conjugate gradients to a
    relative residual of ``rtol``; ``method="lu"`` factorises the interior
    block once (SuperLU) and is preferred for many right-hand sides.
    """

    def __init__(self, mesh, K=None, method="cg", rtol=1e-10, maxiter=20000):
        self.mesh = mesh
        self.K = assemble(mesh) if K is None else K
        self.method = method
        self.rtol = rtol
        self.maxiter = maxiter
        self.fixed = mesh.dirichlet_mask
        self.free = np.flatnonzero(~self.fixed)
        self.bnd = np.flatnonzero(self.fixed)
        kf = self.K[self.free]
        self.K_ff = kf[:, self.free].tocsc()
        self.K_fb = kf[:, self.bnd].tocsc()
        self._lu = None
        self._diag = self.K_ff.diagonal()

    def factor(self):
        if self._lu is None:
            self._lu = spla.splu(self.K_ff, permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
        return self._lu

    def _solve_free(self, rhs, x0=None):
        if self.method == "lu":
            return self.factor().solve(rhs)
        if rhs.ndim == 2:
            return np.column_stack([self._solve_free(rhs[:, j]) for j in range(rhs.shape[1])])
        if not np.any(rhs):
            return np.zeros_like(rhs)
        prec = spla.LinearOperator(self.K_ff.shape, matvec=lambda r: r / self._diag)
        x, info = spla.cg(self.K_ff, rhs, x0=x0, rtol=self.rtol, atol=0.0, maxiter=self.maxiter, M=prec)
        if info != 0:
            raise NoConvergence(f"CG did not reach rtol {self.rtol} in {self.maxiter} iterations")
        return x

    def solve(self, boundary_values=None, rhs=None):
        """Solve with boundary values (full nodal vector) and optional load."""
        n = self.mesh.n_nodes
        single = True
        if boundary_values is None and rhs is None:
            raise ValueError("need boundary values or a load vector")
        ref = boundary_values if boundary_values is not None else rhs
        ref = np.asarray(ref)
        single = ref.ndim == 1
        shape = (n,) if single else (n, ref.shape[1])
        u = np.zeros(shape)
        b = np.zeros((len(self.free),) + shape[1:])
        if boundary_values is not None:
            g = np.asarray(boundary_values, dtype=float)
            u[self.bnd] = g[self.bnd]
            b -= self.K_fb @ g[self.bnd]
        if rhs is not None:
            b += np.asarray(rhs, dtype=float)[self.free]
        u[self.free] = self._solve_free(b)
        return u


def solve_dirichlet(mesh, boundary_values, rhs=None, K=None, method="cg"):
    """Discrete solution with prescribed boundary values (DiscreteField)."""
    u = DirichletSolver(mesh, K, method=method).solve(boundary_values, rhs)
    return DiscreteField(mesh, u)


def energy_pairing(u, v, coefficient=None):
    """``u^T K v`` with the stiffness matrix of the common mesh."""
    if u.mesh is not v.mesh:
        raise MeshMismatch("fields live on different meshes")
    gu, gv = u.gradient(), v.gradient()
    c = u.mesh.conductivity if coefficient is None else coefficient
    if np.ndim(c) == 1:
        return float(np.sum(c * u.mesh.volumes * np.einsum("ij,ij->i", gu, gv)))
    return float(np.sum(u.mesh.volumes * np.einsum("ij,ijk,ik->i", gu, c, gv)))


# ---------------------------------------------------------------- Green


def bump(r, rho):
    """C^2 radial mollifier with unit mass supported in the ball of radius rho."""
    s = np.clip(r / rho, 0.0, 1.0)
    return 315.0 / (64.0 * np.pi * rho ** 3) * (1 - s * s) ** 3


def bump_load(mesh, y, rho, levels=1, order=4):
    """Load vector ``b_j = int bump(|x - y|) phi_j`` and its total mass."""
    y = np.asarray(y, dtype=float)
    cen = mesh.centroids
    reach = np.max(np.linalg.norm(mesh.element_points - cen[:, None], axis=-1), axis=1)
    cand = np.flatnonzero(np.linalg.norm(cen - y, axis=1) < rho + reach)
    bary, w = _quadrature.composite_rule(levels, order)
    pts = np.einsum("qi,mij->mqj", bary, mesh.element_points[cand])
    val = bump(np.linalg.norm(pts - y, axis=-1), rho) * (w[None] * mesh.volumes[cand, None])
    local = np.einsum("mq,qi->mi", val, bary)
    b = np.zeros(mesh.n_nodes)
    np.add.at(b, mesh.tets[cand].ravel(), local.ravel())
    return b


def _boundary_distance(mesh, y):
    f, _ = mesh.boundary_faces
    x = mesh.nodes
    return float(distance_to_triangles(np.atleast_2d(y), x[f[:, 0]], x[f[:, 1]], x[f[:, 2]])[0])


def green_approx(mesh, y, rho=None, solver=None, mass_tol=1e-6):
    """Mollified Green's function with pole at ``y`` and zero boundary values.

    The Dirac mass is replaced by :func:`bump` of radius ``rho`` (default
    3h).  Raises ``SourceTooClose`` when the bump is under-resolved or meets
    the boundary.
    """
    rho = 3 * mesh.h if rho is None else rho
    if rho < 2 * mesh.h:
        raise SourceTooClose(f"mollifier radius {rho:.3g} below 2h")
    if _boundary_distance(mesh, y) <= rho:
        raise SourceTooClose("mollifier support meets the boundary")
    b = bump_load(mesh, y, rho)
    if abs(b.sum() - 1.0) > mass_tol:
        raise NoConvergence(f"mollifier mass {b.sum():.8f} differs from one")
    solver = DirichletSolver(mesh) if solver is None else solver
    g = solver.solve(rhs=b)
    return DiscreteField(mesh, g, role="green")


def green_pairing(field, x0, rho=None):
    """Value of a Green's function tested against the bump at ``x0``."""
    rho = 3 * field.mesh.h if rho is None else rho
    return float(bump_load(field.mesh, x0, rho) @ field.values)


def restrict_to(field, target):
    """Restrict nodal values from a larger mesh to ``target`` via lattice keys."""
    src = field.mesh.key_index()
    try:
        idx = np.array([src[tuple(k)] for k in target.lattice.tolist()])
    except KeyError as exc:
        raise MeshMismatch("target mesh is not a sub-lattice of the source") from exc
    return DiscreteField(target, field.values[idx], role=field.role)


# ---------------------------------------------------------------- output


def write_vtk(mesh, path, point_data=None, cell_data=None):
    """Legacy ASCII VTK unstructured grid with optional fields."""
    point_data = point_data or {}
    cell_data = {"conductivity": mesh.conductivity, **(cell_data or {})}
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\npolystab mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_nodes} double\n")
        np.savetxt(fh, mesh.nodes, fmt="%.17g")
        fh.write(f"CELLS {mesh.n_elements} {5 * mesh.n_elements}\n")
        np.savetxt(fh, np.column_stack([np.full(mesh.n_elements, 4), mesh.tets]), fmt="%d")
        fh.write(f"CELL_TYPES {mesh.n_elements}\n")
        np.savetxt(fh, np.full(mesh.n_elements, 10), fmt="%d")
        fh.write(f"CELL_DATA {mesh.n_elements}\n")
        for name, val in cell_data.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            np.savetxt(fh, np.asarray(val, dtype=float), fmt="%.17g")
        if point_data:
            fh.write(f"POINT_DATA {mesh.n_nodes}\n")
            for name, val in point_data.items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                np.savetxt(fh, np.asarray(val, dtype=float), fmt="%.17g")


def write_field_csv(field, path):
    """Node coordinates and values as CSV (x, y, z, value)."""
    data = np.column_stack([field.mesh.nodes, field.values])
    np.savetxt(path, data, delimiter=",", header="x,y,z,value", comments="", fmt="%.17g")
