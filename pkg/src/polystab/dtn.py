"""Local Dirichlet-to-Neumann maps, singular solutions and related probes.

The discrete local DtN map on the accessible boundary part is the Schur
complement of the stiffness matrix onto the hat functions supported there,
with zero data on the rest of the boundary.  Operator differences are
measured in the surrogate norm ``||S^{-1/4} (L0 - L1) S^{-1/4}||_2`` where
``S`` is the boundary stiffness plus mass matrix of the basis, a discrete
stand-in for the H^{1/2} -> H^{-1/2} operator norm.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import _primitives as prim
from . import fem
from . import geometry as geo
from .errors import BasisMismatch, SingularPoint, SourceTooClose, TraceNotCompact


@dataclass(eq=False)
class BoundaryBasis:
    """Hat functions of the physical mesh supported in the accessible part."""

    mesh: fem.TetMesh
    nodes: np.ndarray

    @classmethod
    def from_mesh(cls, mesh, stride=1):
        """All admissible nodes, optionally thinned on the lattice."""
        nodes = mesh.basis_nodes
        if stride > 1:
            key = mesh.lattice[nodes] // 2
            keep = np.all(key % stride == 0, axis=1)
            nodes = nodes[keep]
        return cls(mesh, nodes)

    def __len__(self):
        return len(self.nodes)

    def compatible(self, other):
        return len(self.nodes) == len(other.nodes) and np.array_equal(
            self.mesh.lattice[self.nodes], other.mesh.lattice[other.nodes]
        )

    @cached_property
    def _surface(self):
        f, mk = self.mesh.boundary_faces
        tri = f[mk == fem.SIGMA]
        x = self.mesh.nodes
        p0, p1, p2 = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
        area = 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)
        e = np.stack([p2 - p1, p0 - p2, p1 - p0], axis=1)  # edge opposite each corner
        stiff = np.einsum("tik,tjk->tij", e, e) / (4 * area[:, None, None])
        mass = area[:, None, None] * (np.ones((3, 3)) + np.eye(3))[None] / 12.0
        n = self.mesh.n_nodes
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        K = sp.coo_matrix((stiff.ravel(), (rows, cols)), shape=(n, n)).tocsr()
        M = sp.coo_matrix((mass.ravel(), (rows, cols)), shape=(n, n)).tocsr()
        idx = self.nodes
        return K[idx][:, idx].toarray(), M[idx][:, idx].toarray()

    @property
    def mass(self):
        return self._surface[1]

    @property
    def stiffness(self):
        return self._surface[0]

    @cached_property
    def norm_weight(self):
        """``S^{-1/4}`` with ``S`` = boundary stiffness + mass."""
        w, v = np.linalg.eigh(self.stiffness + self.mass)
        return (v * w ** -0.25) @ v.T

    def coordinates(self):
        return self.mesh.nodes[self.nodes]

    def interpolate(self, fn):
        """Nodal coefficients of a function given on the boundary."""
        return np.asarray(fn(self.coordinates()), dtype=float)


@dataclass(eq=False)
class DtNMatrix:
    """Discrete DtN matrix on a boundary basis.

    ``lifts`` (optional, shape (n_nodes, n_basis)) holds the discrete
    harmonic extensions of the basis functions.
    """

    matrix: np.ndarray
    basis: BoundaryBasis
    metadata: dict = field(default_factory=dict)
    lifts: np.ndarray = None

    def apply(self, f):
        return self.matrix @ f

    def pairing(self, f, g):
        return float(f @ self.matrix @ g)


def dtn_matrix(mesh, basis=None, keep_lifts=False, solver=None):
    """Schur complement of the stiffness matrix onto the basis nodes.

    The interior block is factorised once (sparse LU with a minimum-degree
    ordering) and solved against all basis columns.
    """
    basis = BoundaryBasis.from_mesh(mesh) if basis is None else basis
    if basis.mesh is not mesh and not np.array_equal(basis.mesh.lattice, mesh.lattice):
        raise BasisMismatch("basis belongs to another mesh")
    solver = fem.DirichletSolver(mesh, method="lu") if solver is None else solver
    pos = np.searchsorted(solver.bnd, basis.nodes)
    if not np.array_equal(solver.bnd[pos], basis.nodes):
        raise BasisMismatch("basis nodes must lie on the Dirichlet boundary")
    rhs = solver.K_fb[:, pos].toarray()
    x = solver.factor().solve(rhs) if solver.method == "lu" else solver._solve_free(rhs)
    idx = basis.nodes
    kbb = solver.K[idx][:, idx].toarray()
    lam = kbb - rhs.T @ x
    meta = {"h": mesh.h, "k": mesh.k, "n_basis": len(idx), "n_nodes": mesh.n_nodes}
    lifts = None
    if keep_lifts:
        lifts = np.zeros((mesh.n_nodes, len(idx)))
        lifts[idx, np.arange(len(idx))] = 1.0
        lifts[solver.free] = -x
    return DtNMatrix(lam, basis, meta, lifts)


def _as_matrix(op):
    return op.matrix if isinstance(op, DtNMatrix) else np.asarray(op)


def dtn_norm_diff(op0, op1, basis=None):
    """Surrogate operator norm of the difference of two DtN matrices."""
    if isinstance(op0, DtNMatrix) and isinstance(op1, DtNMatrix):
        if not op0.basis.compatible(op1.basis):
            raise BasisMismatch("DtN matrices use different bases")
        basis = op0.basis if basis is None else basis
    if basis is None:
        raise ValueError("a basis is required for raw matrices")
    w = basis.norm_weight
    d = _as_matrix(op0) - _as_matrix(op1)
    return float(np.linalg.norm(w @ d @ w, 2))


def surrogate_norm(matrix, basis):
    w = basis.norm_weight
    return float(np.linalg.norm(w @ np.asarray(matrix) @ w, 2))


@dataclass
class FormSign:
    """Extreme eigenvalues of the symmetrised difference, relative to |L0|."""

    min_eig: float
    max_eig: float
    scale: float

    @property
    def relative_min(self):
        return self.min_eig / self.scale

    @property
    def relative_max(self):
        return self.max_eig / self.scale


def quadratic_form_sign(op0, op1):
    """Spectrum bounds of ``sym(L1 - L0)`` (positive when L1 dominates)."""
    a, b = _as_matrix(op0), _as_matrix(op1)
    d = b - a
    w = np.linalg.eigvalsh(0.5 * (d + d.T))
    scale = float(np.linalg.norm(a, 2))
    return FormSign(float(w[0]), float(w[-1]), scale)


# ---------------------------------------------------------------- biphase


@dataclass(frozen=True)
class BiphasePlane:
    """Two-phase medium split by a plane.

    With ``s = (x - point) . normal`` the conductivity is ``k`` where
    ``s > offset`` and 1 elsewhere.
    """

    point: tuple = (0.0, 0.0, 0.0)
    normal: tuple = (0.0, 0.0, 1.0)
    offset: float = 0.0
    k: float = 2.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "normal", tuple(n / np.linalg.norm(n)))

    def height(self, x):
        return (np.atleast_2d(x) - np.array(self.point)) @ np.array(self.normal) - self.offset

    def conductivity(self, x):
        return np.where(self.height(x) > 0, self.k, 1.0)

    def reflect(self, y):
        y = np.asarray(y, dtype=float)
        return y - 2 * self.height(y)[..., None] * np.array(self.normal)


def laplace_fundamental(x, y):
    """``1 / (4 pi |x - y|)`` and its gradient in x."""
    d = np.atleast_2d(x) - np.asarray(y, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0):
        raise SingularPoint("evaluation at the pole")
    return 1.0 / (4 * np.pi * r), -d / (4 * np.pi * r[..., None] ** 3)


def biphase_fundamental(plane, x, y):
    """Fundamental solution of ``div(gamma grad u) = -delta_y`` for a plane.

    Image-charge form: on the source side
    ``(1/g_s) [G(x, y) + (g_s - g_o)/(g_s + g_o) G(x, y*)]``, across the
    interface ``2/(g_s + g_o) G(x, y)``, with ``G = 1/(4 pi r)`` and ``y*``
    the mirror image of ``y``.  Returns values and gradients in x.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    g_s = float(plane.conductivity(y)[0])
    g_o = plane.k if g_s == 1.0 else 1.0
    same = (plane.height(x) > 0) == (plane.height(y)[0] > 0)
    v, g = laplace_fundamental(x, y)
    val = np.empty(len(x))
    grad = np.empty((len(x), 3))
    t = 2.0 / (g_s + g_o)
    val[~same] = t * v[~same]
    grad[~same] = t * g[~same]
    if np.any(same):
        r = (g_s - g_o) / (g_s + g_o)
        vi, gi = laplace_fundamental(x[same], plane.reflect(y))
        val[same] = (v[same] + r * vi) / g_s
        grad[same] = (g[same] + r * gi) / g_s
    return val, grad


# ---------------------------------------------------------------- S and identity


def _check_source(point, polys, rho):
    for poly in polys:
        if geo.contains(poly, point)[0] != geo.OUTSIDE:
            raise SourceTooClose("source point lies in an inclusion")
        if geo.distance_to_edges(poly, point)[0] < 2 * rho:
            raise SourceTooClose("source point too close to an edge")


def green_pair(mesh_sharp, d0, d1, y, z, rho=None, rtol=1e-10):
    """Mollified Green's functions for two inclusions on the augmented mesh."""
    rho = 3 * mesh_sharp.h if rho is None else rho
    _check_source(y, (d0, d1), rho)
    _check_source(z, (d0, d1), rho)
    m0 = mesh_sharp.with_polyhedra([d0])
    m1 = mesh_sharp.with_polyhedra([d1])
    g0 = fem.green_approx(m0, y, rho, solver=fem.DirichletSolver(m0, rtol=rtol))
    g1 = fem.green_approx(m1, z, rho, solver=fem.DirichletSolver(m1, rtol=rtol))
    return m0, m1, g0, g1


def s_from_greens(m0, m1, g0, g1):
    """``int (gamma_0 - gamma_1) grad G0 . grad G1`` over the physical part."""
    dg = (m0.conductivity - m1.conductivity) * m0.in_omega
    return float(np.sum(dg * m0.volumes * np.einsum("ij,ij->i", g0.gradient(), g1.gradient())))


def S_function(mesh_sharp, d0, d1, y, z, rho=None):
    """Singular-solution pairing ``(k-1) int (chi_D0 - chi_D1) grad G0 . grad G1``."""
    m0, m1, g0, g1 = green_pair(mesh_sharp, d0, d1, y, z, rho)
    return s_from_greens(m0, m1, g0, g1)


@dataclass
class AlessandriniReport:
    volume_side: float
    boundary_side: float

    @property
    def residual(self):
        return abs(self.volume_side - self.boundary_side) / max(abs(self.volume_side), 1e-300)


def alessandrini_residual(mesh_sharp, omega_mesh, d0, d1, y, z, rho=None, tol=1e-12, rtol=1e-10):
    """Compare the volume pairing with the DtN-difference boundary pairing.

    The Green's functions are computed on the augmented mesh, restricted to
    the physical mesh and their traces fed to the two local DtN maps.
    Both sides share one discretization, so the residual measures the
    solver tolerance ``rtol`` rather than the mesh size.
    """
    m0, m1, g0, g1 = green_pair(mesh_sharp, d0, d1, y, z, rho, rtol)
    vol = s_from_greens(m0, m1, g0, g1)
    o0 = omega_mesh.with_polyhedra([d0])
    o1 = omega_mesh.with_polyhedra([d1])
    t0 = fem.restrict_to(g0, o0).values
    t1 = fem.restrict_to(g1, o1).values
    basis = BoundaryBasis.from_mesh(omega_mesh)
    off = np.setdiff1d(np.flatnonzero(omega_mesh.dirichlet_mask), basis.nodes)
    for t in (t0, t1):
        if np.max(np.abs(t[off]), initial=0.0) > tol * np.max(np.abs(t)):
            raise TraceNotCompact("Green's function trace leaks outside the accessible part")
    f0 = np.zeros(omega_mesh.n_nodes)
    f0[basis.nodes] = t0[basis.nodes]
    f1 = np.zeros(omega_mesh.n_nodes)
    f1[basis.nodes] = t1[basis.nodes]
    # <L f0, f1> = (K u_f0) . f1 with u_f0 the discrete harmonic extension
    pair = []
    for om in (o0, o1):
        s = fem.DirichletSolver(om, rtol=rtol)
        u = s.solve(f0)
        pair.append(float((s.K @ u)[basis.nodes] @ f1[basis.nodes]))
    return AlessandriniReport(vol, pair[0] - pair[1])


# ---------------------------------------------------------------- singular probe


@dataclass
class SingularGreen:
    """Green's function split as ``G = Gamma_hat + w``.

    ``Gamma_hat`` is the biphase fundamental solution of the face plane
    nearest the pole and ``w`` the finite-element correction, which is
    smooth near the pole because the two conductivities agree there.
    """

    plane: BiphasePlane
    pole: np.ndarray
    correction: fem.DiscreteField

    def gradient(self, points, elements=None):
        _, g = biphase_fundamental(self.plane, points, self.pole)
        mesh = self.correction.mesh
        e = mesh.locate(points) if elements is None else elements
        gw = np.einsum("eij,ei->ej", mesh.gradients[e], self.correction.values[mesh.tets[e]])
        return g, gw


def _face_plane(poly, point, k):
    a, b, c = poly.triangle_corners
    _, idx = prim.distance_to_triangles(np.atleast_2d(point), a, b, c, return_index=True)
    face = int(poly.triangle_face[idx[0]])
    n = poly.face_normals[face]
    anchor = poly.face_centroids[face]
    return BiphasePlane(tuple(anchor), tuple(-n), 0.0, k), face


def singular_green(mesh_sharp, poly, pole, solver=None):
    """Subtracted Green's function of the inclusion ``poly`` with pole ``pole``."""
    from ._clip import halfspace_fractions

    pole = np.asarray(pole, dtype=float)
    k = mesh_sharp.k
    mesh = mesh_sharp.with_polyhedra([poly])
    plane, _ = _face_plane(poly, pole, k)
    n = -np.array(plane.normal)
    half = halfspace_fractions(mesh.element_points, n, float(n @ np.array(plane.point)))
    diff = mesh.conductivity - (1.0 + (k - 1.0) * half)
    diff[np.abs(diff) < 1e-12] = 0.0
    el = np.flatnonzero(diff)
    rhs = np.zeros(mesh.n_nodes)
    if len(el):
        from ._quadrature import points_and_weights

        qp, qw = points_and_weights(mesh.element_points[el], 0, 2)
        _, g = biphase_fundamental(plane, qp.reshape(-1, 3), pole)
        mean_g = np.einsum("eq,eqj->ej", qw, g.reshape(len(el), -1, 3))  # integral over element
        local = -diff[el, None] * np.einsum("eij,ej->ei", mesh.gradients[el], mean_g)
        np.add.at(rhs, mesh.tets[el].ravel(), local.ravel())
    bv = np.zeros(mesh.n_nodes)
    bnd = mesh.dirichlet_mask
    bv[bnd] = -biphase_fundamental(plane, mesh.nodes[bnd], pole)[0]
    solver = fem.DirichletSolver(mesh) if solver is None else solver
    w = solver.solve(boundary_values=bv, rhs=rhs)
    return SingularGreen(plane, pole, fem.DiscreteField(mesh, w, role="green correction"))


def _signed_cones(poly):
    a, b, c = poly.triangle_corners
    apex = np.broadcast_to(poly.centroid, a.shape)
    tets = np.stack([apex, a, b, c], axis=1)
    sign = np.sign(np.einsum("ij,ij->i", a - apex, np.cross(b - apex, c - apex)))
    return tets, sign


def adaptive_tets(tets, sign, pole, eta=0.5, max_size=np.inf, max_level=16):
    """Red-refine tetrahedra until each is small relative to its distance to ``pole``."""
    from ._quadrature import red_refine

    done_t, done_s = [], []
    for _ in range(max_level):
        cen = tets.mean(axis=1)
        diam = np.max(np.linalg.norm(tets[:, :, None] - tets[:, None], axis=-1), axis=(1, 2))
        dist = np.maximum(np.linalg.norm(cen - pole, axis=1) - diam, 0.0)
        split = (diam > eta * dist) | (diam > max_size)
        done_t.append(tets[~split])
        done_s.append(sign[~split])
        if not np.any(split):
            break
        tets = red_refine(tets[split])
        sign = np.repeat(sign[split], 8)
    else:
        done_t.append(tets)
        done_s.append(sign)
    return np.concatenate(done_t), np.concatenate(done_s)


def singular_S(mesh_sharp, d0, d1, y, z=None, order=3, eta=0.5):
    """``(k-1) int (chi_D0 - chi_D1) grad G0(., y) . grad G1(., z)`` by subtraction.

    Products involving the analytic singular parts are integrated by
    adaptive quadrature on signed cones of both solids; the product of the
    two corrections uses exact element volume fractions.
    """
    from ._quadrature import conical_rule

    z = y if z is None else z
    k = mesh_sharp.k
    g0 = singular_green(mesh_sharp, d0, y)
    g1 = singular_green(mesh_sharp, d1, z)
    m0, m1 = g0.correction.mesh, g1.correction.mesh
    # smooth x smooth
    w0 = g0.correction.gradient()
    w1 = g1.correction.gradient()
    dfrac = (m0.fraction - m1.fraction) * m0.in_omega
    smooth = float(np.sum(dfrac * m0.volumes * np.einsum("ij,ij->i", w0, w1)))
    # terms with at least one singular factor
    t0, s0 = _signed_cones(d0)
    t1, s1 = _signed_cones(d1)
    tets = np.concatenate([t0, t1])
    sign = np.concatenate([s0, -s1])
    tets, sign = adaptive_tets(tets, sign, np.asarray(y, dtype=float), eta, max_size=mesh_sharp.h)
    if z is not y:
        tets, sign = adaptive_tets(tets, sign, np.asarray(z, dtype=float), eta, max_size=mesh_sharp.h)
    bary, w = conical_rule(order)
    vol = np.abs(np.einsum("ij,ij->i", tets[:, 1] - tets[:, 0], np.cross(tets[:, 2] - tets[:, 0], tets[:, 3] - tets[:, 0]))) / 6
    pts = np.einsum("qi,mij->mqj", bary, tets).reshape(-1, 3)
    wts = ((sign * vol)[:, None] * w[None]).ravel()
    el = m0.locate(pts)
    if np.any(el < 0):
        raise SourceTooClose("quadrature point outside the mesh")
    a0, b0 = g0.gradient(pts, el)
    a1, b1 = g1.gradient(pts, el)
    mixed = np.einsum("ij,ij->i", a0, a1) + np.einsum("ij,ij->i", a0, b1) + np.einsum("ij,ij->i", b0, a1)
    singular = float(np.sum(wts * mixed))
    return (k - 1.0) * (singular + smooth)


@dataclass
class SingularProbe:
    distances: np.ndarray
    values: np.ndarray
    slope: float
    metadata: dict = field(default_factory=dict)

    @property
    def degenerate(self):
        return not np.isfinite(self.slope)


def singular_probe(mesh_sharp, d0, d1, point, normal, distances, edge_margin=0.0375):
    """``|S(xi, xi)|`` for ``xi = point + d * normal`` over a list of distances.

    The log-log slope of ``|S|`` against ``d`` is fitted; the expected
    blow-up is ``1 / d``.  ``point`` must keep ``edge_margin`` (default
    r0 / 4 for the default prior) from the edges.
    """
    point = np.asarray(point, dtype=float)
    normal = np.asarray(normal, dtype=float) / np.linalg.norm(normal)
    if geo.distance_to_edges(d0, point)[0] < edge_margin:
        raise SourceTooClose("face point too close to the edge skeleton")
    vals = []
    for d in distances:
        xi = point + d * normal
        if geo.contains(d0, xi)[0] != geo.OUTSIDE or geo.contains(d1, xi)[0] != geo.OUTSIDE:
            raise SourceTooClose("probe point inside an inclusion")
        vals.append(abs(singular_S(mesh_sharp, d0, d1, xi)))
    vals = np.array(vals)
    dist = np.asarray(distances, dtype=float)
    slope = float("nan")
    if np.all(vals > 0):
        slope = float(np.polyfit(np.log(dist), np.log(vals), 1)[0])
    meta = {"h": mesh_sharp.h, "k": mesh_sharp.k, "method": "singularity subtraction"}
    return SingularProbe(dist, vals, slope, meta)


# ---------------------------------------------------------------- three spheres


def real_solid_harmonics(points, degree):
    """Real solid harmonics r^l Y_lm for l <= degree, shape (n, (degree+1)^2)."""
    from scipy.special import sph_harm_y

    p = np.atleast_2d(points)
    r = np.linalg.norm(p, axis=1)
    theta = np.arccos(np.clip(np.divide(p[:, 2], r, out=np.ones_like(r), where=r > 0), -1, 1))
    phi = np.arctan2(p[:, 1], p[:, 0])
    cols = []
    for l in range(degree + 1):
        for m in range(-l, l + 1):
            y = sph_harm_y(l, abs(m), theta, phi)
            if m < 0:
                v = np.sqrt(2) * (-1) ** m * y.imag
            elif m == 0:
                v = y.real
            else:
                v = np.sqrt(2) * (-1) ** m * y.real
            cols.append(r ** l * v)
    return np.column_stack(cols)


@dataclass
class ThreeSpheresRecord:
    sup_r1: float
    sup_r2: float
    sup_r3: float
    exponent: float

    @property
    def bound(self):
        return self.sup_r1 ** self.exponent * self.sup_r3 ** (1 - self.exponent)

    @property
    def ratio(self):
        return self.sup_r2 / self.bound

    @property
    def violated(self):
        return self.ratio > 1 + 1e-9


def _exponents(degree):
    return [(a, b, t - a - b) for t in range(degree + 1) for a in range(t + 1) for b in range(t + 1 - a)]


def _monomials(points, degree):
    p = np.atleast_2d(points)
    return np.column_stack([p[:, 0] ** a * p[:, 1] ** b * p[:, 2] ** c for a, b, c in _exponents(degree)])


def harmonic_monomial_coefficients(degree):
    """Monomial coefficients (n_mono, (degree+1)^2) of the real solid harmonics."""
    rng = np.random.default_rng(12345)
    x = rng.standard_normal((4 * len(_exponents(degree)), 3))
    c, *_ = np.linalg.lstsq(_monomials(x, degree), real_solid_harmonics(x, degree), rcond=None)
    return c


def sphere_sup(coeffs, radius, degree, n_points=20000, mono=None):
    """Max of |w| over the sphere of given radius (equals the ball sup).

    Dense quasi-uniform sampling followed by Nelder-Mead polishing of the
    best candidates in spherical angles.
    """
    from scipy.optimize import minimize

    from ._primitives import fibonacci_sphere

    mono = harmonic_monomial_coefficients(degree) if mono is None else mono
    poly = mono @ coeffs
    dirs = fibonacci_sphere(n_points)
    vals = np.abs(_monomials(radius * dirs, degree) @ poly)
    best = float(vals.max())

    def neg(a):
        d = np.array([np.sin(a[0]) * np.cos(a[1]), np.sin(a[0]) * np.sin(a[1]), np.cos(a[0])])
        return -abs(float(_monomials(radius * d[None], degree)[0] @ poly))

    for j in np.argsort(vals)[-4:]:
        d = dirs[j]
        a0 = [np.arccos(np.clip(d[2], -1, 1)), np.arctan2(d[1], d[0])]
        res = minimize(neg, a0, method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-15})
        best = max(best, -float(res.fun))
    return best


def three_spheres_test(radii=(0.25, 0.5, 1.0), n_samples=200, degree=5, seed=0):
    """Check ``sup_B2 |w| <= (sup_B1 |w|)^tau (sup_B3 |w|)^(1 - tau)``.

    ``tau = log(r3/r2) / log(r3/r1)``; ``w`` are random combinations of real
    solid harmonics of degree at most ``degree`` with standard normal
    coefficients.  Returns one record per sample.
    """
    r1, r2, r3 = radii
    if not 0 < r1 < r2 < r3:
        raise ValueError("radii must be increasing and positive")
    tau = np.log(r3 / r2) / np.log(r3 / r1)
    rng = np.random.default_rng(seed)
    mono = harmonic_monomial_coefficients(degree)
    out = []
    for _ in range(n_samples):
        c = rng.standard_normal((degree + 1) ** 2)
        s = [sphere_sup(c, r, degree, mono=mono) for r in radii]
        out.append(ThreeSpheresRecord(s[0], s[1], s[2], float(tau)))
    return out
