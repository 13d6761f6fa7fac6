"""Polyhedral inclusions: construction, admissibility checks and distances.

A :class:`Polyhedron` is a closed, consistently oriented polygonal surface.
Faces are kept as vertex loops; a triangulation (centroid fan for faces that
are star-shaped from their vertex mean, ear clipping otherwise) is derived
lazily and used by every metric routine.
"""

from collections import deque
from dataclasses import dataclass, field, asdict
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.optimize import linear_sum_assignment, linprog, minimize

from . import _primitives as prim
from .errors import (
    AmbiguousMatch,
    CountMismatch,
    NonManifold,
    NonPlanarFace,
    ResolutionTooCoarse,
    WrongEuler,
)

INSIDE, ON, OUTSIDE = 1, 0, -1


@dataclass(frozen=True)
class AprioriData:
    """Constants describing the admissible class of inclusions.

    ``r0`` bounds edges, inscribed face discs and the distance to the outer
    boundary from below; ``theta0`` keeps dihedral and face angles away from
    0, pi and 2 pi; ``M0`` is the Lipschitz constant of the local boundary
    graphs; ``kappa0`` bounds the contrast via ``k + |k - 1| >= kappa0``.
    """

    r0: float = 0.15
    R0: float = 1.0
    theta0: float = np.pi / 6
    M0: float = 2.0
    kappa0: float = 1.0
    k: float = 2.0

    def __post_init__(self):
        if not 0 < self.r0 < self.R0:
            raise ValueError("need 0 < r0 < R0")
        if not 0 < self.theta0 < np.pi / 2:
            raise ValueError("need 0 < theta0 < pi/2")
        if self.M0 <= 0 or self.kappa0 <= 0 or self.k <= 0:
            raise ValueError("M0, kappa0 and k must be positive")
        if self.k == 1 or self.k + abs(self.k - 1) < self.kappa0:
            raise ValueError("contrast k violates k != 1, k + |k - 1| >= kappa0")

    @property
    def eps_planar(self):
        return 1e-9 * self.R0

    @property
    def eps_geom(self):
        return 1e-12 * self.R0

    @property
    def cone_aperture(self):
        return float(np.arctan(1.0 / self.M0))


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """Closed polyhedral surface with outward-oriented face loops.

    Use :func:`build_polyhedron` to construct validated instances; the
    constructor itself performs no checks so that transported copies with
    slightly non-planar faces can be represented.
    """

    vertices: np.ndarray
    faces: tuple

    @cached_property
    def n_vertices(self):
        return len(self.vertices)

    @cached_property
    def edges(self):
        """Unique undirected edges (E, 2) with ``edges[:, 0] < edges[:, 1]``."""
        return np.array(sorted(self._edge_faces), dtype=np.int64)

    @cached_property
    def _edge_faces(self):
        out = {}
        for fi, loop in enumerate(self.faces):
            for a, b in zip(loop, loop[1:] + loop[:1]):
                out.setdefault((min(a, b), max(a, b)), []).append(fi)
        return out

    @cached_property
    def edge_faces(self):
        return np.array([self._edge_faces[tuple(e)] for e in self.edges])

    def face_loop(self, i):
        return self.vertices[list(self.faces[i])]

    @cached_property
    def face_centroids(self):
        return np.array([self.face_loop(i).mean(axis=0) for i in range(len(self.faces))])

    @cached_property
    def face_areas(self):
        return np.array(
            [np.linalg.norm(prim.newell_normal(self.face_loop(i))) for i in range(len(self.faces))]
        )

    @cached_property
    def face_normals(self):
        n = np.array([prim.newell_normal(self.face_loop(i)) for i in range(len(self.faces))])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @cached_property
    def star_faces(self):
        """True for faces star-shaped with respect to their vertex mean."""
        out = []
        for i in range(len(self.faces)):
            loop = self.face_loop(i)
            c = loop.mean(axis=0)
            cr = np.cross(loop - c, np.roll(loop, -1, axis=0) - c)
            out.append(bool(np.all(cr @ self.face_normals[i] > 0)))
        return np.array(out)

    @cached_property
    def _triangulation(self):
        pts = [self.vertices]
        tris, owner = [], []
        nxt = len(self.vertices)
        for i, loop in enumerate(self.faces):
            if len(loop) == 3:
                tris.append(tuple(loop))
                owner.append(i)
            elif self.star_faces[i]:
                pts.append(self.face_centroids[i][None])
                c = nxt
                nxt += 1
                for a, b in zip(loop, loop[1:] + loop[:1]):
                    tris.append((c, a, b))
                    owner.append(i)
            else:
                for t in _ear_clip(self.face_loop(i), self.face_normals[i]):
                    tris.append(tuple(loop[j] for j in t))
                    owner.append(i)
        return np.concatenate(pts), np.array(tris, dtype=np.int64), np.array(owner)

    @property
    def tri_points(self):
        return self._triangulation[0]

    @property
    def triangles(self):
        return self._triangulation[1]

    @property
    def triangle_face(self):
        return self._triangulation[2]

    @cached_property
    def triangle_corners(self):
        p, t = self.tri_points, self.triangles
        return p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]

    @cached_property
    def signed_volume(self):
        a, b, c = self.triangle_corners
        return float(np.sum(np.einsum("ij,ij->i", a, np.cross(b, c))) / 6.0)

    @cached_property
    def diameter(self):
        v = self.vertices
        return float(np.max(np.linalg.norm(v[:, None] - v[None], axis=-1)))

    @cached_property
    def centroid(self):
        """Volume centroid."""
        a, b, c = self.triangle_corners
        vol = np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0
        return (vol[:, None] * (a + b + c) / 4.0).sum(axis=0) / vol.sum()

    @cached_property
    def edge_lengths(self):
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    def moved(self, vertices):
        """Same combinatorics with new vertex positions (no validation)."""
        return Polyhedron(np.array(vertices, dtype=float), self.faces)

    def translated(self, shift):
        return self.moved(self.vertices + np.asarray(shift, dtype=float))

    def scaled(self, factor, center=None):
        c = self.centroid if center is None else np.asarray(center, dtype=float)
        return self.moved(c + factor * (self.vertices - c))

    def planarity_defect(self):
        """Largest distance of a loop vertex from its face's mean plane."""
        worst = 0.0
        for i in range(len(self.faces)):
            loop = self.face_loop(i)
            worst = max(worst, float(np.max(np.abs((loop - loop.mean(axis=0)) @ self.face_normals[i]))))
        return worst


def _ear_clip(loop, normal):
    """Triangulate a simple planar polygon given in counter-clockwise order."""
    u = loop[1] - loop[0]
    u = u - (u @ normal) * normal
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    p = np.column_stack([loop @ u, loop @ v])
    idx = list(range(len(p)))
    out = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3 and guard < 10 * len(p) ** 2:
        guard += 1
        for k in range(len(idx)):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % len(idx)]
            if cross(p[i0], p[i1], p[i2]) <= 0:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                if (
                    cross(p[i0], p[i1], p[j]) >= 0
                    and cross(p[i1], p[i2], p[j]) >= 0
                    and cross(p[i2], p[i0], p[j]) >= 0
                ):
                    inside = True
                    break
            if not inside:
                out.append((i0, i1, i2))
                idx.pop(k)
                break
    out.append(tuple(idx))
    return out


def build_polyhedron(vertices, faces, tol=None):
    """Validate and orient a polyhedral surface.

    Each undirected edge must be shared by exactly two faces, the surface
    must be orientable with Euler characteristic 2, and every face must be
    planar within ``tol`` (default ``1e-9`` times the diameter).  Face loops
    are reoriented consistently so that the enclosed volume is positive.
    """
    v = np.array(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 3:
        raise ValueError("vertices must have shape (N, 3)")
    loops = [list(map(int, f)) for f in faces]
    if any(len(f) < 3 for f in loops):
        raise NonManifold("face with fewer than three vertices")
    if any(len(set(f)) != len(f) for f in loops):
        raise NonManifold("face loop repeats a vertex")

    use = {}
    for fi, loop in enumerate(loops):
        for a, b in zip(loop, loop[1:] + loop[:1]):
            use.setdefault((min(a, b), max(a, b)), []).append(fi)
    bad = [e for e, fs in use.items() if len(fs) != 2]
    if bad:
        raise NonManifold(f"edge {bad[0]} is shared by {len(use[bad[0]])} faces")

    # breadth-first orientation repair
    def directed(loop):
        return set(zip(loop, loop[1:] + loop[:1]))

    flip = [None] * len(loops)
    adj = [[] for _ in loops]
    for fs in use.values():
        adj[fs[0]].append(fs[1])
        adj[fs[1]].append(fs[0])
    for seed in range(len(loops)):
        if flip[seed] is not None:
            continue
        flip[seed] = False
        queue = deque([seed])
        while queue:
            f = queue.popleft()
            lf = loops[f][::-1] if flip[f] else loops[f]
            df = directed(lf)
            for g in adj[f]:
                dg = directed(loops[g])
                consistent = not (df & dg)
                want = not consistent
                if flip[g] is None:
                    flip[g] = want
                    queue.append(g)
                elif flip[g] != want:
                    raise NonManifold("surface is not orientable")
    loops = [lp[::-1] if fl else lp for lp, fl in zip(loops, flip)]

    n_used = len({i for f in loops for i in f})
    chi = n_used - len(use) + len(loops)
    if chi != 2:
        raise WrongEuler(f"Euler characteristic {chi} != 2")

    poly = Polyhedron(v, tuple(tuple(f) for f in loops))
    if tol is None:
        tol = 1e-9 * max(poly.diameter, 1e-300)
    defect = poly.planarity_defect()
    if defect > tol:
        raise NonPlanarFace(f"face planarity defect {defect:.3e} exceeds {tol:.3e}")
    if poly.signed_volume < 0:
        poly = Polyhedron(v, tuple(tuple(f[::-1]) for f in loops))
    if poly.signed_volume <= 0:
        raise NonManifold("enclosed volume is zero")
    return poly


# ---------------------------------------------------------------- factories


def box_polyhedron(lo, hi):
    """Axis-aligned box as a six-face polyhedron."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    corners = np.array(
        [[(hi if (i >> d) & 1 else lo)[d] for d in range(3)] for i in range(8)]
    )
    faces = [
        (0, 2, 6, 4),  # x = lo
        (1, 5, 7, 3),  # x = hi
        (0, 4, 5, 1),  # y = lo
        (2, 3, 7, 6),  # y = hi
        (0, 1, 3, 2),  # z = lo
        (4, 6, 7, 5),  # z = hi
    ]
    return build_polyhedron(corners, faces)


def cube_polyhedron(center, side):
    c = np.asarray(center, dtype=float)
    return box_polyhedron(c - side / 2, c + side / 2)


def _direction(lat, lon):
    la, lo = np.radians(lat), np.radians(lon)
    return np.array([np.cos(la) * np.cos(lo), np.cos(la) * np.sin(lo), np.sin(la)])


def pinched_polyhedron(scale=3.0, lat=45.0, neck_lat=40.0, neck_half_width=5.0, corner_lon=60.0):
    """Star-shaped polyhedron with a non-Lipschitz vertex at the origin.

    Near the origin the solid is two opposite wedges (about the +z and -z
    axes) joined by a thin neck through the +x direction.  Every axis
    through the origin either has its interior cone in the neck, which is
    too thin, or its exterior cone in the opposite wedge, so no two-sided
    cone of moderate aperture fits there.  With the default parameters all
    dihedral and face angles stay at least 5 degrees inside the admissible
    bands for ``theta0 = pi/6``.
    """
    r = np.sin(np.radians(lat)) / np.sin(np.radians(neck_lat))
    a, b, w = lat, corner_lon, neck_half_width
    rays = [
        (a, b, 1.0), (a, 180 - b, 1.0), (a, b - 180, 1.0), (a, -b, 1.0),
        (neck_lat, -w, r), (-neck_lat, -w, r),
        (-a, -b, 1.0), (-a, b - 180, 1.0), (-a, 180 - b, 1.0), (-a, b, 1.0),
        (-neck_lat, w, r), (neck_lat, w, r),
    ]
    ring = [scale * length * _direction(la, lo) for la, lo, length in rays]
    n = len(ring)
    faces = [(0, i + 1, (i + 1) % n + 1) for i in range(n)]
    # the junction rays end in the wedge cap planes, so each cap is one face
    faces += [(1, 2, 3, 4, 5, 12), (5, 6, 11, 12), (6, 7, 8, 9, 10, 11)]
    return build_polyhedron(np.vstack([np.zeros(3)] + ring), faces)


def read_off(path):
    """Read a polyhedron from an OFF file (vertex count, face count, loops)."""
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.append(line.split())
    if tokens[0][0] != "OFF":
        raise ValueError("missing OFF header")
    head = tokens[0][1:] if len(tokens[0]) > 1 else tokens[1]
    start = 1 if len(tokens[0]) > 1 else 2
    nv, nf = int(head[0]), int(head[1])
    verts = [list(map(float, t[:3])) for t in tokens[start:start + nv]]
    faces = []
    for t in tokens[start + nv:start + nv + nf]:
        m = int(t[0])
        faces.append(tuple(int(x) for x in t[1:1 + m]))
    return build_polyhedron(verts, faces)


def write_off(poly, path):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{poly.n_vertices} {len(poly.faces)} {len(poly.edges)}\n")
        for p in poly.vertices:
            fh.write(" ".join(repr(float(x)) for x in p) + "\n")
        for f in poly.faces:
            fh.write(f"{len(f)} " + " ".join(str(i) for i in f) + "\n")


# ---------------------------------------------------------------- queries


def distance_to_boundary(poly, points):
    a, b, c = poly.triangle_corners
    return prim.distance_to_triangles(points, a, b, c)


def distance_to_edges(poly, points):
    """Distance to the edge skeleton (union of the true polygon edges)."""
    e = poly.edges
    return prim.distance_to_segments(points, poly.vertices[e[:, 0]], poly.vertices[e[:, 1]])


def contains(poly, points, tol=None):
    """Classify points as ``INSIDE`` (1), ``ON`` (0) or ``OUTSIDE`` (-1).

    Points within ``tol`` (default ``1e-12`` times the diameter) of the
    boundary are reported as on the boundary; the rest are classified by the
    generalised winding number.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if tol is None:
        tol = 1e-12 * poly.diameter
    a, b, c = poly.triangle_corners
    d = prim.distance_to_triangles(pts, a, b, c)
    out = np.full(len(pts), OUTSIDE, dtype=np.int8)
    on = d <= tol
    out[on] = ON
    rest = ~on
    if np.any(rest):
        w = prim.winding_number(pts[rest], a, b, c)
        out[np.flatnonzero(rest)[w > 0.5]] = INSIDE
    return out


def distance_to_solid(poly, points):
    """Distance to the closed solid (zero inside)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a, b, c = poly.triangle_corners
    d = prim.distance_to_triangles(pts, a, b, c)
    w = prim.winding_number(pts, a, b, c)
    d[w > 0.5] = 0.0
    return d


def boundary_samples(poly, spacing):
    """Points on the surface with lattice step at most ``spacing``.

    Returns points, area weights and the owning face of each sample.
    """
    a, b, c = poly.triangle_corners
    p, w, own = prim.sample_triangles(a, b, c, spacing)
    return p, w, poly.triangle_face[own]


def interior_samples(poly, spacing):
    lo = poly.vertices.min(axis=0)
    hi = poly.vertices.max(axis=0)
    axes = [np.arange(lo[d] + spacing / 2, hi[d], spacing) for d in range(3)]
    if any(len(x) == 0 for x in axes):
        return np.zeros((0, 3))
    g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return g[contains(poly, g) == INSIDE]


def _same_shape(p0, p1):
    return p0.faces == p1.faces and np.array_equal(p0.vertices, p1.vertices)


def hausdorff_boundary(p0, p1, spacing):
    """Hausdorff distance between the two boundary surfaces.

    Sup over surface samples (lattice step ``spacing``, vertices included) of
    the exact point-to-surface distance, so the estimate approaches the true
    value from below as ``spacing`` decreases.
    """
    if _same_shape(p0, p1):
        return 0.0
    s0, _, _ = boundary_samples(p0, spacing)
    s1, _, _ = boundary_samples(p1, spacing)
    d01 = distance_to_boundary(p1, s0).max()
    d10 = distance_to_boundary(p0, s1).max()
    return float(max(d01, d10))


def hausdorff_solid(p0, p1, spacing):
    """Hausdorff distance between the closed solids."""
    if _same_shape(p0, p1):
        return 0.0
    s0 = np.vstack([boundary_samples(p0, spacing)[0], interior_samples(p0, spacing)])
    s1 = np.vstack([boundary_samples(p1, spacing)[0], interior_samples(p1, spacing)])
    return float(max(distance_to_solid(p1, s0).max(), distance_to_solid(p0, s1).max()))


def _visible_mask(grid_lo, resolution, shape, solids):
    """Voxels connected to the outer boundary through the free region."""
    axes = [grid_lo[d] + resolution * (np.arange(shape[d]) + 0.5) for d in range(3)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    occupied = np.zeros(len(centers), dtype=bool)
    for poly in solids:
        lo = poly.vertices.min(axis=0) - resolution
        hi = poly.vertices.max(axis=0) + resolution
        near = np.all((centers >= lo) & (centers <= hi), axis=1)
        occupied[np.flatnonzero(near)[contains(poly, centers[near]) >= ON]] = True
    free = ~occupied.reshape(shape)
    labels, _ = ndimage.label(free)  # 6-connectivity by default
    border = np.unique(
        np.concatenate(
            [
                labels[0].ravel(), labels[-1].ravel(),
                labels[:, 0].ravel(), labels[:, -1].ravel(),
                labels[:, :, 0].ravel(), labels[:, :, -1].ravel(),
            ]
        )
    )
    border = border[border > 0]
    return np.isin(labels, border)


def modified_distance(p0, p1, omega_box, resolution, spacing=None):
    """Hausdorff-type distance restricted to the part visible from outside.

    The free region (complement of both solids) is voxelised on a grid of
    step ``resolution`` over ``omega_box = (lo, hi)`` and flood-filled with
    6-connectivity from the outer faces.  The returned value is the largest
    distance from a sample of either boundary whose outward neighbour voxel
    is reachable to the other solid.
    """
    lo = np.asarray(omega_box[0], dtype=float)
    hi = np.asarray(omega_box[1], dtype=float)
    thinnest = min(p0.edge_lengths.min(), p1.edge_lengths.min())
    if thinnest < 2 * resolution:
        raise ResolutionTooCoarse(
            f"feature of size {thinnest:.3g} below two voxels of {resolution:.3g}"
        )
    shape = tuple(int(np.ceil((hi[d] - lo[d]) / resolution)) for d in range(3))
    if _same_shape(p0, p1):
        return 0.0
    visible = _visible_mask(lo, resolution, shape, [p0, p1])
    spacing = resolution / 2 if spacing is None else spacing

    def one_side(pa, pb):
        s, _, face = boundary_samples(pa, spacing)
        n = pa.face_normals[face]
        seen = np.zeros(len(s), dtype=bool)
        for off in (0.75, 1.25):
            q = s + off * resolution * n
            ijk = np.floor((q - lo) / resolution).astype(np.int64)
            ok = np.all((ijk >= 0) & (ijk < np.array(shape)), axis=1)
            hit = np.zeros(len(s), dtype=bool)
            hit[ok] = visible[ijk[ok, 0], ijk[ok, 1], ijk[ok, 2]]
            seen |= hit
        if not np.any(seen):
            return 0.0
        return float(distance_to_solid(pb, s[seen]).max())

    return max(one_side(p0, p1), one_side(p1, p0))


@dataclass
class VertexPairing:
    """Bijection between the vertex sets of two polyhedra."""

    permutation: np.ndarray
    displacements: np.ndarray
    cost: float
    runner_up_cost: float

    @property
    def max_distance(self):
        return float(np.max(np.linalg.norm(self.displacements, axis=1)))

    @property
    def mean_distance(self):
        return float(np.mean(np.linalg.norm(self.displacements, axis=1)))


def match_vertices(p0, p1, delta0=None, tol=None):
    """Minimum-cost bijection between vertex sets.

    Solves the linear assignment problem on the pairwise distance matrix.
    The second-best bijection is found by forbidding each optimal pair in
    turn; if its cost is within ``tol`` of the optimum the match is
    ambiguous.
    """
    if p0.n_vertices != p1.n_vertices:
        raise CountMismatch(f"{p0.n_vertices} vs {p1.n_vertices} vertices")
    if delta0 is not None:
        dh = hausdorff_boundary(p0, p1, delta0 / 4)
        if dh > delta0:
            raise ValueError(f"Hausdorff distance {dh:.3g} exceeds delta0 = {delta0:.3g}")
    if tol is None:
        tol = 1e-12 * max(p0.diameter, p1.diameter)
    cost = np.linalg.norm(p0.vertices[:, None] - p1.vertices[None], axis=-1)
    rows, cols = linear_sum_assignment(cost)
    best = cost[rows, cols].sum()
    runner = np.inf
    if len(rows) > 1:
        big = cost.max() * len(rows) * 10 + 1.0
        for r, c in zip(rows, cols):
            alt = cost.copy()
            alt[r, c] = big
            r2, c2 = linear_sum_assignment(alt)
            runner = min(runner, alt[r2, c2].sum())
    if runner - best <= tol:
        raise AmbiguousMatch(f"two pairings within {tol:.1e} of cost {best:.6g}")
    perm = np.empty(len(rows), dtype=np.int64)
    perm[rows] = cols
    return VertexPairing(perm, p1.vertices[perm] - p0.vertices, float(best), float(runner))


# ---------------------------------------------------------------- admissibility


def _in_band(angle, theta0):
    return ((theta0 < angle) & (angle < np.pi - theta0)) | (
        (np.pi + theta0 < angle) & (angle < 2 * np.pi - theta0)
    )


def dihedral_angles(poly):
    """Interior dihedral angle (0, 2 pi) at every edge."""
    out = np.empty(len(poly.edges))
    n = poly.face_normals
    for k, (e, (f1, f2)) in enumerate(zip(poly.edges, poly.edge_faces)):
        a, b = poly.vertices[e[0]], poly.vertices[e[1]]
        d = (b - a) / np.linalg.norm(b - a)
        # in-plane direction from the edge into face f2
        w = np.cross(n[f2], d)
        if w @ (poly.face_centroids[f2] - a) < 0:
            w = -w
        opening = np.arccos(np.clip(n[f1] @ n[f2], -1.0, 1.0))
        out[k] = np.pi - opening if n[f1] @ w < 1e-14 else np.pi + opening
    return out


def face_angles(poly):
    """Interior polygon angle at every (face, vertex) corner, flattened."""
    out = []
    for i, loop in enumerate(poly.faces):
        p = poly.vertices[list(loop)]
        d_in = p - np.roll(p, 1, axis=0)
        d_out = np.roll(p, -1, axis=0) - p
        turn = np.arctan2(np.cross(d_in, d_out) @ poly.face_normals[i], np.einsum("ij,ij->i", d_in, d_out))
        out.append(np.pi - turn)
    return np.concatenate(out)


def face_inradius(poly, i):
    """Radius of the largest disc contained in face ``i``."""
    loop = poly.face_loop(i)
    n = poly.face_normals[i]
    u = loop[1] - loop[0]
    u = u - (u @ n) * n
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    p = np.column_stack([loop @ u, loop @ v])
    q = np.roll(p, -1, axis=0)
    t = q - p
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    nrm = np.column_stack([t[:, 1], -t[:, 0]])  # outward for ccw polygons
    a, b = p - np.roll(p, 1, axis=0), q - p
    turns = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    if np.all(turns > 0):
        # Chebyshev centre of a convex polygon: max r s.t. nrm.x + r <= nrm.p
        res = linprog(
            c=[0, 0, -1],
            A_ub=np.column_stack([nrm, np.ones(len(p))]),
            b_ub=np.einsum("ij,ij->i", nrm, p),
            bounds=[(None, None), (None, None), (0, None)],
        )
        return float(res.x[2])

    def clearance(x):
        x = np.atleast_2d(x)
        pts = np.column_stack([x, np.zeros(len(x))])
        segs_a = np.column_stack([p, np.zeros(len(p))])
        segs_b = np.column_stack([q, np.zeros(len(q))])
        d = prim.distance_to_segments(pts, segs_a, segs_b)
        loop3 = np.column_stack([p, np.zeros(len(p))])
        wn = _polygon_winding(x, p)
        return np.where(wn > 0.5, d, -d), loop3

    lo, hi = p.min(axis=0), p.max(axis=0)
    g = np.stack(np.meshgrid(np.linspace(lo[0], hi[0], 60), np.linspace(lo[1], hi[1], 60)), -1).reshape(-1, 2)
    val, _ = clearance(g)
    x0 = g[np.argmax(val)]
    res = minimize(lambda x: -clearance(x)[0][0], x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12})
    return float(max(-res.fun, val.max()))


def _polygon_winding(x, p):
    q = np.roll(p, -1, axis=0)
    a = p[None] - x[:, None]
    b = q[None] - x[:, None]
    ang = np.arctan2(a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0], np.einsum("ijk,ijk->ij", a, b))
    return ang.sum(axis=1) / (2 * np.pi)


def cone_clearance(poly, points, apothem, n_dirs=600, spacing=None):
    """Largest two-sided cone half-aperture admissible at boundary points.

    For each point P the returned angle is the maximum over axis directions
    d of the smaller of two clearances: the half-aperture of the largest
    cone C(P, d) of height ``apothem`` missing the interior of the solid,
    and that of C(P, -d) missing its exterior.  Obstacles are represented by
    boundary samples inside the ball of radius ``apothem`` and by points of
    the bounding sphere, classified as inside or outside.
    """
    points = np.atleast_2d(points)
    spacing = apothem / 8 if spacing is None else spacing
    surf, _, _ = boundary_samples(poly, spacing)
    dirs = prim.fibonacci_sphere(n_dirs)
    out = np.empty(len(points))
    for i, P in enumerate(points):
        rel = surf - P
        r = np.linalg.norm(rel, axis=1)
        keep = (r > 1e-9 * apothem) & (r <= apothem)
        bdirs = rel[keep] / r[keep, None]
        ring = contains(poly, P + apothem * dirs)
        ext_obs = np.vstack([bdirs, dirs[ring >= ON]])
        int_obs = np.vstack([bdirs, dirs[ring <= ON]])

        def clearance(axes):
            axes = np.atleast_2d(axes)
            axes = axes / np.linalg.norm(axes, axis=1, keepdims=True)
            ce = np.max(axes @ ext_obs.T, axis=1) if len(ext_obs) else np.full(len(axes), -1.0)
            ci = np.max(-axes @ int_obs.T, axis=1) if len(int_obs) else np.full(len(axes), -1.0)
            return np.arccos(np.clip(np.maximum(ce, ci), -1, 1))

        vals = clearance(dirs)
        best = float(vals.max())
        for j in np.argsort(vals)[-3:]:
            res = minimize(lambda x: -clearance(x)[0], dirs[j], method="Nelder-Mead",
                           options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 400})
            best = max(best, -float(res.fun))
        out[i] = best
    return out


@dataclass
class ValidationReport:
    """Outcome of the admissibility checks; margins are positive when met."""

    inclusion_margin: float
    dihedral_min: float
    dihedral_max: float
    dihedral_ok: bool
    face_angle_min: float
    face_angle_max: float
    face_angle_ok: bool
    face_inradius_min: float
    edge_length_min: float
    cone_margin: float
    cone_worst_point: list = field(default_factory=list)
    passed: bool = False
    failures: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def validate_admissibility(poly, omega, prior, cone_samples=None):
    """Check every admissibility condition and return a report.

    ``omega`` must provide ``distance_to_boundary(points)`` and
    ``contains(points)``.  The Lipschitz condition is verified with the
    two-sided cone criterion at vertices, edge points and face samples.
    """
    if not np.all(omega.contains(poly.vertices)):
        incl = -float(np.max(omega.distance_to_boundary(poly.vertices)))
    else:
        # distance to the outer boundary is concave inside a convex domain
        incl = float(np.min(omega.distance_to_boundary(poly.vertices))) - prior.r0
    dih = dihedral_angles(poly)
    fa = face_angles(poly)
    inr = min(face_inradius(poly, i) for i in range(len(poly.faces)))
    emin = float(poly.edge_lengths.min())
    if cone_samples is None:
        e = poly.edges
        t = np.linspace(0.0, 1.0, 5)[1:-1]
        ep = (poly.vertices[e[:, 0], None] * (1 - t)[None, :, None] + poly.vertices[e[:, 1], None] * t[None, :, None]).reshape(-1, 3)
        fp, _, _ = boundary_samples(poly, max(prior.r0, poly.diameter / 6))
        cone_samples = np.vstack([poly.vertices, ep, fp])
    clear = cone_clearance(poly, cone_samples, prior.r0 / 2)
    margin = clear - prior.cone_aperture
    worst = int(np.argmin(margin))
    rep = ValidationReport(
        inclusion_margin=incl,
        dihedral_min=float(dih.min()),
        dihedral_max=float(dih.max()),
        dihedral_ok=bool(np.all(_in_band(dih, prior.theta0))),
        face_angle_min=float(fa.min()),
        face_angle_max=float(fa.max()),
        face_angle_ok=bool(np.all(_in_band(fa, prior.theta0))),
        face_inradius_min=inr,
        edge_length_min=emin,
        cone_margin=float(margin[worst]),
        cone_worst_point=[float(x) for x in cone_samples[worst]],
    )
    fails = []
    if incl < 0:
        fails.append("inclusion")
    if not rep.dihedral_ok:
        fails.append("dihedral")
    if not rep.face_angle_ok:
        fails.append("face_angle")
    if inr < prior.r0:
        fails.append("face_disc")
    if emin < prior.r0:
        fails.append("edge_length")
    if rep.cone_margin < 0:
        fails.append("lipschitz_cone")
    rep.failures = fails
    rep.passed = not fails
    return rep
