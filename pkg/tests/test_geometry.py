import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polystab import geometry as geo
from polystab.errors import AmbiguousMatch, CountMismatch, NonManifold, NonPlanarFace, ResolutionTooCoarse, WrongEuler
from polystab.fem import DomainSpec

from conftest import relabel, rotation

CUBE_FACES = [(0, 2, 6, 4), (1, 5, 7, 3), (0, 4, 5, 1), (2, 3, 7, 6), (0, 1, 3, 2), (4, 6, 7, 5)]
CUBE_VERTS = [[(i >> d) & 1 for d in range(3)] for i in range(8)]

small = st.floats(-0.08, 0.08)
shift3 = st.tuples(small, small, small)


# ---------------------------------------------------------------- construction


def test_cube_combinatorics(unit_cube):
    assert unit_cube.n_vertices == 8
    assert len(unit_cube.edges) == 12
    assert len(unit_cube.faces) == 6
    assert unit_cube.n_vertices - len(unit_cube.edges) + len(unit_cube.faces) == 2
    assert unit_cube.signed_volume == pytest.approx(1.0, abs=1e-14)


def test_tetrahedron_combinatorics():
    s = 1 / np.sqrt(2)
    verts = [[1, 0, -s], [-1, 0, -s], [0, 1, s], [0, -1, s]]
    tet = geo.build_polyhedron(verts, [(0, 1, 2), (0, 3, 1), (0, 2, 3), (1, 3, 2)])
    assert len(tet.edges) == 6
    assert tet.n_vertices - len(tet.edges) + len(tet.faces) == 2
    # regular tetrahedron of edge 2: volume 2^3 / (6 sqrt 2)
    assert tet.signed_volume == pytest.approx(8 / (6 * np.sqrt(2)), rel=1e-12)


def test_reversed_face_is_repaired():
    faces = list(CUBE_FACES)
    faces[3] = faces[3][::-1]
    cube = geo.build_polyhedron(CUBE_VERTS, faces)
    assert cube.signed_volume == pytest.approx(1.0, abs=1e-14)
    # every edge is traversed once in each direction
    directed = [(f[i], f[(i + 1) % len(f)]) for f in cube.faces for i in range(len(f))]
    assert len(set(directed)) == 24
    assert all((b, a) in set(directed) for a, b in directed)


def test_all_faces_reversed_gives_positive_volume():
    cube = geo.build_polyhedron(CUBE_VERTS, [f[::-1] for f in CUBE_FACES])
    assert cube.signed_volume == pytest.approx(1.0, abs=1e-14)


def test_open_surface_rejected():
    with pytest.raises(NonManifold):
        geo.build_polyhedron(CUBE_VERTS, CUBE_FACES[:-1])


def test_nonplanar_face_rejected():
    verts = np.array(CUBE_VERTS, dtype=float)
    verts[7, 2] += 0.1
    with pytest.raises(NonPlanarFace):
        geo.build_polyhedron(verts, CUBE_FACES)


def test_torus_rejected_by_euler():
    # square frame: outer and inner square prisms joined by top/bottom rings
    outer = [(0, 0), (3, 0), (3, 3), (0, 3)]
    inner = [(1, 1), (2, 1), (2, 2), (1, 2)]
    verts = [(x, y, z) for z in (0, 1) for x, y in outer + inner]
    # indices: bottom outer 0-3, bottom inner 4-7, top outer 8-11, top inner 12-15
    faces = []
    for i in range(4):
        j = (i + 1) % 4
        faces.append((i, j, 8 + j, 8 + i))  # outer walls
        faces.append((4 + j, 4 + i, 12 + i, 12 + j))  # inner walls
        faces.append((j, i, 4 + i, 4 + j))  # bottom ring
        faces.append((8 + i, 8 + j, 12 + j, 12 + i))  # top ring
    with pytest.raises(WrongEuler):
        geo.build_polyhedron(verts, faces)


def test_off_round_trip(tmp_path, base_cube):
    path = tmp_path / "cube.off"
    geo.write_off(base_cube, path)
    back = geo.read_off(path)
    assert np.array_equal(back.vertices, base_cube.vertices)
    assert back.faces == base_cube.faces


@given(st.tuples(*[st.floats(0, 2 * np.pi)] * 3), st.floats(0.2, 2.0))
def test_rigid_motion_keeps_invariants(angles, side):
    R = rotation(angles)
    verts = (np.array(CUBE_VERTS, dtype=float) - 0.5) * side @ R.T
    poly = geo.build_polyhedron(verts, CUBE_FACES)
    assert poly.n_vertices - len(poly.edges) + len(poly.faces) == 2
    assert poly.signed_volume == pytest.approx(side ** 3, rel=1e-10)
    assert poly.planarity_defect() <= 1e-12 * side
    assert np.all(np.abs(geo.dihedral_angles(poly) - np.pi / 2) < 1e-9)


# ---------------------------------------------------------------- queries


def test_contains_examples(unit_cube):
    cls = geo.contains(unit_cube, [[0.5, 0.5, 0.5], [2, 0, 0], [0.5, 0.5, 1.0]])
    assert list(cls) == [geo.INSIDE, geo.OUTSIDE, geo.ON]


def test_distance_examples(unit_cube):
    x = np.array([[0.5, 0.5, 2.0]])
    assert geo.distance_to_boundary(unit_cube, x)[0] == pytest.approx(1.0, abs=1e-15)
    # nearest skeleton point is the midpoint of a top edge, e.g. (0.5, 0, 1)
    assert geo.distance_to_edges(unit_cube, x)[0] == pytest.approx(np.sqrt(1.25), abs=1e-15)
    centroids = unit_cube.face_centroids
    assert np.all(geo.distance_to_boundary(unit_cube, centroids) <= 1e-15)


@given(st.lists(st.tuples(*[st.floats(-0.5, 1.5)] * 3), min_size=1, max_size=30))
def test_contains_matches_boundary_distance(points):
    cube = geo.box_polyhedron([0, 0, 0], [1, 1, 1])
    pts = np.array(points)
    cls = geo.contains(cube, pts)
    d = geo.distance_to_boundary(cube, pts)
    eps = 1e-12 * cube.diameter
    assert np.array_equal(cls == geo.ON, d <= eps)
    inside = np.all((pts > 0) & (pts < 1), axis=1) & (d > eps)
    assert np.array_equal(cls == geo.INSIDE, inside)


def test_pinched_vertex_fails_only_the_cone_test():
    poly = geo.pinched_polyhedron()
    prior = geo.AprioriData()
    omega = DomainSpec(lower=(-5, -5, -5), upper=(5, 5, 5))
    rep = geo.validate_admissibility(poly, omega, prior, cone_samples=poly.vertices)
    assert rep.dihedral_ok and rep.face_angle_ok
    assert rep.edge_length_min >= prior.r0
    assert rep.face_inradius_min >= prior.r0
    assert rep.failures == ["lipschitz_cone"]
    assert np.allclose(rep.cone_worst_point, 0.0)


def test_validation_examples():
    prior = geo.AprioriData(r0=0.2)
    omega = DomainSpec(lower=(-2, -2, -2), upper=(2, 2, 2))
    rep = geo.validate_admissibility(geo.cube_polyhedron([0, 0, 0], 1.0), omega, prior)
    assert rep.passed, rep.failures
    assert rep.dihedral_min == pytest.approx(np.pi / 2)
    flat = geo.box_polyhedron([0, 0, 0], [1, 1, prior.r0 / 2])
    rep = geo.validate_admissibility(flat, omega, prior, cone_samples=flat.vertices)
    assert "edge_length" in rep.failures
    assert rep.edge_length_min == pytest.approx(prior.r0 / 2)


def test_validation_is_pure(base_cube, prior):
    omega = DomainSpec()
    a = geo.validate_admissibility(base_cube, omega, prior, cone_samples=base_cube.vertices)
    b = geo.validate_admissibility(base_cube, omega, prior, cone_samples=base_cube.vertices)
    assert a.to_dict() == b.to_dict()


# ---------------------------------------------------------------- distances


def test_hausdorff_examples(unit_cube):
    s = 1 / 16
    assert geo.hausdorff_boundary(unit_cube, unit_cube, s) == 0.0
    moved = unit_cube.translated([0.1, 0, 0])
    assert geo.hausdorff_boundary(unit_cube, moved, s) == pytest.approx(0.1, abs=1e-12)
    big = unit_cube.scaled(1.2)
    assert geo.hausdorff_boundary(unit_cube, big, s) == pytest.approx(0.1 * np.sqrt(3), abs=1e-12)


def test_solid_hausdorff_examples(unit_cube):
    s = 1 / 16
    assert geo.hausdorff_solid(unit_cube, unit_cube, s) == 0.0
    moved = unit_cube.translated([0.1, 0, 0])
    assert geo.hausdorff_solid(unit_cube, moved, s) == pytest.approx(0.1, abs=1e-12)
    inner = geo.box_polyhedron([0.25] * 3, [0.75] * 3)
    assert geo.hausdorff_solid(unit_cube, inner, s) == pytest.approx(0.25 * np.sqrt(3), abs=1e-12)


@given(shift3, shift3, st.floats(0.9, 1.1))
def test_hausdorff_metric_axioms(a, b, scale):
    s = 0.05
    p = geo.cube_polyhedron([0.5, 0.5, 0.5], 0.3)
    q = p.translated(a).scaled(scale)
    r = p.translated(b)
    dpq = geo.hausdorff_boundary(p, q, s)
    assert dpq == pytest.approx(geo.hausdorff_boundary(q, p, s), abs=1e-15)
    assert geo.hausdorff_boundary(q, q, s) == 0.0
    # the estimate is a sampled sup: allow twice the sampling step
    tol = 2 * s
    assert dpq <= geo.hausdorff_boundary(p, r, s) + geo.hausdorff_boundary(r, q, s) + tol


@given(shift3, st.floats(0.85, 1.15))
def test_solid_to_boundary_ratio_is_bounded(shift, scale):
    p = geo.cube_polyhedron([0.5, 0.5, 0.5], 0.3)
    q = p.scaled(scale).translated(shift)
    db = geo.hausdorff_boundary(p, q, 0.02)
    if db < 1e-3:
        return
    ds = geo.hausdorff_solid(p, q, 0.02)
    assert 0.2 <= ds / db <= 1.0 + 1e-9


def test_modified_distance_without_occlusion():
    box = ((0, 0, 0), (1, 1, 1))
    p0 = geo.cube_polyhedron([0.3, 0.5, 0.5], 0.2)
    p1 = geo.cube_polyhedron([0.7, 0.5, 0.5], 0.2)
    dm = geo.modified_distance(p0, p1, box, resolution=1 / 48)
    dh = geo.hausdorff_boundary(p0, p1, 1 / 96)
    assert dm == pytest.approx(dh, abs=1 / 48)
    assert geo.modified_distance(p0, p0, box, resolution=1 / 48) == 0.0


@given(shift3, st.floats(0.9, 1.1))
def test_modified_distance_below_hausdorff(shift, scale):
    box = ((0, 0, 0), (1, 1, 1))
    res = 1 / 32
    p0 = geo.cube_polyhedron([0.5, 0.5, 0.4], 0.3)
    p1 = p0.scaled(scale).translated(shift)
    dm = geo.modified_distance(p0, p1, box, resolution=res)
    dh = geo.hausdorff_boundary(p0, p1, res / 2)
    assert dm <= dh + res


def test_modified_distance_resolution_guard():
    p = geo.cube_polyhedron([0.5, 0.5, 0.5], 0.05)
    with pytest.raises(ResolutionTooCoarse):
        geo.modified_distance(p, p, ((0, 0, 0), (1, 1, 1)), resolution=0.05)


# ---------------------------------------------------------------- vertex matching


def test_match_recovers_relabelled_cube(base_cube):
    perm = [3, 7, 0, 5, 1, 6, 2, 4]
    other = relabel(base_cube, perm)
    pairing = geo.match_vertices(base_cube, other)
    assert np.array_equal(pairing.permutation, perm)
    assert pairing.max_distance == 0.0


def test_match_count_mismatch(base_cube):
    octa = geo.build_polyhedron(
        [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
        [(0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4), (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5)],
    )
    with pytest.raises(CountMismatch):
        geo.match_vertices(base_cube, octa)


def test_match_ambiguous_for_symmetric_rotation():
    # a quarter-turn halved: every vertex is equidistant from two rotated vertices
    p0 = geo.cube_polyhedron([0, 0, 0], 1.0)
    p1 = p0.moved(p0.vertices @ rotation((0, 0, np.pi / 4)).T)
    with pytest.raises(AmbiguousMatch):
        geo.match_vertices(p0, p1)
    assert geo.match_vertices(p0, p0.translated([0.5, 0, 0])).max_distance == pytest.approx(0.5)


@given(st.lists(st.tuples(*[st.floats(-0.01, 0.01)] * 3), min_size=8, max_size=8))
def test_match_small_perturbation(noise):
    p0 = geo.cube_polyhedron([0.5, 0.5, 0.5], 0.3)
    p1 = p0.moved(p0.vertices + np.array(noise))
    pairing = geo.match_vertices(p0, p1)
    assert np.array_equal(pairing.permutation, np.arange(8))
    assert pairing.max_distance <= 0.01 * np.sqrt(3) + 1e-15


@given(st.floats(0.005, 0.05), st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_vertex_distance_bounded_by_hausdorff(m, direction):
    p0 = geo.cube_polyhedron([0.5, 0.5, 0.5], 0.3)
    d = np.array(direction) / np.linalg.norm(direction)
    p1 = p0.translated(m * d)
    ratio = geo.match_vertices(p0, p1).max_distance / geo.hausdorff_boundary(p0, p1, 0.02)
    # a translation moves every vertex by m and d_H >= m / sqrt(3)
    assert 1.0 - 1e-9 <= ratio <= np.sqrt(3) + 1e-9
