import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polystab import fem
from polystab import geometry as geo
from polystab.errors import FeatureUnderResolved, MeshMismatch, SourceTooClose

from conftest import rotation


@pytest.fixture(scope="module")
def box():
    return fem.DomainSpec()


@pytest.fixture(scope="module")
def coarse(box):
    return fem.mesh_domain(box, h=1 / 8)


@pytest.fixture(scope="module")
def two_phase(box):
    return fem.mesh_domain(box, [geo.cube_polyhedron([0.5, 0.5, 0.4], 0.3)], h=1 / 16, k=3.0)


# ---------------------------------------------------------------- meshing


def test_mesh_is_valid(coarse):
    assert np.all(coarse.volumes > 0)
    assert coarse.volumes.sum() == pytest.approx(1.0, rel=1e-13)
    assert np.all(coarse.conductivity == 1.0)
    # the boundary faces close up: every boundary edge is shared by two faces
    faces, _ = coarse.boundary_faces
    edges = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    assert np.all(counts == 2)


def test_aligned_cube_fractions_are_exact(box):
    mesh = fem.mesh_domain(box, [geo.box_polyhedron([0.25] * 3, [0.75] * 3)], h=1 / 8)
    assert np.all((mesh.fraction == 0) | (mesh.fraction == 1))
    assert np.sum(mesh.fraction * mesh.volumes) == pytest.approx(0.125, rel=1e-13)
    assert set(np.unique(mesh.conductivity)) == {1.0, mesh.k}


@given(st.tuples(*[st.floats(0, 2 * np.pi)] * 3))
def test_rotated_cube_volume(angles):
    verts = (geo.cube_polyhedron([0, 0, 0], 0.4).vertices @ rotation(angles).T) + 0.5
    cube = geo.cube_polyhedron([0, 0, 0], 0.4).moved(verts)
    mesh = fem.mesh_domain(fem.DomainSpec(), [cube], h=1 / 16)
    assert np.sum(mesh.fraction * mesh.volumes) == pytest.approx(0.064, rel=1e-3)
    c = mesh.conductivity
    assert np.all((c >= 1.0) & (c <= mesh.k))


def test_under_resolved_inclusion(box):
    with pytest.raises(FeatureUnderResolved):
        fem.mesh_domain(box, [geo.cube_polyhedron([0.5, 0.5, 0.5], 0.1)], h=1 / 8)


def test_augmented_mesh_extends_past_sigma(box):
    mesh = fem.mesh_domain(box, h=1 / 8, augmented=True)
    assert mesh.nodes[:, 2].max() == pytest.approx(1.0 + 2 / 8)
    assert np.sum(mesh.volumes[mesh.in_omega]) == pytest.approx(1.0, rel=1e-13)


# ---------------------------------------------------------------- assembly


def test_element_matrix_examples(coarse):
    ke = fem.element_matrices(coarse)
    assert np.abs(ke.sum(axis=2)).max() <= 1e-13 * np.abs(ke).max()
    assert np.array_equal(ke, np.swapaxes(ke, 1, 2)) or np.abs(ke - np.swapaxes(ke, 1, 2)).max() <= 1e-15
    scaled = fem.element_matrices(coarse, np.full(coarse.n_elements, 2.5))
    assert np.allclose(scaled, 2.5 * ke, rtol=1e-15, atol=0)


@given(st.lists(st.floats(0.1, 10), min_size=9, max_size=9))
def test_tensor_coefficient_matrices(entries):
    mesh = fem.mesh_domain(fem.DomainSpec(), h=1 / 4)
    a = np.array(entries).reshape(3, 3)
    spd = a @ a.T + np.eye(3)
    ke = fem.element_matrices(mesh, np.broadcast_to(spd, (mesh.n_elements, 3, 3)))
    assert np.abs(ke - np.swapaxes(ke, 1, 2)).max() <= 1e-12 * np.abs(ke).max()
    assert np.abs(ke.sum(axis=2)).max() <= 1e-12 * np.abs(ke).max()
    assert np.linalg.eigvalsh(ke).min() >= -1e-12 * np.abs(ke).max()


def test_global_matrix_symmetric(two_phase):
    K = fem.assemble(two_phase)
    assert abs(K - K.T).max() <= 1e-15 * abs(K).max()


# ---------------------------------------------------------------- solves


def test_linear_data_reproduced(coarse):
    g = coarse.nodes[:, 0].copy()
    for method in ("cg", "lu"):
        u = fem.solve_dirichlet(coarse, g, method=method)
        assert np.abs(u.values - coarse.nodes[:, 0]).max() <= 1e-9


def test_constants_reproduced(two_phase):
    one = np.ones(two_phase.n_nodes)
    assert np.abs(fem.solve_dirichlet(two_phase, one, method="lu").values - 1.0).max() <= 1e-12
    # conjugate gradients stop at a relative residual of 1e-10
    assert np.abs(fem.solve_dirichlet(two_phase, one).values - 1.0).max() <= 1e-8


def test_dirichlet_nodes_carry_data(two_phase):
    rng = np.random.default_rng(0)
    g = rng.normal(size=two_phase.n_nodes)
    u = fem.solve_dirichlet(two_phase, g)
    mask = two_phase.dirichlet_mask
    assert np.array_equal(u.values[mask], g[mask])


def test_energy_pairing_examples(coarse, two_phase):
    x = fem.DiscreteField(coarse, coarse.nodes[:, 0].copy())
    assert fem.energy_pairing(x, x) == pytest.approx(1.0, rel=1e-13)
    one = fem.DiscreteField(coarse, np.ones(coarse.n_nodes))
    assert fem.energy_pairing(x, one) == 0.0
    rng = np.random.default_rng(1)
    u = fem.DiscreteField(two_phase, rng.normal(size=two_phase.n_nodes))
    v = fem.DiscreteField(two_phase, rng.normal(size=two_phase.n_nodes))
    assert fem.energy_pairing(u, v) == pytest.approx(fem.energy_pairing(v, u), rel=1e-14)
    K = fem.assemble(two_phase)
    assert fem.energy_pairing(u, v) == pytest.approx(u.values @ (K @ v.values), rel=1e-12)
    with pytest.raises(MeshMismatch):
        fem.energy_pairing(u, x)


def test_field_interpolates_linears(coarse):
    f = fem.DiscreteField(coarse, coarse.nodes @ np.array([1.0, -2.0, 0.5]))
    pts = np.random.default_rng(2).uniform(0, 1, size=(30, 3))
    assert np.allclose(f(pts), pts @ np.array([1.0, -2.0, 0.5]), atol=1e-13)


# ---------------------------------------------------------------- Green functions


@pytest.fixture(scope="module")
def green_setup(box):
    mesh = fem.mesh_domain(box, h=1 / 16)
    solver = fem.DirichletSolver(mesh, method="lu")
    y, x0 = np.array([0.5, 0.5, 0.5]), np.array([0.4, 0.6, 0.35])
    return mesh, solver, y, x0, fem.green_approx(mesh, y, solver=solver)


def test_green_positive_and_bounded(green_setup):
    mesh, _, y, _, G = green_setup
    inner = ~mesh.dirichlet_mask
    assert np.all(G.values >= 0)
    # centre nodes of corner cells couple to the interior with zero weight
    deep = fem.DomainSpec().distance_to_boundary(mesh.nodes) > mesh.h
    assert np.all(G.values[deep] > 0)
    r = np.linalg.norm(mesh.nodes - y, axis=1)
    far = inner & (r > 6 * mesh.h)
    # free-space bound 1 / (4 pi r), up to discretization
    assert np.max(G.values[far] * r[far]) <= 1.1 / (4 * np.pi)


def test_green_reciprocity(green_setup):
    mesh, solver, y, x0, G = green_setup
    Gx = fem.green_approx(mesh, x0, solver=solver)
    assert fem.green_pairing(G, x0) == pytest.approx(fem.green_pairing(Gx, y), rel=1e-10)


def test_green_source_too_close(green_setup):
    mesh = green_setup[0]
    with pytest.raises(SourceTooClose):
        fem.green_approx(mesh, [0.5, 0.5, 0.1])
    with pytest.raises(SourceTooClose):
        fem.green_approx(mesh, [0.5, 0.5, 0.5], rho=mesh.h)


def test_bump_has_unit_mass():
    r = np.linspace(0, 1, 200001)
    rho = 0.7
    mass = np.trapezoid(4 * np.pi * r ** 2 * fem.bump(r, rho), r)
    assert mass == pytest.approx(1.0, rel=1e-8)


def test_restriction_from_augmented_mesh(box):
    big = fem.mesh_domain(box, h=1 / 8, augmented=True)
    small = fem.mesh_domain(box, h=1 / 8)
    f = fem.DiscreteField(big, big.nodes[:, 2] ** 2)
    g = fem.restrict_to(f, small)
    assert np.array_equal(g.values, small.nodes[:, 2] ** 2)
    with pytest.raises(MeshMismatch):
        fem.restrict_to(g, big)
