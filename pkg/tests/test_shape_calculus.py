import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polystab import deformation as dfm
from polystab import dtn
from polystab import fem
from polystab import geometry as geo
from polystab import shape_calculus as sc
from polystab.harness import probe_data, probe_data_odd, probe_data_tilted

H = 1 / 16
PRIOR = geo.AprioriData()
CUBE = geo.cube_polyhedron([0.5, 0.5, 0.4], 0.3)


@pytest.fixture(scope="module")
def mesh():
    return fem.mesh_domain(fem.DomainSpec(), [CUBE], h=H)


@pytest.fixture(scope="module")
def field():
    p1 = CUBE.scaled(1.04)
    return dfm.build_field(CUBE, p1, geo.match_vertices(CUBE, p1), PRIOR)


@pytest.fixture(scope="module")
def zero_field():
    return dfm.field_from_displacements(CUBE, np.zeros((8, 3)), PRIOR)


@pytest.fixture(scope="module")
def op(mesh):
    return dtn.dtn_matrix(mesh, keep_lifts=True)


# ---------------------------------------------------------------- F(t)


def test_f_at_zero_is_the_dtn_pairing(mesh, field, op):
    f = op.basis.interpolate(probe_data)
    g = op.basis.interpolate(probe_data_tilted)
    assert sc.F_value(field, 0.0, probe_data, probe_data_tilted, mesh) == pytest.approx(op.pairing(f, g), rel=1e-8)


def test_f_is_constant_for_zero_field(mesh, zero_field):
    vals = [sc.F_value(zero_field, t, probe_data, probe_data_odd, mesh) for t in (0.0, 0.3, 1.0)]
    assert vals[0] == vals[1] == vals[2]


@pytest.mark.parametrize("t", [-0.5, 0.0, 0.5, 1.0])
def test_f_is_coercive(mesh, field, t):
    assert sc.F_value(field, t, probe_data_odd, probe_data_odd, mesh) > 0


def test_pullback_coefficient_at_zero(mesh, field):
    coef = sc.pullback_coefficient(field, mesh, 0.0)
    assert np.array_equal(coef, mesh.conductivity[:, None, None] * np.eye(3))


# ---------------------------------------------------------------- F'(0)


def test_zero_field_has_zero_derivative(mesh, zero_field):
    assert sc.F_prime_distributed(zero_field, probe_data, probe_data, mesh).value == 0.0
    assert sc.F_prime_boundary(zero_field, probe_data, probe_data, mesh).value == 0.0
    rows, _ = sc.F_prime_continuity_probe(zero_field, probe_data, probe_data, mesh, [0.2, 0.1])
    assert all(r[2] == 0.0 for r in rows)


def test_distributed_form_is_symmetric(mesh, field):
    a = sc.F_prime_distributed(field, probe_data, probe_data_tilted, mesh).value
    b = sc.F_prime_distributed(field, probe_data_tilted, probe_data, mesh).value
    assert a == pytest.approx(b, rel=1e-9)


def test_distributed_form_matches_differences(mesh, field):
    d = sc.F_prime_distributed(field, probe_data, probe_data_tilted, mesh).value
    t = 1e-3
    fd = (sc.F_value(field, t, probe_data, probe_data_tilted, mesh) - sc.F_value(field, -t, probe_data, probe_data_tilted, mesh)) / (2 * t)
    assert fd == pytest.approx(d, rel=1e-2)


def test_difference_error_is_second_order(mesh, field):
    d = sc.F_prime_distributed(field, probe_data_odd, probe_data_odd, mesh).value
    ts = np.array([0.2, 0.1, 0.05])
    err = [abs((sc.F_value(field, t, probe_data_odd, probe_data_odd, mesh) - sc.F_value(field, -t, probe_data_odd, probe_data_odd, mesh)) / (2 * t) - d) for t in ts]
    assert np.polyfit(np.log(ts), np.log(err), 1)[0] >= 1.8


@given(st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_polarization_tensor(direction):
    n = np.array(direction) / np.linalg.norm(direction)
    M = sc.polarization_tensor(n, 3.0)
    assert np.allclose(M @ n, 3.0 * n)
    t = np.cross(n, [1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.cross(n, [0.0, 1.0, 0.0])
    assert np.allclose(M @ t, t)
    S = sc.polarization_tensor(n, 3.0, swapped=True)
    assert np.allclose(S @ n, n) and np.allclose(S @ t, 3.0 * t)


# ---------------------------------------------------------------- operator level


def test_derivative_matrix_agrees_with_pairings(mesh, field, op):
    mat = sc.derivative_matrix(field, mesh, op.lifts)
    assert np.abs(mat - mat.T).max() == 0.0
    rng = np.random.default_rng(0)
    f, g = rng.normal(size=(2, len(op.basis)))
    sol = (op.lifts @ f, op.lifts @ g)
    d = sc.F_prime_distributed(field, f, g, mesh, solutions=sol).value
    assert f @ mat @ g == pytest.approx(d, rel=1e-8)


def test_norm_probe_degenerate_for_equal_shapes(mesh, zero_field, op):
    probe = sc.derivative_norm_probe(zero_field, op.basis, mesh, p1=CUBE, dtn=op)
    assert probe.norm == 0.0 and probe.d_hausdorff == 0.0
    assert np.isnan(probe.ratio)


def test_norm_probe_ratio_is_positive(mesh, field, op):
    probe = sc.derivative_norm_probe(field, op.basis, mesh, p1=CUBE.scaled(1.04), dtn=op)
    assert probe.ratio > 0


def test_fraction_derivatives_match_dtn_differences(mesh, op):
    jac = sc.vertex_fraction_derivatives(CUBE, mesh, op.lifts)
    assert jac.shape == (8, 3, len(op.basis), len(op.basis))
    s = 1e-3
    moved = [CUBE.vertices.copy() for _ in range(2)]
    moved[0][6, 2] += s
    moved[1][6, 2] -= s
    lam = [dtn.dtn_matrix(mesh.with_polyhedra([CUBE.moved(v)]), op.basis).matrix for v in moved]
    fd = (lam[0] - lam[1]) / (2 * s)
    assert np.abs(jac[6, 2] - fd).max() <= 1e-3 * np.abs(fd).max()
