import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from polystab import geometry as geo

settings.register_profile(
    "polystab",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("polystab")


def relabel(poly, perm):
    """Same solid with vertex storage permuted: new index ``perm[i]`` for old ``i``."""
    perm = np.asarray(perm)
    verts = np.empty_like(poly.vertices)
    verts[perm] = poly.vertices
    faces = [tuple(int(perm[i]) for i in f) for f in poly.faces]
    return geo.build_polyhedron(verts, faces)


def rotation(angles):
    a, b, c = angles
    rx = np.array([[1, 0, 0], [0, np.cos(a), -np.sin(a)], [0, np.sin(a), np.cos(a)]])
    ry = np.array([[np.cos(b), 0, np.sin(b)], [0, 1, 0], [-np.sin(b), 0, np.cos(b)]])
    rz = np.array([[np.cos(c), -np.sin(c), 0], [np.sin(c), np.cos(c), 0], [0, 0, 1]])
    return rz @ ry @ rx


@pytest.fixture
def unit_cube():
    return geo.box_polyhedron([0, 0, 0], [1, 1, 1])


@pytest.fixture
def prior():
    return geo.AprioriData()


@pytest.fixture
def base_cube():
    return geo.cube_polyhedron([0.5, 0.5, 0.4], 0.3)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
