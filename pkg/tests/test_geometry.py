import math

import numpy as np
import pytest

from core.errors import AntipodalPoints, LightlikeTangent, OffQuadric, ZeroTangent
from core.geometry import (
    Branch,
    Geometry,
    angle,
    check_triangle_laws,
    cross,
    distance,
    inner,
    killing_basis,
)
from core.sampling import DE_SITTER_CASES, de_sitter_case, random_triangle

from conftest import CURVED, GEOMETRIES

E1, E2_, E3 = np.eye(3)


def test_inner_examples():
    assert inner(E3, E3, Geometry.H2) == -1.0
    assert inner(E1, E2_, Geometry.S2) == 0.0
    assert inner([1, 2, 3], [1, 2, 3], Geometry.DS2) == -4.0


def test_cross_examples():
    err = np.linalg.norm(cross(E1, E2_, Geometry.H2) - np.array([0.0, 0.0, -1.0]))
    assert err < 1e-15
    err = np.linalg.norm(cross(E1, E2_, Geometry.S2) - E3)
    assert err < 1e-15


@pytest.mark.parametrize("g", GEOMETRIES)
def test_cross_is_orthogonal(g, rng):
    for _ in range(20):
        u, v = rng.standard_normal((2, 3))
        c = cross(u, v, g)
        assert abs(inner(u, c, g)) < 1e-12
        assert abs(inner(v, c, g)) < 1e-12


def test_minkowski_triple_product_is_cyclic(rng):
    g = Geometry.H2
    for _ in range(20):
        X, Y, Z = rng.standard_normal((3, 3))
        err = abs(inner(X, cross(Y, Z, g), g) - inner(Y, cross(Z, X, g), g))
        assert err < 1e-12


@pytest.mark.parametrize("g", [Geometry.H2, Geometry.DS2])
def test_minkowski_cross_contraction(g, rng):
    """<X [x] Y, X [x] Z> = -<X, X><Y, Z> for X orthogonal to Y and Z."""
    m = Geometry.H2
    for _ in range(20):
        X = random_triangle(g, rng)[0]
        Y, Z = rng.standard_normal((2, 3))
        Y = Y - g.epsilon * inner(Y, X, m) * X
        Z = Z - g.epsilon * inner(Z, X, m) * X
        lhs = inner(cross(X, Y, m), cross(X, Z, m), m)
        err = abs(lhs + inner(X, X, m) * inner(Y, Z, m))
        assert err < 1e-10 * max(1.0, np.linalg.norm(Y) * np.linalg.norm(Z))


def test_desitter_distance_examples():
    assert abs(distance(E1, E2_, Geometry.DS2).value - math.pi / 2) < 1e-15
    s = 0.8
    d = distance(E1, [math.cosh(s), 0.0, math.sinh(s)], Geometry.DS2)
    assert d.branch is Branch.TIMELIKE
    assert abs(d.value - 1j * s) < 1e-12


def test_spherical_distance_example():
    for t in (0.1, 1.0, 2.5):
        assert abs(distance(E3, [math.sin(t), 0.0, math.cos(t)], Geometry.S2).value - t) < 1e-12


def test_distance_errors():
    with pytest.raises(AntipodalPoints):
        distance(E3, -E3, Geometry.S2)
    with pytest.raises(OffQuadric):
        distance([0.0, 0.0, 2.0], E3, Geometry.S2)
    with pytest.raises(OffQuadric):
        distance([0.0, 0.0, -1.0], E3, Geometry.H2)


def test_desitter_distance_branches_are_consistent(rng):
    g = Geometry.DS2
    for _ in range(50):
        a, b = random_triangle(g, rng)[:2]
        d = distance(a, b, g)
        err = abs(np.cos(d.value) - inner(a, b, g))
        assert err < 1e-9


def test_desitter_lightlike_separation():
    g = Geometry.DS2
    x = E1
    y = x + 0.5 * np.array([0.0, 1.0, 1.0])
    d = distance(x, y, g)
    assert d.branch is Branch.LIGHTLIKE
    assert d.value == 0


def test_angle_examples():
    assert abs(angle(E3, E1, E2_, Geometry.S2).value - math.pi / 2) < 1e-15

    r = 0.6
    u = np.array([0.0, 0.0, 1.0])
    v = np.array([0.0, math.sinh(r), math.cosh(r)])
    a = angle(E1, u, v, Geometry.DS2)
    assert abs(a.value - 1j * r) < 1e-12


def test_mixed_desitter_angle():
    r = 0.4
    u = np.array([0.0, 1.0, 0.0])
    v = np.array([0.0, math.sinh(r), math.cosh(r)])
    g = Geometry.DS2
    a = angle(E1, u, v, g)
    assert a.branch is Branch.MIXED
    assert abs(a.value - (math.pi / 2 + 1j * r)) < 1e-12
    lhs = inner(u, v, g) ** 2
    rhs = np.cos(a.value) ** 2 * inner(u, u, g) * inner(v, v, g)
    assert abs(lhs - rhs) < 1e-12


def test_angle_errors():
    with pytest.raises(LightlikeTangent):
        angle(E1, [0.0, 1.0, 1.0], [0.0, 1.0, 0.0], Geometry.DS2)
    with pytest.raises(ZeroTangent):
        angle(E3, np.zeros(3), E1, Geometry.S2)


def test_killing_basis_examples():
    rot = killing_basis(Geometry.S2)[2]
    assert np.linalg.norm(rot(E1) - E2_) < 1e-15
    assert np.linalg.norm(killing_basis(Geometry.H2)[2](E3)) < 1e-15
    assert np.linalg.norm(killing_basis(Geometry.E2)[0](E1) - E2_) < 1e-15


@pytest.mark.parametrize("g", CURVED)
def test_killing_fields_are_infinitesimal_isometries(g, rng):
    for kappa in killing_basis(g):
        for _ in range(10):
            x, y = rng.standard_normal((2, 3))
            err = abs(inner(kappa(x), y, g) + inner(x, kappa(y), g))
            assert err < 1e-12


def test_octant_triangle_laws():
    report = check_triangle_laws(E1, E2_, E3, Geometry.S2)
    assert report.max_residual < 1e-12


@pytest.mark.parametrize("g", GEOMETRIES)
def test_random_triangle_laws(g, rng):
    for _ in range(30):
        A, B, C = random_triangle(g, rng, spacelike=True)
        report = check_triangle_laws(A, B, C, g)
        assert report.max_residual < 1e-10


def test_desitter_triangle_laws_in_every_case(rng):
    g = Geometry.DS2
    seen = set()
    for i in range(200):
        case = DE_SITTER_CASES[i % 4]
        A, B, C = random_triangle(g, rng, case=case)
        seen.add(de_sitter_case([A, B, C]))
        report = check_triangle_laws(A, B, C, g)
        assert report.max_residual < 1e-10
    assert seen == set(DE_SITTER_CASES)


def test_spacelike_desitter_triangles_have_real_sides(rng):
    for _ in range(50):
        pts = random_triangle(Geometry.DS2, rng, spacelike=True)
        assert de_sitter_case(pts) == (True, True)


def test_triangle_case_needs_desitter(rng):
    with pytest.raises(ValueError):
        random_triangle(Geometry.S2, rng, case=(True, True))
