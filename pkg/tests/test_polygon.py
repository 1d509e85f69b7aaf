import json
import math

import numpy as np
import pytest

from core.errors import NotConvex, OffQuadric, SelfIntersecting
from core.geometry import Geometry, normalize
from core.polygon import (
    Polygon,
    apply_isometry,
    area,
    dual_polygon,
    edge_length_values,
    edge_lengths,
    euclidean_area,
    exterior_angles,
    interior_angles,
    interior_contains,
    is_convex,
    is_simple,
    orientation,
)
from core.sampling import random_convex_polygon, random_rotation
from utils.validators import ValidationError, parse_polygon

from conftest import GEOMETRIES, regular_polygon


def test_octant(octant):
    err = np.linalg.norm(edge_length_values(octant) - math.pi / 2)
    assert err < 1e-12
    err = np.linalg.norm([a.re - math.pi / 2 for a in interior_angles(octant)])
    assert err < 1e-12
    assert abs(area(octant) - math.pi / 2) < 1e-12
    assert is_convex(octant)
    assert orientation(octant) == 1


def test_octant_is_self_dual(octant):
    dual = dual_polygon(octant)
    err = np.linalg.norm(np.sort(dual.vertices, axis=0) - np.sort(octant.vertices, axis=0))
    assert err < 1e-12


def test_octant_interior(octant):
    assert interior_contains(octant, np.ones(3) / math.sqrt(3.0))
    assert not interior_contains(octant, [-1.0, 0.0, 0.0])
    assert not interior_contains(octant, [1.0, 0.0, 0.0])


def test_unit_square(unit_square):
    err = np.linalg.norm(edge_length_values(unit_square) - 1.0)
    assert err < 1e-15
    err = np.linalg.norm([a.re - math.pi / 2 for a in interior_angles(unit_square)])
    assert err < 1e-12
    assert abs(euclidean_area(unit_square) - 1.0) < 1e-15
    assert is_convex(unit_square)


def test_reflex_vertex_is_not_convex():
    p = Polygon(Geometry.E2, [[0.0, 0.0], [2.0, 0.0], [1.0, 0.1], [1.0, 1.0]])
    assert not is_convex(p)


def test_polygon_rejects_off_quadric_points():
    with pytest.raises(OffQuadric):
        Polygon(Geometry.S2, [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]])


@pytest.mark.parametrize("g", GEOMETRIES)
@pytest.mark.parametrize("n", [3, 5, 7])
def test_random_polygons_are_convex(g, n, rng):
    for _ in range(5):
        p = random_convex_polygon(g, n, rng)
        assert p.n == n
        assert is_convex(p)
        assert orientation(p) == 1


@pytest.mark.parametrize("g", [Geometry.S2, Geometry.H2])
def test_double_dual_is_a_relabeling(g, rng):
    for _ in range(10):
        p = random_convex_polygon(g, 6, rng)
        back = dual_polygon(dual_polygon(p))
        err = np.linalg.norm(back.vertices - np.roll(p.vertices, -1, axis=0))
        assert err < 1e-9


def test_dual_vertices_are_poles_of_edges(rng):
    for _ in range(10):
        p = random_convex_polygon(Geometry.S2, 5, rng)
        d = dual_polygon(p).vertices
        err = np.max(np.abs(np.sum(d * p.vertices, axis=1))) + np.max(np.abs(np.sum(d * p.next_vertices, axis=1)))
        assert err < 1e-12


def test_dual_lengths_are_exterior_angles(rng):
    for _ in range(10):
        p = random_convex_polygon(Geometry.S2, 6, rng)
        dual = dual_polygon(p)
        err = np.linalg.norm(edge_length_values(dual) - np.roll(exterior_angles(p), -1))
        assert err < 1e-10
        assert abs(area(dual) - (2.0 * math.pi - edge_length_values(p).sum())) < 1e-10


def test_hyperbolic_dual_is_desitter(rng):
    p = random_convex_polygon(Geometry.H2, 5, rng)
    dual = dual_polygon(p)
    assert dual.geometry is Geometry.DS2
    err = np.max(np.abs(np.sum(dual.vertices * Geometry.H2.metric * dual.vertices, axis=1) - 1.0))
    assert err < 1e-12
    assert is_convex(dual)
    for m in edge_lengths(dual):
        assert m.is_real and 0.0 < m.re < math.pi


def test_desitter_angles_are_pi_minus_imaginary(rng):
    for _ in range(5):
        p = random_convex_polygon(Geometry.DS2, 5, rng)
        for a in interior_angles(p):
            assert abs(abs(a.re) - math.pi) < 1e-12
            assert a.im < 0


@pytest.mark.parametrize("g", [Geometry.S2, Geometry.H2])
def test_gauss_bonnet_is_additive(g, rng):
    for _ in range(5):
        p = random_convex_polygon(g, 6, rng)
        c = normalize(p.vertices.sum(axis=0), g)
        fan = sum(area(Polygon(g, [c, a, b])) for a, b in zip(p.vertices, p.next_vertices))
        assert abs(fan - area(p)) < 1e-8


def test_hyperbolic_right_angled_pentagon():
    # circumradius of the regular pentagon with right angles
    R = math.acosh(1.0 / (math.tan(math.pi / 5) * math.tan(math.pi / 4)))
    p = regular_polygon(Geometry.H2, 5, R)
    err = np.linalg.norm([a.re - math.pi / 2 for a in interior_angles(p)])
    assert err < 1e-10
    assert abs(area(p) - math.pi / 2) < 1e-10


def test_euclidean_turning_is_two_pi(rng):
    for _ in range(10):
        p = random_convex_polygon(Geometry.E2, 6, rng)
        assert abs(exterior_angles(p).sum() - 2.0 * math.pi) < 1e-9


def test_isometry_preserves_lengths(rng):
    p = random_convex_polygon(Geometry.S2, 5, rng)
    q = apply_isometry(p, random_rotation(rng))
    err = np.linalg.norm(edge_length_values(q) - edge_length_values(p))
    assert err < 1e-12


def test_dual_needs_convexity():
    p = Polygon(Geometry.S2, normalize(np.array([
        [1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [-1.0, 0.0, 1.0], [0.0, -1.0, 1.0],
    ])[::-1], Geometry.S2))
    with pytest.raises(NotConvex):
        dual_polygon(p)


@pytest.mark.parametrize("g", GEOMETRIES)
def test_json_round_trip(g, rng):
    p = random_convex_polygon(g, 5, rng)
    q = parse_polygon(json.dumps(p.to_dict()))
    assert q.geometry is g
    assert np.linalg.norm(q.vertices - p.vertices) < 1e-15


@pytest.mark.parametrize("doc", [
    '{"geometry": "X2", "vertices": [[0, 0], [1, 0], [0, 1]]}',
    '{"geometry": "E2", "vertices": [[0, 0], [1, 0]]}',
    '{"geometry": "S2", "schema": 2, "vertices": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}',
    '{"geometry": "E2", "vertices": [[0, 0], [1, "a"], [0, 1]]}',
    '[1, 2, 3]',
    '{"geometry": "E2", "vertices": ',
    '{"geometry": "S2", "vertices": [[1, 0, 0], [0, 2, 0], [0, 0, 1]]}',
    '{"geometry": "E2", "vertices": [[0, 0], [1, 0, 0], [0, 1]]}',
])
def test_invalid_documents(doc):
    with pytest.raises(ValidationError):
        parse_polygon(doc)


def test_bowtie_is_not_simple(rng):
    bowtie = Polygon(Geometry.E2, [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    assert not is_simple(bowtie)
    with pytest.raises(SelfIntersecting):
        is_convex(bowtie)
    with pytest.raises(SelfIntersecting):
        interior_contains(bowtie, [0.5, 0.25])
    for g in [Geometry.E2, Geometry.S2, Geometry.H2]:
        assert is_simple(random_convex_polygon(g, 6, rng))
