import math

import numpy as np
import pytest

from core.deformation import isometric_deformation_space, isometric_path
from core.errors import HypothesisViolated, NotInHemisphere, SingularPoint, UnsupportedGeometry
from core.geometry import Geometry
from core.moduli import (
    BarycenterKind,
    _scaled_lift,
    area_by_quadrature,
    area_form_gA,
    area_form_gram,
    barycenter,
    convergence_experiment,
    dual_velocities,
    fixed_angle_space,
    homothety,
    moduli_metric,
    projective_flatten,
    dual_contains_check,
    second_fundamental_form_check,
    signature,
    tangential_polygon,
)
from core.polygon import (
    Polygon,
    apply_isometry,
    area,
    dual_polygon,
    edge_length_values,
    euclidean_area,
    is_convex,
)
from core.sampling import random_convex_polygon, random_rotation

from conftest import regular_polygon

KINDS = list(BarycenterKind)


def _flex(p, rng):
    space = isometric_deformation_space(p)
    U = (space.quotient_basis.T @ rng.standard_normal(space.quotient_dimension)).reshape(-1, 3)
    return U / np.linalg.norm(U)


@pytest.mark.parametrize("kind", KINDS)
def test_octant_barycenters(octant, kind):
    err = np.linalg.norm(barycenter(octant, kind) - np.ones(3) / math.sqrt(3.0))
    assert err < 1e-8


@pytest.mark.parametrize("kind", KINDS)
def test_barycenters_are_equivariant(kind, rng):
    p = random_convex_polygon(Geometry.S2, 5, rng)
    R = random_rotation(rng)
    err = np.linalg.norm(barycenter(apply_isometry(p, R), kind) - R @ barycenter(p, kind))
    assert err < 1e-8


@pytest.mark.parametrize("g", [Geometry.S2, Geometry.H2])
def test_quadrature_area(g, rng):
    for _ in range(3):
        p = random_convex_polygon(g, 5, rng)
        assert abs(area_by_quadrature(p) - area(p)) < 1e-6


def test_barycenters_need_a_curved_plane(unit_square):
    with pytest.raises(UnsupportedGeometry):
        barycenter(unit_square, BarycenterKind.C_V)


@pytest.mark.parametrize("g", [Geometry.S2, Geometry.H2])
@pytest.mark.parametrize("kind", KINDS)
def test_metric_is_positive_definite(g, kind, rng):
    for _ in range(3):
        p = random_convex_polygon(g, 6, rng)
        sample = moduli_metric(p, kind)
        assert sample.gram.shape == (3, 3)
        assert np.linalg.norm(sample.gram - sample.gram.T) < 1e-15
        assert sample.positive_definite
        assert sample.to_dict()["positive_definite"]


@pytest.mark.parametrize("kind", KINDS)
def test_metric_spectrum_is_rotation_invariant(kind, rng):
    p = random_convex_polygon(Geometry.S2, 5, rng)
    q = apply_isometry(p, random_rotation(rng))
    a = moduli_metric(p, kind).eigenvalues
    b = moduli_metric(q, kind).eigenvalues
    assert np.linalg.norm(a - b) < 1e-8 * max(1.0, np.max(np.abs(a)))


def test_triangle_metric_is_empty(octant):
    sample = moduli_metric(octant, BarycenterKind.C_V)
    assert sample.gram.shape == (0, 0)
    assert sample.eigenvalues.size == 0


def test_interior_barycenter_lies_in_the_dual(rng):
    for _ in range(5):
        p = random_convex_polygon(Geometry.S2, 5, rng)
        assert dual_contains_check(p, BarycenterKind.C_I)
    with pytest.raises(UnsupportedGeometry):
        dual_contains_check(random_convex_polygon(Geometry.H2, 5, rng), BarycenterKind.C_I)


def test_angle_image_curvature(rng):
    for _ in range(3):
        q = random_convex_polygon(Geometry.S2, 6, rng)
        report = second_fundamental_form_check(q, _flex(q, rng))
        assert report.residual < 1e-5
        assert report.cone_negative


def test_angle_image_singular_points():
    t = 2.0 * math.pi * np.arange(4) / 4
    q = Polygon(Geometry.S2, np.stack([np.cos(t), np.sin(t), np.zeros(4)], axis=1))
    with pytest.raises(SingularPoint):
        second_fundamental_form_check(q, np.zeros((4, 3)))


def test_homothety_has_area_norm(rng):
    for _ in range(5):
        qE = random_convex_polygon(Geometry.E2, 6, rng)
        H = homothety(qE)
        assert abs(area_form_gA(qE, H, H) - euclidean_area(qE)) < 1e-10


def test_fixed_angle_space(rng):
    qE = random_convex_polygon(Geometry.E2, 5, rng)
    basis = fixed_angle_space(qE)
    assert basis.shape == (3, 5, 3)
    d = np.roll(qE.vertices, -1, axis=0) - qE.vertices
    for U in basis:
        dU = np.roll(U, -1, axis=0) - U
        assert np.max(np.abs(d[:, 0] * dU[:, 1] - d[:, 1] * dU[:, 0])) < 1e-12
        assert np.linalg.norm(U.sum(axis=0)) < 1e-12
    assert signature(area_form_gram(qE, basis)) == (1, 2)


@pytest.mark.parametrize("n", [4, 6, 7])
def test_area_form_signature(n, rng):
    qE = random_convex_polygon(Geometry.E2, n, rng)
    assert signature(area_form_gram(qE, fixed_angle_space(qE))) == (1, n - 3)


def test_area_form_does_not_depend_on_the_origin(rng):
    qE = random_convex_polygon(Geometry.E2, 6, rng)
    basis = fixed_angle_space(qE)
    G0 = area_form_gram(qE, basis)
    G1 = area_form_gram(qE, basis, x0=[3.0, -2.0])
    assert np.linalg.norm(G0 - G1) < 1e-10 * max(1.0, np.linalg.norm(G0))


def test_area_form_needs_a_planar_polygon(octant):
    with pytest.raises(UnsupportedGeometry):
        fixed_angle_space(octant)


def test_flattening_outside_a_hemisphere():
    q = Polygon(Geometry.S2, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(NotInHemisphere):
        projective_flatten(q)


def test_flattening_small_polygons():
    q = apply_isometry(regular_polygon(Geometry.S2, 3, 0.01), random_rotation(np.random.default_rng(3)))
    flat = projective_flatten(q, anchor_vertex=0)
    ratio = edge_length_values(flat) / edge_length_values(q)
    assert np.max(np.abs(ratio - 1.0)) < 1e-3
    assert abs(flat.vertices[0, 1]) < 1e-15
    assert flat.vertices[0, 0] > 0


def test_flattening_keeps_convexity(rng):
    for _ in range(5):
        q = random_convex_polygon(Geometry.S2, 6, rng)
        assert is_convex(projective_flatten(q))


@pytest.mark.parametrize("g", [Geometry.S2, Geometry.H2])
def test_dual_velocities(g, rng):
    p = random_convex_polygon(g, 5, rng)
    U = _flex(p, rng)
    h = 1e-4
    plus = dual_polygon(isometric_path(p, U, h)).vertices
    minus = dual_polygon(isometric_path(p, U, -h)).vertices
    err = np.linalg.norm((plus - minus) / (2.0 * h) - dual_velocities(p, U))
    assert err < 1e-6


def test_tangential_square():
    pts = tangential_polygon([math.pi / 2] * 4)
    err = np.linalg.norm(np.linalg.norm(pts, axis=1) - math.sqrt(2.0))
    assert err < 1e-12


def test_convergence_table():
    table = convergence_experiment([2.0 * math.pi / 5] * 5)
    assert list(table.columns) == ["k", "a_k", "discrepancy", "quotient_dimension"]
    assert table["k"].tolist() == [4, 8, 16, 32, 64]
    assert np.allclose(table["a_k"], 2.0 * math.pi / table["k"])
    assert (table["quotient_dimension"] == 2).all()
    d = table["discrepancy"].to_numpy()
    assert np.isfinite(d).all()
    assert int(np.sum(np.diff(d) > 0)) <= 1
    assert d[-1] < d[0]


def test_small_lifts_have_the_requested_area():
    base = tangential_polygon([2.0 * math.pi / 5] * 5)
    for k in (16, 64, 256):
        q = _scaled_lift(base, 2.0 * math.pi / k)
        assert abs(area(q) - 2.0 * math.pi / k) < 1e-12
        assert is_convex(q)


@pytest.mark.parametrize("alpha", [
    [math.pi / 2] * 4,
    [1.0, 1.0, 1.0],
    [2.0 * math.pi, -0.5, 0.5],
])
def test_convergence_hypotheses(alpha):
    with pytest.raises(HypothesisViolated):
        convergence_experiment(alpha, ks=(4,))
