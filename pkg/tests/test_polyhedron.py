import json
import logging
import math

import numpy as np
import pytest

from core.deformation import isometric_deformation_space
from core.errors import DegeneratePolyhedron, ExteriorBasepoint, InvalidVertex
from core.polyhedron import (
    ConvexPolyhedron,
    dihedral_angles,
    dihedral_variations,
    face_angles,
    flex_space,
    link_residual,
    rigidity_verdict,
    sum_identities,
    trivial_flexes,
    vertex_link,
)
from core.sampling import cube, icosahedron, random_convex_hull, tetrahedron
from utils.validators import ValidationError, parse_polyhedron

SOLIDS = {"tetrahedron": tetrahedron, "cube": cube, "icosahedron": icosahedron}


def _off_text(P: ConvexPolyhedron) -> str:
    lines = ["OFF", "# written by the test suite", f"{P.n_vertices} {len(P.faces)} 0"]
    lines += [" ".join(repr(float(c)) for c in v) for v in P.vertices]
    lines += [" ".join(str(i) for i in [len(f), *f]) for f in P.faces]
    return "\n".join(lines) + "\n"


@pytest.mark.parametrize("name", sorted(SOLIDS))
def test_platonic_solids_are_rigid(name):
    report = rigidity_verdict(SOLIDS[name]())
    assert report.verdict == "RIGID"
    assert report.quotient_dimension == 0
    assert report.flex_dimension == 6
    assert report.trivial_residual < 1e-10
    assert report.links_convex
    assert report.link_residual < 1e-10
    assert report.w_global_sum < 1e-8
    assert report.to_dict()["quotient_dim"] == 0


def test_random_hulls_are_rigid(rng):
    for _ in range(5):
        P = random_convex_hull(int(rng.integers(8, 20)), rng)
        report = rigidity_verdict(P)
        assert report.verdict == "RIGID"
        assert report.links_convex
        assert report.link_residual < 1e-9
        assert report.w_global_sum < 1e-8


def test_cube_bar_framework_flexes():
    report = rigidity_verdict(cube(), mode="edges")
    assert report.verdict is None
    assert report.flex_dimension == 12
    assert report.quotient_dimension == 6


def test_unknown_mode():
    with pytest.raises(ValueError):
        flex_space(cube(), mode="diagonals")


def test_cube_angles():
    P = cube()
    assert len(P.edges) == 12
    err = np.linalg.norm(dihedral_angles(P) - math.pi / 2)
    assert err < 1e-12
    for x in range(P.n_vertices):
        err = np.linalg.norm(face_angles(P, x) - math.pi / 2)
        assert err < 1e-12


def test_tetrahedron_dihedral_angle():
    err = np.linalg.norm(dihedral_angles(tetrahedron()) - math.acos(1.0 / 3.0))
    assert err < 1e-12


def test_links_are_convex_and_match_dihedral_angles(rng):
    P = random_convex_hull(15, rng)
    convex, residual = link_residual(P)
    assert convex
    assert residual < 1e-9
    link = vertex_link(P, 0)
    assert len(link.neighbours) == link.polygon.n >= 3


def test_trivial_flexes_do_not_bend():
    P = icosahedron()
    for flex in trivial_flexes(P):
        err = np.linalg.norm(dihedral_variations(P, flex))
        assert err < 1e-12


def test_sum_identities_on_a_rotation():
    P = cube()
    flex = np.cross([0.3, -0.2, 1.0], P.vertices)
    report = sum_identities(P, flex)
    assert abs(report.global_sum) < 1e-12
    assert report.prediction_residual < 1e-12
    assert report.constancy < 1e-12
    assert report.signs_ok
    assert all(report.basepoint_in_cone)


def _star_flex(P, x, rng):
    """Isometric motion of the faces around x: its link deforms, x and all other vertices stay put."""
    link = vertex_link(P, x)
    space = isometric_deformation_space(link.polygon)
    U = (space.quotient_basis.T @ rng.standard_normal(space.quotient_dimension)).reshape(-1, 3)
    flex = np.zeros_like(P.vertices)
    lengths = np.linalg.norm(P.vertices[link.neighbours] - P.vertices[x], axis=1)
    flex[link.neighbours] = lengths[:, None] * U
    return flex, link


def test_sum_identities_on_vertex_stars(rng):
    P = random_convex_hull(14, rng)
    stars = [x for x in range(P.n_vertices) if len(vertex_link(P, x).neighbours) >= 4]
    assert stars
    index = {e: k for k, e in enumerate((e.a, e.b) for e in P.edges)}
    h = 1e-5
    for x in stars:
        flex, link = _star_flex(P, x, rng)
        report = sum_identities(P, flex)
        scale = max(1.0, abs(report.predicted[x]))
        assert abs(report.vertex_sums[x] - report.predicted[x]) < 1e-10 * scale
        assert report.vertex_sums[x] < 0

        at_x = [index[(min(x, y), max(x, y))] for y in link.neighbours]
        theta = dihedral_variations(P, flex)[at_x]
        assert np.max(np.abs(theta)) > 1e-6
        plus = dihedral_angles(P, P.vertices + h * flex)[at_x]
        minus = dihedral_angles(P, P.vertices - h * flex)[at_x]
        assert np.max(np.abs((plus - minus) / (2.0 * h) - theta)) < 1e-6


def test_flex_space_logs_lazily():
    class Collect(logging.Handler):
        def __init__(self):
            super().__init__(logging.DEBUG)
            self.records = []

        def emit(self, record):
            self.records.append(record)

    logger = logging.getLogger("core.polyhedron")
    handler = Collect()
    level = logger.level
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG)
    try:
        flex_space(cube())
    finally:
        logger.removeHandler(handler)
        logger.setLevel(level)
    records = [r for r in handler.records if r.msg.startswith("flex space")]
    assert records
    assert records[0].args[:3] == ("faces", 6, 0)
    assert records[0].getMessage().startswith("flex space (faces mode): kernel 6, quotient 0, gap ")


def test_contains():
    P = cube()
    assert P.contains(P.centroid())
    assert not P.contains([2.0, 0.0, 0.0])
    assert not P.contains([0.5, 0.0, 0.0])


def test_exterior_basepoint():
    P = cube()
    with pytest.raises(ExteriorBasepoint):
        sum_identities(P, np.zeros((8, 3)), p0=[5.0, 0.0, 0.0])


def test_missing_vertex():
    with pytest.raises(InvalidVertex):
        vertex_link(cube(), 99)


@pytest.mark.parametrize("name", sorted(SOLIDS))
def test_off_and_json_documents(name):
    P = SOLIDS[name]()
    Q = parse_polyhedron(_off_text(P))
    assert Q.faces == P.faces
    assert np.linalg.norm(Q.vertices - P.vertices) < 1e-15
    R = parse_polyhedron(json.dumps(P.to_dict()))
    assert R.faces == P.faces


def test_faces_must_point_outward():
    P = tetrahedron()
    with pytest.raises(DegeneratePolyhedron):
        ConvexPolyhedron(P.vertices, [f[::-1] for f in P.faces])


def test_flat_point_sets_have_no_hull():
    with pytest.raises(DegeneratePolyhedron):
        ConvexPolyhedron.from_points([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])


@pytest.mark.parametrize("doc", [
    '{"vertices": [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], '
    '"faces": [[0, 2, 1], [0, 1, 3], [0, 3, 7], [1, 2, 3]]}',
    '{"vertices": [[0, 0, 0], [1, 0, 0], [0, 1, 0]], "faces": [[0, 1, 2]]}',
    'OFF\n4 4 0\n0 0 0\n1 0 0\n',
    'OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n',
])
def test_invalid_polyhedron_documents(doc):
    with pytest.raises(ValidationError):
        parse_polyhedron(doc)
