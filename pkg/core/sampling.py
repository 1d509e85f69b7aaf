"""Seeded generators for test polygons, triangles and polyhedra."""

import math
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from core.errors import DegenerateConfiguration, PolyflexError
from core.geometry import Branch, Geometry, distance
from core.polygon import Polygon, dual_polygon, is_convex, orientation
from utils.logger import setup_logger

logger = setup_logger(__name__)

MAX_TRIES = 200


def _jittered_angles(n: int, rng: np.random.Generator) -> np.ndarray:
    base = 2.0 * math.pi * np.arange(n) / n
    return base + rng.uniform(-0.35, 0.35, size=n) * 2.0 * math.pi / n + rng.uniform(0.0, 2.0 * math.pi)


def lorentz_boost(rapidity: float, direction: float) -> np.ndarray:
    """Boost of the given rapidity along the unit planar direction at angle direction."""
    c, s = math.cos(direction), math.sin(direction)
    R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    B = np.array([
        [math.cosh(rapidity), 0.0, math.sinh(rapidity)],
        [0.0, 1.0, 0.0],
        [math.sinh(rapidity), 0.0, math.cosh(rapidity)],
    ])
    return R @ B @ R.T


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return Rotation.random(random_state=rng).as_matrix()


def _candidate(geometry: Geometry, n: int, rng: np.random.Generator) -> Polygon:
    theta = _jittered_angles(n, rng)
    if geometry is Geometry.E2:
        r = rng.uniform(0.5, 2.0) * (1.0 + rng.uniform(-0.1, 0.1, size=n))
        pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1) + rng.uniform(-1.0, 1.0, size=2)
        return Polygon(geometry, pts)
    if geometry is Geometry.S2:
        R = rng.uniform(0.3, 1.2) * (1.0 + rng.uniform(-0.05, 0.05, size=n))
        pts = np.stack([np.sin(R) * np.cos(theta), np.sin(R) * np.sin(theta), np.cos(R)], axis=1)
        return Polygon(geometry, pts @ random_rotation(rng).T)
    R = rng.uniform(0.3, 2.0) * (1.0 + rng.uniform(-0.05, 0.05, size=n))
    pts = np.stack([np.sinh(R) * np.cos(theta), np.sinh(R) * np.sin(theta), np.cosh(R)], axis=1)
    boost = lorentz_boost(rng.uniform(0.0, 1.0), rng.uniform(0.0, 2.0 * math.pi))
    return Polygon(Geometry.H2, pts @ boost.T)


def random_convex_polygon(geometry: Geometry, n: int, rng: np.random.Generator) -> Polygon:
    """Convex counterclockwise polygon with n vertices near a random circle.

    De Sitter polygons are produced as duals of random convex H2 polygons.
    """
    geometry = Geometry(geometry)
    for _ in range(MAX_TRIES):
        try:
            p = _candidate(geometry, n, rng)
            if geometry is Geometry.DS2:
                p = dual_polygon(p)
            if is_convex(p) and orientation(p) > 0:
                return p
        except PolyflexError:
            continue
    raise DegenerateConfiguration(f"no convex {geometry.value} {n}-gon found in {MAX_TRIES} tries")


def _random_point(geometry: Geometry, rng: np.random.Generator, spread: float) -> np.ndarray:
    if geometry is Geometry.E2:
        return np.append(rng.uniform(-spread, spread, size=2), 0.0)
    if geometry is Geometry.S2:
        v = rng.standard_normal(3)
        return v / np.linalg.norm(v)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    s = rng.uniform(0.0, spread)
    if geometry is Geometry.H2:
        return np.array([math.sinh(s) * math.cos(theta), math.sinh(s) * math.sin(theta), math.cosh(s)])
    s = rng.uniform(-spread, spread)
    return np.array([math.cosh(s) * math.cos(theta), math.cosh(s) * math.sin(theta), math.sinh(s)])


DE_SITTER_CASES = ((True, True), (True, False), (False, True), (False, False))


def de_sitter_case(points) -> Optional[Tuple[bool, bool]]:
    """Whether the sides BC and CA of the de Sitter triangle ABC are spacelike.

    Only triangles with AB spacelike and the two other sides in (0, pi) or on
    the pi - i R+ branch have a case; anything else gives None.
    """
    A, B, C = points
    g = Geometry.DS2
    if not distance(A, B, g).is_real:
        return None
    kinds = []
    for d in (distance(B, C, g), distance(C, A, g)):
        if d.is_real:
            kinds.append(True)
        elif d.branch is Branch.ANTIPODAL_TIMELIKE:
            kinds.append(False)
        else:
            return None
    return kinds[0], kinds[1]


def random_triangle(geometry: Geometry, rng: np.random.Generator, spacelike: bool = False,
                    spread: float = 1.5, case: Optional[Tuple[bool, bool]] = None) -> np.ndarray:
    """Three points of the model space.

    spacelike=True keeps de Sitter triangles with real sides and case picks one
    of DE_SITTER_CASES. Spherical and de Sitter sides with |sin| below 0.1 are
    rejected since the sine law divides by them.
    """
    geometry = Geometry(geometry)
    if case is not None and geometry is not Geometry.DS2:
        raise ValueError(f"triangle cases only exist in DS2, not {geometry.value}")
    tries = MAX_TRIES if case is None else 20 * MAX_TRIES
    for _ in range(tries):
        pts = np.array([_random_point(geometry, rng, spread) for _ in range(3)])
        try:
            sides = [distance(pts[i], pts[(i + 1) % 3], geometry) for i in range(3)]
        except PolyflexError:
            continue
        if any(abs(s.value) < 1e-3 for s in sides):
            continue
        if geometry in (Geometry.S2, Geometry.DS2) and any(abs(np.sin(s.value)) < 0.1 for s in sides):
            continue
        if geometry is Geometry.DS2 and spacelike and not all(s.is_real for s in sides):
            continue
        if case is not None and de_sitter_case(pts) != tuple(case):
            continue
        return pts
    raise DegenerateConfiguration(f"no {geometry.value} triangle found in {tries} tries")


def random_convex_hull(n_points: int, rng: np.random.Generator, jitter: float = 0.2):
    """Hull of points on the unit sphere with radial jitter."""
    from core.polyhedron import ConvexPolyhedron

    v = rng.standard_normal((n_points, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    v *= 1.0 + rng.uniform(-jitter, jitter, size=(n_points, 1))
    return ConvexPolyhedron.from_points(v)


def tetrahedron():
    from core.polyhedron import ConvexPolyhedron

    return ConvexPolyhedron.from_points(np.array([
        [1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0],
    ]))


def cube(size: Optional[float] = 1.0):
    from core.polyhedron import ConvexPolyhedron

    corners = np.array([[x, y, z] for x in (-1.0, 1.0) for y in (-1.0, 1.0) for z in (-1.0, 1.0)])
    return ConvexPolyhedron.from_points(0.5 * size * corners)


def icosahedron():
    from core.polyhedron import ConvexPolyhedron

    phi = (1.0 + math.sqrt(5.0)) / 2.0
    pts = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            pts.extend([[0.0, a, b], [a, b, 0.0], [b, 0.0, a]])
    return ConvexPolyhedron.from_points(np.array(pts))
