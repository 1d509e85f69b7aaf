"""Polygons in E2, S2, H2 and the de Sitter plane.

Vertices are stored counterclockwise: the interior lies on the left of each
directed edge, seen from outside the sphere (S2) or from above the
hyperboloid (H2).
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List

import numpy as np

from config.settings import TOL
from core.errors import (
    AntipodalPoints,
    DegenerateVertex,
    NotConvex,
    OffQuadric,
    SelfIntersecting,
    UnsupportedGeometry,
)
from core.geometry import (
    ComplexMeasure,
    Geometry,
    as_vector,
    check_on_quadric,
    cross,
    desitter_angle,
    distance,
    inner,
    normalize,
)
from utils.logger import setup_logger
from utils.validators import PolygonValidator

logger = setup_logger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class Polygon:
    """Geometry tag and cyclically ordered vertices (v_0 .. v_{n-1})."""
    geometry: Geometry
    vertices: np.ndarray

    def __post_init__(self):
        g = Geometry(self.geometry)
        verts = as_vector(np.array(self.vertices, dtype=float))
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise ValueError(f"vertices must have shape (n, 3), got {verts.shape}")
        if verts.shape[0] < 3:
            raise ValueError(f"a polygon needs at least 3 vertices, got {verts.shape[0]}")
        verts.setflags(write=False)
        object.__setattr__(self, "geometry", g)
        object.__setattr__(self, "vertices", verts)
        for v in verts:
            check_on_quadric(v, g)
        nxt = np.roll(verts, -1, axis=0)
        if np.any(np.linalg.norm(nxt - verts, axis=1) < 1e-12):
            raise OffQuadric("consecutive vertices coincide")
        if g in (Geometry.S2, Geometry.DS2) and np.any(np.linalg.norm(nxt + verts, axis=1) < 1e-12):
            raise AntipodalPoints("consecutive vertices are antipodal")

    @property
    def n(self) -> int:
        return self.vertices.shape[0]

    @property
    def next_vertices(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0)

    @property
    def prev_vertices(self) -> np.ndarray:
        return np.roll(self.vertices, 1, axis=0)

    def key(self) -> bytes:
        """Stable bytes identifying the polygon (cache keys)."""
        return self.geometry.value.encode() + np.ascontiguousarray(self.vertices).tobytes()

    def with_vertices(self, vertices: np.ndarray) -> "Polygon":
        return Polygon(self.geometry, vertices)

    def to_dict(self) -> Dict[str, Any]:
        verts = self.vertices[:, :2] if self.geometry is Geometry.E2 else self.vertices
        return {
            "schema": SCHEMA_VERSION,
            "geometry": self.geometry.value,
            "vertices": [[float(c) for c in v] for v in verts],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Polygon":
        PolygonValidator().validate_polygon(data)
        return cls(Geometry(data["geometry"]), np.asarray(data["vertices"], dtype=float))


def apply_isometry(p: Polygon, M: np.ndarray) -> Polygon:
    """Image of p under the linear isometry M of the ambient space."""
    return p.with_vertices(p.vertices @ np.asarray(M, dtype=float).T)


def reversed_polygon(p: Polygon) -> Polygon:
    return p.with_vertices(p.vertices[::-1].copy())


def edge_lengths(p: Polygon) -> List[ComplexMeasure]:
    """l_i = distance(v_i, v_{i+1})."""
    return [distance(a, b, p.geometry) for a, b in zip(p.vertices, p.next_vertices)]


def edge_length_values(p: Polygon) -> np.ndarray:
    """Edge lengths as numbers (complex for the de Sitter plane)."""
    values = [m.value for m in edge_lengths(p)]
    if p.geometry is Geometry.DS2:
        return np.array(values, dtype=complex)
    return np.array([v.real for v in values])


def oriented_angle_terms(V: np.ndarray, C: np.ndarray, A: np.ndarray, g: Geometry):
    """(s, co) with angle = atan2(s, co) at V from next vertex C to previous A."""
    if g is Geometry.E2:
        dc = C - V
        da = A - V
        s = dc[..., 0] * da[..., 1] - dc[..., 1] * da[..., 0]
        co = np.sum(dc * da, axis=-1)
        return s, co
    s = np.sum(V * np.cross(C, A), axis=-1)
    co = inner(C, A, g) - g.epsilon * inner(C, V, g) * inner(A, V, g)
    return s, co


def angle_values(p: Polygon) -> np.ndarray:
    """Oriented interior angles in [0, 2pi) for E2, S2 and H2."""
    if p.geometry is Geometry.DS2:
        raise UnsupportedGeometry("de Sitter angles are complex; use interior_angles")
    s, co = oriented_angle_terms(p.vertices, p.next_vertices, p.prev_vertices, p.geometry)
    bad = np.flatnonzero(np.hypot(s, co) < 1e-14)
    if bad.size:
        raise DegenerateVertex(f"angle undefined at vertices {bad.tolist()}")
    return np.mod(np.arctan2(s, co), 2.0 * math.pi)


def interior_angles(p: Polygon) -> List[ComplexMeasure]:
    """Interior angle at each vertex, complex-valued in the de Sitter plane."""
    if p.geometry is not Geometry.DS2:
        return [ComplexMeasure(float(a)) for a in angle_values(p)]
    out = []
    for a, v, c in zip(p.prev_vertices, p.vertices, p.next_vertices):
        tc = c - inner(c, v, p.geometry) * v
        ta = a - inner(a, v, p.geometry) * v
        out.append(desitter_angle(tc, ta))
    return out


def exterior_angles(p: Polygon) -> np.ndarray:
    return math.pi - angle_values(p)


def area(p: Polygon) -> float:
    """Gauss-Bonnet area of a spherical or hyperbolic polygon."""
    turning = float(np.sum(exterior_angles(p))) if p.geometry in (Geometry.S2, Geometry.H2) else None
    if p.geometry is Geometry.S2:
        return 2.0 * math.pi - turning
    if p.geometry is Geometry.H2:
        return turning - 2.0 * math.pi
    raise UnsupportedGeometry(f"Gauss-Bonnet area is not defined for {p.geometry.value}")


def euclidean_area(p: Polygon) -> float:
    """Signed shoelace area of a planar polygon."""
    if p.geometry is not Geometry.E2:
        raise UnsupportedGeometry("shoelace area needs an E2 polygon")
    x, y = p.vertices[:, 0], p.vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _planar_image(p: Polygon):
    """Projective chart sending geodesics to straight lines, or None."""
    V = p.vertices
    if p.geometry is Geometry.E2:
        return V[:, :2]
    if p.geometry is Geometry.H2:
        return V[:, :2] / V[:, 2:3]
    center = V.sum(axis=0)
    if np.linalg.norm(center) < 1e-12:
        return None
    c = center / np.linalg.norm(center)
    heights = V @ c
    if np.any(heights <= 1e-12):
        return None
    e1 = np.cross(c, [1.0, 0.0, 0.0] if abs(c[0]) < 0.9 else [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(c, e1)
    return np.stack([V @ e1, V @ e2], axis=1) / heights[:, None]


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def is_simple(p: Polygon) -> bool:
    """No two non-adjacent edges cross (tested in a projective chart)."""
    pts = _planar_image(p)
    if pts is None:
        return True
    n = len(pts)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]):
                return False
    return True


def orientation(p: Polygon) -> int:
    """+1 for counterclockwise, -1 for clockwise vertex order."""
    if p.geometry is Geometry.DS2:
        return orientation(_raw_dual(p))
    s, _ = oriented_angle_terms(p.vertices, p.next_vertices, p.prev_vertices, p.geometry)
    return 1 if float(np.sum(np.sign(s))) >= 0 else -1


def _is_convex_ccw(p: Polygon) -> bool:
    s, co = oriented_angle_terms(p.vertices, p.next_vertices, p.prev_vertices, p.geometry)
    scale = np.abs(s) + np.abs(co)
    if np.any(s <= 1e-12 * scale):
        return False
    turning = float(np.sum(math.pi - np.arctan2(s, co)))
    if p.geometry is Geometry.E2:
        return abs(turning - 2.0 * math.pi) < 1e-6
    if p.geometry is Geometry.S2:
        return 0.0 < turning < 2.0 * math.pi
    return 2.0 * math.pi < turning < 4.0 * math.pi


def is_convex(p: Polygon) -> bool:
    """True iff p bounds a convex region (de Sitter: dual to a convex H2 polygon)."""
    if p.geometry is Geometry.DS2:
        if not all(m.is_real and 0.0 < m.re < math.pi for m in edge_lengths(p)):
            return False
        try:
            q = _raw_dual(p)
        except OffQuadric:
            return False
        return is_convex(q) and orientation(q) > 0
    if not is_simple(p):
        raise SelfIntersecting(f"{p.geometry.value} polygon with {p.n} vertices is not simple")
    if orientation(p) > 0:
        return _is_convex_ccw(p)
    return _is_convex_ccw(reversed_polygon(p))


def _raw_dual(p: Polygon) -> Polygon:
    """Edge (co)normals without convexity checks."""
    V, W = p.vertices, p.next_vertices
    g = p.geometry
    if g is Geometry.S2:
        return Polygon(Geometry.S2, normalize(np.cross(V, W), g))
    if g is Geometry.H2:
        return Polygon(Geometry.DS2, normalize(cross(V, W, g), Geometry.DS2))
    if g is Geometry.DS2:
        return Polygon(Geometry.H2, normalize(cross(V, W, g), Geometry.H2))
    raise UnsupportedGeometry("duality is defined for S2, H2 and DS2")


def dual_polygon(p: Polygon) -> Polygon:
    """Dual polygon: vertex i is the unit (co)normal of edge i of p."""
    if p.geometry is Geometry.E2:
        raise UnsupportedGeometry("duality is defined for S2, H2 and DS2")
    if not is_convex(p) or orientation(p) < 0:
        raise NotConvex(f"{p.geometry.value} polygon is not convex and counterclockwise")
    return _raw_dual(p)


def interior_contains(p: Polygon, x) -> bool:
    """True iff x lies strictly inside the convex region bounded by p."""
    x = as_vector(x)
    if p.geometry is Geometry.E2:
        if not is_convex(p) or orientation(p) < 0:
            raise NotConvex("E2 polygon is not convex and counterclockwise")
        d = p.next_vertices - p.vertices
        r = x - p.vertices
        side = d[:, 0] * r[:, 1] - d[:, 1] * r[:, 0]
        return bool(np.all(side > 1e-12))
    dual = dual_polygon(p)
    products = inner(dual.vertices, x, dual.geometry)
    return bool(np.all(products > TOL.causal))
