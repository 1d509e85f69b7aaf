"""Infinitesimal rigidity of convex Euclidean polyhedra.

A flex assigns a velocity to each vertex and acts as a Killing field on
every face.  The diagnostics follow the classical argument: the link of a
vertex is a convex spherical polygon whose angles are the dihedral angles,
and the per-edge quantity W_e sums to zero over all oriented edges while
each vertex contributes with a definite sign.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.spatial import ConvexHull, QhullError

from config.settings import TOL
from core.b_invariant import b_of
from core.errors import DegeneratePolyhedron, ExteriorBasepoint, InvalidVertex, PolyflexError
from core.geometry import Geometry
from core.polygon import Polygon, angle_values, interior_contains, is_convex, orientation, reversed_polygon
from utils.logger import setup_logger
from utils.validators import PolyhedronValidator, parse_off

logger = setup_logger(__name__)

MODES = ("faces", "edges")


def _newell_normal(points: np.ndarray) -> np.ndarray:
    nxt = np.roll(points, -1, axis=0)
    n = np.array([
        np.sum((points[:, 1] - nxt[:, 1]) * (points[:, 2] + nxt[:, 2])),
        np.sum((points[:, 2] - nxt[:, 2]) * (points[:, 0] + nxt[:, 0])),
        np.sum((points[:, 0] - nxt[:, 0]) * (points[:, 1] + nxt[:, 1])),
    ])
    norm = np.linalg.norm(n)
    if norm < 1e-14:
        raise DegeneratePolyhedron("face with zero area")
    return n / norm


@dataclass(frozen=True)
class Edge:
    """Undirected edge a < b with the face holding a -> b and the face holding b -> a."""
    a: int
    b: int
    left: int
    right: int


@dataclass(frozen=True, eq=False)
class ConvexPolyhedron:
    vertices: np.ndarray
    faces: Tuple[Tuple[int, ...], ...]
    edges: Tuple[Edge, ...] = field(default=(), repr=False)

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        verts.setflags(write=False)
        faces = tuple(tuple(int(i) for i in f) for f in self.faces)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "edges", _build_edges(faces, len(verts)))
        self._check()

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def face_normal(self, f: int, vertices: Optional[np.ndarray] = None) -> np.ndarray:
        """Outward unit normal of face f."""
        V = self.vertices if vertices is None else vertices
        return _newell_normal(V[list(self.faces[f])])

    def face_normals(self, vertices: Optional[np.ndarray] = None) -> np.ndarray:
        return np.array([self.face_normal(f, vertices) for f in range(len(self.faces))])

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def contains(self, x, tol: float = None) -> bool:
        """True iff x is strictly on the inner side of every face plane."""
        tol = TOL.coplanar if tol is None else tol
        x = np.asarray(x, dtype=float)
        for f, face in enumerate(self.faces):
            if float(np.dot(self.face_normal(f), x - self.vertices[face[0]])) >= -tol:
                return False
        return True

    def _check(self) -> None:
        tol = TOL.coplanar
        scale = max(1.0, float(np.max(np.abs(self.vertices))))
        center = self.centroid()
        for f, face in enumerate(self.faces):
            n = self.face_normal(f)
            P = self.vertices[list(face)]
            offsets = (P - P[0]) @ n
            if np.max(np.abs(offsets)) > tol * scale:
                raise DegeneratePolyhedron(f"face {f} is not planar (offset {np.max(np.abs(offsets)):.2e})")
            if float(np.dot(n, center - P[0])) >= 0:
                raise DegeneratePolyhedron(f"face {f} is not oriented outward")
            side = (self.vertices - P[0]) @ n
            if np.max(side) > tol * scale:
                raise DegeneratePolyhedron(f"polyhedron is not convex at face {f} (excess {np.max(side):.2e})")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "vertices": [[float(c) for c in v] for v in self.vertices],
            "faces": [list(f) for f in self.faces],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ConvexPolyhedron":
        PolyhedronValidator().validate_polyhedron(data)
        return cls(np.asarray(data["vertices"], dtype=float), data["faces"])

    @classmethod
    def from_off(cls, text: str) -> "ConvexPolyhedron":
        vertices, faces = parse_off(text)
        return cls.from_dict({"vertices": vertices, "faces": faces})

    @classmethod
    def from_points(cls, points, tol: Optional[float] = None) -> "ConvexPolyhedron":
        """Convex hull with coplanar facets merged into polygonal faces."""
        return hull_polyhedron(points, tol)


def _build_edges(faces, n_vertices: int) -> Tuple[Edge, ...]:
    directed: Dict[Tuple[int, int], int] = {}
    for f, face in enumerate(faces):
        if len(face) < 3:
            raise DegeneratePolyhedron(f"face {f} has fewer than 3 vertices")
        for i, a in enumerate(face):
            b = face[(i + 1) % len(face)]
            if not (0 <= a < n_vertices and 0 <= b < n_vertices):
                raise DegeneratePolyhedron(f"face {f} references a missing vertex")
            if (a, b) in directed:
                raise DegeneratePolyhedron(f"directed edge {a}->{b} appears in two faces")
            directed[(a, b)] = f
    edges = []
    for (a, b), f in directed.items():
        if a > b:
            continue
        if (b, a) not in directed:
            raise DegeneratePolyhedron(f"edge {a}-{b} belongs to a single face")
        edges.append(Edge(a, b, f, directed[(b, a)]))
    edges.sort(key=lambda e: (e.a, e.b))
    return tuple(edges)


def hull_polyhedron(points, tol: float = None) -> ConvexPolyhedron:
    tol = TOL.coplanar if tol is None else tol
    points = np.asarray(points, dtype=float)
    try:
        hull = ConvexHull(points)
    except (QhullError, ValueError) as e:
        raise DegeneratePolyhedron(f"convex hull failed: {e}")

    groups: List[Tuple[np.ndarray, float, set]] = []
    for simplex, eq in zip(hull.simplices, hull.equations):
        normal, offset = eq[:3], eq[3]
        for g_normal, g_offset, members in groups:
            if np.dot(g_normal, normal) > 1.0 - tol and abs(g_offset - offset) < tol:
                members.update(int(i) for i in simplex)
                break
        else:
            groups.append((normal, offset, set(int(i) for i in simplex)))

    used = sorted(set().union(*(members for _, _, members in groups)))
    index = {old: new for new, old in enumerate(used)}
    faces = []
    for normal, _, members in groups:
        pts = points[sorted(members)]
        c = pts.mean(axis=0)
        e1 = pts[0] - c
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(normal, e1)
        ids = sorted(members)
        angles = [math.atan2(float(np.dot(points[i] - c, e2)), float(np.dot(points[i] - c, e1))) for i in ids]
        faces.append([index[i] for _, i in sorted(zip(angles, ids))])
    logger.debug("hull of %d points: %d vertices, %d faces", len(points), len(used), len(faces))
    return ConvexPolyhedron(points[used], faces)


def face_pairs(P: ConvexPolyhedron, mode: str = "faces") -> List[Tuple[int, int]]:
    """Vertex pairs whose distance a flex must preserve."""
    if mode not in MODES:
        raise ValueError(f"unknown constraint mode {mode!r}, expected one of {MODES}")
    if mode == "edges":
        return [(e.a, e.b) for e in P.edges]
    pairs = set()
    for face in P.faces:
        for i in range(len(face)):
            for j in range(i + 1, len(face)):
                pairs.add(tuple(sorted((face[i], face[j]))))
    return sorted(pairs)


def rigidity_matrix(P: ConvexPolyhedron, mode: str = "faces") -> np.ndarray:
    pairs = face_pairs(P, mode)
    M = np.zeros((len(pairs), 3 * P.n_vertices))
    for r, (i, j) in enumerate(pairs):
        d = P.vertices[i] - P.vertices[j]
        M[r, 3 * i:3 * i + 3] = d
        M[r, 3 * j:3 * j + 3] = -d
    return M


def trivial_flexes(P: ConvexPolyhedron) -> np.ndarray:
    """Three translations and three rotations, shape (6, m, 3)."""
    m = P.n_vertices
    out = [np.tile(e, (m, 1)) for e in np.eye(3)]
    out += [np.cross(e, P.vertices) for e in np.eye(3)]
    return np.array(out)


@dataclass(frozen=True, eq=False)
class FlexSpace:
    polyhedron: ConvexPolyhedron
    mode: str
    basis: np.ndarray
    trivial_basis: np.ndarray
    quotient_basis: np.ndarray
    singular_values: np.ndarray = field(repr=False)
    gap_ratio: float = math.inf
    trivial_residual: float = 0.0

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    @property
    def quotient_dimension(self) -> int:
        return self.quotient_basis.shape[0]

    def flex(self, i: int) -> np.ndarray:
        return self.basis[i].reshape(-1, 3)


def flex_space(P: ConvexPolyhedron, mode: str = "faces", rtol: float = None) -> FlexSpace:
    """Nullspace of the distance constraints, with the 6 Killing fields split off."""
    rtol = TOL.rank_rtol if rtol is None else rtol
    M = rigidity_matrix(P, mode)
    _, s, vh = scipy.linalg.svd(M, full_matrices=True)
    rank = int(np.sum(s > rtol * s[0]))
    kernel = vh[rank:]
    padded = np.concatenate([s, np.zeros(max(0, M.shape[1] - s.size))])
    gap = float(padded[rank - 1] / padded[rank]) if rank < padded.size and padded[rank] > 0 else math.inf

    T = trivial_flexes(P).reshape(6, -1)
    qt, st, _ = scipy.linalg.svd(T.T, full_matrices=False)
    if st[-1] < 1e-9 * st[0]:
        raise DegeneratePolyhedron("vertices do not span space")
    trivial_residual = float(np.max(np.abs(M @ T.T))) if M.size else 0.0

    residual = kernel - (kernel @ qt) @ qt.T
    k = kernel.shape[0] - 6
    if k > 0:
        _, _, wh = scipy.linalg.svd(residual, full_matrices=False)
        quotient = wh[:k]
    else:
        quotient = np.zeros((0, M.shape[1]))
    logger.debug(
        "flex space (%s mode): kernel %d, quotient %d, gap %.3e", mode, kernel.shape[0], quotient.shape[0], gap
    )
    return FlexSpace(P, mode, kernel, qt.T, quotient, s, gap, trivial_residual)


def _neighbour_cycle(P: ConvexPolyhedron, x: int) -> List[int]:
    succ: Dict[int, int] = {}
    for face in P.faces:
        if x not in face:
            continue
        k = face.index(x)
        succ[face[k - 1]] = face[(k + 1) % len(face)]
    if len(succ) < 3:
        raise InvalidVertex(f"vertex {x} has {len(succ)} incident edges")
    start = min(succ)
    cycle = [start]
    while True:
        nxt = succ.get(cycle[-1])
        if nxt is None:
            raise InvalidVertex(f"faces around vertex {x} do not close up")
        if nxt == start:
            break
        cycle.append(nxt)
        if len(cycle) > len(succ):
            raise InvalidVertex(f"faces around vertex {x} do not close up")
    return cycle


@dataclass(frozen=True, eq=False)
class VertexLink:
    """Spherical polygon of unit edge directions at a vertex."""
    vertex: int
    neighbours: List[int]
    polygon: Polygon


def vertex_link(P: ConvexPolyhedron, x: int) -> VertexLink:
    if not 0 <= x < P.n_vertices:
        raise InvalidVertex(f"vertex {x} does not exist")
    cycle = _neighbour_cycle(P, x)
    dirs = P.vertices[cycle] - P.vertices[x]
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    link = Polygon(Geometry.S2, dirs)
    if orientation(link) < 0:
        cycle = cycle[::-1]
        link = reversed_polygon(link)
    return VertexLink(x, cycle, link)


def dihedral_angles(P: ConvexPolyhedron, vertices: Optional[np.ndarray] = None) -> np.ndarray:
    """Interior dihedral angle of every edge, in the order of P.edges."""
    N = P.face_normals(vertices)
    out = []
    for e in P.edges:
        nf, ng = N[e.left], N[e.right]
        out.append(math.pi - math.atan2(float(np.linalg.norm(np.cross(nf, ng))), float(np.dot(nf, ng))))
    return np.array(out)


def face_angles(P: ConvexPolyhedron, x: int) -> np.ndarray:
    """Angles at x between consecutive link directions (link edge lengths)."""
    link = vertex_link(P, x)
    d = link.polygon.vertices
    e = np.roll(d, -1, axis=0)
    return np.arctan2(np.linalg.norm(np.cross(d, e), axis=1), np.sum(d * e, axis=1))


def _edge_index(P: ConvexPolyhedron) -> Dict[Tuple[int, int], int]:
    return {(e.a, e.b): k for k, e in enumerate(P.edges)}


def face_killing_fields(P: ConvexPolyhedron, flex: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """Least-squares (omega, tau) per face with flex(p) = omega x p + tau."""
    omegas, taus, worst = [], [], 0.0
    for face in P.faces:
        pts = P.vertices[list(face)]
        rows = []
        for p in pts:
            skew = np.array([[0.0, -p[2], p[1]], [p[2], 0.0, -p[0]], [-p[1], p[0], 0.0]])
            rows.append(np.hstack([-skew, np.eye(3)]))
        A = np.vstack(rows)
        target = flex[list(face)].reshape(-1)
        sol, *_ = np.linalg.lstsq(A, target, rcond=None)
        worst = max(worst, float(np.max(np.abs(A @ sol - target))))
        omegas.append(sol[:3])
        taus.append(sol[3:])
    return np.array(omegas), np.array(taus), worst


@dataclass
class EdgeQuantity:
    edge: Tuple[int, int]
    theta_dot: float
    w_start: float
    w_end: float

    @property
    def mismatch(self) -> float:
        return abs(self.w_start - self.w_end)


def _check_basepoint(P: ConvexPolyhedron, p0) -> np.ndarray:
    p0 = P.centroid() if p0 is None else np.asarray(p0, dtype=float)
    if not P.contains(p0):
        raise ExteriorBasepoint(f"base point {p0} is not interior")
    return p0


def dihedral_variations(P: ConvexPolyhedron, flex: np.ndarray) -> np.ndarray:
    """theta'_e = <omega_f - omega_g, unit(n_f x n_g)> for every edge."""
    omegas, _, _ = face_killing_fields(P, flex)
    N = P.face_normals()
    out = []
    for e in P.edges:
        axis = np.cross(N[e.left], N[e.right])
        axis /= np.linalg.norm(axis)
        out.append(float(np.dot(omegas[e.left] - omegas[e.right], axis)))
    return np.array(out)


def _w_value(x, y, vx, vy, p0, at) -> float:
    length = float(np.linalg.norm(y - x))
    a = (y - x) / length
    dv = (vy - vx) / length
    point, vel = (x, vx) if at == "start" else (y, vy)
    return float(np.dot(dv, point - p0) + np.dot(vel, a))


def edge_quantities(P: ConvexPolyhedron, flex, p0=None) -> List[EdgeQuantity]:
    """theta'_e and W_e(a -> b) evaluated at both endpoints, per edge."""
    flex = np.asarray(flex, dtype=float).reshape(-1, 3)
    p0 = _check_basepoint(P, p0)
    theta = dihedral_variations(P, flex)
    out = []
    for e, t in zip(P.edges, theta):
        x, y = P.vertices[e.a], P.vertices[e.b]
        vx, vy = flex[e.a], flex[e.b]
        out.append(EdgeQuantity(
            (e.a, e.b),
            float(t),
            t * _w_value(x, y, vx, vy, p0, "start"),
            t * _w_value(x, y, vx, vy, p0, "end"),
        ))
    return out


@dataclass
class SumReport:
    """Per-vertex W sums, their link prediction and the global total."""
    vertex_sums: List[float]
    predicted: List[float]
    b_terms: List[float]
    closing_terms: List[float]
    basepoint_in_cone: List[bool]
    global_sum: float
    constancy: float

    @property
    def prediction_residual(self) -> float:
        return max(abs(a - b) for a, b in zip(self.vertex_sums, self.predicted))

    @property
    def signs_ok(self) -> bool:
        return all(s <= 1e-8 for s in self.vertex_sums)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "vertex_sums": self.vertex_sums,
            "predicted": self.predicted,
            "prediction_residual": self.prediction_residual,
            "basepoint_in_cone": self.basepoint_in_cone,
            "global_sum": self.global_sum,
            "constancy": self.constancy,
            "signs_ok": self.signs_ok,
        }


def sum_identities(P: ConvexPolyhedron, flex, p0=None) -> SumReport:
    """Group W over oriented edges by starting vertex and compare with the link b-form."""
    flex = np.asarray(flex, dtype=float).reshape(-1, 3)
    p0 = _check_basepoint(P, p0)
    quantities = edge_quantities(P, flex, p0)
    by_edge = {q.edge: q for q in quantities}
    constancy = max((q.mismatch for q in quantities), default=0.0)

    sums, predicted, b_terms, closing, in_cone = [], [], [], [], []
    total = 0.0
    for x in range(P.n_vertices):
        link = vertex_link(P, x)
        s = 0.0
        theta = []
        for y in link.neighbours:
            q = by_edge[(min(x, y), max(x, y))]
            # W(x -> y) = -W(y -> x)
            s += q.w_start if x < y else -q.w_end
            theta.append(q.theta_dot)
        total += s
        lengths = np.linalg.norm(P.vertices[link.neighbours] - P.vertices[x], axis=1)
        U_link = (flex[link.neighbours] - flex[x]) / lengths[:, None]
        b = b_of(link.polygon, U_link).vector
        b_term = float(np.dot(b, P.vertices[x] - p0))
        close = float(np.dot(flex[x], np.asarray(theta) @ link.polygon.vertices))
        sums.append(s)
        b_terms.append(b_term)
        closing.append(close)
        predicted.append(b_term + close)
        direction = p0 - P.vertices[x]
        try:
            in_cone.append(interior_contains(link.polygon, direction / np.linalg.norm(direction)))
        except PolyflexError:
            in_cone.append(False)
    return SumReport(sums, predicted, b_terms, closing, in_cone, total, constancy)


@dataclass
class RigidityReport:
    verdict: Optional[str]
    mode: str
    flex_dimension: int
    quotient_dimension: int
    gap_ratio: float
    trivial_residual: float
    links_convex: bool
    link_residual: float
    w_global_sum: float
    w_constancy: float
    vertices: int = 0
    faces: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "mode": self.mode,
            "flex_dim": self.flex_dimension,
            "quotient_dim": self.quotient_dimension,
            "gap_ratio": self.gap_ratio if math.isfinite(self.gap_ratio) else None,
            "trivial_residual": self.trivial_residual,
            "links_convex": self.links_convex,
            "link_residual": self.link_residual,
            "w_global_sum": self.w_global_sum,
            "w_constancy": self.w_constancy,
            "vertices": self.vertices,
            "faces": self.faces,
        }


def link_residual(P: ConvexPolyhedron) -> Tuple[bool, float]:
    """Convexity of all links and agreement of link angles with dihedral angles."""
    dihedral = dihedral_angles(P)
    index = _edge_index(P)
    convex, worst = True, 0.0
    for x in range(P.n_vertices):
        link = vertex_link(P, x)
        convex = convex and is_convex(link.polygon)
        ang = angle_values(link.polygon)
        for y, a in zip(link.neighbours, ang):
            worst = max(worst, abs(a - dihedral[index[(min(x, y), max(x, y))]]))
    return convex, worst


def rigidity_verdict(P: ConvexPolyhedron, mode: str = "faces") -> RigidityReport:
    """RIGID iff every flex is trivial; the 'edges' mode only reports diagnostics."""
    space = flex_space(P, mode)
    convex, residual = link_residual(P)
    w_sum, w_const = 0.0, 0.0
    for i in range(space.dimension):
        report = sum_identities(P, space.flex(i))
        w_sum = max(w_sum, abs(report.global_sum))
        w_const = max(w_const, report.constancy)
    verdict = None
    if mode == "faces":
        verdict = "RIGID" if space.quotient_dimension == 0 else "FLEXIBLE"
        if verdict != "RIGID":
            logger.warning("convex polyhedron with %d vertices reports %d nontrivial flexes",
                           P.n_vertices, space.quotient_dimension)
    return RigidityReport(
        verdict, mode, space.dimension, space.quotient_dimension, space.gap_ratio,
        space.trivial_residual, convex, residual, w_sum, w_const, P.n_vertices, len(P.faces),
    )
