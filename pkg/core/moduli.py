"""Barycenters and Riemannian metrics on moduli of convex polygons.

For a convex polygon p and a point F(p) inside it, <b2(U, V), F(p)> is
positive definite on the quotient deformation space.  F ranges over four
barycenters: of the vertices, of the interior area, of the vertices weighted
by exterior angles, and of the boundary.

Euclidean polygons with fixed edge directions carry the area form g_A,
of signature (1, n - 3) modulo translations.  Small spherical polygons
flattened by the central projection relate the two pictures: the metric
on fixed-length spherical polygons converges to -g_A on the flattened
duals.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize
from scipy.spatial.transform import Rotation

from config.settings import TOL, config
from core.b_invariant import b2_of, b_of
from core.deformation import (
    Velocities,
    as_velocities,
    isometric_deformation_space,
    isometric_path,
    project_to_lengths,
)
from core.errors import (
    HypothesisViolated,
    NotConvex,
    NotInHemisphere,
    SingularPoint,
    UnsupportedGeometry,
)
from core.geometry import Geometry, cross, inner, normalize
from core.polygon import (
    Polygon,
    angle_values,
    area,
    dual_polygon,
    exterior_angles,
    interior_contains,
    is_convex,
    orientation,
)
from utils.logger import setup_logger

logger = setup_logger(__name__)


class BarycenterKind(str, Enum):
    C_V = "C_v"
    C_I = "C_i"
    C_ALPHA = "C_alpha"
    C_BOUNDARY = "C_boundary"


# 7-point degree-5 rule on the reference triangle, barycentric coordinates
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
QUAD_POINTS = np.array([
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
QUAD_WEIGHTS = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)


def _require_convex(p: Polygon) -> None:
    if p.geometry not in (Geometry.S2, Geometry.H2):
        raise UnsupportedGeometry(f"barycenters are computed in S2 and H2, not {p.geometry.value}")
    if not is_convex(p) or orientation(p) < 0:
        raise NotConvex(f"{p.geometry.value} polygon is not convex and counterclockwise")


def _subdivide(T: np.ndarray) -> np.ndarray:
    """Split each flat triangle (T[k] = rows A, B, C) into four."""
    A, B, C = T[:, 0], T[:, 1], T[:, 2]
    ab, bc, ca = (A + B) / 2.0, (B + C) / 2.0, (C + A) / 2.0
    return np.concatenate([
        np.stack([A, ab, ca], axis=1),
        np.stack([ab, B, bc], axis=1),
        np.stack([ca, bc, C], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ])


def _integrate(T: np.ndarray, g: Geometry) -> Tuple[np.ndarray, float]:
    """Integral of the position vector and of 1 over the central projection of flat triangles."""
    x = np.einsum("qj,tjk->tqk", QUAD_POINTS, T)
    jac = np.abs(np.linalg.det(T))
    if g is Geometry.S2:
        norm = np.linalg.norm(x, axis=-1)
    else:
        norm = np.sqrt(-inner(x, x, g))
    density = jac[:, None] / norm ** 3
    y = x / norm[..., None]
    w = 0.5 * QUAD_WEIGHTS[None, :] * density
    return np.einsum("tq,tqk->k", w, y), float(np.sum(w))


def _fan(p: Polygon) -> np.ndarray:
    c = normalize(p.vertices.sum(axis=0), p.geometry)
    return np.stack([np.broadcast_to(c, p.vertices.shape), p.vertices, p.next_vertices], axis=1)


def interior_integrals(p: Polygon, tol: float = None, max_level: int = None) -> Tuple[np.ndarray, float, int]:
    """(integral of the position vector, area, refinement level) over the interior of p."""
    tol = TOL.quadrature if tol is None else tol
    max_level = config.get_sampling_config()["quadrature_max_level"] if max_level is None else max_level
    T = _fan(p)
    vec, A = _integrate(T, p.geometry)
    for level in range(1, max_level + 1):
        T = _subdivide(T)
        new_vec, new_A = _integrate(T, p.geometry)
        change = max(float(np.max(np.abs(new_vec - vec))), abs(new_A - A))
        vec, A = new_vec, new_A
        if change < tol:
            return vec, A, level
    logger.warning("interior quadrature stopped at level %d (last change above %.1e)", max_level, tol)
    return vec, A, max_level


def area_by_quadrature(p: Polygon) -> float:
    _require_convex(p)
    return interior_integrals(p)[1]


def _boundary_integral(p: Polygon) -> np.ndarray:
    V, W = p.vertices, p.next_vertices
    g = p.geometry
    c = inner(V, W, g)
    if g is Geometry.S2:
        l = np.arccos(np.clip(c, -1.0, 1.0))
        u = (W - np.cos(l)[:, None] * V) / np.sin(l)[:, None]
        terms = np.sin(l)[:, None] * V + (1.0 - np.cos(l))[:, None] * u
    else:
        l = np.arccosh(np.maximum(1.0, -c))
        u = (W - np.cosh(l)[:, None] * V) / np.sinh(l)[:, None]
        terms = np.sinh(l)[:, None] * V + (np.cosh(l) - 1.0)[:, None] * u
    return terms.sum(axis=0)


def barycenter(p: Polygon, kind: BarycenterKind) -> np.ndarray:
    """Normalized ambient average of vertices, interior, weighted vertices or boundary."""
    kind = BarycenterKind(kind)
    _require_convex(p)
    g = p.geometry
    if kind is BarycenterKind.C_V:
        total = p.vertices.sum(axis=0)
    elif kind is BarycenterKind.C_ALPHA:
        total = exterior_angles(p) @ p.vertices
    elif kind is BarycenterKind.C_BOUNDARY:
        total = _boundary_integral(p)
    else:
        total = interior_integrals(p)[0]
    return normalize(total, g)


def dual_contains_check(p: Polygon, kind: BarycenterKind) -> bool:
    """True iff the barycenter lies in the interior of the dual polygon."""
    if p.geometry is not Geometry.S2:
        raise UnsupportedGeometry("containment in the dual is checked for spherical polygons")
    return interior_contains(dual_polygon(p), barycenter(p, kind))


@dataclass
class MetricSample:
    polygon: Polygon
    kind: BarycenterKind
    gram: np.ndarray
    basepoint: np.ndarray = field(repr=False, default=None)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.gram) if self.gram.size else np.zeros(0)

    @property
    def positive_definite(self) -> bool:
        return bool(np.all(self.eigenvalues > 0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "geometry": self.polygon.geometry.value,
            "kind": self.kind.value,
            "gram": self.gram.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "positive_definite": self.positive_definite,
            "polygon": self.polygon.to_dict(),
        }


def metric_gram(p: Polygon, basis: Sequence[np.ndarray], F: np.ndarray) -> np.ndarray:
    k = len(basis)
    G = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            G[i, j] = G[j, i] = b2_of(p, basis[i], basis[j]).pair(F)
    return G


def moduli_metric(p: Polygon, kind: BarycenterKind) -> MetricSample:
    """Gram matrix of <b2(U_i, U_j), F(p)> on the quotient basis."""
    kind = BarycenterKind(kind)
    F = barycenter(p, kind)
    space = isometric_deformation_space(p)
    basis = [space.deformation(i) for i in range(space.quotient_dimension)]
    sample = MetricSample(p, kind, metric_gram(p, basis, F), F)
    if sample.gram.size and not sample.positive_definite:
        logger.warning("metric gram (%s) is not positive definite: %s", kind.value, sample.eigenvalues)
    return sample


def angle_image(p: Polygon) -> np.ndarray:
    return angle_values(p)


def normal_map(p: Polygon, w) -> np.ndarray:
    """(<v_1, w>, ..., <v_n, w>), normal to the angle image."""
    return p.vertices @ np.asarray(w, dtype=float)


@dataclass
class SecondFormReport:
    lhs: List[float]
    rhs: List[float]
    cone_values: List[float]

    @property
    def residual(self) -> float:
        return max(abs(a - b) for a, b in zip(self.lhs, self.rhs))

    @property
    def cone_negative(self) -> bool:
        return all(c < 0 for c in self.cone_values)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "cone_values": self.cone_values,
            "cone_negative": self.cone_negative,
        }


def second_fundamental_form_check(q: Polygon, U: Velocities, h: float = 1e-3) -> SecondFormReport:
    """Second differences of the angles projected on the normal directions, against -<b(U), w>."""
    if q.geometry is not Geometry.S2:
        raise UnsupportedGeometry("the angle-image check is stated for spherical polygons")
    if np.linalg.matrix_rank(q.vertices, tol=1e-9) < 3:
        raise SingularPoint("vertices lie on a great circle")
    a0 = angle_image(q)
    if np.all((np.abs(a0) < 1e-9) | (np.abs(a0 - math.pi) < 1e-9)):
        raise SingularPoint("all angles are 0 or pi")
    U = as_velocities(U, q.n)
    plus = angle_image(isometric_path(q, U, h))
    minus = angle_image(isometric_path(q, U, -h))
    second = (plus + minus - 2.0 * a0) / (h * h)
    b = b_of(q, U).vector
    lhs, rhs = [], []
    for w in np.eye(3):
        lhs.append(float(second @ normal_map(q, w)))
        rhs.append(-float(np.dot(b, w)))
    cone = [float(second @ normal_map(q, v)) for v in q.vertices]
    return SecondFormReport(lhs, rhs, cone)


def _planar(qE: Polygon) -> Polygon:
    if qE.geometry is not Geometry.E2:
        raise UnsupportedGeometry("the area form is defined on Euclidean polygons")
    if not is_convex(qE) or orientation(qE) < 0:
        raise NotConvex("E2 polygon is not convex and counterclockwise")
    return qE


def _edge_frames(V: np.ndarray):
    d = np.roll(V, -1, axis=0) - V
    l = np.linalg.norm(d[:, :2], axis=1)
    e = d[:, :2] / l[:, None]
    n = np.stack([e[:, 1], -e[:, 0]], axis=1)
    return l, e, n


def _length_height_variations(V: np.ndarray, U: np.ndarray, x0: np.ndarray):
    l, e, n = _edge_frames(V)
    dU = (np.roll(U, -1, axis=0) - U)[:, :2]
    dl = np.sum(e * dU, axis=1)
    de = (dU - e * dl[:, None]) / l[:, None]
    dn = np.stack([de[:, 1], -de[:, 0]], axis=1)
    r = V[:, :2] - x0[:2]
    h = np.sum(r * n, axis=1)
    dh = np.sum(U[:, :2] * n, axis=1) + np.sum(r * dn, axis=1)
    return l, h, dl, dh


def area_form_gA(qE: Polygon, U: Velocities, V: Velocities, x0=None) -> float:
    """g_A(U, V) = 1/4 sum dl_i(U) dh_i(V) + dl_i(V) dh_i(U), heights measured from x0."""
    _planar(qE)
    x0 = qE.vertices.mean(axis=0) if x0 is None else np.append(np.asarray(x0, dtype=float)[:2], 0.0)
    U = as_velocities(U, qE.n)
    V = as_velocities(V, qE.n)
    _, _, dlU, dhU = _length_height_variations(qE.vertices, U, x0)
    _, _, dlV, dhV = _length_height_variations(qE.vertices, V, x0)
    return 0.25 * float(np.sum(dlU * dhV + dlV * dhU))


def homothety(qE: Polygon, x0=None) -> np.ndarray:
    x0 = qE.vertices.mean(axis=0) if x0 is None else np.append(np.asarray(x0, dtype=float)[:2], 0.0)
    return qE.vertices - x0


def fixed_angle_space(qE: Polygon) -> np.ndarray:
    """Deformations keeping every edge direction, modulo translations; shape (n - 2, n, 3)."""
    _planar(qE)
    n = qE.n
    _, _, normals = _edge_frames(qE.vertices)
    M = np.zeros((n, 2 * n))
    for i in range(n):
        j = (i + 1) % n
        M[i, 2 * j:2 * j + 2] += normals[i]
        M[i, 2 * i:2 * i + 2] -= normals[i]
    _, s, vh = np.linalg.svd(M)
    rank = int(np.sum(s > TOL.rank_rtol * s[0]))
    kernel = vh[rank:]
    T = np.zeros((2, 2 * n))
    T[0, 0::2] = 1.0
    T[1, 1::2] = 1.0
    T /= math.sqrt(n)
    rest = kernel - (kernel @ T.T) @ T
    _, _, wh = np.linalg.svd(rest, full_matrices=False)
    basis = wh[:kernel.shape[0] - 2].reshape(-1, n, 2)
    return np.concatenate([basis, np.zeros(basis.shape[:2] + (1,))], axis=2)


def area_form_gram(qE: Polygon, basis: Sequence[np.ndarray], x0=None) -> np.ndarray:
    k = len(basis)
    G = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            G[i, j] = G[j, i] = area_form_gA(qE, basis[i], basis[j], x0)
    return G


def signature(G: np.ndarray, tol: float = 1e-9) -> Tuple[int, int]:
    """(positive, negative) eigenvalue counts relative to the largest magnitude."""
    eig = np.linalg.eigvalsh(G)
    scale = max(1.0, float(np.max(np.abs(eig)))) if eig.size else 1.0
    return int(np.sum(eig > tol * scale)), int(np.sum(eig < -tol * scale))


def _align_to_pole(c: np.ndarray) -> Rotation:
    e3 = np.array([0.0, 0.0, 1.0])
    axis = np.cross(c, e3)
    s = float(np.linalg.norm(axis))
    angle = math.atan2(s, float(np.dot(c, e3)))
    if s < 1e-15:
        return Rotation.identity() if angle < 1.0 else Rotation.from_rotvec([math.pi, 0.0, 0.0])
    return Rotation.from_rotvec(axis / s * angle)


def projective_flatten(q: Polygon, anchor_vertex: Optional[int] = None) -> Polygon:
    """Central projection to the tangent plane at the vertex barycenter.

    With anchor_vertex set, the image is also rotated so that this vertex
    lies on the positive x axis.
    """
    return Polygon(Geometry.E2, _flatten_points(q, q.vertices, anchor_vertex))


def _flatten_points(q: Polygon, points: np.ndarray, anchor_vertex: Optional[int]) -> np.ndarray:
    if q.geometry is not Geometry.S2:
        raise UnsupportedGeometry("projective flattening is defined for spherical polygons")
    c = normalize(q.vertices.sum(axis=0), Geometry.S2)
    R = _align_to_pole(c)
    X = R.apply(np.atleast_2d(points))
    if anchor_vertex is not None:
        v = R.apply(q.vertices[anchor_vertex])
        X = Rotation.from_rotvec([0.0, 0.0, -math.atan2(v[1], v[0])]).apply(X)
    if np.any(X[:, 2] <= 1e-12):
        raise NotInHemisphere("polygon leaves the open hemisphere around its vertex barycenter")
    return X[:, :2] / X[:, 2:3]


def dual_velocities(p: Polygon, U: Velocities) -> np.ndarray:
    """First-order motion of the dual polygon induced by U."""
    g = p.geometry
    if g not in (Geometry.S2, Geometry.H2):
        raise UnsupportedGeometry("dual velocities are computed for S2 and H2 polygons")
    U = as_velocities(U, p.n)
    dual_g = Geometry.S2 if g is Geometry.S2 else Geometry.DS2
    V, W = p.vertices, p.next_vertices
    c = cross(V, W, g)
    cdot = cross(U, W, g) + cross(V, np.roll(U, -1, axis=0), g)
    norm = np.sqrt(inner(c, c, dual_g))
    d = c / norm[:, None]
    return (cdot - inner(cdot, d, dual_g)[:, None] * d) / norm[:, None]


def dual_pullback_gram(p: Polygon, kind: BarycenterKind = BarycenterKind.C_I):
    """Gram of the metric on the quotient basis of p, with the induced dual deformations."""
    sample = moduli_metric(p, kind)
    space = isometric_deformation_space(p)
    moves = [dual_velocities(p, space.deformation(i)) for i in range(space.quotient_dimension)]
    return sample.gram, moves


def _check_angles(alpha: np.ndarray) -> None:
    if np.any(alpha <= 0):
        raise HypothesisViolated("angles must be positive")
    if abs(alpha.sum() - 2.0 * math.pi) > 1e-9:
        raise HypothesisViolated(f"angles sum to {alpha.sum():.12g}, not 2*pi")
    n = alpha.size
    for start in range(n):
        run = 0.0
        for length in range(1, n):
            run += alpha[(start + length - 1) % n]
            if abs(run - math.pi) < 1e-9:
                raise HypothesisViolated(f"angles {start}..{(start + length - 1) % n} sum to pi")


def tangential_polygon(alpha: Sequence[float]) -> np.ndarray:
    """Planar polygon circumscribed about the unit circle with exterior angle alpha_i at vertex i."""
    alpha = np.asarray(alpha, dtype=float)
    n = alpha.size
    theta = np.concatenate([[0.0], np.cumsum(alpha[1:])])
    normals = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    pts = []
    for i in range(n):
        A = np.array([normals[i - 1], normals[i]])
        pts.append(np.linalg.solve(A, np.ones(2)))
    return np.array(pts)


def _lift(points: np.ndarray, scale: float) -> Polygon:
    P = np.column_stack([scale * points, np.ones(len(points))])
    return Polygon(Geometry.S2, normalize(P, Geometry.S2))


def _scaled_lift(points: np.ndarray, target_area: float) -> Polygon:
    def excess(lam):
        return area(_lift(points, lam)) - target_area

    x, y = points[:, 0], points[:, 1]
    planar = 0.5 * abs(float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))
    # small lifts have area close to lam**2 times the planar area
    lo = math.sqrt(target_area / planar)
    while excess(lo) > 0:
        lo /= 2.0
        if lo < 1e-6:
            raise HypothesisViolated(f"no lifted polygon is smaller than area {target_area:.6g}")
    hi = 2.0 * lo
    while excess(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise HypothesisViolated(f"no lifted polygon reaches area {target_area:.6g}")
    lam = optimize.brentq(excess, lo, hi, xtol=1e-14)
    return _lift(points, lam)


def _gauge_flat(q: Polygon, points: np.ndarray, a_k: float) -> np.ndarray:
    """Flatten, anchor vertex 0 on the x axis, recenter at the vertex centroid, rescale."""
    flat_vertices = _flatten_points(q, q.vertices, 0)
    center = flat_vertices.mean(axis=0)
    flat = _flatten_points(q, points, 0)
    return (flat - center) / math.sqrt(a_k)


@dataclass
class ConvergenceRow:
    k: int
    a_k: float
    discrepancy: float
    quotient_dimension: int


def convergence_experiment(alpha: Sequence[float], ks: Sequence[int] = (4, 8, 16, 32, 64),
                           h: float = 1e-4) -> pd.DataFrame:
    """Relative gap between the rescaled spherical metric and -g_A on flattened duals."""
    alpha = np.asarray(alpha, dtype=float)
    _check_angles(alpha)
    n = alpha.size
    base = tangential_polygon(alpha)
    rows = []
    for k in ks:
        a_k = 2.0 * math.pi / k
        q0 = _scaled_lift(base, a_k)
        p0 = dual_polygon(q0)
        target = (1.0 - 1.0 / k) * np.roll(alpha, -1)
        p = project_to_lengths(p0.vertices, Geometry.S2, target)

        G_S, moves = dual_pullback_gram(p, BarycenterKind.C_I)
        q = dual_polygon(p)
        flat_q = Polygon(Geometry.E2, _gauge_flat(q, q.vertices, a_k))
        x0 = _gauge_flat(q, barycenter(p, BarycenterKind.C_I), a_k)[0]

        flat_moves = []
        for dq in moves:
            plus = normalize(q.vertices + h * dq, Geometry.S2)
            minus = normalize(q.vertices - h * dq, Geometry.S2)
            qp, qm = q.with_vertices(plus), q.with_vertices(minus)
            diff = _gauge_flat(qp, plus, a_k) - _gauge_flat(qm, minus, a_k)
            flat_moves.append(np.column_stack([diff / (2.0 * h), np.zeros(n)]))
        G_A = area_form_gram(flat_q, flat_moves, x0)

        scale = float(np.linalg.norm(G_A))
        discrepancy = float(np.linalg.norm(G_S / (2.0 * a_k) + G_A)) / scale if scale > 0 else math.inf
        logger.info("k=%d a_k=%.6g discrepancy=%.6g", k, a_k, discrepancy)
        rows.append(ConvergenceRow(k, a_k, discrepancy, len(moves)).__dict__)
    return pd.DataFrame(rows, columns=["k", "a_k", "discrepancy", "quotient_dimension"])
