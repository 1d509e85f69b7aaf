"""Maximal-area convex polygons with prescribed edge lengths.

In S2 and H2 the critical points of the area on the space of polygons with
fixed edge lengths are the polygons whose vertices lie on an affine plane
section of the quadric: a circle, a horocycle or an equidistant curve.
With S_i = sinh(l_i / 2) (sin in S2) and S_1 the largest, the lengths alone
decide which: S_1 < sum of the others gives a circle, equality a horocycle
and the remaining case an equidistant curve.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import optimize

from config.settings import TOL, config
from core.b_invariant import b2_of
from core.deformation import (
    angle_variations,
    isometric_deformation_space,
    isometric_path,
    random_isometric_walk,
)
from core.errors import (
    DegenerateConfiguration,
    InfeasibleLengths,
    NoFlatVertex,
    OffQuadric,
    PolyflexError,
    RootBracketFailure,
    SingularOperator,
    UnsupportedGeometry,
)
from core.geometry import Geometry, causal_type, CausalType, cross, inner, normalize, tangent_projection
from core.polygon import (
    Polygon,
    angle_values,
    area,
    edge_length_values,
    interior_contains,
    is_convex,
    orientation,
)
from utils.logger import setup_logger

logger = setup_logger(__name__)


class Locus(str, Enum):
    CIRCLE = "Circle"
    HOROCYCLE = "Horocycle"
    EQUIDISTANT = "Equidistant"


def _half_chords(lengths: np.ndarray, g: Geometry) -> np.ndarray:
    return np.sinh(lengths / 2.0) if g is Geometry.H2 else np.sin(lengths / 2.0)


def _check_lengths(lengths: Sequence[float], g: Geometry) -> np.ndarray:
    g = Geometry(g)
    if g not in (Geometry.S2, Geometry.H2):
        raise UnsupportedGeometry(f"maximal-area polygons are computed in S2 and H2, not {g.value}")
    lengths = np.asarray(lengths, dtype=float)
    if lengths.ndim != 1 or lengths.size < 3:
        raise InfeasibleLengths(f"need at least 3 edge lengths, got {lengths.size}")
    if np.any(lengths <= 0) or not np.all(np.isfinite(lengths)):
        raise InfeasibleLengths(f"edge lengths must be positive and finite: {lengths.tolist()}")
    if g is Geometry.S2:
        if np.any(lengths >= math.pi):
            raise InfeasibleLengths("spherical edge lengths must be smaller than pi")
        if lengths.sum() >= 2.0 * math.pi:
            raise InfeasibleLengths(f"spherical perimeter {lengths.sum():.6g} is not below 2*pi")
    return lengths


@dataclass
class LocusClassification:
    s1: float
    sum_rest: float
    kind: Locus
    longest: int

    def to_dict(self) -> Dict[str, Any]:
        return {"S1": self.s1, "sum_rest": self.sum_rest, "kind": self.kind.value, "longest": self.longest}


def classify_locus(lengths: Sequence[float], g: Geometry) -> LocusClassification:
    """Decide the locus of the critical polygon from the edge lengths."""
    g = Geometry(g)
    lengths = _check_lengths(lengths, g)
    S = _half_chords(lengths, g)
    m = int(np.argmax(lengths))
    s1 = float(S[m])
    rest = float(S.sum() - s1)
    if abs(s1 - rest) <= TOL.horocycle * max(1.0, s1):
        kind = Locus.HOROCYCLE
    elif s1 < rest:
        kind = Locus.CIRCLE
    else:
        kind = Locus.EQUIDISTANT
    if g is Geometry.S2 and kind is not Locus.CIRCLE:
        raise InfeasibleLengths(f"S1 = {s1:.6g} is not below the sum {rest:.6g} of the other half chords")
    return LocusClassification(s1, rest, kind, m)


def circle_function(lengths: Sequence[float], g: Geometry) -> Callable[[float], float]:
    """F(s) = s sin(sum over the shorter edges of arcsin(S_i / s)), increasing."""
    lengths = _check_lengths(lengths, g)
    S = _half_chords(lengths, Geometry(g))
    rest = np.delete(S, int(np.argmax(lengths)))

    def F(s: float) -> float:
        return float(s * math.sin(float(np.sum(np.arcsin(np.minimum(1.0, rest / s))))))

    return F


def equidistant_function(lengths: Sequence[float]) -> Callable[[float], float]:
    """G(s) = s sinh(sum over the shorter edges of argsinh(S_i / s)), decreasing."""
    lengths = _check_lengths(lengths, Geometry.H2)
    S = _half_chords(lengths, Geometry.H2)
    rest = np.delete(S, int(np.argmax(lengths)))

    def G(s: float) -> float:
        return float(s * math.sinh(float(np.sum(np.arcsinh(rest / s)))))

    return G


def _bracket_root(f: Callable[[float], float], lower: float, upper: Optional[float],
                  cap: Optional[float] = None) -> float:
    solver = config.get_solver_config()
    f_lower = f(lower)
    if upper is None:
        upper = lower
        for _ in range(solver["max_expansions"]):
            upper = upper * solver["growth"]
            if cap is not None and upper >= cap:
                upper = cap
            if np.sign(f(upper)) != np.sign(f_lower) or upper == cap:
                break
    if np.sign(f(upper)) == np.sign(f_lower):
        raise RootBracketFailure(f"no sign change on [{lower:.6g}, {upper:.6g}]")
    logger.debug("root bracket [%.6g, %.6g]", lower, upper)
    return optimize.brentq(f, lower, upper, xtol=solver["xtol"], rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass
class CriticalSolution:
    """The unique convex critical polygon for a length vector."""
    locus: Locus
    polygon: Polygon
    area: float
    solver_residual: float
    parameter: Optional[float] = None
    s_star: Optional[float] = None
    center_inside: Optional[bool] = None
    lengths: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "locus": self.locus.value,
            "parameter": self.parameter,
            "s_star": self.s_star,
            "center_inside": self.center_inside,
            "area": self.area,
            "solver_residual": self.solver_residual,
            "lengths": self.lengths,
            "polygon": self.polygon.to_dict(),
        }


def _place(points_by_step: List[np.ndarray], m: int, n: int) -> np.ndarray:
    """Vertex k+1 of the longest edge m comes first; later edges follow in order."""
    V = np.empty((n, 3))
    for k, pt in enumerate(points_by_step):
        V[(m + 1 + k) % n] = pt
    return V


def _circle_vertices(rest_phi: np.ndarray, g: Geometry, s: float, m: int, n: int) -> np.ndarray:
    R = math.asinh(s) if g is Geometry.H2 else math.asin(min(1.0, s))
    radial, height = (math.sinh(R), math.cosh(R)) if g is Geometry.H2 else (math.sin(R), math.cos(R))
    psi = np.concatenate([[0.0], np.cumsum(2.0 * rest_phi)])
    return _place([np.array([radial * math.cos(a), radial * math.sin(a), height]) for a in psi], m, n)


def _equidistant_vertices(rest: np.ndarray, s: float, m: int, n: int) -> np.ndarray:
    R = math.acosh(s)
    a = np.concatenate([[0.0], np.cumsum(2.0 * np.arcsinh(rest / s))])
    a = a - a[-1] / 2.0
    pts = [np.array([math.cosh(R) * math.sinh(t), -math.sinh(R), math.cosh(R) * math.cosh(t)]) for t in a]
    return _place(pts, m, n)


def _horocycle_vertices(rest: np.ndarray, m: int, n: int) -> np.ndarray:
    x = np.concatenate([[0.0], np.cumsum(2.0 * rest)])
    x = x - x[-1] / 2.0
    y = 1.0
    pts = [np.array([t / y, (t * t + y * y - 1.0) / (2.0 * y), (t * t + y * y + 1.0) / (2.0 * y)]) for t in x]
    return _place(pts, m, n)


def solve_max_area(lengths: Sequence[float], g: Geometry, upper: Optional[float] = None) -> CriticalSolution:
    """Construct the convex critical polygon with the given edge lengths."""
    g = Geometry(g)
    cls = classify_locus(lengths, g)
    lengths = np.asarray(lengths, dtype=float)
    n = lengths.size
    m = cls.longest
    if lengths[m] >= lengths.sum() - lengths[m]:
        raise InfeasibleLengths(
            f"longest edge {lengths[m]:.6g} is not shorter than the sum {lengths.sum() - lengths[m]:.6g} of the others"
        )
    S = _half_chords(lengths, g)
    rest = np.delete(np.roll(S, -(m + 1)), n - 1)
    solver = config.get_solver_config()
    lower = cls.s1 * solver["lower_factor"]

    parameter = None
    s_star = None
    inside = None
    if cls.kind is Locus.CIRCLE:
        cap = 1.0 if g is Geometry.S2 else None
        if cap is not None and lower >= cap:
            raise InfeasibleLengths("half chord of the longest edge reaches the great circle")

        def rest_angles(s):
            return float(np.sum(np.arcsin(np.minimum(1.0, rest / s))))

        inside = rest_angles(lower) > math.pi / 2.0
        if inside:
            def closing(s):
                return rest_angles(s) + math.asin(min(1.0, cls.s1 / s)) - math.pi
        else:
            def closing(s):
                return rest_angles(s) - math.asin(min(1.0, cls.s1 / s))
        try:
            s_star = _bracket_root(closing, lower, upper, cap)
        except RootBracketFailure as e:
            if g is Geometry.S2:
                raise InfeasibleLengths(f"no circumscribed circle for lengths {lengths.tolist()}: {e}")
            raise
        phi = np.arcsin(np.minimum(1.0, rest / s_star))
        V = _circle_vertices(phi, g, s_star, m, n)
        parameter = math.asinh(s_star) if g is Geometry.H2 else math.asin(min(1.0, s_star))
    elif cls.kind is Locus.EQUIDISTANT:
        G = equidistant_function(lengths)
        s_star = _bracket_root(lambda s: G(s) - cls.s1, 1.0, upper)
        V = _equidistant_vertices(rest, s_star, m, n)
        parameter = math.acosh(s_star)
    else:
        V = _horocycle_vertices(rest, m, n)

    p = Polygon(g, V)
    if orientation(p) < 0:
        p = p.with_vertices(V * np.array([-1.0, 1.0, 1.0]))
    residual = float(np.max(np.abs(edge_length_values(p) - lengths)))
    sol = CriticalSolution(cls.kind, p, area(p), residual, parameter, s_star, inside, lengths.tolist())
    logger.info("solved %s lengths %s: %s, area %.10g, residual %.2e",
                g.value, np.round(lengths, 6).tolist(), cls.kind.value, sol.area, residual)
    return sol


@dataclass
class CriticalityReport:
    critical: bool
    witness: np.ndarray
    residual: float
    locus: Optional[Locus]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "critical": self.critical,
            "witness": [float(c) for c in self.witness],
            "residual": self.residual,
            "locus": self.locus.value if self.locus else None,
        }


def _check_spans(p: Polygon) -> None:
    if np.linalg.matrix_rank(p.vertices, tol=1e-9) < 3:
        raise DegenerateConfiguration("vertices lie on a geodesic")


def is_critical(p: Polygon, tol: float = None) -> CriticalityReport:
    """Look for u with <u, v_i> = 1 for every vertex."""
    tol = TOL.critical if tol is None else tol
    if p.geometry not in (Geometry.S2, Geometry.H2):
        raise UnsupportedGeometry(f"criticality is tested in S2 and H2, not {p.geometry.value}")
    _check_spans(p)
    A = p.vertices * p.geometry.metric
    u, *_ = np.linalg.lstsq(A, np.ones(p.n), rcond=None)
    residual = float(np.max(np.abs(A @ u - 1.0)))
    critical = residual < tol
    locus = None
    if critical:
        if p.geometry is Geometry.S2:
            locus = Locus.CIRCLE
        else:
            kind = causal_type(u, TOL.horocycle)
            locus = {
                CausalType.TIMELIKE: Locus.CIRCLE,
                CausalType.LIGHTLIKE: Locus.HOROCYCLE,
                CausalType.SPACELIKE: Locus.EQUIDISTANT,
            }[kind]
    return CriticalityReport(critical, u, residual, locus)


def phi_operator(p: Polygon) -> np.ndarray:
    """Matrix of x -> sum <x, v_i> v_i."""
    V = p.vertices
    return V.T @ (V * p.geometry.metric)


def center_CS(p: Polygon) -> np.ndarray:
    """Normalized preimage of the vertex sum under x -> sum <x, v_i> v_i."""
    if p.geometry not in (Geometry.S2, Geometry.H2):
        raise UnsupportedGeometry(f"C_S is defined in S2 and H2, not {p.geometry.value}")
    Phi = phi_operator(p)
    if np.linalg.cond(Phi) > 1e12:
        raise SingularOperator("vertices lie on a geodesic")
    y = np.linalg.solve(Phi, p.vertices.sum(axis=0))
    return normalize(y, p.geometry)


@dataclass
class HessianReport:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    center_interior: bool
    critical_residual: float

    @property
    def negative_definite(self) -> Optional[bool]:
        """Asserted only when C_S lies inside the polygon."""
        if not self.center_interior:
            return None
        return bool(np.all(self.eigenvalues < -1e-10))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "matrix": self.matrix.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "center_interior": self.center_interior,
            "negative_definite": self.negative_definite,
            "critical_residual": self.critical_residual,
        }


def _sigma(g: Geometry) -> float:
    return 1.0 if g is Geometry.S2 else -1.0


def area_hessian(p: Polygon) -> HessianReport:
    """Hessian of the area on the quotient deformation space, -sigma <b2(U, V), u>."""
    if p.geometry not in (Geometry.S2, Geometry.H2):
        raise UnsupportedGeometry(f"area Hessian is computed in S2 and H2, not {p.geometry.value}")
    _check_spans(p)
    report = is_critical(p)
    if not report.critical:
        logger.warning("area Hessian requested at a non-critical polygon (residual %.3e)", report.residual)
    u = report.witness
    space = isometric_deformation_space(p)
    k = space.quotient_dimension
    H = np.zeros((k, k))
    sigma = _sigma(p.geometry)
    for i in range(k):
        for j in range(i, k):
            H[i, j] = H[j, i] = -sigma * b2_of(p, space.deformation(i), space.deformation(j)).pair(u)
    eig = np.linalg.eigvalsh(H) if k else np.zeros(0)
    try:
        inside = interior_contains(p, center_CS(p))
    except (SingularOperator, DegenerateConfiguration, OffQuadric):
        # horocycle and equidistant loci have no center in H2
        inside = False
    return HessianReport(H, eig, inside, report.residual)


def finite_difference_hessian(p: Polygon, h: float = 1e-3) -> np.ndarray:
    """Second differences of the area along projected quotient directions."""
    space = isometric_deformation_space(p)
    k = space.quotient_dimension
    a0 = area(p)

    def second(U):
        return (area(isometric_path(p, U, h)) + area(isometric_path(p, U, -h)) - 2.0 * a0) / (h * h)

    H = np.zeros((k, k))
    for i in range(k):
        H[i, i] = second(space.deformation(i))
    for i in range(k):
        for j in range(i + 1, k):
            Ui, Uj = space.deformation(i), space.deformation(j)
            H[i, j] = H[j, i] = (second(Ui + Uj) - second(Ui - Uj)) / 4.0
    return H


@dataclass
class BoundaryReport:
    vertex: int
    derivative: float
    finite_difference: float

    @property
    def positive(self) -> bool:
        return self.derivative > 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "vertex": self.vertex,
            "derivative": self.derivative,
            "finite_difference": self.finite_difference,
            "positive": self.positive,
        }


def _flat_vertex(p: Polygon, tol: float) -> int:
    flat = np.flatnonzero(np.abs(angle_values(p) - math.pi) < tol)
    if flat.size != 1:
        raise NoFlatVertex(f"expected exactly one angle equal to pi, found {flat.size}")
    return int(flat[0])


def boundary_derivative_check(p: Polygon, h: float = 1e-4, tol: float = 1e-9) -> BoundaryReport:
    """Area derivative when the flat vertex is pushed off the supporting geodesic."""
    g = p.geometry
    if g not in (Geometry.S2, Geometry.H2):
        raise UnsupportedGeometry(f"boundary derivative is computed in S2 and H2, not {g.value}")
    k = _flat_vertex(p, tol)
    v = p.vertices[k]
    t = tangent_projection(p.vertices[(k + 1) % p.n], v, g)
    normal = -cross(v, t, g)
    normal = normal / math.sqrt(float(inner(normal, normal, g)))

    U = np.zeros((p.n, 3))
    U[k] = normal
    derivative = _sigma(g) * float(np.sum(angle_variations(p, U)))

    def moved(step):
        if g is Geometry.S2:
            w = math.cos(step) * v + math.sin(step) * normal
        else:
            w = math.cosh(step) * v + math.sinh(step) * normal
        V = p.vertices.copy()
        V[k] = w
        return area(p.with_vertices(V))

    fd = (moved(h) - moved(-h)) / (2.0 * h)
    if derivative <= 0:
        logger.warning("area decreases when the flat vertex %d is pushed outward (%.3e)", k, derivative)
    return BoundaryReport(k, derivative, fd)


def maximality_check(solution: CriticalSolution, samples: int, rng: np.random.Generator) -> pd.DataFrame:
    """Areas of random polygons with the same edge lengths, reached by isometric walks."""
    rows = []
    for k in range(samples):
        q = random_isometric_walk(solution.polygon, rng)
        try:
            convex = is_convex(q)
        except PolyflexError:
            convex = False
        a = area(q)
        rows.append({
            "sample": k,
            "area": a,
            "excess": a - solution.area,
            "convex": convex,
            "length_residual": float(np.max(np.abs(edge_length_values(q) - np.asarray(solution.lengths)))),
        })
    frame = pd.DataFrame(rows)
    if not frame.empty and frame["excess"].max() > 1e-8:
        logger.warning("a sampled polygon exceeds the critical area by %.3e", frame["excess"].max())
    return frame
