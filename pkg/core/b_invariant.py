"""The quadratic invariant b(U) = sum a'_i v'_i of isometric deformations.

For de Sitter polygons the angle variations are imaginary, so the real
vector i*b(U) is handled instead of b(U) itself.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from config.settings import TOL
from core.deformation import (
    Velocities,
    angle_variations,
    as_velocities,
    isometric_deformation_space,
)
from core.errors import (
    CollinearTriple,
    DegenerateQuadrilateral,
    NotConvex,
    TrivialDeformation,
    UnsupportedGeometry,
)
from core.geometry import Geometry, inner, killing_restrictions
from core.polygon import Polygon, angle_values, interior_angles, is_convex, orientation
from utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True, eq=False)
class BValue:
    """b(U) in ambient coordinates (i*b(U) for DS2)."""
    vector: np.ndarray
    geometry: Geometry

    def pair(self, x) -> float:
        """Ambient product with x."""
        return float(inner(self.vector, x, self.geometry))

    def to_dict(self) -> Dict[str, Any]:
        return {"geometry": self.geometry.value, "vector": [float(c) for c in self.vector]}


def _half(p: Polygon, a: np.ndarray, V: np.ndarray) -> np.ndarray:
    s = a @ V
    # i * (i w) = -w for the de Sitter plane
    return -s if p.geometry is Geometry.DS2 else s


def b_of(p: Polygon, U: Velocities) -> BValue:
    """b(U) = sum of a'_i(U) v'_i(U)."""
    U = as_velocities(U, p.n)
    return BValue(_half(p, angle_variations(p, U), U), p.geometry)


def b2_halves(p: Polygon, U: Velocities, V: Velocities):
    """The two unsymmetrized sums sum a'_i(U) v'_i(V) and sum a'_i(V) v'_i(U)."""
    U = as_velocities(U, p.n)
    V = as_velocities(V, p.n)
    return _half(p, angle_variations(p, U), V), _half(p, angle_variations(p, V), U)


def b2_of(p: Polygon, U: Velocities, V: Velocities) -> BValue:
    """Symmetric polarization of b."""
    first, second = b2_halves(p, U, V)
    return BValue(0.5 * (first + second), p.geometry)


def _collinear_condition(a, b, c, g: Geometry) -> float:
    if g is Geometry.E2:
        M = np.array([b[:2] - a[:2], c[:2] - a[:2]])
    else:
        M = np.array([a, b, c])
    return float(np.linalg.cond(M))


def _killing_fit(points: np.ndarray, targets: np.ndarray, g: Geometry) -> np.ndarray:
    """Coefficients of the Killing basis matching targets on points."""
    K = killing_restrictions(points, g)
    A = K.reshape(3, -1).T
    coeffs, *_ = np.linalg.lstsq(A, targets.reshape(-1), rcond=None)
    return coeffs


def _killing_apply(coeffs: np.ndarray, points: np.ndarray, g: Geometry) -> np.ndarray:
    return np.tensordot(coeffs, killing_restrictions(points, g), axes=1)


def _order(n: int, base: int) -> List[int]:
    """Indices of (w_0, w_1, ..., w_{n-1}) with w_1 = base and w_0 before it."""
    return [(base - 1 + k) % n for k in range(n)]


def gauge_fix(p: Polygon, U: Velocities, fixed=(0, 1)) -> np.ndarray:
    """Add the Killing field that makes U vanish at the two given vertices."""
    U = as_velocities(U, p.n)
    idx = list(fixed)
    coeffs = _killing_fit(p.vertices[idx], -U[idx], p.geometry)
    return U + _killing_apply(coeffs, p.vertices, p.geometry)


@dataclass
class Decomposition:
    """U = U_2 + ... + U_{n-2} relative to a base vertex."""
    components: List[np.ndarray]
    base: int
    gauged: np.ndarray
    reconstruction_residual: float
    order: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "base": self.base,
            "components": len(self.components),
            "reconstruction_residual": self.reconstruction_residual,
        }


def _opposite_velocity(w0, w1, wk, Rk, g: Geometry) -> np.ndarray:
    """Velocity of w0 keeping its distances to the fixed w1 and to wk (moving at Rk)."""
    if g is Geometry.E2:
        A = np.array([w0 - w1, w0 - wk, [0.0, 0.0, 1.0]])
        rhs = np.array([0.0, float(np.dot(Rk, w0 - wk)), 0.0])
    else:
        m = g.metric
        A = np.array([m * w0, m * w1, m * wk])
        rhs = np.array([0.0, 0.0, -float(inner(w0, Rk, g))])
    if np.linalg.cond(A) > TOL.collinear_cond:
        raise CollinearTriple("vertices w0, w1 and w_{i+1} are (nearly) collinear")
    return np.linalg.solve(A, rhs)


def decompose(p: Polygon, U: Velocities, base: int = 0) -> Decomposition:
    """Split U into pieces that are rigid beyond one more vertex each.

    With w_1 = v_base the deformation is gauged to fix w_1 and w_2; the
    piece U_i vanishes on w_1..w_i and moves w_{i+1}..w_0 by one Killing field.
    """
    g = p.geometry
    n = p.n
    order = _order(n, base)
    W = p.vertices[order]
    U = gauge_fix(p, U, fixed=(order[1], order[2]))
    R = U[order].copy()

    for i in range(1, n):
        for j in range(i + 1, n):
            for k in range(j + 1, n + 1):
                c = _collinear_condition(W[i % n], W[j % n], W[k % n], g)
                if c > TOL.collinear_cond:
                    raise CollinearTriple(
                        f"vertices {order[i % n]}, {order[j % n]}, {order[k % n]} are collinear (cond {c:.2e})"
                    )

    components = []
    for i in range(2, n - 1):
        V0 = _opposite_velocity(W[0], W[1], W[i + 1], R[i + 1], g)
        tail = list(range(i + 1, n)) + [0]
        coeffs = _killing_fit(W[[i + 1, 0]], np.array([R[i + 1], V0]), g)
        piece = np.zeros_like(R)
        piece[tail] = _killing_apply(coeffs, W[tail], g)
        R = R - piece
        out = np.zeros_like(piece)
        out[order] = piece
        components.append(out)

    total = np.sum(components, axis=0) if components else np.zeros_like(U)
    residual = float(np.linalg.norm(U - total))
    logger.debug("decomposition into %d pieces, residual %.2e", len(components), residual)
    return Decomposition(components, base, U, residual, order)


def _s_c(g: Geometry):
    if g is Geometry.H2:
        return np.sinh, np.cosh, -1.0
    return np.sin, np.cos, 1.0


@dataclass
class QuadDerivatives:
    """Angle variations of a quadrilateral under the deformation with dt = 1."""
    alpha: np.ndarray
    beta1: complex
    gamma1: complex
    diagonal: complex

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": [complex(a).real for a in self.alpha],
            "beta1": complex(self.beta1).real,
            "gamma1": complex(self.gamma1).real,
            "diagonal": complex(self.diagonal).real,
        }


def _length_value(a, b, g: Geometry):
    if g is Geometry.H2:
        return float(np.arccosh(max(1.0, -float(inner(a, b, g)))))
    c = float(inner(a, b, g))
    if g is Geometry.S2:
        return math.acos(max(-1.0, min(1.0, c)))
    return complex(np.arccos(complex(c)))


def quad_derivatives(q: Polygon) -> QuadDerivatives:
    """Closed-form angle variations of the quadrilateral (v0, v1, v2, v3).

    The deformation is normalized by dt = 1 where t = d(v1, v3).
    """
    if q.n != 4:
        raise ValueError(f"expected a quadrilateral, got {q.n} vertices")
    g = q.geometry
    if g is Geometry.E2:
        raise UnsupportedGeometry("quadrilateral formulas cover S2, H2 and DS2")
    V = q.vertices
    for a, b, c in ((0, 1, 2), (1, 2, 3), (2, 3, 0), (3, 0, 1)):
        if _collinear_condition(V[a], V[b], V[c], g) > TOL.collinear_cond:
            raise DegenerateQuadrilateral(f"vertices {a}, {b}, {c} are collinear")

    S, C, sign = _s_c(g)
    if g is Geometry.DS2:
        S, C = (lambda x: np.sin(complex(x))), (lambda x: np.cos(complex(x)))
        alphas = np.array([m.value for m in interior_angles(q)])
    else:
        alphas = angle_values(q)

    d = {}
    for i, j in ((0, 1), (0, 3), (1, 2), (2, 3)):
        d[(i, j)] = _length_value(V[i], V[j], g)
    t = _length_value(V[1], V[3], g)

    sa0, sa2 = np.sin(alphas[0]), np.sin(alphas[2])
    St = S(t)
    den0 = S(d[(0, 1)]) * S(d[(0, 3)]) * sa0
    den2 = S(d[(1, 2)]) * S(d[(2, 3)]) * sa2
    if min(abs(den0), abs(den2), abs(St)) < 1e-12:
        raise DegenerateQuadrilateral("vanishing sine in the quadrilateral formulas")

    a0 = St / den0
    a2 = St / den2
    beta1 = sign * (C(d[(0, 3)]) * C(t) - C(d[(0, 1)])) / (St * den0)
    gamma1 = sign * (C(d[(2, 3)]) * C(t) - C(d[(1, 2)])) / (St * den2)
    a3 = (sign * (C(d[(0, 1)]) * C(t) - C(d[(0, 3)])) / (St * den0)
          + sign * (C(d[(1, 2)]) * C(t) - C(d[(2, 3)])) / (St * den2))
    alpha = np.array([a0, beta1 + gamma1, a2, a3])
    if g is not Geometry.DS2:
        alpha = alpha.real.astype(float)
    return QuadDerivatives(alpha, beta1, gamma1, t)


def unit_diagonal_deformation(q: Polygon) -> np.ndarray:
    """The isometric deformation of a quadrilateral with d(v1, v3)' = 1."""
    g = q.geometry
    if g not in (Geometry.S2, Geometry.H2):
        raise UnsupportedGeometry("unit diagonal deformation needs a real diagonal (S2 or H2)")
    space = isometric_deformation_space(q)
    if space.quotient_dimension != 1:
        raise DegenerateQuadrilateral(f"quadrilateral has {space.quotient_dimension} nontrivial deformations")
    U = space.deformation(0)
    v1, v3 = q.vertices[1], q.vertices[3]
    dc = float(inner(U[1], v3, g) + inner(v1, U[3], g))
    t = _length_value(v1, v3, g)
    # S2: <v1, v3> = cos t, H2: <v1, v3> = -cosh t
    dt = -dc / math.sin(t) if g is Geometry.S2 else -dc / math.sinh(t)
    if abs(dt) < 1e-14:
        raise DegenerateQuadrilateral("diagonal does not vary to first order")
    return U / dt


def piece_term(p: Polygon, piece: np.ndarray, order: List[int], i: int) -> float:
    """Closed form of <b(U_i), w_1> on the quadrilateral (w_1, w_i, w_{i+1}, w_0)."""
    g = p.geometry
    S = np.sinh if g is Geometry.H2 else np.sin
    idx = [order[1], order[i], order[(i + 1) % p.n], order[0]]
    W = p.vertices[idx]
    quad = Polygon(g, W)
    a = angle_values(quad)
    speed = float(inner(W[0], piece[idx[2]], g))
    d0 = _length_value(W[3], W[2], g)
    di = _length_value(W[1], W[2], g)
    return speed ** 2 * math.sin(a[0]) / (S(d0) * S(di) * math.sin(a[3]) * math.sin(a[1]))


@dataclass
class PositivityReport:
    """Products <b(U), v_j> and the closed-form checks at the base vertex."""
    geometry: str
    products: List[float]
    verdict: bool
    quotient_norm: float
    piece_direct: List[float] = field(default_factory=list)
    piece_closed: List[float] = field(default_factory=list)
    piece_residual: Optional[float] = None
    additivity_residual: Optional[float] = None
    reconstruction_residual: Optional[float] = None

    @property
    def min_product(self) -> float:
        return min(self.products)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "geometry": self.geometry,
            "products": self.products,
            "min_product": self.min_product,
            "verdict": self.verdict,
            "quotient_norm": self.quotient_norm,
            "piece_direct": self.piece_direct,
            "piece_closed": self.piece_closed,
            "piece_residual": self.piece_residual,
            "additivity_residual": self.additivity_residual,
            "reconstruction_residual": self.reconstruction_residual,
        }


def positivity_certificate(p: Polygon, U: Velocities, closed_forms: bool = True,
                           base: int = 0) -> PositivityReport:
    """Check that b(U) pairs positively with every vertex of a convex polygon."""
    g = p.geometry
    if g is Geometry.E2:
        raise UnsupportedGeometry("positivity of b is stated for S2, H2 and DS2")
    if not is_convex(p) or orientation(p) < 0:
        raise NotConvex(f"{g.value} polygon is not convex and counterclockwise")
    U = as_velocities(U, p.n)
    space = isometric_deformation_space(p)
    qnorm = float(np.linalg.norm(space.quotient_component(U)))
    if qnorm <= TOL.nontrivial:
        raise TrivialDeformation(f"quotient component {qnorm:.3e} is below {TOL.nontrivial:.0e}")

    b = b_of(p, U)
    products = [b.pair(v) for v in p.vertices]
    report = PositivityReport(g.value, products, all(x > 0 for x in products), qnorm)
    if not report.verdict:
        logger.warning("b(U) fails positivity on a convex %s %d-gon (min %.3e)", g.value, p.n, min(products))

    if closed_forms and p.n >= 4:
        dec = decompose(p, U, base)
        w1 = p.vertices[dec.order[1]]
        direct = [b_of(p, piece).pair(w1) for piece in dec.components]
        report.reconstruction_residual = dec.reconstruction_residual
        report.piece_direct = direct
        report.additivity_residual = abs(b.pair(w1) - sum(direct))
        if g is not Geometry.DS2:
            closed = [piece_term(p, piece, dec.order, i)
                      for i, piece in zip(range(2, p.n - 1), dec.components)]
            report.piece_closed = closed
            report.piece_residual = float(np.max(np.abs(np.array(direct) - np.array(closed))))
    return report


def positivity_sweep(geometry: Geometry, n: int, count: int, rng: np.random.Generator,
                     closed_forms: bool = False) -> pd.DataFrame:
    """Certificates for every quotient basis vector of random convex polygons."""
    from core.sampling import random_convex_polygon

    rows = []
    for k in range(count):
        p = random_convex_polygon(geometry, n, rng)
        space = isometric_deformation_space(p)
        for j in range(space.quotient_dimension):
            report = positivity_certificate(p, space.deformation(j), closed_forms=closed_forms)
            rows.append({
                "instance": k,
                "basis_index": j,
                "n": n,
                "min_product": report.min_product,
                "positive": report.verdict,
                "piece_residual": report.piece_residual,
            })
    frame = pd.DataFrame(rows)
    if not frame.empty:
        logger.info("positivity sweep %s n=%d: %d/%d positive", geometry.value, n,
                    int(frame["positive"].sum()), len(frame))
    return frame
