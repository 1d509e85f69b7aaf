"""Inner products, cross products, distances and angles in the four
constant-curvature model spaces.

All points and tangent vectors are stored as length-3 numpy arrays.  The
Euclidean plane is embedded as ``z = 0``; the sphere is the unit sphere of
Euclidean R^3; the hyperbolic plane is the upper sheet of
``x^2 + y^2 - z^2 = -1`` and the de Sitter plane is ``x^2 + y^2 - z^2 = 1``,
both in Minkowski space with the form of signature (+, +, -).

De Sitter distances and angles are complex numbers modulo 2*pi.  They are
returned as :class:`ComplexMeasure` values that carry the branch picked by
the causal type of the configuration instead of going through a generic
complex arccos.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence

import numpy as np

from config.settings import TOL
from core.errors import (
    AntipodalPoints,
    DegenerateTriangle,
    LightlikeTangent,
    OffQuadric,
    ZeroTangent,
)
from utils.logger import setup_logger

logger = setup_logger(__name__)

MINKOWSKI = np.array([1.0, 1.0, -1.0])
EUCLIDEAN = np.array([1.0, 1.0, 1.0])


class Geometry(str, Enum):
    """Model space tag."""
    E2 = "E2"
    S2 = "S2"
    H2 = "H2"
    DS2 = "DS2"

    @property
    def is_minkowski(self) -> bool:
        return self in (Geometry.H2, Geometry.DS2)

    @property
    def metric(self) -> np.ndarray:
        """Diagonal of the ambient bilinear form."""
        return MINKOWSKI if self.is_minkowski else EUCLIDEAN

    @property
    def quadric(self) -> Optional[float]:
        """Value of <x, x> on the model quadric (None for E2)."""
        return {Geometry.S2: 1.0, Geometry.H2: -1.0, Geometry.DS2: 1.0}.get(self)

    @property
    def epsilon(self) -> float:
        """1 / <v, v> for points of the quadric (E2 uses 0)."""
        q = self.quadric
        return 0.0 if q is None else 1.0 / q


class CausalType(str, Enum):
    SPACELIKE = "spacelike"
    TIMELIKE = "timelike"
    LIGHTLIKE = "lightlike"


class Branch(str, Enum):
    """How a complex measure was obtained."""
    REAL = "real"
    TIMELIKE = "timelike"
    ANTIPODAL_TIMELIKE = "antipodal_timelike"
    LIGHTLIKE = "lightlike"
    ANTIPODAL_LIGHTLIKE = "antipodal_lightlike"
    MIXED = "mixed"


@dataclass(frozen=True)
class ComplexMeasure:
    """Element of C / 2piZ with its branch record."""
    re: float
    im: float = 0.0
    branch: Branch = Branch.REAL

    @classmethod
    def normalized(cls, re: float, im: float = 0.0, branch: Branch = Branch.REAL) -> "ComplexMeasure":
        """Build a measure with the real part reduced to (-pi, pi]."""
        r = math.remainder(re, 2.0 * math.pi)
        if r <= -math.pi:
            r += 2.0 * math.pi
        return cls(r, im, branch)

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @property
    def is_real(self) -> bool:
        return self.im == 0.0

    def cos(self) -> complex:
        return complex(np.cos(self.value))

    def sin(self) -> complex:
        return complex(np.sin(self.value))

    def __float__(self) -> float:
        if not self.is_real:
            raise TypeError(f"measure {self.value} is not real")
        return self.re


def as_vector(x: Sequence[float]) -> np.ndarray:
    """Return a float length-3 array, padding planar points with z = 0."""
    v = np.asarray(x, dtype=float)
    if v.shape[-1] == 2:
        v = np.concatenate([v, np.zeros(v.shape[:-1] + (1,))], axis=-1)
    return v


def inner(u, v, g: Geometry):
    """Ambient bilinear form: dot product for E2/S2, Minkowski for H2/DS2.

    Works on stacks of vectors along the last axis.
    """
    return np.sum(np.asarray(u, dtype=float) * g.metric * np.asarray(v, dtype=float), axis=-1)


def cross(u, v, g: Geometry) -> np.ndarray:
    """Euclidean cross product, or its Minkowski analog J(u x v)."""
    c = np.cross(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    if g.is_minkowski:
        return c * MINKOWSKI
    return c


def causal_type(v, tol: float = None) -> CausalType:
    """Sign class of the Minkowski square, relative to the Euclidean size."""
    tol = TOL.causal if tol is None else tol
    v = np.asarray(v, dtype=float)
    q = float(inner(v, v, Geometry.H2))
    scale = max(float(np.dot(v, v)), 1e-300)
    if abs(q) <= tol * scale:
        return CausalType.LIGHTLIKE
    return CausalType.SPACELIKE if q > 0 else CausalType.TIMELIKE


def check_on_quadric(x, g: Geometry, tol: float = None) -> None:
    """Raise OffQuadric unless x satisfies the normalization of g."""
    tol = TOL.quadric if tol is None else tol
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise OffQuadric(f"non-finite coordinates {x}")
    if g is Geometry.E2:
        if abs(x[2]) > tol:
            raise OffQuadric(f"E2 point {x} has z = {x[2]:.3e}")
        return
    q = float(inner(x, x, g))
    if abs(q - g.quadric) > tol:
        raise OffQuadric(f"{g.value} point {x} has <x,x> = {q:.12g}, expected {g.quadric}")
    if g is Geometry.H2 and x[2] <= 0:
        raise OffQuadric(f"H2 point {x} lies on the lower sheet")


def normalize(x, g: Geometry) -> np.ndarray:
    """Scale x onto the quadric of g (H2 points are sent to the upper sheet)."""
    x = np.asarray(x, dtype=float)
    if g is Geometry.E2:
        return x
    rows = np.atleast_2d(x)
    q = inner(rows, rows, g)
    if g is Geometry.H2:
        if np.any(q >= 0):
            raise OffQuadric(f"cannot normalize non-timelike vector {x} to H2")
        y = rows / np.sqrt(-q)[:, None]
        y = y * np.sign(y[:, 2:3])
    else:
        if np.any(q <= 0):
            raise OffQuadric(f"cannot normalize vector {x} with <x,x> = {q} to {g.value}")
        y = rows / np.sqrt(q)[:, None]
    return y.reshape(x.shape)


def tangent_projection(x, v, g: Geometry) -> np.ndarray:
    """Component of x orthogonal to the point v of the quadric."""
    if g is Geometry.E2:
        return np.asarray(x, dtype=float) - np.asarray(v, dtype=float)
    return np.asarray(x, dtype=float) - g.epsilon * inner(x, v, g) * np.asarray(v, dtype=float)


def distance(x, y, g: Geometry) -> ComplexMeasure:
    """Distance between two points of g.

    De Sitter pairs use c = <x, y>: |c| < 1 gives arccos(c); c > 1 gives
    i*arccosh(c); c < -1 gives pi - i*arccosh(-c); c = +-1 are lightlike
    separations reported with distance 0 or pi and a lightlike branch.
    """
    x = as_vector(x)
    y = as_vector(y)
    check_on_quadric(x, g)
    check_on_quadric(y, g)

    if g is Geometry.E2:
        return ComplexMeasure(float(np.linalg.norm(y - x)))

    if g is Geometry.S2:
        if np.allclose(x, -y, atol=1e-12):
            raise AntipodalPoints(f"{x} and {y} are antipodal")
        return ComplexMeasure(math.atan2(float(np.linalg.norm(np.cross(x, y))), float(np.dot(x, y))))

    c = float(inner(x, y, g))
    if g is Geometry.H2:
        return ComplexMeasure(float(np.arccosh(max(1.0, -c))))

    tol = TOL.causal * 10.0
    if abs(c - 1.0) <= tol:
        if np.allclose(x, y, atol=1e-12):
            return ComplexMeasure(0.0)
        return ComplexMeasure(0.0, 0.0, Branch.LIGHTLIKE)
    if abs(c + 1.0) <= tol:
        if np.allclose(x, -y, atol=1e-12):
            raise AntipodalPoints(f"{x} and {y} are antipodal in the de Sitter plane")
        return ComplexMeasure(math.pi, 0.0, Branch.ANTIPODAL_LIGHTLIKE)
    if abs(c) < 1.0:
        return ComplexMeasure(math.acos(c))
    if c > 1.0:
        return ComplexMeasure(0.0, float(np.arccosh(c)), Branch.TIMELIKE)
    return ComplexMeasure(math.pi, -float(np.arccosh(-c)), Branch.ANTIPODAL_TIMELIKE)


def _tangent_norm(u, g: Geometry) -> float:
    q = float(inner(u, u, g))
    if float(np.dot(u, u)) < 1e-28:
        raise ZeroTangent(f"tangent vector {u} is zero")
    return math.sqrt(abs(q))


def desitter_angle(u, v) -> ComplexMeasure:
    """Angle between two non-lightlike tangents of the de Sitter plane."""
    g = Geometry.DS2
    cu = causal_type(u)
    cv = causal_type(v)
    if CausalType.LIGHTLIKE in (cu, cv):
        raise LightlikeTangent(f"lightlike tangent among {u}, {v}")
    rho = float(inner(u, v, g)) / (_tangent_norm(u, g) * _tangent_norm(v, g))

    if cu is not cv:
        return ComplexMeasure(math.pi / 2.0, float(np.arcsinh(rho)), Branch.MIXED)
    if cu is CausalType.SPACELIKE:
        if rho >= 0:
            return ComplexMeasure(0.0, float(np.arccosh(max(1.0, rho))), Branch.TIMELIKE)
        return ComplexMeasure(math.pi, -float(np.arccosh(max(1.0, -rho))), Branch.ANTIPODAL_TIMELIKE)
    # both timelike; <u, v> < 0 means same time orientation
    if rho < 0:
        return ComplexMeasure(0.0, float(np.arccosh(max(1.0, -rho))), Branch.TIMELIKE)
    return ComplexMeasure(math.pi, -float(np.arccosh(max(1.0, rho))), Branch.ANTIPODAL_TIMELIKE)


def angle(x, u, v, g: Geometry) -> ComplexMeasure:
    """Unoriented angle at x between the tangent vectors u and v."""
    x = as_vector(x)
    u = as_vector(u)
    v = as_vector(v)
    if g is Geometry.DS2:
        return desitter_angle(u, v)
    _tangent_norm(u, g)
    _tangent_norm(v, g)
    if g is Geometry.E2:
        s = abs(u[0] * v[1] - u[1] * v[0])
    else:
        # det(x, u, v) equals |u||v| sin(angle) for unit x
        s = abs(float(np.linalg.det(np.array([x, u, v]))))
    return ComplexMeasure(math.atan2(s, float(inner(u, v, g))))


def killing_field(Y, g: Geometry) -> Callable[[np.ndarray], np.ndarray]:
    """Infinitesimal isometry x -> Y x x (S2) or Y [x] x (H2, DS2)."""
    Y = np.asarray(Y, dtype=float)

    def field_(x):
        return cross(Y, x, g)

    return field_


def _e2_rotation(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[..., 0] = -x[..., 1]
    out[..., 1] = x[..., 0]
    return out


def killing_basis(g: Geometry) -> List[Callable[[np.ndarray], np.ndarray]]:
    """Three independent Killing fields of g."""
    if g is Geometry.E2:
        e1 = np.array([1.0, 0.0, 0.0])
        e2 = np.array([0.0, 1.0, 0.0])
        return [
            _e2_rotation,
            lambda x: np.broadcast_to(e1, np.shape(x)).copy(),
            lambda x: np.broadcast_to(e2, np.shape(x)).copy(),
        ]
    return [killing_field(Y, g) for Y in np.eye(3)]


def killing_restrictions(points: np.ndarray, g: Geometry) -> np.ndarray:
    """Stack of the Killing basis evaluated on points, shape (3, n, 3)."""
    return np.stack([kappa(points) for kappa in killing_basis(g)])


@dataclass
class TriangleLawReport:
    """Residuals of the cosine and sine laws of a triangle."""
    sides: List[complex]
    angles: List[complex]
    cosine_residuals: List[float]
    sine_residuals: List[float]
    angle_branches: List[str] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.cosine_residuals + self.sine_residuals)


def _vertex_angle(A, B, C, g: Geometry) -> ComplexMeasure:
    return angle(A, tangent_projection(B, A, g), tangent_projection(C, A, g), g)


def _ratio_residuals(ratios) -> List[float]:
    # relative once the ratios exceed one
    return [
        float(abs(ratios[i] - ratios[i + 1]) / max(1.0, abs(ratios[i]), abs(ratios[i + 1]))) for i in range(2)
    ]


def check_triangle_laws(A, B, C, g: Geometry) -> TriangleLawReport:
    """Evaluate the trigonometric identities on the triangle ABC."""
    A, B, C = (as_vector(P) for P in (A, B, C))
    a = distance(B, C, g)
    b = distance(A, C, g)
    c = distance(A, B, g)
    sides = [a, b, c]
    for s in sides:
        if s.branch in (Branch.LIGHTLIKE, Branch.ANTIPODAL_LIGHTLIKE) or abs(s.value) < 1e-12:
            raise DegenerateTriangle(f"side {s.value} is degenerate in {g.value}")

    angles = [_vertex_angle(A, B, C, g), _vertex_angle(B, C, A, g), _vertex_angle(C, A, B, g)]
    av = [s.value for s in sides]
    al = [t.value for t in angles]

    if g is Geometry.E2:
        ra, rb, rc = (s.re for s in sides)
        cos_res = [
            abs(ra ** 2 - rb ** 2 - rc ** 2 + 2 * rb * rc * math.cos(al[0].real)),
            abs(rb ** 2 - ra ** 2 - rc ** 2 + 2 * ra * rc * math.cos(al[1].real)),
            abs(rc ** 2 - ra ** 2 - rb ** 2 + 2 * ra * rb * math.cos(al[2].real)),
        ]
        ratios = [math.sin(al[i].real) / sides[i].re for i in range(3)]
        return TriangleLawReport(av, al, cos_res, _ratio_residuals(ratios))

    if g is Geometry.H2:
        ch = [math.cosh(s.re) for s in sides]
        sh = [math.sinh(s.re) for s in sides]
        cos_res = [
            abs(ch[i] - ch[j] * ch[k] + sh[j] * sh[k] * math.cos(al[i].real))
            for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1))
        ]
        ratios = [math.sin(al[i].real) / sh[i] for i in range(3)]
        return TriangleLawReport(av, al, cos_res, _ratio_residuals(ratios))

    cs = np.cos(np.array(av, dtype=complex))
    sn = np.sin(np.array(av, dtype=complex))
    ca = np.cos(np.array(al, dtype=complex))
    sa = np.sin(np.array(al, dtype=complex))
    if np.any(np.abs(sn) < 1e-12):
        raise DegenerateTriangle("a side has vanishing sine")
    cos_res = [
        float(abs(cs[i] - cs[j] * cs[k] - sn[j] * sn[k] * ca[i]))
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1))
    ]
    ratios = sa / sn
    if g is Geometry.DS2 and not all(s.is_real for s in sides):
        # with timelike sides the sine of an angle is fixed only up to sign
        ratios = ratios ** 2
    return TriangleLawReport(av, al, cos_res, _ratio_residuals(ratios), [t.branch.value for t in angles])
