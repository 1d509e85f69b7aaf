"""Isometric first-order deformations of polygons.

A first-order deformation is an (n, 3) array of vertex velocities, stacked
row by row into a vector of length 3n when linear algebra is needed.  The
isometric ones form the kernel of the differential of the edge invariants
(<v_i, v_{i+1}> for the quadric models, |v_{i+1} - v_i|^2 in E2) together
with the tangency conditions.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from config.settings import TOL, config
from core.errors import (
    ConstraintViolated,
    DegenerateConfiguration,
    DegenerateVertex,
)
from core.geometry import Geometry, inner, killing_restrictions
from core.polygon import Polygon, angle_values, interior_angles, oriented_angle_terms
from utils.cache_manager import CacheManager
from utils.logger import setup_logger

logger = setup_logger(__name__)

space_cache = CacheManager(max_entries=config.cache_entries)

Velocities = Union[np.ndarray, "FirstOrderDeformation"]


@dataclass(frozen=True, eq=False)
class FirstOrderDeformation:
    """Per-vertex tangent vectors v'_i."""
    velocities: np.ndarray

    @property
    def stacked(self) -> np.ndarray:
        return self.velocities.reshape(-1)


def as_velocities(U: Velocities, n: Optional[int] = None) -> np.ndarray:
    """Accept a deformation object, an (n, 3) array or a stacked vector."""
    if isinstance(U, FirstOrderDeformation):
        U = U.velocities
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U.reshape(-1, 3)
    if n is not None and U.shape != (n, 3):
        raise ValueError(f"expected velocities of shape ({n}, 3), got {U.shape}")
    return U


def constraint_values(X: np.ndarray, g: Geometry) -> np.ndarray:
    """Edge invariants followed by the quadric (or z = 0) conditions."""
    Y = np.roll(X, -1, axis=0)
    if g is Geometry.E2:
        d = Y - X
        return np.concatenate([np.sum(d * d, axis=1), X[:, 2]])
    return np.concatenate([inner(X, Y, g), inner(X, X, g)])


def constraint_jacobian(X: np.ndarray, g: Geometry) -> np.ndarray:
    """Jacobian of constraint_values with respect to the stacked vertices."""
    n = X.shape[0]
    J = np.zeros((2 * n, 3 * n))
    Y = np.roll(X, -1, axis=0)
    for i in range(n):
        j = (i + 1) % n
        if g is Geometry.E2:
            d = Y[i] - X[i]
            J[i, 3 * j:3 * j + 3] += 2.0 * d
            J[i, 3 * i:3 * i + 3] -= 2.0 * d
            J[n + i, 3 * i + 2] = 1.0
        else:
            J[i, 3 * i:3 * i + 3] += g.metric * Y[i]
            J[i, 3 * j:3 * j + 3] += g.metric * X[i]
            J[n + i, 3 * i:3 * i + 3] = 2.0 * g.metric * X[i]
    return J


def isometry_residual(p: Polygon, U: Velocities) -> float:
    """Largest first-order change of an edge invariant or of tangency."""
    U = as_velocities(U, p.n)
    return float(np.max(np.abs(constraint_jacobian(p.vertices, p.geometry) @ U.reshape(-1))))


def _kernel(M: np.ndarray, rtol: float):
    _, s, vh = scipy.linalg.svd(M, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * smax))
    gap = float(s[rank - 1] / s[rank]) if 0 < rank < s.size and s[rank] > 0 else math.inf
    return vh[rank:], s, rank, gap


def _check_not_on_geodesic(p: Polygon) -> None:
    V = p.vertices
    if p.geometry is Geometry.E2:
        rank = np.linalg.matrix_rank(V[1:, :2] - V[0, :2], tol=1e-9)
        if rank < 2:
            raise DegenerateConfiguration("E2 vertices are collinear")
        return
    if np.linalg.matrix_rank(V, tol=1e-9) < 3:
        raise DegenerateConfiguration(f"{p.geometry.value} vertices lie on a geodesic")


def angle_constraint_rank(p: Polygon) -> int:
    """Rank of the linear conditions sum a_i v_i = 0 (and sum a_i = 0 in E2)."""
    V = p.vertices
    if p.geometry is Geometry.E2:
        rows = np.vstack([np.ones(p.n), V[:, 0], V[:, 1]])
    else:
        rows = V.T
    return int(np.linalg.matrix_rank(rows, tol=1e-9))


@dataclass(frozen=True, eq=False)
class DeformationSpace:
    """Kernel of the isometry constraints and its quotient by Killing fields."""
    polygon: Polygon
    full_basis: np.ndarray
    trivial_basis: np.ndarray
    quotient_basis: np.ndarray
    singular_values: np.ndarray = field(repr=False)
    rank: int = 0
    gap_ratio: float = math.inf

    @property
    def dimension(self) -> int:
        return self.full_basis.shape[0]

    @property
    def quotient_dimension(self) -> int:
        return self.quotient_basis.shape[0]

    def deformation(self, i: int) -> np.ndarray:
        """i-th quotient basis vector as (n, 3) velocities."""
        return self.quotient_basis[i].reshape(-1, 3)

    def quotient_component(self, U: Velocities) -> np.ndarray:
        """Coordinates of U on the quotient basis."""
        return self.quotient_basis @ as_velocities(U).reshape(-1)

    def project_to_quotient(self, U: Velocities) -> np.ndarray:
        return (self.quotient_basis.T @ self.quotient_component(U)).reshape(-1, 3)


def trivial_deformations(p: Polygon) -> List[np.ndarray]:
    """Restrictions of the Killing basis to the vertices."""
    return list(killing_restrictions(p.vertices, p.geometry))


def isometric_deformation_space(p: Polygon, rtol: float = None, use_cache: bool = True) -> DeformationSpace:
    """Kernel of the edge-length and tangency constraints, with its quotient."""
    rtol = TOL.rank_rtol if rtol is None else rtol
    key = space_cache.generate_key(p.key(), repr(rtol).encode())
    if use_cache:
        cached = space_cache.get(key)
        if cached is not None:
            return cached

    _check_not_on_geodesic(p)
    full, s, rank, gap = _kernel(constraint_jacobian(p.vertices, p.geometry), rtol)

    trivial = killing_restrictions(p.vertices, p.geometry).reshape(3, -1)
    qt, st, _ = scipy.linalg.svd(trivial.T, full_matrices=False)
    if st[-1] < 1e-9 * st[0]:
        raise DegenerateConfiguration("Killing fields are dependent on the vertex set")

    P = full - (full @ qt) @ qt.T
    k = full.shape[0] - 3
    if k > 0:
        _, _, vh = scipy.linalg.svd(P, full_matrices=False)
        quotient = vh[:k]
    else:
        quotient = np.zeros((0, full.shape[1]))

    logger.debug(
        "deformation space of %s %d-gon: kernel %d, quotient %d, gap %.3e",
        p.geometry.value, p.n, full.shape[0], quotient.shape[0], gap,
    )
    space = DeformationSpace(p, full, trivial, quotient, s, rank, gap)
    if use_cache:
        space_cache.set(key, space)
    return space


def _rolled(A: np.ndarray):
    return np.roll(A, -1, axis=0), np.roll(A, 1, axis=0)


def angle_variations(p: Polygon, U: Velocities) -> np.ndarray:
    """First-order variation of the interior angles under U.

    For the de Sitter plane the angle variations are purely imaginary and
    the returned real entry w_i stands for i * w_i.
    """
    U = as_velocities(U, p.n)
    g = p.geometry
    V = p.vertices
    C, A = _rolled(V)
    UC, UA = _rolled(U)

    if g is Geometry.DS2:
        return _desitter_angle_variations(V, C, A, U, UC, UA)

    s, co = oriented_angle_terms(V, C, A, g)
    if g is Geometry.E2:
        dc, da = C - V, A - V
        ddc, dda = UC - U, UA - U
        sd = (ddc[:, 0] * da[:, 1] - ddc[:, 1] * da[:, 0]) + (dc[:, 0] * dda[:, 1] - dc[:, 1] * dda[:, 0])
        cod = np.sum(ddc * da, axis=1) + np.sum(dc * dda, axis=1)
    else:
        eps = g.epsilon
        sd = (np.sum(U * np.cross(C, A), axis=1) + np.sum(V * np.cross(UC, A), axis=1)
              + np.sum(V * np.cross(C, UA), axis=1))
        cv, av = inner(C, V, g), inner(A, V, g)
        cvd = inner(UC, V, g) + inner(C, U, g)
        avd = inner(UA, V, g) + inner(A, U, g)
        cod = inner(UC, A, g) + inner(C, UA, g) - eps * (cvd * av + cv * avd)
    denom = s * s + co * co
    if np.any(denom < 1e-28):
        raise DegenerateVertex("angle variation undefined at a degenerate vertex")
    return (co * sd - s * cod) / denom


def _desitter_angle_variations(V, C, A, U, UC, UA) -> np.ndarray:
    g = Geometry.DS2
    cv, av = inner(C, V, g), inner(A, V, g)
    tc = C - cv[:, None] * V
    ta = A - av[:, None] * V
    tcd = UC - (inner(UC, V, g) + inner(C, U, g))[:, None] * V - cv[:, None] * U
    tad = UA - (inner(UA, V, g) + inner(A, U, g))[:, None] * V - av[:, None] * U

    nc, na = inner(tc, tc, g), inner(ta, ta, g)
    if np.any(np.abs(nc) < TOL.lightlike_reject) or np.any(np.abs(na) < TOL.lightlike_reject):
        raise DegenerateVertex("lightlike edge at a de Sitter vertex")
    P = inner(tc, ta, g)
    norm = np.sqrt(np.abs(nc * na))
    rho = P / norm
    Pd = inner(tcd, ta, g) + inner(tc, tad, g)
    ncd = 2.0 * inner(tcd, tc, g)
    nad = 2.0 * inner(tad, ta, g)
    rhod = Pd / norm - 0.5 * rho * (ncd / nc + nad / na)

    out = np.empty_like(rho)
    mixed = np.sign(nc) != np.sign(na)
    both_space = (nc > 0) & (na > 0)
    both_time = (nc < 0) & (na < 0)
    root = np.sqrt(np.abs(rho * rho - 1.0))
    if np.any((both_space | both_time) & (root < 1e-12)):
        raise DegenerateVertex("parallel tangents at a de Sitter vertex")
    out[mixed] = rhod[mixed] / np.sqrt(1.0 + rho[mixed] ** 2)
    out[both_space] = rhod[both_space] / root[both_space]
    out[both_time] = -rhod[both_time] / root[both_time]
    return out


def complex_angle_variations(p: Polygon, U: Velocities) -> np.ndarray:
    """Angle variations as complex numbers (i * w in the de Sitter plane)."""
    w = angle_variations(p, U)
    return 1j * w if p.geometry is Geometry.DS2 else w.astype(complex)


def closure_residual(p: Polygon, U: Velocities) -> Tuple[float, float]:
    """(|sum a'_i v_i|, |sum a'_i|); the scalar part is reported for E2 only."""
    a = angle_variations(p, U)
    vector = float(np.linalg.norm(a @ p.vertices))
    scalar = float(abs(np.sum(a))) if p.geometry is Geometry.E2 else 0.0
    return vector, scalar


def deformation_from_angle_variations(p: Polygon, alpha_dot: Sequence[float]) -> np.ndarray:
    """Isometric deformation realizing alpha_dot, unique modulo trivial ones."""
    a = np.asarray(alpha_dot)
    if np.iscomplexobj(a):
        a = a.imag if p.geometry is Geometry.DS2 else a.real
    a = a.astype(float)
    if a.shape != (p.n,):
        raise ValueError(f"expected {p.n} angle variations, got shape {a.shape}")

    vector = float(np.linalg.norm(a @ p.vertices))
    scalar = float(abs(np.sum(a))) if p.geometry is Geometry.E2 else 0.0
    if vector > TOL.closure or scalar > TOL.closure:
        raise ConstraintViolated(
            f"angle variations violate the closing conditions: |sum a v| = {vector:.3e}, |sum a| = {scalar:.3e}"
        )

    space = isometric_deformation_space(p)
    if space.quotient_dimension == 0:
        if np.linalg.norm(a) > 1e-8:
            raise ConstraintViolated("rigid polygon admits only vanishing angle variations")
        return np.zeros((p.n, 3))
    M = np.column_stack([angle_variations(p, space.deformation(i)) for i in range(space.quotient_dimension)])
    coeffs, *_ = np.linalg.lstsq(M, a, rcond=None)
    U = (space.quotient_basis.T @ coeffs).reshape(-1, 3)
    err = float(np.linalg.norm(angle_variations(p, U) - a))
    if err > 1e-8 * max(1.0, float(np.linalg.norm(a))):
        raise ConstraintViolated(f"angle variations are not realizable (residual {err:.3e})")
    return U


def project_to_variety(X: np.ndarray, g: Geometry, targets: np.ndarray,
                       tol: float = None, max_iter: int = None) -> np.ndarray:
    """Gauss-Newton minimal-norm projection onto constraint_values == targets."""
    tol = TOL.projection if tol is None else tol
    max_iter = config.get_sampling_config()["projection_max_iter"] if max_iter is None else max_iter
    X = np.array(X, dtype=float)
    for it in range(max_iter):
        c = constraint_values(X, g) - targets
        err = float(np.max(np.abs(c)))
        if err < tol:
            logger.debug("projection converged in %d steps (residual %.2e)", it, err)
            return X
        J = constraint_jacobian(X, g)
        step, *_ = np.linalg.lstsq(J, c, rcond=None)
        X = X - step.reshape(-1, 3)
    c = constraint_values(X, g) - targets
    err = float(np.max(np.abs(c)))
    if err > 1e3 * tol:
        logger.warning("projection stopped with residual %.3e after %d steps", err, max_iter)
    return X


def length_targets(lengths: Sequence[float], g: Geometry) -> np.ndarray:
    """Edge invariants followed by quadric values for prescribed lengths."""
    lengths = np.asarray(lengths)
    if g is Geometry.E2:
        edge = lengths.real ** 2
        tail = np.zeros(len(lengths))
    else:
        if g is Geometry.H2:
            edge = -np.cosh(lengths.real)
        else:
            edge = np.cos(lengths).real
        tail = np.full(len(lengths), g.quadric)
    return np.concatenate([edge, tail])


def project_to_lengths(X: np.ndarray, g: Geometry, lengths: Sequence[float]) -> Polygon:
    """Polygon with the given edge lengths closest (to first order) to X."""
    return Polygon(g, project_to_variety(X, g, length_targets(lengths, g)))


def isometric_path(p: Polygon, U: Velocities, h: float) -> Polygon:
    """The point of the length variety of p reached from p + h U."""
    U = as_velocities(U, p.n)
    targets = constraint_values(p.vertices, p.geometry)
    return Polygon(p.geometry, project_to_variety(p.vertices + h * U, p.geometry, targets))


def _angle_vector(p: Polygon) -> np.ndarray:
    if p.geometry is Geometry.DS2:
        return np.array([m.im for m in interior_angles(p)])
    return angle_values(p)


def finite_difference_angle_variations(p: Polygon, U: Velocities, h: float = None) -> np.ndarray:
    """Central difference of the angles along the isometric path through U."""
    h = config.get_sampling_config()["fd_step"] if h is None else h
    plus = _angle_vector(isometric_path(p, U, h))
    minus = _angle_vector(isometric_path(p, U, -h))
    diff = plus - minus
    if p.geometry is not Geometry.DS2:
        diff = np.mod(diff + math.pi, 2.0 * math.pi) - math.pi
    return diff / (2.0 * h)


def richardson_ratio(p: Polygon, U: Velocities, h: float = 1e-2) -> float:
    """Error ratio of the central difference at steps h and h/2 (about 4)."""
    exact = angle_variations(p, U)
    e1 = float(np.linalg.norm(finite_difference_angle_variations(p, U, h) - exact))
    e2 = float(np.linalg.norm(finite_difference_angle_variations(p, U, h / 2.0) - exact))
    return e1 / e2 if e2 > 0 else math.inf


def random_isometric_walk(p: Polygon, rng: np.random.Generator, steps: int = None,
                          step: float = None) -> Polygon:
    """Random walk on the length variety of p by small projected kernel steps."""
    sampling = config.get_sampling_config()
    steps = sampling["walk_steps"] if steps is None else steps
    step = sampling["walk_step"] if step is None else step
    targets = constraint_values(p.vertices, p.geometry)
    current = p
    for _ in range(steps):
        space = isometric_deformation_space(current, use_cache=False)
        if space.quotient_dimension == 0:
            return current
        c = rng.standard_normal(space.quotient_dimension)
        c /= np.linalg.norm(c)
        U = (space.quotient_basis.T @ c).reshape(-1, 3)
        X = project_to_variety(current.vertices + step * U, p.geometry, targets)
        current = Polygon(p.geometry, X)
    return current
