class PolyflexError(Exception):
    """Base class for every library error."""
    pass


class OffQuadric(PolyflexError):
    """Point does not lie on the quadric of its geometry."""
    pass


class AntipodalPoints(PolyflexError):
    """Distance between antipodal points is undefined."""
    pass


class LightlikeTangent(PolyflexError):
    """De Sitter angle requested for a lightlike tangent."""
    pass


class ZeroTangent(PolyflexError):
    pass


class DegenerateTriangle(PolyflexError):
    pass


class DegenerateVertex(PolyflexError):
    """Angle at a vertex is undefined."""
    pass


class UnsupportedGeometry(PolyflexError):
    pass


class SelfIntersecting(PolyflexError):
    pass


class NotConvex(PolyflexError):
    pass


class DegenerateConfiguration(PolyflexError):
    """Vertices on a geodesic, or trivial fields dependent on the vertex set."""
    pass


class ConstraintViolated(PolyflexError):
    pass


class CollinearTriple(PolyflexError):
    pass


class DegenerateQuadrilateral(PolyflexError):
    pass


class TrivialDeformation(PolyflexError):
    pass


class InfeasibleLengths(PolyflexError):
    pass


class RootBracketFailure(PolyflexError):
    pass


class SingularOperator(PolyflexError):
    pass


class NoFlatVertex(PolyflexError):
    pass


class DegeneratePolyhedron(PolyflexError):
    pass


class InvalidVertex(PolyflexError):
    pass


class ExteriorBasepoint(PolyflexError):
    pass


class SingularPoint(PolyflexError):
    pass


class NotInHemisphere(PolyflexError):
    pass


class HypothesisViolated(PolyflexError):
    pass
