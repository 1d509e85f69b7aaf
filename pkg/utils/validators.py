import json
import math
from typing import Any, Dict, List, Tuple

from core.errors import DegeneratePolyhedron, OffQuadric, PolyflexError

GEOMETRIES = ("E2", "S2", "H2", "DS2")
SCHEMA_VERSION = 1


class ValidationError(PolyflexError):
    """Input file or document does not match the expected schema."""
    pass


ParseError = ValidationError


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


class PolygonValidator:
    """Schema checks for polygon documents."""

    def __init__(self):
        self.min_vertices = 3

    def validate_polygon(self, data: Dict[str, Any]) -> bool:
        """Raise ValidationError on the first violated rule."""
        if not isinstance(data, dict):
            raise ValidationError(f"polygon document must be an object, got {type(data).__name__}")
        self._validate_schema(data)
        self._validate_geometry(data)
        self._validate_vertices(data)
        return True

    def _validate_schema(self, data: Dict[str, Any]) -> None:
        version = data.get("schema", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValidationError(f"unsupported schema version {version!r}")

    def _validate_geometry(self, data: Dict[str, Any]) -> None:
        if data.get("geometry") not in GEOMETRIES:
            raise ValidationError(f"geometry must be one of {GEOMETRIES}, got {data.get('geometry')!r}")

    def _validate_vertices(self, data: Dict[str, Any]) -> None:
        vertices = data.get("vertices")
        if not isinstance(vertices, list):
            raise ValidationError("vertices must be a list")
        if len(vertices) < self.min_vertices:
            raise ValidationError(f"need at least {self.min_vertices} vertices, got {len(vertices)}")
        width = 2 if data["geometry"] == "E2" else 3
        for i, v in enumerate(vertices):
            if not isinstance(v, list) or len(v) not in (width, 3):
                raise ValidationError(f"vertex {i} must have {width} coordinates")
            if not all(_is_number(c) for c in v):
                raise ValidationError(f"vertex {i} has a non-finite coordinate: {v}")


class PolyhedronValidator:
    """Schema checks for polyhedron documents."""

    def __init__(self):
        self.min_vertices = 4
        self.min_faces = 4

    def validate_polyhedron(self, data: Dict[str, Any]) -> bool:
        if not isinstance(data, dict):
            raise ValidationError(f"polyhedron document must be an object, got {type(data).__name__}")
        self._validate_vertices(data)
        self._validate_faces(data)
        return True

    def _validate_vertices(self, data: Dict[str, Any]) -> None:
        vertices = data.get("vertices")
        if not isinstance(vertices, list) or len(vertices) < self.min_vertices:
            raise ValidationError(f"need a list of at least {self.min_vertices} vertices")
        for i, v in enumerate(vertices):
            if not isinstance(v, (list, tuple)) or len(v) != 3 or not all(_is_number(c) for c in v):
                raise ValidationError(f"vertex {i} must be 3 finite numbers, got {v}")

    def _validate_faces(self, data: Dict[str, Any]) -> None:
        faces = data.get("faces")
        n = len(data["vertices"])
        if not isinstance(faces, list) or len(faces) < self.min_faces:
            raise ValidationError(f"need a list of at least {self.min_faces} faces")
        for f, face in enumerate(faces):
            if not isinstance(face, (list, tuple)) or len(face) < 3:
                raise ValidationError(f"face {f} needs at least 3 vertex indices")
            for i in face:
                if not isinstance(i, int) or isinstance(i, bool) or not 0 <= i < n:
                    raise ValidationError(f"face {f} has index {i!r} outside 0..{n - 1}")
            if len(set(face)) != len(face):
                raise ValidationError(f"face {f} repeats a vertex")


def parse_off(text: str) -> Tuple[List[List[float]], List[List[int]]]:
    """Vertices and faces of an OFF document; comments after '#' are ignored."""
    tokens: List[str] = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens:
        raise ValidationError("empty OFF document")
    if tokens[0] == "OFF":
        tokens = tokens[1:]
    elif tokens[0].startswith("OFF"):
        tokens[0] = tokens[0][3:]
    try:
        n_vertices, n_faces = int(tokens[0]), int(tokens[1])
        pos = 3
        vertices = []
        for _ in range(n_vertices):
            vertices.append([float(t) for t in tokens[pos:pos + 3]])
            pos += 3
        faces = []
        for _ in range(n_faces):
            k = int(tokens[pos])
            faces.append([int(t) for t in tokens[pos + 1:pos + 1 + k]])
            # trailing colour values are not supported
            pos += 1 + k
    except (IndexError, ValueError) as e:
        raise ValidationError(f"malformed OFF document: {e}")
    if any(len(v) != 3 for v in vertices) or any(len(f) < 3 for f in faces):
        raise ValidationError("truncated OFF document")
    return vertices, faces


def load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")


def parse_polygon(text: str):
    """Polygon from a JSON document."""
    from core.polygon import Polygon

    data = load_json(text)
    try:
        return Polygon.from_dict(data)
    except (OffQuadric, ValueError) as e:
        raise ValidationError(f"invalid polygon: {e}") from e


def parse_polyhedron(text: str):
    """Polyhedron from a JSON or OFF document."""
    from core.polyhedron import ConvexPolyhedron

    try:
        if text.lstrip().startswith("{"):
            return ConvexPolyhedron.from_dict(load_json(text))
        return ConvexPolyhedron.from_off(text)
    except (DegeneratePolyhedron, ValueError) as e:
        raise ValidationError(f"invalid polyhedron: {e}") from e


def parse_lengths(text: str) -> Tuple[str, List[float]]:
    """(geometry, lengths) from {"geometry": ..., "lengths": [...]}."""
    data = load_json(text)
    if not isinstance(data, dict):
        raise ValidationError("lengths document must be an object")
    geometry = data.get("geometry")
    if geometry not in ("S2", "H2"):
        raise ValidationError(f"lengths geometry must be S2 or H2, got {geometry!r}")
    lengths = data.get("lengths")
    if not isinstance(lengths, list) or len(lengths) < 3 or not all(_is_number(v) and v > 0 for v in lengths):
        raise ValidationError("lengths must be a list of at least 3 positive numbers")
    return geometry, [float(v) for v in lengths]
