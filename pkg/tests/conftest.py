import math

import numpy as np
import pytest

from config.settings import config
from core.geometry import Geometry
from core.polygon import Polygon

GEOMETRIES = [Geometry.E2, Geometry.S2, Geometry.H2, Geometry.DS2]
CURVED = [Geometry.S2, Geometry.H2, Geometry.DS2]


def regular_polygon(geometry: Geometry, n: int, radius: float = 0.7) -> Polygon:
    """Regular counterclockwise n-gon centred at the pole (or the origin in E2)."""
    t = 2.0 * math.pi * np.arange(n) / n
    if geometry is Geometry.E2:
        return Polygon(geometry, np.stack([radius * np.cos(t), radius * np.sin(t)], axis=1))
    if geometry is Geometry.S2:
        r, h = math.sin(radius), math.cos(radius)
    else:
        r, h = math.sinh(radius), math.cosh(radius)
    return Polygon(geometry, np.stack([r * np.cos(t), r * np.sin(t), np.full(n, h)], axis=1))


@pytest.fixture
def rng():
    return np.random.default_rng(config.seed)


@pytest.fixture
def octant():
    return Polygon(Geometry.S2, np.eye(3))


@pytest.fixture
def unit_square():
    return Polygon(Geometry.E2, [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
