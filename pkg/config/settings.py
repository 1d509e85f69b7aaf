import math
import os
from dataclasses import dataclass, fields
from typing import Dict, Any

from dotenv import load_dotenv

load_dotenv()

ENV_PREFIX = "POLYFLEX_"


class ConfigurationError(Exception):
    """Raised when an environment override cannot be parsed."""
    pass


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by every module."""
    quadric: float = 1e-9
    causal: float = 1e-12
    rank_rtol: float = 1e-8
    isometry: float = 1e-10
    closure: float = 1e-9
    nontrivial: float = 1e-8
    lightlike_reject: float = 1e-10
    collinear_cond: float = 1e8
    critical: float = 1e-9
    horocycle: float = 1e-10
    coplanar: float = 1e-9
    quadrature: float = 1e-8
    projection: float = 1e-13

    @classmethod
    def from_env(cls) -> "Tolerances":
        """Build tolerances, honouring POLYFLEX_<NAME> overrides."""
        values = {}
        for field in fields(cls):
            raw = os.getenv(ENV_PREFIX + field.name.upper())
            if raw is None:
                continue
            values[field.name] = _parse_float(field.name, raw)
        return cls(**values)


def _parse_float(name: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigurationError(f"{ENV_PREFIX}{name.upper()}={raw!r} is not a number")


def _parse_int(name: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{ENV_PREFIX}{name}={raw!r} is not an integer")


class AppConfig:
    """Centralized configuration management."""

    def __init__(self):
        self.tolerances = Tolerances.from_env()
        self.seed = _parse_int("SEED", os.getenv(ENV_PREFIX + "SEED", "7"))
        self.log_level = os.getenv(ENV_PREFIX + "LOG_LEVEL", "INFO").upper()
        self.cache_entries = _parse_int(
            "CACHE_ENTRIES", os.getenv(ENV_PREFIX + "CACHE_ENTRIES", "256")
        )

    @property
    def is_configured(self) -> bool:
        """Check that every tolerance is a positive finite number."""
        return all(
            math.isfinite(getattr(self.tolerances, f.name)) and getattr(self.tolerances, f.name) > 0
            for f in fields(self.tolerances)
        )

    def get_solver_config(self) -> Dict[str, Any]:
        """Root-finding parameters for the maximal-area solver."""
        return {
            "lower_factor": 1.0 + 1e-12,
            "growth": 2.0,
            "max_expansions": 200,
            "xtol": 1e-13,
        }

    def get_sampling_config(self) -> Dict[str, Any]:
        """Random-walk and finite-difference parameters."""
        return {
            "walk_step": 1e-2,
            "walk_steps": 10,
            "fd_step": 1e-3,
            "projection_max_iter": 50,
            "quadrature_max_level": 6,
        }


config = AppConfig()
TOL = config.tolerances
