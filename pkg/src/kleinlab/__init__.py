"""kleinlab: Monte Carlo experiments on Schottky limit sets.

Moebius/Schottky algebra, Brownian motion on the round sphere, conformal
time change, empirical harmonic exit measures, and the torus trichotomy of
linear foliations, with a reproducible scenario CLI (``simlab``).
"""

__version__ = "0.1.0"

from .moebius import MoebiusMap, classify, mobius_apply, spherical_conformal_factor
from .schottky import (
    Circle,
    GroupWord,
    LimitSetSample,
    OrbitCloud,
    SchottkyGroup,
    schottky_from_circle_pairs,
)
from .sphere import INF, SpherePoint, as_point, chordal_distance

__all__ = [
    "MoebiusMap",
    "classify",
    "mobius_apply",
    "spherical_conformal_factor",
    "Circle",
    "GroupWord",
    "LimitSetSample",
    "OrbitCloud",
    "SchottkyGroup",
    "schottky_from_circle_pairs",
    "INF",
    "SpherePoint",
    "as_point",
    "chordal_distance",
    "__version__",
]
