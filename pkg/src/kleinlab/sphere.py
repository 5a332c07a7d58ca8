"""Points on the Riemann sphere, the chordal metric, and the unit-vector model.

A point is a finite complex number or the point at infinity.  Internally the
simulation works with unit 3-vectors; the two models are related by
stereographic projection and round-trip to within 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SpherePoint:
    """A point of the Riemann sphere: a finite complex value, or infinity.

    ``value is None`` encodes the point at infinity; the two representations
    are mutually exclusive by construction.
    """

    value: complex | None

    @property
    def is_infinity(self) -> bool:
        return self.value is None

    def to_vector(self) -> np.ndarray:
        """Unit 3-vector of this point (stereographic from the north pole)."""
        if self.value is None:
            return np.array([0.0, 0.0, 1.0])
        z = complex(self.value)
        s = abs(z) ** 2
        d = 1.0 + s
        return np.array([2.0 * z.real / d, 2.0 * z.imag / d, (s - 1.0) / d])

    def __repr__(self):
        if self.value is None:
            return "SpherePoint(inf)"
        return f"SpherePoint({self.value!r})"


INF = SpherePoint(None)


def as_point(z) -> SpherePoint:
    """Coerce a complex number, 'inf', or SpherePoint to a SpherePoint."""
    if isinstance(z, SpherePoint):
        return z
    if z is None or (isinstance(z, str) and z == "inf"):
        return INF
    if isinstance(z, (int, float, complex, np.integer, np.floating, np.complexfloating)):
        zc = complex(z)
        if not (np.isfinite(zc.real) and np.isfinite(zc.imag)):
            return INF
        return SpherePoint(zc)
    raise TypeError(f"cannot interpret {z!r} as a sphere point")


def from_vector(v) -> SpherePoint:
    """Inverse stereographic projection of a unit 3-vector."""
    x, y, w = float(v[0]), float(v[1]), float(v[2])
    if 1.0 - w < 1e-15:
        return INF
    return SpherePoint(complex(x, y) / (1.0 - w))


def chordal_distance(z, w) -> float:
    """Chordal metric 2|z-w| / sqrt((1+|z|^2)(1+|w|^2)), in [0, 2].

    Infinity limits are taken exactly: d(z, inf) = 2/sqrt(1+|z|^2).
    """
    p, q = as_point(z), as_point(w)
    if p.is_infinity and q.is_infinity:
        return 0.0
    if p.is_infinity:
        p, q = q, p
    if q.is_infinity:
        return 2.0 / math.hypot(1.0, abs(p.value))
    # divide factor by factor so huge moduli cannot overflow
    return 2.0 * abs(p.value - q.value) / math.hypot(1.0, abs(p.value)) / math.hypot(
        1.0, abs(q.value)
    )


def complex_to_vectors(z: np.ndarray) -> np.ndarray:
    """Stereographic lift of an array of finite complex numbers to (n, 3)."""
    z = np.asarray(z, dtype=complex)
    s = np.abs(z) ** 2
    d = 1.0 + s
    out = np.empty(z.shape + (3,))
    out[..., 0] = 2.0 * z.real / d
    out[..., 1] = 2.0 * z.imag / d
    out[..., 2] = (s - 1.0) / d
    return out


def vectors_to_complex(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Complex charts of unit vectors; returns (values, infinity mask)."""
    v = np.asarray(v, dtype=float)
    w = v[..., 2]
    inf_mask = (1.0 - w) < 1e-15
    denom = np.where(inf_mask, 1.0, 1.0 - w)
    z = (v[..., 0] + 1j * v[..., 1]) / denom
    z = np.where(inf_mask, np.inf + 0j, z)
    return z, inf_mask


def points_to_vectors(points) -> np.ndarray:
    return np.array([as_point(p).to_vector() for p in points])
