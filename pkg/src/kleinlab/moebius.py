"""Moebius transformations of the Riemann sphere as normalized 2x2 matrices."""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .sphere import INF, SpherePoint, as_point

MATRIX_TOL = 1e-10


@dataclass(frozen=True)
class MoebiusMap:
    """z -> (az + b)/(cz + d) with ad - bc = 1 after :meth:`normalize`."""

    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def identity(cls) -> "MoebiusMap":
        return cls(1.0, 0.0, 0.0, 1.0)

    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def normalize(self) -> "MoebiusMap":
        """Scale to det = 1 and fix the sign so the entry of largest modulus
        has nonnegative real part (imaginary part breaks ties)."""
        det = self.det()
        if det == 0:
            raise ValueError("degenerate matrix: zero determinant")
        s = cmath.sqrt(det)
        ent = [self.a / s, self.b / s, self.c / s, self.d / s]
        lead = max(ent, key=abs)
        if lead.real < 0 or (lead.real == 0 and lead.imag < 0):
            ent = [-e for e in ent]
        return MoebiusMap(*ent)

    def compose(self, other: "MoebiusMap") -> "MoebiusMap":
        return MoebiusMap(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        ).normalize()

    def _unit_det(self) -> "MoebiusMap":
        if abs(self.det() - 1.0) < 1e-12:
            return self
        return self.normalize()

    def __matmul__(self, other: "MoebiusMap") -> "MoebiusMap":
        return self.compose(other)

    def inverse(self) -> "MoebiusMap":
        # det-1 inverse: adjugate
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    def apply(self, z) -> SpherePoint:
        """Apply the map; the infinity/pole cases are handled exactly."""
        p = as_point(z)
        if p.is_infinity:
            if self.c == 0:
                return INF
            return SpherePoint(self.a / self.c)
        zc = p.value
        denom = self.c * zc + self.d
        if denom == 0:
            return INF
        return SpherePoint((self.a * zc + self.b) / denom)

    def apply_array(self, z: np.ndarray) -> np.ndarray:
        """Vectorized action on finite complex arrays (poles map to inf)."""
        z = np.asarray(z, dtype=complex)
        denom = self.c * z + self.d
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.a * z + self.b) / denom
        out = np.where(denom == 0, np.inf + 0j, out)
        return out

    def conformal_factor(self, z) -> float:
        """Dilation of the map for the spherical metric.

        For det = 1 this is (1+|z|^2) / (|az+b|^2 + |cz+d|^2), which is finite
        on the whole sphere (no chart switch is ever needed); at infinity the
        exact limit 1/(|a|^2 + |c|^2) is used.
        """
        m = self._unit_det()
        p = as_point(z)
        if p.is_infinity:
            return 1.0 / (abs(m.a) ** 2 + abs(m.c) ** 2)
        zc = p.value
        num = 1.0 + abs(zc) ** 2
        den = abs(m.a * zc + m.b) ** 2 + abs(m.c * zc + m.d) ** 2
        return num / den

    def classify(self, tol: float = MATRIX_TOL) -> str:
        """Trace classification: identity, elliptic, parabolic or loxodromic."""
        m = self._unit_det()
        for sign in (1.0, -1.0):
            if (
                abs(sign * m.a - 1) < tol
                and abs(sign * m.d - 1) < tol
                and abs(m.b) < tol
                and abs(m.c) < tol
            ):
                return "identity"
        t2 = (m.a + m.d) ** 2
        if abs(t2 - 4.0) < tol:
            return "parabolic"
        if abs(t2.imag) < tol and 0.0 <= t2.real < 4.0:
            return "elliptic"
        return "loxodromic"

    def fixed_points(self) -> list[SpherePoint]:
        """Fixed points on the sphere (one or two)."""
        if self.c == 0:
            pts = [INF]
            if self.a != self.d:
                pts.append(SpherePoint(self.b / (self.d - self.a)))
            return pts
        # c z^2 + (d - a) z - b = 0
        disc = cmath.sqrt((self.d - self.a) ** 2 + 4 * self.b * self.c)
        z1 = (self.a - self.d + disc) / (2 * self.c)
        z2 = (self.a - self.d - disc) / (2 * self.c)
        if abs(z1 - z2) < 1e-14:
            return [SpherePoint(z1)]
        return [SpherePoint(z1), SpherePoint(z2)]


def mobius_apply(m: MoebiusMap, z) -> SpherePoint:
    return m.apply(z)


def spherical_conformal_factor(m: MoebiusMap, z) -> float:
    return m.conformal_factor(z)


def classify(m: MoebiusMap) -> str:
    return m.classify()
