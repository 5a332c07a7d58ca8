"""Linear foliations of the 3-torus: exact trichotomy classification and
numerical leaf-closure occupancy.

Direction components are given symbolically as rational multiples of square
roots, (p/q)*sqrt(d); irrationality is a number-theoretic fact that cannot be
read off floating-point input, so the rational rank is computed exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedField

WANDERING = "wandering"
SEMI_WANDERING = "semi_wandering"
DENSE = "dense"

_COMPONENT_RE = re.compile(
    r"^\s*(?P<sign>[+-]?)\s*(?:(?P<num>\d+)(?:/(?P<den>\d+))?\s*\*?\s*)?"
    r"(?:sqrt\(\s*(?P<rad>\d+)\s*\))?\s*$"
)


def _squarefree_split(d: int) -> tuple[int, int]:
    """d = s^2 * f with f square-free; returns (s, f)."""
    if d < 0:
        raise UnsupportedField("negative radicand needs complex arithmetic")
    if d == 0:
        return 0, 1
    s, f = 1, 1
    rest = d
    p = 2
    while p * p <= rest:
        e = 0
        while rest % p == 0:
            rest //= p
            e += 1
        s *= p ** (e // 2)
        if e % 2:
            f *= p
        p += 1
    f *= rest
    return s, f


@dataclass(frozen=True)
class SqrtRational:
    """Canonical (p/q)*sqrt(d): gcd(p, q) = 1, q > 0, d square-free (d = 1
    for rational values, p = 0 and d = 1 for zero)."""

    p: int
    q: int
    d: int

    @classmethod
    def make(cls, p: int, q: int, d: int) -> "SqrtRational":
        if q == 0:
            raise ValueError("zero denominator")
        s, f = _squarefree_split(d)
        p = p * s
        if p == 0 or f == 0:
            return cls(0, 1, 1)
        if q < 0:
            p, q = -p, -q
        g = math.gcd(abs(p), q)
        return cls(p // g, q // g, f)

    @classmethod
    def parse(cls, text: str) -> "SqrtRational":
        m = _COMPONENT_RE.match(text)
        if not m or (m.group("num") is None and m.group("rad") is None):
            raise ValueError(f"cannot parse direction component {text!r}")
        sign = -1 if m.group("sign") == "-" else 1
        num = int(m.group("num")) if m.group("num") else 1
        den = int(m.group("den")) if m.group("den") else 1
        rad = int(m.group("rad")) if m.group("rad") else 1
        return cls.make(sign * num, den, rad)

    @property
    def is_zero(self) -> bool:
        return self.p == 0

    def value(self) -> float:
        return self.p / self.q * math.sqrt(self.d)

    def __str__(self):
        if self.d == 1:
            return f"{self.p}/{self.q}" if self.q != 1 else str(self.p)
        head = "" if (self.p == 1 and self.q == 1) else f"{self.p}/{self.q}*" if self.q != 1 else f"{self.p}*"
        return f"{head}sqrt({self.d})"


@dataclass(frozen=True)
class AlgebraicDirection:
    components: tuple[SqrtRational, SqrtRational, SqrtRational]

    def __post_init__(self):
        if all(c.is_zero for c in self.components):
            raise ValueError("direction must have a nonzero component")

    @classmethod
    def parse(cls, parts) -> "AlgebraicDirection":
        if isinstance(parts, str):
            text = parts.strip()
            if text.startswith("(") and text.endswith(")"):
                text = text[1:-1]
            parts = [s for s in re.split(r"[,;]", text) if s.strip()]
        if len(parts) != 3:
            raise ValueError("a direction needs exactly three components")
        return cls(tuple(SqrtRational.parse(str(s)) for s in parts))

    def numeric(self) -> np.ndarray:
        return np.array([c.value() for c in self.components])

    def rational_rank(self) -> int:
        """Rank over Q of the span of the components.

        Components (p/q)*sqrt(d) with equal square-free d are rationally
        dependent; square roots of distinct square-free integers are linearly
        independent over Q, so the rank is the number of distinct radicands
        among the nonzero components.
        """
        return len({c.d for c in self.components if not c.is_zero})


def classify_slope(v: AlgebraicDirection) -> str:
    """Trichotomy of the linear foliation with direction v: rank 1 gives
    closed circle leaves, rank 2 gives 2-torus leaf closures, rank 3 density."""
    r = v.rational_rank()
    return {1: WANDERING, 2: SEMI_WANDERING, 3: DENSE}[r]


def sample_leaf_closure(v: AlgebraicDirection, t_max: float, grid: int) -> float:
    """Flow t*v mod 1 on [0, t_max] and return the fraction of grid^3 cells
    the trajectory visits."""
    if grid < 8:
        raise ValueError("grid must be >= 8")
    vel = v.numeric()
    speed = float(np.max(np.abs(vel)))
    step = 1.0 / (grid * 4.0) / speed  # several samples per cell crossing
    n = int(t_max / step) + 1
    occupied = np.zeros(grid**3, dtype=bool)
    chunk = 2_000_000
    for lo in range(0, n, chunk):
        t = step * np.arange(lo, min(lo + chunk, n))
        cells = (np.floor((np.outer(t, vel) % 1.0) * grid)).astype(np.int64)
        np.clip(cells, 0, grid - 1, out=cells)
        lin = (cells[:, 0] * grid + cells[:, 1]) * grid + cells[:, 2]
        occupied[np.unique(lin)] = True
    return float(np.count_nonzero(occupied)) / grid**3
