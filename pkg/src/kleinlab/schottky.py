"""Schottky groups: circle-paired generators, words, limit-set samples,
orbit clouds and fundamental-domain reduction.

Letters of a word are signed 1-based generator indices: +k is generator k,
-k its inverse.  Generator k maps the exterior of the first circle of pair k
onto the interior of the second; its inverse does the opposite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CirclesOverlap, ReductionDepthExceeded, WordBudgetExceeded
from .moebius import MoebiusMap
from .sphere import INF, SpherePoint, as_point, points_to_vectors

DEFAULT_WORD_CAP = 500_000
PAIRING_TOL = 1e-9


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("circle radius must be positive")

    def contains(self, z, strict: bool = True) -> bool:
        """Open-disk membership; boundary points count as outside."""
        p = as_point(z)
        if p.is_infinity:
            return False
        d = abs(p.value - self.center)
        return d < self.radius if strict else d <= self.radius

    def boundary_points(self, n: int) -> np.ndarray:
        th = 2.0 * np.pi * np.arange(n) / n
        return self.center + self.radius * np.exp(1j * th)


def map_circle(m: MoebiusMap, circle: Circle) -> Circle:
    """Exact image of a circle under a Moebius map whose pole is strictly off
    the circle."""
    m = m._unit_det()
    if m.c == 0:
        alpha = m.a / m.d
        beta = m.b / m.d
        return Circle(alpha * circle.center + beta, abs(alpha) * circle.radius)
    # m(z) = a/c - 1/(c (cz + d)) for det = 1
    c1 = m.c * circle.center + m.d
    r1 = abs(m.c) * circle.radius
    denom = abs(c1) ** 2 - r1**2
    if abs(denom) < 1e-14:
        raise ValueError("pole lies on the circle")
    c2 = np.conj(c1) / denom
    r2 = r1 / abs(denom)
    return Circle(m.a / m.c - c2 / m.c, abs(1.0 / m.c) * r2)


@dataclass(frozen=True)
class GroupWord:
    """A reduced word in the free group: tuple of signed generator indices."""

    letters: tuple[int, ...] = ()

    def __post_init__(self):
        for x, y in zip(self.letters, self.letters[1:]):
            if x == -y:
                raise ValueError(f"word {self.letters} is not reduced")
        if any(x == 0 for x in self.letters):
            raise ValueError("letters are signed 1-based indices; 0 is invalid")

    def __len__(self):
        return len(self.letters)

    def prefix(self, n: int) -> "GroupWord":
        return GroupWord(self.letters[:n])

    def inverse(self) -> "GroupWord":
        return GroupWord(tuple(-x for x in reversed(self.letters)))

    def to_string(self) -> str:
        if not self.letters:
            return "e"
        return ".".join(f"g{x}" if x > 0 else f"g{-x}inv" for x in self.letters)

    @classmethod
    def from_string(cls, s: str) -> "GroupWord":
        if s == "e" or s == "":
            return cls(())
        letters = []
        for tok in s.split("."):
            if tok.endswith("inv"):
                letters.append(-int(tok[1:-3]))
            else:
                letters.append(int(tok[1:]))
        return cls(tuple(letters))


@dataclass(frozen=True)
class LimitSetSample:
    """Depth-d sample of the limit set with word addresses."""

    points: list[SpherePoint]
    addresses: list[GroupWord]
    depth: int
    vectors: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.vectors is None:
            object.__setattr__(self, "vectors", points_to_vectors(self.points))

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class OrbitCloud:
    base: SpherePoint
    points: list[SpherePoint]
    max_word_length: int
    vectors: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.vectors is None:
            object.__setattr__(self, "vectors", points_to_vectors(self.points))

    def __len__(self):
        return len(self.points)


def free_group_word_count(rank: int, max_len: int) -> int:
    n = 1
    for k in range(1, max_len + 1):
        n += 2 * rank * (2 * rank - 1) ** (k - 1)
    return n


class SchottkyGroup:
    """A rank-g Schottky group built from g disjoint circle pairs."""

    def __init__(self, circle_pairs: list[tuple[Circle, Circle]]):
        if len(circle_pairs) < 1:
            raise ValueError("need at least one circle pair")
        self.circle_pairs = [(a, b) for a, b in circle_pairs]
        self.rank = len(circle_pairs)
        self.elementary = self.rank == 1
        self._check_disjoint()
        self.generators = [self._pairing_map(a, b) for a, b in self.circle_pairs]
        self._inverses = [g.inverse() for g in self.generators]
        self._check_pairing()

    # -- construction ----------------------------------------------------

    def _check_disjoint(self):
        circles = self.all_circles()
        for i in range(len(circles)):
            for j in range(i + 1, len(circles)):
                ci, cj = circles[i], circles[j]
                if abs(ci.center - cj.center) <= ci.radius + cj.radius:
                    raise CirclesOverlap(
                        f"circles {i} and {j} intersect or nest "
                        f"(gap {abs(ci.center - cj.center) - ci.radius - cj.radius:.3g})"
                    )

    @staticmethod
    def _pairing_map(a: Circle, b: Circle) -> MoebiusMap:
        # z -> c2 + r1 r2 / (z - c1): exterior of a onto interior of b
        c1, r1 = a.center, a.radius
        c2, r2 = b.center, b.radius
        return MoebiusMap(c2, r1 * r2 - c1 * c2, 1.0, -c1).normalize()

    def _check_pairing(self):
        for k, (a, b) in enumerate(self.circle_pairs):
            g = self.generators[k]
            for z in a.boundary_points(16):
                w = g.apply(z)
                if w.is_infinity or abs(abs(w.value - b.center) - b.radius) > PAIRING_TOL:
                    raise CirclesOverlap(f"generator {k + 1} does not pair its circles")
            img = g.apply(a.center + 2.0 * a.radius)  # a point outside a
            if not b.contains(img):
                raise CirclesOverlap(f"generator {k + 1} maps exterior outside pair circle")

    # -- letters ---------------------------------------------------------

    def all_circles(self) -> list[Circle]:
        out = []
        for a, b in self.circle_pairs:
            out.extend([a, b])
        return out

    def circle_for_letter(self, letter: int) -> Circle:
        """The depth-1 disk that images of letter land in: B_k for +k, A_k for -k."""
        a, b = self.circle_pairs[abs(letter) - 1]
        return b if letter > 0 else a

    def map_for_letter(self, letter: int) -> MoebiusMap:
        return self.generators[letter - 1] if letter > 0 else self._inverses[-letter - 1]

    def letters(self) -> list[int]:
        return [s * k for k in range(1, self.rank + 1) for s in (1, -1)]

    def word_map(self, word: GroupWord) -> MoebiusMap:
        m = MoebiusMap.identity()
        for letter in word.letters:
            m = (m @ self.map_for_letter(letter)).normalize()
        return m

    # -- words -----------------------------------------------------------

    def enumerate_words(
        self, max_len: int, cap: int = DEFAULT_WORD_CAP
    ) -> list[tuple[GroupWord, MoebiusMap]]:
        """All reduced words of length <= max_len with their matrix products."""
        if max_len < 0:
            raise ValueError("max_len must be >= 0")
        total = free_group_word_count(self.rank, max_len)
        if total > cap:
            raise WordBudgetExceeded(f"{total} words exceed cap {cap}")
        out = [(GroupWord(()), MoebiusMap.identity())]
        frontier = out[:]
        for _ in range(max_len):
            nxt = []
            for word, mat in frontier:
                last = word.letters[-1] if word.letters else 0
                for letter in self.letters():
                    if letter == -last:
                        continue
                    nxt.append(
                        (
                            GroupWord(word.letters + (letter,)),
                            (mat @ self.map_for_letter(letter)).normalize(),
                        )
                    )
            out.extend(nxt)
            frontier = nxt
        return out

    def words_of_length(
        self, length: int, cap: int = DEFAULT_WORD_CAP
    ) -> list[tuple[GroupWord, MoebiusMap]]:
        return [(w, m) for w, m in self.enumerate_words(length, cap) if len(w) == length]

    # -- limit set -------------------------------------------------------

    def limit_disks(self, depth: int, cap: int = DEFAULT_WORD_CAP) -> list[tuple[GroupWord, Circle]]:
        """Nested disks of the depth-d level of the limit-set Cantor structure."""
        if depth < 1:
            raise ValueError("depth must be >= 1")
        level = [(GroupWord((s,)), self.circle_for_letter(s)) for s in self.letters()]
        for _ in range(depth - 1):
            if len(level) * (2 * self.rank) > cap:
                raise WordBudgetExceeded("limit disk enumeration exceeds cap")
            nxt = []
            for word, disk in level:
                first = word.letters[0]
                for letter in self.letters():
                    if letter == -first:
                        continue
                    nxt.append(
                        (
                            GroupWord((letter,) + word.letters),
                            map_circle(self.map_for_letter(letter), disk),
                        )
                    )
            level = nxt
        return level

    def max_disk_diameter(self, depth: int) -> float:
        """Largest Euclidean diameter among depth-d limit disks."""
        return max(2.0 * c.radius for _, c in self.limit_disks(depth))

    def depth_for_epsilon(self, eps: float, max_depth: int = 12) -> int:
        """Smallest depth whose disk diameters drop below eps/2."""
        for d in range(1, max_depth + 1):
            if self.max_disk_diameter(d) < 0.5 * eps:
                return d
        return max_depth

    def _seed_points(self) -> list[tuple[SpherePoint, int]]:
        """Generator fixed points with the letter of their home circle."""
        seeds = []
        for k, g in enumerate(self.generators, start=1):
            for fp in g.fixed_points():
                a, b = self.circle_pairs[k - 1]
                if a.contains(fp, strict=False):
                    seeds.append((fp, -k))
                elif b.contains(fp, strict=False):
                    seeds.append((fp, k))
                else:
                    raise ValueError("generator fixed point escapes its circles")
        return seeds

    def sample_limit_set(
        self, depth: int, per_disk: int = 1, cap: int = DEFAULT_WORD_CAP
    ) -> LimitSetSample:
        """Images w(seed) over reduced words of length = depth; the seeds are
        generator fixed points whose home disk keeps the composition nested."""
        if depth < 1:
            raise ValueError("depth must be >= 1")
        seeds = self._seed_points()
        points, addresses = [], []
        for word, mat in self.words_of_length(depth, cap):
            last = word.letters[-1]
            admissible = [s for s, home in seeds if home != -last]
            for sp in admissible[:per_disk]:
                points.append(mat.apply(sp))
                addresses.append(word)
        return LimitSetSample(points=points, addresses=addresses, depth=depth)

    # -- actions ---------------------------------------------------------

    def reduce_to_fundamental_domain(
        self, z, max_steps: int = 200
    ) -> tuple[SpherePoint, GroupWord]:
        """Push z outside all open Schottky disks; returns (point, word) with
        word(point) = z.  Circle boundaries belong to the fundamental domain."""
        p = as_point(z)
        letters = []
        while True:
            moved = False
            for k, (a, b) in enumerate(self.circle_pairs, start=1):
                if b.contains(p):
                    p = self._inverses[k - 1].apply(p)
                    letters.append(k)
                    moved = True
                    break
                if a.contains(p):
                    p = self.generators[k - 1].apply(p)
                    letters.append(-k)
                    moved = True
                    break
            if not moved:
                return p, GroupWord(tuple(letters))
            if len(letters) > max_steps:
                raise ReductionDepthExceeded(f"no exit after {max_steps} reduction steps")

    def orbit_cloud(self, y, max_len: int, cap: int = DEFAULT_WORD_CAP) -> OrbitCloud:
        """Images of y under all reduced words of length <= max_len."""
        base = as_point(y)
        points = [mat.apply(base) for _, mat in self.enumerate_words(max_len, cap)]
        return OrbitCloud(base=base, points=points, max_word_length=max_len)

    # -- serialization ---------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "pairs": [
                [
                    {"cx": a.center.real, "cy": a.center.imag, "r": a.radius},
                    {"cx": b.center.real, "cy": b.center.imag, "r": b.radius},
                ]
                for a, b in self.circle_pairs
            ]
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SchottkyGroup":
        pairs = []
        for a, b in doc["pairs"]:
            pairs.append(
                (
                    Circle(complex(a["cx"], a["cy"]), float(a["r"])),
                    Circle(complex(b["cx"], b["cy"]), float(b["r"])),
                )
            )
        return cls(pairs)

    @classmethod
    def from_json(cls, text: str) -> "SchottkyGroup":
        return cls.from_json_dict(json.loads(text))


def schottky_from_circle_pairs(pairs: list[tuple[Circle, Circle]]) -> SchottkyGroup:
    return SchottkyGroup(pairs)


def standard_rank2_group() -> SchottkyGroup:
    """Four unit circles centered at +-2 and +-2i, paired across the origin."""
    return SchottkyGroup(
        [
            (Circle(2.0 + 0j, 1.0), Circle(-2.0 + 0j, 1.0)),
            (Circle(2j, 1.0), Circle(-2j, 1.0)),
        ]
    )


def standard_rank1_group() -> SchottkyGroup:
    return SchottkyGroup([(Circle(3.0 + 0j, 1.0), Circle(-3.0 + 0j, 1.0))])
