"""Empirical harmonic (exit) measures on the limit set, measure comparison,
and the orbit-accumulation experiments.

Bins are reduced-word addresses (canonical, nested, group-equivariant), never
spatial boxes.  Non-hitting paths count toward n_attempted only, so a measure
is always conditional on hitting; the raw hit fraction stays available.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .brownian import BatchResult, PathRecord, circle_cap, run_hit_batch
from .errors import NoSharedBins
from .schottky import GroupWord, OrbitCloud, SchottkyGroup
from .sphere import as_point
from .timechange import TimeChangeProfile


@dataclass
class ExitMeasure:
    """Weighted exit samples on the thickened limit set with word addresses."""

    hit_vectors: np.ndarray  # (n_hit, 3)
    addresses: list[GroupWord]
    hit_times: np.ndarray
    n_attempted: int
    epsilon: float
    dt: float
    horizon: float
    seed: int
    depth: int
    rank: int
    start: str = "inf"
    tree: cKDTree | None = field(default=None, repr=False)

    @property
    def n_hit(self) -> int:
        return len(self.addresses)

    @property
    def hit_fraction(self) -> float:
        return self.n_hit / self.n_attempted if self.n_attempted else 0.0

    def histogram(self, depth: int) -> Counter:
        """Counts of depth-d address prefixes."""
        return Counter(a.prefix(depth).letters for a in self.addresses)

    def merge(self, other: "ExitMeasure") -> "ExitMeasure":
        if (self.epsilon, self.dt, self.horizon, self.depth) != (
            other.epsilon,
            other.dt,
            other.horizon,
            other.depth,
        ):
            raise ValueError("cannot merge measures with different parameters")
        return ExitMeasure(
            hit_vectors=np.vstack([self.hit_vectors, other.hit_vectors]),
            addresses=self.addresses + other.addresses,
            hit_times=np.concatenate([self.hit_times, other.hit_times]),
            n_attempted=self.n_attempted + other.n_attempted,
            epsilon=self.epsilon,
            dt=self.dt,
            horizon=self.horizon,
            seed=self.seed,
            depth=self.depth,
            rank=self.rank,
            start=self.start,
        )

    def to_json_dict(self) -> dict:
        return {
            "parameters": {
                "n_attempted": self.n_attempted,
                "n_hit": self.n_hit,
                "hit_fraction": self.hit_fraction,
                "epsilon": self.epsilon,
                "dt": self.dt,
                "horizon": self.horizon,
                "seed": self.seed,
                "depth": self.depth,
                "rank": self.rank,
                "start": self.start,
            },
            "samples": [
                {
                    "x": float(v[0]),
                    "y": float(v[1]),
                    "z": float(v[2]),
                    "address": a.to_string(),
                }
                for v, a in zip(self.hit_vectors, self.addresses)
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExitMeasure":
        p = doc["parameters"]
        samples = doc["samples"]
        vecs = np.array([[s["x"], s["y"], s["z"]] for s in samples]).reshape(-1, 3)
        return cls(
            hit_vectors=vecs,
            addresses=[GroupWord.from_string(s["address"]) for s in samples],
            hit_times=np.full(len(samples), np.nan),
            n_attempted=p["n_attempted"],
            epsilon=p["epsilon"],
            dt=p["dt"],
            horizon=p["horizon"],
            seed=p["seed"],
            depth=p["depth"],
            rank=p["rank"],
            start=p.get("start", "inf"),
        )


@dataclass(frozen=True)
class MeasureComparison:
    depth: int
    shared_bins: int
    ratio_min: float
    ratio_max: float
    undersampled_bins: int

    def to_json_dict(self) -> dict:
        return {
            "depth": self.depth,
            "shared_bins": self.shared_bins,
            "ratio_min": self.ratio_min,
            "ratio_max": self.ratio_max,
            "undersampled_bins": self.undersampled_bins,
        }


# -- estimation --------------------------------------------------------------


def _measure_chunk(group: SchottkyGroup, start, n_lo: int, n_hi: int, epsilon: float,
                   dt: float, horizon: float, seed: int, depth: int) -> BatchResult:
    target = group.sample_limit_set(depth)
    caps = [circle_cap(c) for c in group.all_circles()]
    return run_hit_batch(
        target, start, [epsilon], dt, horizon, seed, range(n_lo, n_hi), caps=caps
    )


def measure_from_batch(res: BatchResult, depth: int, rank: int, start_label: str) -> ExitMeasure:
    hs = res.hit_step[-1]
    hit = hs >= 0
    return ExitMeasure(
        hit_vectors=res.hit_vec[hit],
        addresses=[a for a, h in zip(res.hit_addr, hit) if h],
        hit_times=hs[hit] * res.dt,
        n_attempted=res.n_paths,
        epsilon=res.epsilons[-1],
        dt=res.dt,
        horizon=res.horizon,
        seed=res.seed,
        depth=depth,
        rank=rank,
        start=start_label,
    )


def estimate_exit_measure(
    group: SchottkyGroup,
    start,
    n_paths: int,
    epsilon: float,
    dt: float,
    horizon: float,
    seed: int,
    depth: int | None = None,
    workers: int = 1,
) -> ExitMeasure:
    """Run n_paths independent hitting simulations and collect the exit law.

    Worker count only partitions path indices; per-path streams make the
    result identical for any partition.
    """
    d = depth if depth is not None else group.depth_for_epsilon(epsilon)
    start_label = "inf" if as_point(start).is_infinity else repr(as_point(start).value)
    if n_paths == 0:
        return ExitMeasure(
            hit_vectors=np.empty((0, 3)),
            addresses=[],
            hit_times=np.empty(0),
            n_attempted=0,
            epsilon=epsilon,
            dt=dt,
            horizon=horizon,
            seed=seed,
            depth=d,
            rank=group.rank,
            start=start_label,
        )
    bounds = np.linspace(0, n_paths, max(1, int(workers)) + 1).astype(int)
    chunks = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    if len(chunks) == 1:
        results = [_measure_chunk(group, start, 0, n_paths, epsilon, dt, horizon, seed, d)]
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            futs = [
                pool.submit(_measure_chunk, group, start, lo, hi, epsilon, dt, horizon, seed, d)
                for lo, hi in chunks
            ]
            results = [f.result() for f in futs]
    parts = [measure_from_batch(r, d, group.rank, start_label) for r in results]
    out = parts[0]
    for p in parts[1:]:
        out = out.merge(p)
    return out


# -- comparison and support ----------------------------------------------------


def compare_measures(
    m1: ExitMeasure, m2: ExitMeasure, depth: int, min_bin: int = 5
) -> MeasureComparison:
    """Ratio range of normalized depth-d histograms over well-populated bins."""
    if m1.epsilon != m2.epsilon:
        raise ValueError("measures were generated at different epsilon")
    h1, h2 = m1.histogram(depth), m2.histogram(depth)
    keys = set(h1) | set(h2)
    shared, under = [], 0
    for k in keys:
        if h1.get(k, 0) >= min_bin and h2.get(k, 0) >= min_bin:
            shared.append(k)
        else:
            under += 1
    if not shared:
        raise NoSharedBins(f"no bin has >= {min_bin} hits in both measures")
    ratios = [
        (h1[k] / m1.n_hit) / (h2[k] / m2.n_hit) for k in shared
    ]
    return MeasureComparison(
        depth=depth,
        shared_bins=len(shared),
        ratio_min=float(min(ratios)),
        ratio_max=float(max(ratios)),
        undersampled_bins=under,
    )


def support_coverage(m: ExitMeasure, depth: int) -> float:
    """Fraction of depth-d reduced-word addresses receiving at least one hit."""
    if depth == 0:
        return 1.0 if m.n_hit > 0 else 0.0
    if depth > m.depth:
        raise ValueError("depth exceeds the sampling depth of the measure")
    n_bins = 2 * m.rank * (2 * m.rank - 1) ** (depth - 1)
    return len(m.histogram(depth)) / n_bins


# -- accumulation --------------------------------------------------------------


def accumulation_mass(m: ExitMeasure, cloud: OrbitCloud, delta: float) -> float:
    """Fraction of exit samples within chordal delta of some cloud point."""
    if m.n_hit == 0 or len(cloud) == 0:
        return 0.0
    tree = cKDTree(cloud.vectors)
    d, _ = tree.query(m.hit_vectors)
    return float(np.mean(d <= delta))


def accumulation_curve(
    group: SchottkyGroup, y, m: ExitMeasure, delta: float, max_len: int
) -> list[tuple[int, float]]:
    """(word length n, accumulation mass of the length-<=n orbit cloud)."""
    words = group.enumerate_words(max_len)
    if m.n_hit == 0:
        return [(n, 0.0) for n in range(max_len + 1)]
    base = as_point(y)
    best = np.full(m.n_hit, np.inf)
    out = []
    by_len: dict[int, list] = {}
    for w, mat in words:
        by_len.setdefault(len(w), []).append(mat.apply(base))
    for n in range(max_len + 1):
        pts = by_len.get(n, [])
        if pts:
            vecs = np.array([p.to_vector() for p in pts])
            d, _ = cKDTree(vecs).query(m.hit_vectors)
            best = np.minimum(best, d)
        out.append((n, float(np.mean(best <= delta))))
    return out


def orbit_covering_radius(
    group: SchottkyGroup, y, sample, max_len: int
) -> list[tuple[int, float]]:
    """Deterministic geometry pre-check: for each word length n, the covering
    radius of the length-<=n orbit of y over the limit-set sample."""
    words = group.enumerate_words(max_len)
    base = as_point(y)
    by_len: dict[int, list] = {}
    for w, mat in words:
        by_len.setdefault(len(w), []).append(mat.apply(base))
    best = np.full(len(sample), np.inf)
    out = []
    for n in range(max_len + 1):
        pts = by_len.get(n, [])
        if pts:
            vecs = np.array([p.to_vector() for p in pts])
            d, _ = cKDTree(vecs).query(sample.vectors)
            best = np.minimum(best, d)
        out.append((n, float(np.max(best))))
    return out


# -- recurrence ---------------------------------------------------------------


def revisit_times(
    path: PathRecord,
    profile: TimeChangeProfile,
    group: SchottkyGroup,
    y,
    radius: float,
    word_ball: int,
) -> list[float]:
    """Sigma-times at which the path enters the orbit of the radius-ball
    around y (words up to word_ball); one time per distinct entry."""
    cloud = group.orbit_cloud(y, word_ball)
    tree = cKDTree(cloud.vectors)
    d, _ = tree.query(path.vectors)
    inside = d <= radius
    entries = np.flatnonzero(inside & ~np.concatenate([[False], inside[:-1]]))
    if inside[0] and (len(entries) == 0 or entries[0] != 0):
        entries = np.concatenate([[0], entries])
    t_events = path.times[entries]
    return list(np.interp(t_events, profile.times, profile.sigma))


def recurrence_stats(
    group: SchottkyGroup,
    y,
    radius: float,
    word_ball: int,
    horizons,
    n_paths: int,
    epsilon: float,
    dt: float,
    seed: int,
    depth: int | None = None,
    start=None,
) -> dict:
    """Median pre-hit revisit counts of the orbit neighborhood of y, one entry
    per horizon; all horizons are prefix evaluations of the same paths."""
    horizons = sorted(float(h) for h in horizons)
    d = depth if depth is not None else group.depth_for_epsilon(epsilon)
    target = group.sample_limit_set(d)
    caps = [circle_cap(c) for c in group.all_circles()]
    cloud = group.orbit_cloud(y, word_ball)
    res = run_hit_batch(
        target,
        start if start is not None else y,
        [epsilon],
        dt,
        horizons[-1],
        seed,
        range(n_paths),
        caps=caps,
        orbit_vectors=cloud.vectors,
        orbit_radius=radius,
    )
    medians, means = [], []
    for h in horizons:
        cutoff = h / dt
        counts = np.array([int(np.sum(v <= cutoff)) for v in res.visit_steps])
        medians.append(float(np.median(counts)))
        means.append(float(np.mean(counts)))
    return {
        "horizons": horizons,
        "median_visits": medians,
        "mean_visits": means,
        "n_paths": n_paths,
        "radius": radius,
        "word_ball": word_ball,
        "hit_fraction": res.hit_fraction(),
    }
