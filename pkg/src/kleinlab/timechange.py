"""Conformal time change along a path and statistical Brownian certificates.

The central object is sigma(t) = integral of lambda^2 along the path,
computed by the trapezoid rule; its monotone inverse reparametrizes image
paths so that a holomorphic image of Brownian motion is again Brownian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .brownian import PathRecord, run_hit_batch
from .errors import DegenerateProfile, NonFiniteFactor, TooFewSamples
from .sphere import from_vector

SLOPE_TOL = 0.05
KURTOSIS_Z_MAX = 4.0
RECIP_FLOOR = 1e-4


@dataclass(frozen=True)
class TimeChangeProfile:
    """Sampled sigma(t) with the lambda^2 values that produced it."""

    times: np.ndarray
    sigma: np.ndarray
    lambda_sq: np.ndarray

    @property
    def final_sigma(self) -> float:
        return float(self.sigma[-1])

    def inverse(self, s: np.ndarray) -> np.ndarray:
        """Monotone piecewise-linear inverse t(sigma)."""
        ds = np.diff(self.sigma)
        if np.any(ds <= 0):
            raise DegenerateProfile("sigma is not strictly increasing (lambda vanishes)")
        return np.interp(s, self.sigma, self.times)


@dataclass(frozen=True)
class BmTestReport:
    qv_slope: float
    qv_r2: float
    increment_kurtosis_z: float
    increment_independence_corr: float
    n_increments: int
    expected_slope: float
    slope_tol: float
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "qv_slope": self.qv_slope,
            "qv_r2": self.qv_r2,
            "increment_kurtosis_z": self.increment_kurtosis_z,
            "increment_independence_corr": self.increment_independence_corr,
            "n_increments": self.n_increments,
            "expected_slope": self.expected_slope,
            "slope_tol": self.slope_tol,
            "pass": self.passed,
        }


def time_change_profile(path: PathRecord, factor) -> TimeChangeProfile:
    """Evaluate lambda = factor(point) at every stored point and integrate
    lambda^2 by the trapezoid rule."""
    with np.errstate(divide="ignore", invalid="ignore"):
        if path.kind == "plane":
            lam = np.array([float(factor(z)) for z in path.values])
        else:
            lam = np.array([float(factor(from_vector(v))) for v in path.vectors])
        lam_sq = lam**2
    if not np.all(np.isfinite(lam_sq)):
        raise NonFiniteFactor("conformal factor is not finite along the path")
    t = np.asarray(path.times, dtype=float)
    sigma = np.concatenate([[0.0], np.cumsum(0.5 * (lam_sq[:-1] + lam_sq[1:]) * np.diff(t))])
    return TimeChangeProfile(times=t, sigma=sigma, lambda_sq=lam_sq)


def reparametrize(image_values: np.ndarray, profile: TimeChangeProfile, grid_step: float) -> PathRecord:
    """Resample an image path on the sigma-grid s = 0, h, 2h, ...

    Each grid point is anchored to the last stored sample with sigma <= s
    (monotone inverse of sigma restricted to the sample set), so output
    increments are genuine increments of the image process: interpolating
    between samples would deflate their quadratic variation.  Output times
    are the exact sigma-times of the anchored samples.  image_values is
    parallel to profile.times (complex values or (n, 3) sphere vectors).
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    ds = np.diff(profile.sigma)
    if np.any(ds <= 0):
        raise DegenerateProfile("sigma is not strictly increasing (lambda vanishes)")
    s_max = profile.final_sigma
    grid = np.arange(0.0, s_max + 0.5 * grid_step, grid_step)
    grid = grid[grid <= s_max]
    anchors = np.searchsorted(profile.sigma, grid, side="right") - 1
    anchors = np.unique(np.clip(anchors, 0, len(profile.sigma) - 1))
    times = profile.sigma[anchors]
    vals = np.asarray(image_values)
    if vals.ndim == 2:  # sphere vectors
        return PathRecord(times=times, vectors=vals[anchors], stopped_reason="horizon")
    return PathRecord(times=times, values=vals[anchors], stopped_reason="horizon")


def _increments_2d(path: PathRecord) -> np.ndarray:
    """Path increments as rows of 2 real coordinates."""
    if path.kind == "plane":
        dz = np.diff(path.values)
        return np.column_stack([dz.real, dz.imag])
    dv = np.diff(path.vectors, axis=0)
    e1, e2 = _frames(path.vectors[:-1])
    return np.column_stack([np.sum(dv * e1, axis=1), np.sum(dv * e2, axis=1)])


def _frames(p):
    from .brownian import tangent_basis

    return tangent_basis(p)


def _qv_fit(path: PathRecord, block: int) -> tuple[float, float]:
    """Least-squares through-origin fit of cumulative quadratic variation at
    dyadic prefixes; returns (per-unit-time slope, r^2 of the fit)."""
    if len(path) < 2 * block:
        raise TooFewSamples(f"need at least {2 * block} samples")
    inc = _increments_2d(path)
    nb = len(inc) // block
    ends = block * np.arange(1, nb + 1)
    q_block = np.add.reduceat(np.sum(inc**2, axis=1), block * np.arange(nb))[:nb]
    q_cum = np.cumsum(q_block)
    t_cum = path.times[ends] - path.times[0]
    # dyadic prefixes of the block sequence
    picks = []
    m = nb
    while m >= 1:
        picks.append(m - 1)
        m //= 2
    picks = np.array(sorted(set(picks)))
    T, Q = t_cum[picks], q_cum[picks]
    slope = float(np.sum(T * Q) / np.sum(T * T))
    ss_res = float(np.sum((Q - slope * T) ** 2))
    ss_tot = float(np.sum((Q - np.mean(Q)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, r2


def quadratic_variation(path: PathRecord, block: int = 1) -> float:
    """Per-unit-time quadratic-variation slope of a path (2 for planar BM)."""
    slope, _ = _qv_fit(path, block)
    return slope


def bm_stat_test(
    path: PathRecord,
    expected_slope: float = 2.0,
    slope_tol: float = SLOPE_TOL,
    block: int = 16,
    min_samples: int = 10_000,
) -> BmTestReport:
    """Certificate that a path is (time-homogeneous) Brownian motion:
    quadratic-variation slope, excess-kurtosis z-score of normalized
    increments, and lag-1 increment correlation."""
    if len(path) < min_samples:
        raise TooFewSamples(f"need at least {min_samples} samples")
    slope, r2 = _qv_fit(path, block)
    inc = _increments_2d(path)
    dts = np.diff(path.times)
    z = inc / np.sqrt(dts)[:, None]
    flat = z.ravel()
    n = len(flat)
    m2 = np.mean(flat**2)
    m4 = np.mean(flat**4)
    kurt_excess = m4 / m2**2 - 3.0
    kurt_z = float(kurt_excess / math.sqrt(24.0 / n))
    # lag-1 autocorrelation, worst coordinate
    corr = 0.0
    for j in range(2):
        a = z[:-1, j] - z[:, j].mean()
        b = z[1:, j] - z[:, j].mean()
        denom = math.sqrt(float(np.sum(a * a)) * float(np.sum(b * b)))
        if denom > 0:
            corr = max(corr, abs(float(np.sum(a * b)) / denom))
    n_inc = len(inc)
    passed = (
        abs(slope - expected_slope) / expected_slope < slope_tol
        and abs(kurt_z) < KURTOSIS_Z_MAX
        and corr < 4.0 / math.sqrt(n_inc)
    )
    return BmTestReport(
        qv_slope=slope,
        qv_r2=r2,
        increment_kurtosis_z=kurt_z,
        increment_independence_corr=corr,
        n_increments=n_inc,
        expected_slope=expected_slope,
        slope_tol=slope_tol,
        passed=passed,
    )


# -- planar test maps --------------------------------------------------------

TEST_MAPS = {
    "translate": (lambda z: z + 1.0, lambda z: np.ones_like(np.abs(z))),
    "scale2": (lambda z: 2.0 * z, lambda z: 2.0 * np.ones_like(np.abs(z))),
    "square": (lambda z: z**2, lambda z: 2.0 * np.abs(z)),
    "invert": (lambda z: 1.0 / z, lambda z: 1.0 / np.abs(z) ** 2),
}


def apply_planar_map(path: PathRecord, name: str) -> tuple[np.ndarray, TimeChangeProfile]:
    """Image values and time-change profile of a planar path under a named
    holomorphic map; lambda is the map's planar derivative modulus."""
    phi, lam = TEST_MAPS[name]
    with np.errstate(divide="ignore", invalid="ignore"):
        values = phi(path.values)
        lam_vals = lam(path.values)
        lam_sq = np.asarray(lam_vals, dtype=float) ** 2
    if not np.all(np.isfinite(lam_sq)):
        raise NonFiniteFactor(f"map {name} hits a singular point on this path")
    t = np.asarray(path.times, dtype=float)
    sigma = np.concatenate([[0.0], np.cumsum(0.5 * (lam_sq[:-1] + lam_sq[1:]) * np.diff(t))])
    return values, TimeChangeProfile(times=t, sigma=sigma, lambda_sq=lam_sq)


# -- sigma at hitting --------------------------------------------------------


def sigma_at_hit_statistics(
    group,
    start,
    epsilons,
    n_paths: int,
    dt: float,
    horizon: float,
    seed: int,
    depth: int | None = None,
    factor_mode: tuple = ("recip", RECIP_FLOOR),
) -> list[dict]:
    """Median and quartiles of sigma(T_eps) over paths, one row per epsilon.

    All epsilons are evaluated on the same paths with nested stopping, so the
    medians are exactly monotone in the path-inclusion sense.
    """
    eps_sorted = sorted(float(e) for e in epsilons)[::-1]
    if any(e <= 0 for e in eps_sorted):
        raise ValueError("epsilons must be positive")
    d = depth if depth is not None else group.depth_for_epsilon(eps_sorted[-1])
    target = group.sample_limit_set(d)
    from .brownian import circle_cap

    caps = [circle_cap(c) for c in group.all_circles()]
    res = run_hit_batch(
        target,
        start,
        eps_sorted,
        dt,
        horizon,
        seed,
        range(n_paths),
        caps=caps,
        sigma_mode=factor_mode,
    )
    rows = []
    for j, e in enumerate(eps_sorted):
        s = res.sigma_at_hit[j]
        s = s[~np.isnan(s)]
        rows.append(
            {
                "epsilon": e,
                "n_hit": int(len(s)),
                "median_sigma": float(np.median(s)) if len(s) else None,
                "q1_sigma": float(np.percentile(s, 25)) if len(s) else None,
                "q3_sigma": float(np.percentile(s, 75)) if len(s) else None,
                "median_hit_time": float(np.median(res.hit_times(j)[res.hit_step[j] >= 0]))
                if len(s)
                else None,
            }
        )
    return rows
