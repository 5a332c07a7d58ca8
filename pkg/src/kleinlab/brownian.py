"""Brownian motion on the round sphere and the plane, with hitting detection.

Sphere paths use the geodesic random walk: an isotropic tangent Gaussian of
covariance dt*I2 followed by the exponential map, so every iterate lies
exactly on the unit sphere.  Hitting is always tested against an
epsilon-thickened finite sample of the target set, every step, even when the
stored trajectory is thinned.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .rng import RngStream, batch_normals
from .schottky import GroupWord, LimitSetSample
from .sphere import SpherePoint, as_point, from_vector

MAX_DT = 1e-2


@dataclass(frozen=True)
class HitInfo:
    time: float
    point: SpherePoint
    address: GroupWord | None


@dataclass
class PathRecord:
    """A time-stamped discrete trajectory, sphere (vectors) or plane (values)."""

    times: np.ndarray
    vectors: np.ndarray | None = None
    values: np.ndarray | None = None
    hit: HitInfo | None = None
    stopped_reason: str = "horizon"
    meta: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return "sphere" if self.vectors is not None else "plane"

    def __len__(self):
        return len(self.times)

    def point(self, i: int) -> SpherePoint:
        if self.vectors is not None:
            return from_vector(self.vectors[i])
        return as_point(self.values[i])


# -- sphere stepping -----------------------------------------------------


def tangent_basis(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal tangent frames at unit vectors p (n, 3)."""
    p = np.atleast_2d(p)
    # axis least aligned with p
    pick = np.argmin(np.abs(p), axis=1)
    a = np.zeros_like(p)
    a[np.arange(len(p)), pick] = 1.0
    e1 = a - (np.sum(a * p, axis=1, keepdims=True)) * p
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(p, e1)
    return e1, e2


def step_sphere_vec(p: np.ndarray, dt: float, g: np.ndarray) -> np.ndarray:
    """One geodesic random-walk step for n lockstep paths; g is (n, 2) normals."""
    e1, e2 = tangent_basis(p)
    w = math.sqrt(dt) * (g[:, :1] * e1 + g[:, 1:] * e2)
    theta = np.linalg.norm(w, axis=1, keepdims=True)
    small = theta[:, 0] < 1e-300
    direction = np.where(small[:, None], e1, w / np.where(small[:, None], 1.0, theta))
    out = np.cos(theta) * p + np.sin(theta) * direction
    out /= np.linalg.norm(out, axis=1, keepdims=True)
    return out


def step_sphere(p, dt: float, rng) -> SpherePoint:
    """Single geodesic random-walk step from a sphere point."""
    if not 0 < dt <= MAX_DT:
        raise ValueError(f"dt must be in (0, {MAX_DT}]")
    v = as_point(p).to_vector()[None, :]
    g = np.asarray(rng.normals(2)).reshape(1, 2)
    return from_vector(step_sphere_vec(v, dt, g)[0])


# -- spherical caps (cheap lower bound on distance to the target) ---------


def circle_cap(circle) -> tuple[np.ndarray, float]:
    """Spherical cap (unit center, angular radius) covering a planar disk's
    stereographic image."""
    from .sphere import complex_to_vectors

    c, r = circle.center, circle.radius
    rim = complex_to_vectors(np.array([c + r, c - r, c + 1j * r]))
    n = np.cross(rim[0] - rim[2], rim[1] - rim[2])
    n /= np.linalg.norm(n)
    h = float(rim[0] @ n)
    inside = complex_to_vectors(np.array([c]))[0]
    if inside @ n < h:
        n, h = -n, -h
    return n, math.acos(max(-1.0, min(1.0, h)))


def cap_distance_lower_bound(p: np.ndarray, caps: list[tuple[np.ndarray, float]]) -> np.ndarray:
    """Chordal distance from points p (n,3) to the nearest cap (0 if inside)."""
    best = np.full(len(p), np.inf)
    for u, alpha in caps:
        ang = np.arccos(np.clip(p @ u, -1.0, 1.0))
        d = 2.0 * np.sin(np.maximum(ang - alpha, 0.0) / 2.0)
        best = np.minimum(best, d)
    return best


# -- batch hitting engine --------------------------------------------------


@dataclass
class BatchResult:
    """Per-path outcome arrays of a lockstep hitting run.

    hit_step[j, i] is the first step index at which path i came within
    epsilons[j] of the target (-1 if never).  Positions, addresses and the
    optional sigma integrals refer to the smallest epsilon.
    """

    path_indices: np.ndarray
    epsilons: list[float]
    dt: float
    horizon: float
    seed: int
    hit_step: np.ndarray
    hit_vec: np.ndarray
    hit_addr: list[GroupWord | None]
    sigma_at_hit: np.ndarray | None = None
    visit_steps: list[np.ndarray] | None = None
    stored_times: np.ndarray | None = None
    stored_vecs: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return len(self.path_indices)

    def hit_times(self, j: int = -1) -> np.ndarray:
        hs = self.hit_step[j]
        return np.where(hs >= 0, hs * self.dt, np.nan)

    def hit_fraction(self, epsilon_index: int = -1, horizon: float | None = None) -> float:
        hs = self.hit_step[epsilon_index]
        cutoff = self.horizon if horizon is None else horizon
        ok = (hs >= 0) & (hs * self.dt <= cutoff)
        return float(np.mean(ok))


def run_hit_batch(
    target: LimitSetSample,
    start,
    epsilons,
    dt: float,
    horizon: float,
    seed: int,
    path_indices,
    caps=None,
    sigma_mode: tuple | None = None,
    orbit_vectors: np.ndarray | None = None,
    orbit_radius: float | None = None,
    store_every: int = 0,
    block: int = 1024,
) -> BatchResult:
    """Run lockstep sphere paths from a common start until each has come
    within the smallest epsilon of the target sample, or the horizon.

    sigma_mode: None, ("const", c) or ("recip", floor) - accumulates the
    conformal time change with lambda = c or 1/max(dist, floor).
    """
    if not 0 < dt <= MAX_DT:
        raise ValueError(f"dt must be in (0, {MAX_DT}]")
    eps = sorted(float(e) for e in epsilons)[::-1]  # decreasing
    eps_min = eps[-1]
    path_indices = np.asarray(list(path_indices), dtype=np.int64)
    n = len(path_indices)
    tree = cKDTree(target.vectors)

    start_vec = as_point(start).to_vector()
    d0, _ = tree.query(start_vec[None, :])
    if d0[0] <= eps_min:
        raise ValueError("start point is within epsilon of the target sample")

    need_dist = sigma_mode is not None and sigma_mode[0] == "recip"
    pos = np.tile(start_vec, (n, 1))
    alive = np.ones(n, dtype=bool)
    hit_step = np.full((len(eps), n), -1, dtype=np.int64)
    hit_vec = np.full((n, 3), np.nan)
    hit_addr: list[GroupWord | None] = [None] * n
    max_steps = int(math.ceil(horizon / dt))

    sigma = lam_prev = None
    sigma_at_hit = None
    if sigma_mode is not None:
        sigma = np.zeros(n)
        sigma_at_hit = np.full((len(eps), n), np.nan)
        lam_prev = _lambda_sq(d0[0] if need_dist else None, sigma_mode) * np.ones(n)

    visits: list[list[int]] | None = None
    in_ball_prev = None
    orbit_tree = None
    if orbit_vectors is not None:
        orbit_tree = cKDTree(orbit_vectors)
        od, _ = orbit_tree.query(pos)
        in_ball_prev = od <= orbit_radius
        visits = [[0] if in_ball_prev[i] else [] for i in range(n)]

    stored_t, stored_v = None, None
    if store_every:
        n_slots = max_steps // store_every + 2
        stored_t = np.zeros(n_slots)
        stored_v = np.full((n_slots, n, 3), np.nan)
        stored_v[0] = pos
        n_stored = 1

    step = 0
    while alive.any() and step < max_steps:
        act = np.flatnonzero(alive)
        # keep the normals buffer near 32 MB regardless of batch width
        nb = min(block, max_steps - step, max(16, 2_000_000 // len(act)))
        normals = batch_normals(seed, path_indices[act], 2 * step, nb)
        # contiguous working copies for the whole block; per-path streams make
        # stepping already-hit rows harmless (their records are frozen)
        P = pos[act].copy()
        live = np.ones(len(act), dtype=bool)
        sig = sigma[act].copy() if sigma is not None else None
        lam_p = lam_prev[act].copy() if lam_prev is not None else None
        for k in range(nb):
            P = step_sphere_vec(P, dt, normals[:, k, :])
            step_now = step + k + 1

            if need_dist:
                dist, idx = tree.query(P)
            else:
                lb = cap_distance_lower_bound(P, caps) if caps else np.zeros(len(P))
                near = lb <= eps[0]
                dist = np.full(len(P), np.inf)
                idx = np.zeros(len(P), dtype=np.int64)
                if near.any():
                    dist[near], idx[near] = tree.query(P[near])

            if sigma_mode is not None:
                lam = _lambda_sq(dist if need_dist else None, sigma_mode)
                if not need_dist:
                    lam = lam * np.ones(len(P))
                sig[live] += 0.5 * (lam_p[live] + lam[live]) * dt
                lam_p[live] = lam[live]

            if orbit_tree is not None:
                od, _ = orbit_tree.query(P)
                in_ball = od <= orbit_radius
                for r in np.flatnonzero(in_ball & live & ~in_ball_prev[act]):
                    visits[act[r]].append(step_now)
                in_ball_prev[act] = np.where(live, in_ball, in_ball_prev[act])

            for j, e in enumerate(eps):
                crossing = np.flatnonzero((dist <= e) & live & (hit_step[j, act] < 0))
                if len(crossing):
                    rows = act[crossing]
                    hit_step[j, rows] = step_now
                    if sigma_at_hit is not None:
                        sigma_at_hit[j, rows] = sig[crossing]
                    if e == eps_min:
                        hit_vec[rows] = P[crossing]
                        for r in crossing:
                            hit_addr[act[r]] = target.addresses[idx[r]]
                        live[crossing] = False

            if store_every and step_now % store_every == 0:
                stored_t[n_stored] = step_now * dt
                stored_v[n_stored] = pos
                stored_v[n_stored, act[live]] = P[live]
                n_stored += 1
            if not live.any():
                break
        pos[act] = P
        alive[act] = live
        if sigma is not None:
            sigma[act] = sig
            lam_prev[act] = lam_p
        step += nb

    if store_every:
        stored_t = stored_t[:n_stored]
        stored_v = stored_v[:n_stored]

    return BatchResult(
        path_indices=path_indices,
        epsilons=eps,
        dt=dt,
        horizon=horizon,
        seed=seed,
        hit_step=hit_step,
        hit_vec=hit_vec,
        hit_addr=hit_addr,
        sigma_at_hit=sigma_at_hit,
        visit_steps=None if visits is None else [np.array(v) for v in visits],
        stored_times=stored_t,
        stored_vecs=stored_v,
    )


def _lambda_sq(dist, sigma_mode):
    kind = sigma_mode[0]
    if kind == "const":
        return float(sigma_mode[1]) ** 2
    if kind == "recip":
        floor = float(sigma_mode[1])
        return 1.0 / np.maximum(dist, floor) ** 2
    raise ValueError(f"unknown sigma mode {kind!r}")


def simulate_until_hit(
    start,
    target: LimitSetSample,
    epsilon: float,
    dt: float,
    horizon: float,
    rng: RngStream,
    thin: int = 1,
    caps=None,
) -> PathRecord:
    """One sphere path stopped on the epsilon-thickened target or the horizon.

    Only every ``thin``-th point is stored; the hit test runs every step.
    """
    res = run_hit_batch(
        target,
        start,
        [epsilon],
        dt,
        horizon,
        rng.seed,
        [rng.path_index],
        caps=caps,
        store_every=thin,
    )
    times = res.stored_times
    vecs = res.stored_vecs[:, 0, :]
    if res.hit_step[0, 0] >= 0:
        t_hit = res.hit_step[0, 0] * dt
        keep = times <= t_hit
        times = np.append(times[keep], t_hit)
        vecs = np.vstack([vecs[keep], res.hit_vec[0]])
        hit = HitInfo(time=t_hit, point=from_vector(res.hit_vec[0]), address=res.hit_addr[0])
        reason = "hit"
    else:
        hit, reason = None, "horizon"
    return PathRecord(
        times=times,
        vectors=vecs,
        hit=hit,
        stopped_reason=reason,
        meta={"seed": rng.seed, "path_index": rng.path_index, "dt": dt, "epsilon": epsilon},
    )


# -- planar Brownian motion ------------------------------------------------


def planar_bm(start: complex, dt: float, n_steps: int, rng: RngStream, stop_outside=None) -> PathRecord:
    """A planar Brownian path of n_steps increments (variance dt per
    coordinate), optionally truncated at the first exit of a region.

    stop_outside: callable complex -> bool, True when the point has left the
    allowed region.
    """
    g = rng.normals(2 * n_steps).reshape(n_steps, 2)
    dz = math.sqrt(dt) * (g[:, 0] + 1j * g[:, 1])
    z = start + np.concatenate([[0.0 + 0j], np.cumsum(dz)])
    times = dt * np.arange(n_steps + 1)
    reason = "horizon"
    if stop_outside is not None:
        out = stop_outside(z)
        idx = np.flatnonzero(out)
        if len(idx):
            z = z[: idx[0] + 1]
            times = times[: idx[0] + 1]
            reason = "left_domain"
    return PathRecord(times=times, values=z, stopped_reason=reason,
                      meta={"seed": rng.seed, "path_index": rng.path_index, "dt": dt})


def simulate_disk_exit(start: complex, dt: float, rng: RngStream, max_halvings: int = 12) -> complex:
    """Planar BM from |start| < 1 until |z| >= 1; exit point projected to the
    unit circle.  dt halves near the boundary to bound the overshoot."""
    out = disk_exit_batch(start, 1, dt, rng.seed, base_index=rng.path_index,
                          max_halvings=max_halvings)
    return out[0]


def disk_exit_batch(
    start: complex,
    n_paths: int,
    dt: float,
    seed: int,
    base_index: int = 0,
    max_halvings: int = 12,
    block: int = 512,
    max_steps: int = 2_000_000,
) -> np.ndarray:
    """Exit points on the unit circle for n_paths planar paths from `start`."""
    if not abs(start) < 1:
        raise ValueError("start must be inside the unit disk")
    path_indices = np.arange(base_index, base_index + n_paths, dtype=np.int64)
    z = np.full(n_paths, complex(start))
    exit_pt = np.full(n_paths, np.nan + 0j)
    alive = np.ones(n_paths, dtype=bool)
    step = 0
    while alive.any() and step < max_steps:
        act = np.flatnonzero(alive)
        nb = min(block, max(16, 2_000_000 // len(act)))
        normals = batch_normals(seed, path_indices[act], 2 * step, nb)
        w = z[act].copy()
        live = np.ones(len(act), dtype=bool)
        for k in range(nb):
            dist = 1.0 - np.abs(w)
            # halve dt until 10*sqrt(dt_eff) <= dist, capped
            with np.errstate(divide="ignore"):
                lev = np.ceil(np.log2(100.0 * dt / np.maximum(dist, 1e-300) ** 2))
            lev = np.clip(lev, 0, max_halvings)
            dt_eff = dt / 2.0**lev
            g = normals[:, k, :]
            w = w + np.sqrt(dt_eff) * (g[:, 0] + 1j * g[:, 1])
            crossed = (np.abs(w) >= 1.0) & live
            if crossed.any():
                done = act[crossed]
                exit_pt[done] = w[crossed] / np.abs(w[crossed])
                alive[done] = False
                live &= ~crossed
                if not live.any():
                    break
        z[act[live]] = w[live]
        step += nb
    if alive.any():
        raise RuntimeError("disk exit did not terminate within the step budget")
    return exit_pt


# -- export ----------------------------------------------------------------


def path_to_csv(path: PathRecord, fileobj) -> None:
    """CSV export in the unit-vector model: t, x, y, z with a metadata header."""
    meta = path.meta
    fileobj.write(
        f"# seed={meta.get('seed')} dt={meta.get('dt')} epsilon={meta.get('epsilon')}\n"
    )
    w = csv.writer(fileobj)
    w.writerow(["t", "x", "y", "z"])
    if path.vectors is not None:
        for t, v in zip(path.times, path.vectors):
            w.writerow([repr(float(t)), repr(float(v[0])), repr(float(v[1])), repr(float(v[2]))])
    else:
        for t, zv in zip(path.times, path.values):
            w.writerow([repr(float(t)), repr(float(zv.real)), repr(float(zv.imag)), ""])


def batch_summary(res: BatchResult, epsilon_index: int = -1) -> dict:
    """JSON-ready summary of a batch of hitting paths."""
    ht = res.hit_times(epsilon_index)
    hits = ht[~np.isnan(ht)]
    return {
        "n_paths": int(res.n_paths),
        "hit_fraction": float(len(hits)) / res.n_paths if res.n_paths else 0.0,
        "mean_hit_time": float(np.mean(hits)) if len(hits) else None,
        "horizon": float(res.horizon),
        "epsilon": float(res.epsilons[epsilon_index]),
        "dt": float(res.dt),
        "seed": int(res.seed),
    }


def batch_summary_json(res: BatchResult, epsilon_index: int = -1) -> str:
    return json.dumps(batch_summary(res, epsilon_index), sort_keys=True)
