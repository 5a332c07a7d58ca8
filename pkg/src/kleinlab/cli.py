"""Scenario orchestration: config validation, seeded experiment execution and
deterministic result persistence.

One scenario per invocation; outputs embed a reproducibility block (the fully
materialized config, seed and version) so any result file can be regenerated
exactly.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass

from . import __version__
from .errors import ConfigInvalid, KleinlabError
from .schottky import SchottkyGroup
from .sphere import as_point

SCENARIOS = (
    "levy_check",
    "exit_measure",
    "measure_compare",
    "accumulation",
    "sigma_at_hit",
    "torus_classify",
    "recurrence",
)

DEFAULTS = {
    "n_paths": 1000,
    "dt": 1e-4,
    "epsilon": 1e-2,
    "horizon": 500.0,
    "depth": None,  # auto: smallest depth with disk diameter < epsilon/2
    "delta": 0.05,
    "max_word_length": 8,
    "seed": 0,
    "start": "inf",
    "start2": "0",
    "n_steps": 100_000,
    "map": "square",
    "factor": "recip-dist",
    "epsilons": [1e-1, 3e-2, 1e-2],
    "radius": 0.1,
    "word_ball": 2,
    "horizons": [50.0, 150.0, 500.0],
    "min_bin": 5,
    "t_max": 10_000.0,
    "grid": 16,
    "out": None,
}

# per-scenario overrides; the planar clock test needs a much finer step so
# the path carries enough samples before it leaves the annulus
_SCENARIO_DEFAULTS = {"levy_check": {"dt": 1e-6}}

# keys meaningful per scenario, beyond "scenario" itself
_GROUP_KEYS = {"group", "pairs"}
_SCENARIO_KEYS = {
    "levy_check": {"map", "n_steps", "dt", "seed", "start", "out"},
    "exit_measure": _GROUP_KEYS | {"start", "n_paths", "dt", "epsilon", "horizon", "depth", "seed", "out"},
    "measure_compare": _GROUP_KEYS
    | {"start", "start2", "n_paths", "dt", "epsilon", "horizon", "depth", "seed", "min_bin", "out"},
    "accumulation": _GROUP_KEYS
    | {"start", "n_paths", "dt", "epsilon", "horizon", "depth", "delta", "max_word_length", "seed", "out"},
    "sigma_at_hit": _GROUP_KEYS
    | {"start", "n_paths", "dt", "epsilons", "horizon", "depth", "factor", "seed", "out"},
    "torus_classify": {"direction", "t_max", "grid", "seed", "out"},
    "recurrence": _GROUP_KEYS
    | {"start", "n_paths", "dt", "epsilon", "horizons", "depth", "radius", "word_ball", "seed", "out"},
}
_REQUIRED = {
    "levy_check": set(),
    "exit_measure": set(),
    "measure_compare": set(),
    "accumulation": set(),
    "sigma_at_hit": set(),
    "torus_classify": {"direction"},
    "recurrence": set(),
}


@dataclass
class ScenarioConfig:
    scenario: str
    group: str | None = None
    pairs: list | None = None
    direction: str | None = None
    start: str = "inf"
    start2: str = "0"
    n_paths: int = 1000
    n_steps: int = 100_000
    dt: float = 1e-4
    epsilon: float = 1e-2
    epsilons: list | None = None
    horizon: float = 500.0
    horizons: list | None = None
    depth: int | None = None
    delta: float = 0.05
    max_word_length: int = 8
    radius: float = 0.1
    word_ball: int = 2
    min_bin: int = 5
    map: str = "square"
    factor: str = "recip-dist"
    t_max: float = 10_000.0
    grid: int = 16
    seed: int = 0
    out: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _positive(doc, key, problems, kind=float, strict=True):
    if key not in doc:
        return
    try:
        v = kind(doc[key])
    except (TypeError, ValueError):
        problems.append(f"{key} must be a {kind.__name__}")
        return
    if strict and v <= 0:
        problems.append(f"{key} must be positive")


def validate_config(doc) -> ScenarioConfig:
    """Parse and validate a flat config document; every offending key is
    reported, not just the first.  All defaults are materialized here."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as e:
            raise ConfigInvalid([f"config is not valid JSON: {e}"]) from e
    if not isinstance(doc, dict):
        raise ConfigInvalid(["config must be a JSON object"])
    problems = []
    scenario = doc.get("scenario")
    if scenario is None:
        raise ConfigInvalid(['"scenario" missing'])
    if scenario not in SCENARIOS:
        raise ConfigInvalid([f"unknown scenario {scenario!r}; choose from {SCENARIOS}"])
    allowed = _SCENARIO_KEYS[scenario] | {"scenario"}
    for key in doc:
        if key not in allowed:
            problems.append(f"unknown key {key!r} for scenario {scenario!r}")
    for key in _REQUIRED[scenario]:
        if key not in doc:
            problems.append(f"{key!r} required for scenario {scenario!r}")
    for key in ("dt", "epsilon", "horizon", "delta", "radius", "t_max"):
        _positive(doc, key, problems, float)
    for key in ("n_paths", "n_steps", "max_word_length", "word_ball", "min_bin", "grid"):
        _positive(doc, key, problems, int, strict=key not in ("n_paths", "max_word_length", "word_ball"))
    if "n_paths" in doc and isinstance(doc["n_paths"], int) and doc["n_paths"] < 0:
        problems.append("n_paths must be >= 0")
    if "depth" in doc and doc["depth"] is not None:
        _positive(doc, "depth", problems, int)
    if "epsilons" in doc:
        eps = doc["epsilons"]
        if not isinstance(eps, list) or not eps or any(not isinstance(e, (int, float)) or e <= 0 for e in eps):
            problems.append("epsilons must be a nonempty list of positive numbers")
        elif sorted(eps, reverse=True) != list(eps):
            problems.append("epsilons must be strictly decreasing")
    if "horizons" in doc:
        hs = doc["horizons"]
        if not isinstance(hs, list) or not hs or any(not isinstance(h, (int, float)) or h <= 0 for h in hs):
            problems.append("horizons must be a nonempty list of positive numbers")
    if "map" in doc and doc["map"] not in ("translate", "scale2", "square", "invert"):
        problems.append("map must be one of translate|scale2|square|invert")
    if "factor" in doc:
        f = str(doc["factor"])
        if f not in ("identity", "square", "recip-dist") and not f.startswith("const:"):
            problems.append("factor must be identity|const:<c>|square|recip-dist")
    if doc.get("group") is not None and doc.get("pairs") is not None:
        problems.append("give either group (file path) or pairs (inline), not both")
    if problems:
        raise ConfigInvalid(problems)
    cfg = ScenarioConfig(scenario=scenario)
    overrides = _SCENARIO_DEFAULTS.get(scenario, {})
    for key, default in DEFAULTS.items():
        setattr(cfg, key, doc.get(key, overrides.get(key, default)))
    for key in ("group", "pairs", "direction"):
        setattr(cfg, key, doc.get(key))
    cfg.seed = int(doc.get("seed", 0))
    return cfg


def _load_group(cfg: ScenarioConfig) -> SchottkyGroup:
    if cfg.pairs is not None:
        return SchottkyGroup.from_json_dict({"pairs": cfg.pairs})
    if cfg.group is not None:
        with open(cfg.group) as f:
            return SchottkyGroup.from_json(f.read())
    from .schottky import standard_rank2_group

    return standard_rank2_group()


def _parse_start(s):
    if s == "inf" or s is None:
        return as_point("inf")
    if isinstance(s, (list, tuple)):
        return as_point(complex(s[0], s[1]))
    return as_point(complex(str(s).replace(" ", "")))


def _factor_mode(spec: str):
    if spec == "identity":
        return ("const", 1.0)
    if spec.startswith("const:"):
        return ("const", float(spec.split(":", 1)[1]))
    if spec == "recip-dist":
        from .timechange import RECIP_FLOOR

        return ("recip", RECIP_FLOOR)
    raise ConfigInvalid(
        [f"unknown factor {spec!r} (expected identity, const:<v>, or recip-dist)"]
    )


def run_scenario(cfg: ScenarioConfig, workers: int = 1) -> dict:
    """Execute one scenario and return its (JSON-ready) result document."""
    result = {"scenario": cfg.scenario}
    if cfg.scenario == "torus_classify":
        from .torus import AlgebraicDirection, classify_slope, sample_leaf_closure

        v = AlgebraicDirection.parse(cfg.direction)
        result["direction"] = cfg.direction
        result["type"] = classify_slope(v)
        result["rank"] = v.rational_rank()
        if cfg.t_max and cfg.grid:
            result["occupancy"] = sample_leaf_closure(v, cfg.t_max, cfg.grid)
            result["grid"] = cfg.grid
            result["t_max"] = cfg.t_max
    elif cfg.scenario == "levy_check":
        from .rng import RngStream
        from .timechange import apply_planar_map, bm_stat_test, reparametrize
        from .brownian import planar_bm

        start = complex(1.0, 0.0) if cfg.start == "inf" else _parse_start(cfg.start).value
        rng = RngStream(cfg.seed, 0)
        path = planar_bm(start, cfg.dt, cfg.n_steps, rng,
                         stop_outside=lambda z: (abs(z) <= 0.5) | (abs(z) >= 2.0))
        image, profile = apply_planar_map(path, cfg.map)
        grid_step = 1.5 * float(profile.lambda_sq.max()) * cfg.dt
        repar = reparametrize(image, profile, grid_step)
        result["map"] = cfg.map
        result["n_source_samples"] = len(path)
        result["reparametrized"] = bm_stat_test(repar).to_json_dict()
        raw = type(path)(times=path.times, values=image)
        from .errors import TooFewSamples

        try:
            result["raw_image"] = bm_stat_test(raw).to_json_dict()
        except TooFewSamples:
            result["raw_image"] = None
    elif cfg.scenario == "exit_measure":
        from .measures import estimate_exit_measure

        g = _load_group(cfg)
        m = estimate_exit_measure(
            g, _parse_start(cfg.start), cfg.n_paths, cfg.epsilon, cfg.dt,
            cfg.horizon, cfg.seed, depth=cfg.depth, workers=workers,
        )
        result.update(m.to_json_dict())
    elif cfg.scenario == "measure_compare":
        from .measures import compare_measures, estimate_exit_measure

        g = _load_group(cfg)
        common = dict(n_paths=cfg.n_paths, epsilon=cfg.epsilon, dt=cfg.dt,
                      horizon=cfg.horizon, seed=cfg.seed, depth=cfg.depth, workers=workers)
        m1 = estimate_exit_measure(g, _parse_start(cfg.start), **common)
        m2 = estimate_exit_measure(g, _parse_start(cfg.start2), **common)
        cmp1 = compare_measures(m1, m2, depth=1, min_bin=cfg.min_bin)
        result["comparison"] = cmp1.to_json_dict()
        result["hit_fractions"] = [m1.hit_fraction, m2.hit_fraction]
    elif cfg.scenario == "accumulation":
        from .measures import accumulation_curve, estimate_exit_measure, orbit_covering_radius

        g = _load_group(cfg)
        m = estimate_exit_measure(
            g, _parse_start(cfg.start), cfg.n_paths, cfg.epsilon, cfg.dt,
            cfg.horizon, cfg.seed, depth=cfg.depth, workers=workers,
        )
        sample = g.sample_limit_set(m.depth)
        y = _parse_start(cfg.start)
        result["covering_radius"] = orbit_covering_radius(g, y, sample, cfg.max_word_length)
        result["curve"] = accumulation_curve(g, y, m, cfg.delta, cfg.max_word_length)
        result["delta"] = cfg.delta
        result["n_hit"] = m.n_hit
        result["hit_fraction"] = m.hit_fraction
    elif cfg.scenario == "sigma_at_hit":
        from .timechange import sigma_at_hit_statistics

        g = _load_group(cfg)
        result["table"] = sigma_at_hit_statistics(
            g, _parse_start(cfg.start), cfg.epsilons, cfg.n_paths, cfg.dt,
            cfg.horizon, cfg.seed, depth=cfg.depth, factor_mode=_factor_mode(cfg.factor),
        )
        result["factor"] = cfg.factor
    elif cfg.scenario == "recurrence":
        from .measures import recurrence_stats

        g = _load_group(cfg)
        result.update(
            recurrence_stats(
                g, _parse_start(cfg.start), cfg.radius, cfg.word_ball, cfg.horizons,
                cfg.n_paths, cfg.epsilon, cfg.dt, cfg.seed, depth=cfg.depth,
            )
        )
    else:  # pragma: no cover - validate_config guards this
        raise ConfigInvalid([f"unknown scenario {cfg.scenario!r}"])

    keep = (_SCENARIO_KEYS[cfg.scenario] | {"scenario", "seed"}) - {"out"}
    repro_cfg = {
        k: v
        for k, v in cfg.to_dict().items()
        if k in keep and not (k in ("group", "pairs", "direction") and v is None)
    }
    result["reproducibility"] = {
        "config": repro_cfg,
        "seed": cfg.seed,
        "version": __version__,
    }
    return result


def render_result(result: dict, out_path: str | None) -> str:
    """Deterministic serialization; CSV for accumulation curves, else JSON."""
    if out_path and out_path.endswith(".csv") and "curve" in result:
        lines = ["# " + json.dumps(result["reproducibility"], sort_keys=True), "n,mass"]
        lines += [f"{n},{mass!r}" for n, mass in result["curve"]]
        return "\n".join(lines) + "\n"
    return json.dumps(result, sort_keys=True, indent=2) + "\n"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="simlab", description=__doc__)
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default=None, help="override output path")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args(argv)
    try:
        with open(args.config) as f:
            doc = json.load(f)
        doc["scenario"] = args.scenario
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.out is not None:
            doc["out"] = args.out
        cfg = validate_config(doc)
    except ConfigInvalid as e:
        for p in e.problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        result = run_scenario(cfg, workers=max(1, args.workers))
    except KleinlabError as e:
        print(f"scenario error [{cfg.scenario}]: {e}", file=sys.stderr)
        return 3
    text = render_result(result, cfg.out)
    if cfg.out:
        with open(cfg.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
