"""Scenario data model, JSON ingestion, and reference trajectory generation.

The scenario file format is a flat JSON object (see ``scenario_from_dict``);
unknown keys are rejected so typos fail loudly. The reference generator uses
deliberately simple piecewise rules: constant longitudinal speed toward the
goal and at most two constant-rate lateral ramps, placed by searching the
sampling grid for the latest (respectively earliest) collision-free start.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

OBSTACLE_KINDS = ("static", "longitudinal-only", "longitudinal-and-lateral")


class ScenarioError(ValueError):
    """Malformed or invariant-violating scenario input."""


class NoReferenceError(RuntimeError):
    """The simple piecewise rule set found no collision-free reference route."""


@dataclass(frozen=True)
class PlannerConfig:
    """Tunables that are not part of the scenario file."""

    ego_length: float = 4.6
    ego_width: float = 1.8
    lateral_margin: float = 0.2
    lat_ramp_rate: float = 1.0  # m/s, reference lane-change rate
    skew_eps: float = 1e-6
    split_threshold: float = 1.0  # s
    boundary_merge_eps: float = 1e-6
    order: int = 5


@dataclass(frozen=True)
class EgoState:
    s0: float
    l0: float
    vs0: float
    vl0: float
    as0: float
    al0: float

    def validate(self, road: "RoadSpec") -> None:
        for name in ("s0", "l0", "vs0", "vl0", "as0", "al0"):
            if not math.isfinite(getattr(self, name)):
                raise ScenarioError(f"ego.{name} is not finite")
        if abs(self.vs0) > 2.0 * road.speed_limit:
            raise ScenarioError("ego.vs0 exceeds twice the road speed limit")


@dataclass(frozen=True)
class ObstaclePrediction:
    kind: str
    length: float
    width: float
    s: float
    l: float
    vs: float = 0.0
    vl: float = 0.0

    def validate(self) -> None:
        if self.kind not in OBSTACLE_KINDS:
            raise ScenarioError(f"obstacle.kind {self.kind!r} unknown")
        if self.length <= 0 or self.width <= 0:
            raise ScenarioError("obstacle footprint dimensions must be positive")
        if self.kind == "static" and (self.vs != 0.0 or self.vl != 0.0):
            raise ScenarioError("static obstacle must have vs = vl = 0")
        if self.kind == "longitudinal-only" and self.vl != 0.0:
            raise ScenarioError("longitudinal-only obstacle must have vl = 0")


@dataclass(frozen=True)
class CurvatureSegment:
    s_from: float
    s_to: float
    kappa: float


@dataclass(frozen=True)
class RoadSpec:
    s_min: float
    s_max: float
    l_min: float
    l_max: float
    speed_limit: float
    curvature: tuple[CurvatureSegment, ...] = ()

    def validate(self) -> None:
        if not self.s_min < self.s_max:
            raise ScenarioError("road.s_min must be below road.s_max")
        if not self.l_min < self.l_max:
            raise ScenarioError("road.l_min must be below road.l_max")
        if self.speed_limit <= 0:
            raise ScenarioError("road.speed_limit must be positive")
        for seg in self.curvature:
            if seg.kappa < 0:
                raise ScenarioError("road curvature kappa must be >= 0")

    def max_kappa(self, s_lo: float, s_hi: float) -> float:
        """Largest curvature over an S interval; 0 where no segment applies."""
        kappa = 0.0
        for seg in self.curvature:
            if seg.s_from < s_hi and seg.s_to > s_lo:
                kappa = max(kappa, seg.kappa)
        return kappa


@dataclass(frozen=True)
class GoalRegion:
    s_min: float
    s_max: float
    l_min: float
    l_max: float

    def validate(self) -> None:
        if not (self.s_min <= self.s_max and self.l_min <= self.l_max):
            raise ScenarioError("goal region bounds are inverted")


@dataclass(frozen=True)
class Scenario:
    ego: EgoState
    road: RoadSpec
    obstacles: tuple[ObstaclePrediction, ...]
    horizon: float
    dt: float
    goal: GoalRegion

    def validate(self) -> None:
        if self.horizon <= 0:
            raise ScenarioError("horizon must be positive")
        if self.dt <= 0:
            raise ScenarioError("dt must be positive")
        ratio = self.horizon / self.dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ScenarioError("horizon must be a positive integer multiple of dt")
        self.road.validate()
        self.ego.validate(self.road)
        self.goal.validate()
        for obs in self.obstacles:
            obs.validate()

    @property
    def nums(self) -> int:
        return int(round(self.horizon / self.dt)) + 1

    @property
    def time_grid(self) -> np.ndarray:
        return np.arange(self.nums) * self.dt


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Grid-aligned reference waypoints with per-sample reference speeds."""

    t: np.ndarray
    s: np.ndarray
    l: np.ndarray
    vs: np.ndarray
    vl: np.ndarray

    def pos(self, tq) -> tuple[np.ndarray, np.ndarray]:
        return np.interp(tq, self.t, self.s), np.interp(tq, self.t, self.l)


def _require_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"unknown keys in {where}: {sorted(unknown)}")


def scenario_from_dict(data: dict) -> Scenario:
    _require_keys(data, {"ego", "road", "obstacles", "horizon", "dt", "goal"}, "scenario")
    try:
        ego_d = data["ego"]
        road_d = data["road"]
        goal_d = data["goal"]
    except KeyError as exc:
        raise ScenarioError(f"missing scenario key: {exc.args[0]}") from exc

    _require_keys(ego_d, {"s", "l", "vs", "vl", "as", "al"}, "ego")
    ego = EgoState(
        s0=float(ego_d["s"]), l0=float(ego_d["l"]),
        vs0=float(ego_d["vs"]), vl0=float(ego_d["vl"]),
        as0=float(ego_d["as"]), al0=float(ego_d["al"]),
    )

    _require_keys(road_d, {"s_min", "s_max", "l_min", "l_max", "speed_limit", "curvature"}, "road")
    segs = []
    for seg in road_d.get("curvature", []):
        _require_keys(seg, {"s_from", "s_to", "kappa"}, "road.curvature[]")
        segs.append(CurvatureSegment(float(seg["s_from"]), float(seg["s_to"]), float(seg["kappa"])))
    road = RoadSpec(
        s_min=float(road_d["s_min"]), s_max=float(road_d["s_max"]),
        l_min=float(road_d["l_min"]), l_max=float(road_d["l_max"]),
        speed_limit=float(road_d["speed_limit"]), curvature=tuple(segs),
    )

    obstacles = []
    for i, obs in enumerate(data.get("obstacles", [])):
        _require_keys(obs, {"kind", "length", "width", "s", "l", "vs", "vl"}, f"obstacles[{i}]")
        obstacles.append(ObstaclePrediction(
            kind=str(obs["kind"]), length=float(obs["length"]), width=float(obs["width"]),
            s=float(obs["s"]), l=float(obs["l"]),
            vs=float(obs.get("vs", 0.0)), vl=float(obs.get("vl", 0.0)),
        ))

    _require_keys(goal_d, {"s_min", "s_max", "l_min", "l_max"}, "goal")
    goal = GoalRegion(
        s_min=float(goal_d["s_min"]), s_max=float(goal_d["s_max"]),
        l_min=float(goal_d["l_min"]), l_max=float(goal_d["l_max"]),
    )

    sc = Scenario(
        ego=ego, road=road, obstacles=tuple(obstacles),
        horizon=float(data["horizon"]), dt=float(data["dt"]), goal=goal,
    )
    sc.validate()
    return sc


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "ego": {"s": sc.ego.s0, "l": sc.ego.l0, "vs": sc.ego.vs0,
                "vl": sc.ego.vl0, "as": sc.ego.as0, "al": sc.ego.al0},
        "road": {
            "s_min": sc.road.s_min, "s_max": sc.road.s_max,
            "l_min": sc.road.l_min, "l_max": sc.road.l_max,
            "speed_limit": sc.road.speed_limit,
            "curvature": [{"s_from": c.s_from, "s_to": c.s_to, "kappa": c.kappa}
                          for c in sc.road.curvature],
        },
        "obstacles": [{"kind": o.kind, "length": o.length, "width": o.width,
                       "s": o.s, "l": o.l, "vs": o.vs, "vl": o.vl}
                      for o in sc.obstacles],
        "horizon": sc.horizon,
        "dt": sc.dt,
        "goal": {"s_min": sc.goal.s_min, "s_max": sc.goal.s_max,
                 "l_min": sc.goal.l_min, "l_max": sc.goal.l_max},
    }


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"cannot parse scenario file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must contain a JSON object")
    return scenario_from_dict(data)


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=2)
        fh.write("\n")


# --- reference generation -------------------------------------------------

def _ramp_profile(grid, l0, l1, t_start, rate):
    """Constant-rate lateral ramp from l0 to l1 starting at t_start."""
    duration = abs(l1 - l0) / rate if rate > 0 else 0.0
    frac = np.clip((grid - t_start) / duration, 0.0, 1.0) if duration > 0 else np.ones_like(grid)
    return l0 + (l1 - l0) * frac, duration


def _waypoints_free(free_fn, grid, s, l) -> bool:
    return bool(np.all(free_fn(grid, s, l)))


def generate_reference(sc: Scenario, cfg: PlannerConfig | None = None) -> ReferenceTrajectory:
    """Piecewise reference route from the ego start to the goal region.

    Longitudinal motion is constant speed toward the goal center. Lateral
    motion is one constant-rate ramp per required lane change: a direct ramp
    to the goal lateral (started at the latest collision-free grid time), or
    an out-and-back bypass when the goal lane is blocked by slower traffic.
    Collision checks run against the over-approximated S-L-T occupancy, so
    every waypoint is valid input for corridor homotopy selection.
    """
    cfg = cfg or PlannerConfig()
    sc.validate()
    from .sltgraph import obstacles_from_scenario, points_free

    slt_obs = obstacles_from_scenario(sc, cfg)

    def free(t, s, l):
        return points_free(slt_obs, sc.road, t, s, l)

    grid = sc.time_grid
    T = sc.horizon
    s_goal = float(np.clip(0.5 * (sc.goal.s_min + sc.goal.s_max), sc.road.s_min, sc.road.s_max))
    l_goal = float(np.clip(0.5 * (sc.goal.l_min + sc.goal.l_max), sc.road.l_min, sc.road.l_max))
    v_ref = float(np.clip((s_goal - sc.ego.s0) / T, -sc.road.speed_limit, sc.road.speed_limit))
    s = sc.ego.s0 + v_ref * grid

    # Direct route: flat lateral, or single ramp placed as late as safely possible.
    if abs(l_goal - sc.ego.l0) < 1e-9:
        l = np.full_like(grid, sc.ego.l0)
        if _waypoints_free(free, grid, s, l):
            return _finalize(sc, grid, s, l, v_ref)
    else:
        duration = abs(l_goal - sc.ego.l0) / cfg.lat_ramp_rate
        latest = T - duration
        for k in range(int(np.floor(latest / sc.dt)), -1, -1):
            l, _ = _ramp_profile(grid, sc.ego.l0, l_goal, k * sc.dt, cfg.lat_ramp_rate)
            if _waypoints_free(free, grid, s, l):
                return _finalize(sc, grid, s, l, v_ref)
        raise NoReferenceError("no collision-free lane-change reference found")

    # Straight route blocked with the goal in the start lane: try an
    # out-and-back bypass around the blocking traffic.
    ref = _bypass_reference(sc, cfg, free, grid, s, v_ref, l_goal)
    if ref is not None:
        return ref
    raise NoReferenceError("straight reference blocked and no bypass found")


def _bypass_reference(sc, cfg, free, grid, s, v_ref, l_goal):
    l0 = sc.ego.l0
    blockers = [o for o in sc.obstacles
                if o.l - o.width / 2 <= l0 <= o.l + o.width / 2]
    if not blockers:
        return None
    lat_hi = max(o.l + o.width / 2 + cfg.ego_width / 2 + cfg.lateral_margin for o in blockers)
    lat_lo = min(o.l - o.width / 2 - cfg.ego_width / 2 - cfg.lateral_margin for o in blockers)
    candidates = []
    if lat_hi + cfg.ego_width / 2 < sc.road.l_max:
        candidates.append(0.5 * (lat_hi + sc.road.l_max))
    if lat_lo - cfg.ego_width / 2 > sc.road.l_min:
        candidates.append(0.5 * (lat_lo + sc.road.l_min))

    T, dt = sc.horizon, sc.dt
    for l_by in candidates:
        duration = abs(l_by - l0) / cfg.lat_ramp_rate
        max_out = int(np.floor((T - duration) / dt))
        for k_out in range(max_out, -1, -1):
            t_out = k_out * dt
            l_out, _ = _ramp_profile(grid, l0, l_by, t_out, cfg.lat_ramp_rate)
            earliest_back = int(np.ceil((t_out + duration) / dt))
            # the return ramp may run past the horizon (clipped), which keeps
            # slow overtakes viable as a pull-out-and-pass-alongside prefix
            latest_back = sc.nums - 2
            for k_back in range(earliest_back, latest_back + 1):
                t_back = k_back * dt
                l_back, _ = _ramp_profile(grid, l_by, l_goal, t_back, cfg.lat_ramp_rate)
                l = np.where(grid < t_back, l_out, l_back)
                if _waypoints_free(free, grid, s, l):
                    return _finalize(sc, grid, s, l, v_ref)
    return None


def _finalize(sc, grid, s, l, v_ref) -> ReferenceTrajectory:
    vs = np.full_like(grid, v_ref)
    vl = np.gradient(l, sc.dt)
    return ReferenceTrajectory(t=grid, s=np.asarray(s, float), l=np.asarray(l, float),
                               vs=vs, vl=vl)
