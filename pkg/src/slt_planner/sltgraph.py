"""S-L-T occupancy: obstacle parallelepipeds, over-approximation, and L-slicing.

Obstacles become axis-extent boxes translating at constant velocity. A
parallelepiped is classified by how many of its six faces are parallel to
the time axis (6 static, 4 longitudinal-only motion, 2 both motions). The
2-face kind is over-approximated into a 4-face kind by sweeping its lateral
extent over the horizon, after which the road can be partitioned into L
slices whose S-T cross-sections carry per-step free-space bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .scenario import PlannerConfig, ReferenceTrajectory, RoadSpec, Scenario

LATERAL_FACES = "lateral-faces"
LONGITUDINAL_FACES = "longitudinal-faces"


class FaceSelectionError(ValueError):
    """face_selection_check applied to an obstacle that needs no over-approximation."""


@dataclass(frozen=True)
class SltObstacle:
    """Margin-inflated occupancy box at t = 0 plus its constant velocity."""

    s_lo: float
    s_hi: float
    l_lo: float
    l_hi: float
    ds: float
    dl: float
    zero_slope_faces: int

    def __post_init__(self):
        if not self.s_lo < self.s_hi:
            raise ValueError("obstacle S extent is empty")
        if not self.l_lo < self.l_hi:
            raise ValueError("obstacle L extent is empty")
        if self.zero_slope_faces == 6 and (self.ds != 0.0 or self.dl != 0.0):
            raise ValueError("6-face obstacle must be static")
        if self.zero_slope_faces == 4 and self.dl != 0.0:
            raise ValueError("4-face obstacle must have dl/dt = 0")
        if self.zero_slope_faces not in (2, 4, 6):
            raise ValueError("zero_slope_faces must be 2, 4 or 6")

    def s_extent(self, t):
        t = np.asarray(t, dtype=float)
        return self.s_lo + self.ds * t, self.s_hi + self.ds * t

    def l_extent(self, t):
        t = np.asarray(t, dtype=float)
        return self.l_lo + self.dl * t, self.l_hi + self.dl * t

    def contains(self, t, s, l):
        s_lo, s_hi = self.s_extent(t)
        l_lo, l_hi = self.l_extent(t)
        return (s >= s_lo) & (s <= s_hi) & (l >= l_lo) & (l <= l_hi)


def obstacle_from_prediction(pred, sc: Scenario, cfg: PlannerConfig) -> SltObstacle:
    """Inflate a predicted footprint by the safety margins and classify it.

    S gains half the ego length on both sides; L gains the configured lateral
    margin on both sides.
    """
    s_half = pred.length / 2 + cfg.ego_length / 2
    l_half = pred.width / 2 + cfg.lateral_margin
    faces = {"static": 6, "longitudinal-only": 4, "longitudinal-and-lateral": 2}[pred.kind]
    if faces == 4 and pred.vs == 0.0:
        faces = 6
    if faces == 2 and pred.vl == 0.0:
        faces = 4 if pred.vs != 0.0 else 6
    return SltObstacle(
        s_lo=pred.s - s_half, s_hi=pred.s + s_half,
        l_lo=pred.l - l_half, l_hi=pred.l + l_half,
        ds=pred.vs, dl=pred.vl, zero_slope_faces=faces,
    )


def face_selection_check(o: SltObstacle) -> str:
    """Which face pair to flatten when over-approximating a 2-face obstacle.

    Lateral faces are picked when |dl/dt| < |ds/dt|, which loses the smaller
    swept volume; ties go to the longitudinal faces.
    """
    if o.zero_slope_faces >= 4:
        raise FaceSelectionError("obstacle already has >= 4 zero-slope faces")
    return LATERAL_FACES if abs(o.dl) < abs(o.ds) else LONGITUDINAL_FACES


def over_approximate(o: SltObstacle, horizon: float) -> SltObstacle:
    """Replace a 2-face obstacle with a 4-face superset over [0, horizon].

    The lateral extent is expanded to the full range swept by dl/dt and the
    lateral velocity is zeroed; 4- and 6-face obstacles pass through
    unchanged. Slicing requires time-constant L extents, so the lateral
    faces are always the ones flattened regardless of face_selection_check.
    """
    if o.zero_slope_faces >= 4:
        return o
    sweep = o.dl * horizon
    return replace(
        o,
        l_lo=o.l_lo + min(0.0, sweep),
        l_hi=o.l_hi + max(0.0, sweep),
        dl=0.0,
        zero_slope_faces=4 if o.ds != 0.0 else 6,
    )


def obstacles_from_scenario(sc: Scenario, cfg: PlannerConfig | None = None) -> list[SltObstacle]:
    """Inflated, over-approximated obstacles, dropping ones never on the road."""
    cfg = cfg or PlannerConfig()
    out = []
    for pred in sc.obstacles:
        o = over_approximate(obstacle_from_prediction(pred, sc, cfg), sc.horizon)
        if _ever_on_road(o, sc):
            out.append(o)
    return out


def _ever_on_road(o: SltObstacle, sc: Scenario) -> bool:
    road = sc.road
    if o.l_hi <= road.l_min or o.l_lo >= road.l_max:
        return False
    for t in (0.0, sc.horizon):
        s_lo, s_hi = o.s_extent(t)
        if s_hi > road.s_min and s_lo < road.s_max:
            return True
    return False


def points_free(obstacles, road: RoadSpec, t, s, l) -> np.ndarray:
    """Vectorized free-space test against road bounds and all obstacles."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    l = np.asarray(l, dtype=float)
    free = (s >= road.s_min) & (s <= road.s_max) & (l >= road.l_min) & (l <= road.l_max)
    for o in obstacles:
        free &= ~o.contains(t, s, l)
    return free


def point_free(obstacles, road: RoadSpec, t: float, s: float, l: float) -> bool:
    return bool(points_free(obstacles, road, t, s, l))


@dataclass(frozen=True)
class LSlice:
    """One lateral band of the road with per-step S free-space bounds.

    ``feasible[i]`` is False where no free S interval contains the reference
    at step i; lb_s/ub_s are NaN there.
    """

    l_beg: float
    l_end: float
    lb_s: np.ndarray
    ub_s: np.ndarray
    feasible: np.ndarray

    def __post_init__(self):
        if not self.l_beg < self.l_end:
            raise ValueError("slice L range is empty")


def _slice_boundaries(obstacles, road: RoadSpec, merge_eps: float) -> np.ndarray:
    cuts = [road.l_min, road.l_max]
    for o in obstacles:
        for v in (o.l_lo, o.l_hi):
            if road.l_min < v < road.l_max:
                cuts.append(v)
    cuts = np.sort(np.asarray(cuts, dtype=float))
    merged = [cuts[0]]
    for v in cuts[1:]:
        if v - merged[-1] > merge_eps:
            merged.append(v)
    merged[-1] = road.l_max
    return np.asarray(merged)


def build_slices(
    sc: Scenario,
    obstacles: list[SltObstacle],
    ref: ReferenceTrajectory,
    cfg: PlannerConfig | None = None,
) -> list[LSlice]:
    """Partition [l_min, l_max] at obstacle L boundaries and sample S bounds.

    Within a slice the overlapping obstacle set is constant in L, so each
    time step's free space is a union of S intervals; the one containing the
    reference longitudinal position is kept (homotopy selection). Steps with
    no such interval are marked infeasible for that slice.
    """
    cfg = cfg or PlannerConfig()
    for o in obstacles:
        if o.zero_slope_faces < 4:
            raise ValueError("build_slices requires over-approximated obstacles")
    road = sc.road
    grid = sc.time_grid
    nums = sc.nums
    cuts = _slice_boundaries(obstacles, road, cfg.boundary_merge_eps)

    slices = []
    for l_beg, l_end in zip(cuts[:-1], cuts[1:]):
        overlapping = [o for o in obstacles if o.l_lo < l_end and o.l_hi > l_beg]
        lb = np.full(nums, np.nan)
        ub = np.full(nums, np.nan)
        ok = np.zeros(nums, dtype=bool)
        for i, t in enumerate(grid):
            s_ref = float(np.clip(ref.s[i], road.s_min, road.s_max))
            lo, hi = road.s_min, road.s_max
            blocked = False
            for o in overlapping:
                o_lo, o_hi = o.s_extent(t)
                if o_lo <= s_ref <= o_hi:
                    blocked = True
                    break
                if o_hi < s_ref:
                    lo = max(lo, float(o_hi))
                elif o_lo > s_ref:
                    hi = min(hi, float(o_lo))
            if not blocked and lo < hi:
                lb[i], ub[i], ok[i] = lo, hi, True
        slices.append(LSlice(l_beg=float(l_beg), l_end=float(l_end), lb_s=lb, ub_s=ub, feasible=ok))
    return slices


def dump_slices_csv(slices, dt: float, path) -> None:
    with open(path, "w") as fh:
        fh.write("slice_id,l_beg,l_end,t,lb_s,ub_s\n")
        for sid, sl in enumerate(slices):
            for i, (lo, hi) in enumerate(zip(sl.lb_s, sl.ub_s)):
                fh.write(f"{sid},{sl.l_beg:.9g},{sl.l_end:.9g},{i * dt:.9g},{lo:.9g},{hi:.9g}\n")
