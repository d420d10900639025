"""Trapezoidal-prism corridor construction and the cuboidal baseline.

The sampled per-slice S bounds are merged greedily into regions whose lower
and upper bounds are affine in time (bias + skew * (t - t_beg)); overlong
regions are split into equal sub-intervals below a duration threshold. The
corridor chain follows the reference laterally, cutting a knot wherever the
reference crosses into another slice so every region keeps constant L
bounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .scenario import PlannerConfig, ReferenceTrajectory, Scenario
from .sltgraph import LSlice


class NoCorridorError(RuntimeError):
    """The reference crosses a blocked slice; no corridor chain exists."""


@dataclass(frozen=True)
class ConvexRegion:
    """One trapezoidal-prism safe region over [t_beg, t_end].

    S bounds are lines anchored at t_beg: lower(t) = lbias + lskew*(t-t_beg)
    and likewise for the upper bound; L bounds are constant. ``feasible``
    is cleared by the cuboidal inscription when the box collapses.
    """

    t_beg: float
    t_end: float
    lbias: float
    lskew: float
    ubias: float
    uskew: float
    l_beg: float
    l_end: float
    feasible: bool = True

    def __post_init__(self):
        if not self.t_beg < self.t_end:
            raise ValueError("region time interval is empty")
        if not self.l_beg < self.l_end:
            raise ValueError("region L interval is empty")

    @property
    def h(self) -> float:
        return self.t_end - self.t_beg

    def lower(self, t):
        return self.lbias + self.lskew * (np.asarray(t, dtype=float) - self.t_beg)

    def upper(self, t):
        return self.ubias + self.uskew * (np.asarray(t, dtype=float) - self.t_beg)

    def contains(self, t, s, l, tol: float = 1e-9):
        t = np.asarray(t, dtype=float)
        return (
            (t >= self.t_beg - tol) & (t <= self.t_end + tol)
            & (s >= self.lower(t) - tol) & (s <= self.upper(t) + tol)
            & (l >= self.l_beg - tol) & (l <= self.l_end + tol)
        )


@dataclass(frozen=True)
class CorridorSequence:
    """Time-contiguous chain of regions covering [0, T]."""

    regions: tuple[ConvexRegion, ...]

    def __post_init__(self):
        for a, b in zip(self.regions, self.regions[1:]):
            if abs(a.t_end - b.t_beg) > 1e-9:
                raise ValueError("corridor intervals are not contiguous")

    @property
    def t_end(self) -> float:
        return self.regions[-1].t_end

    def region_at(self, t: float) -> ConvexRegion:
        for r in self.regions:
            if r.t_beg - 1e-9 <= t <= r.t_end + 1e-9:
                return r
        raise KeyError(f"no region covers t={t}")


def single_region_calculate(
    i: int,
    lb_s: np.ndarray,
    ub_s: np.ndarray,
    lb_l: float,
    ub_l: float,
    dt: float,
) -> ConvexRegion:
    """Region seeded from the meta-piece between samples i and i+1."""
    if i + 1 >= len(lb_s):
        raise ValueError("meta-piece index needs sample i+1")
    return ConvexRegion(
        t_beg=i * dt,
        t_end=(i + 1) * dt,
        lbias=float(lb_s[i]),
        lskew=float((lb_s[i + 1] - lb_s[i]) / dt),
        ubias=float(ub_s[i]),
        uskew=float((ub_s[i + 1] - ub_s[i]) / dt),
        l_beg=lb_l,
        l_end=ub_l,
    )


def convexify_2d(
    lb_s: np.ndarray,
    ub_s: np.ndarray,
    lb_l: float,
    ub_l: float,
    nums: int,
    dt: float,
    skew_eps: float = 1e-6,
    split_threshold: float | None = 1.0,
    t_offset: float = 0.0,
) -> list[ConvexRegion]:
    """Greedy merge of consecutive meta-pieces into affine-bound regions.

    A new region opens whenever a meta-piece's lower or upper skew deviates
    from the current region's (first-meta-piece) skew by more than skew_eps;
    the shared sample becomes the region boundary, so each region's lines
    interpolate the sampled bounds exactly. Regions longer than
    split_threshold are then split; pass None to skip splitting.
    """
    if nums < 2:
        raise ValueError("convexify_2d needs at least two samples")
    lb_s = np.asarray(lb_s, dtype=float)
    ub_s = np.asarray(ub_s, dtype=float)
    if np.any(lb_s[:nums] >= ub_s[:nums]):
        raise ValueError("blocked step: lb_s >= ub_s")

    regions: list[ConvexRegion] = []
    cur = single_region_calculate(0, lb_s, ub_s, lb_l, ub_l, dt)
    cur_end = 1
    for i in range(2, nums):
        lskew = (lb_s[i] - lb_s[i - 1]) / dt
        uskew = (ub_s[i] - ub_s[i - 1]) / dt
        if abs(lskew - cur.lskew) > skew_eps or abs(uskew - cur.uskew) > skew_eps:
            regions.append(replace(cur, t_end=(i - 1) * dt))
            cur = single_region_calculate(i - 1, lb_s, ub_s, lb_l, ub_l, dt)
        cur_end = i
    regions.append(replace(cur, t_end=cur_end * dt))

    if t_offset:
        regions = [replace(r, t_beg=r.t_beg + t_offset, t_end=r.t_end + t_offset)
                   for r in regions]
    if split_threshold is not None:
        regions = region_split(regions, split_threshold)
    return regions


def region_split(regions: list[ConvexRegion], threshold: float) -> list[ConvexRegion]:
    """Split regions longer than threshold into equal sub-intervals.

    Sub-region biases are shifted along the parent's bound lines, so the
    union of bound point sets is unchanged.
    """
    if threshold <= 0:
        raise ValueError("split threshold must be positive")
    out: list[ConvexRegion] = []
    for r in regions:
        parts = int(np.ceil(r.h / threshold - 1e-12))
        if parts <= 1:
            out.append(r)
            continue
        sub_h = r.h / parts
        for p in range(parts):
            off = p * sub_h
            out.append(replace(
                r,
                t_beg=r.t_beg + off,
                t_end=r.t_beg + off + sub_h,
                lbias=r.lbias + r.lskew * off,
                ubias=r.ubias + r.uskew * off,
            ))
    return out


def _slice_index_for(slices: list[LSlice], l: float, eps: float = 1e-9) -> int:
    # boundary points resolve upward so a crossing interval lands in the
    # destination slice
    for idx, sl in enumerate(slices[:-1]):
        if l < sl.l_end - eps:
            return idx
    return len(slices) - 1


def generate_3d_regions(
    sc: Scenario,
    slices: list[LSlice],
    ref: ReferenceTrajectory,
    cfg: PlannerConfig | None = None,
) -> CorridorSequence:
    """Corridor chain along the reference (SelectCorridors + re-knotting).

    Each grid interval is assigned the slice containing the reference
    lateral position at its midpoint; maximal runs of a single slice are
    convexified independently, which cuts a knot at every slice switch and
    keeps L bounds constant per region.
    """
    cfg = cfg or PlannerConfig()
    nums = sc.nums
    dt = sc.dt

    mid_l = 0.5 * (ref.l[:-1] + ref.l[1:])
    interval_slice = np.array([_slice_index_for(slices, l) for l in mid_l])

    runs: list[tuple[int, int, int]] = []  # (first interval, last interval, slice)
    start = 0
    for j in range(1, nums - 1):
        if interval_slice[j] != interval_slice[start]:
            runs.append((start, j - 1, int(interval_slice[start])))
            start = j
    runs.append((start, nums - 2, int(interval_slice[start])))

    chain: list[ConvexRegion] = []
    for a, b, sidx in runs:
        sl = slices[sidx]
        if not np.all(sl.feasible[a : b + 2]):
            raise NoCorridorError(
                f"reference crosses blocked slice [{sl.l_beg}, {sl.l_end}] "
                f"between t={a * dt} and t={(b + 1) * dt}"
            )
        chain.extend(convexify_2d(
            sl.lb_s[a : b + 2], sl.ub_s[a : b + 2], sl.l_beg, sl.l_end,
            nums=b + 2 - a, dt=dt,
            skew_eps=cfg.skew_eps, split_threshold=cfg.split_threshold,
            t_offset=a * dt,
        ))

    seq = CorridorSequence(regions=tuple(chain))
    _check_reference_containment(seq, ref)
    return seq


def _check_reference_containment(seq: CorridorSequence, ref: ReferenceTrajectory, tol=1e-6):
    for t, s, l in zip(ref.t, ref.s, ref.l):
        hit = any(bool(r.contains(t, s, l, tol=tol)) for r in seq.regions
                  if r.t_beg - tol <= t <= r.t_end + tol)
        if not hit:
            raise NoCorridorError(f"reference waypoint at t={t} escapes the corridor chain")


def inscribe_cuboids(seq: CorridorSequence) -> CorridorSequence:
    """Axis-aligned boxes inscribed in each trapezoid (cuboidal baseline).

    The box keeps the tightest line value over the interval in each
    direction; a region whose box collapses (lower > upper) is retained but
    marked infeasible so the optimizer can surface the failure.
    """
    out = []
    for r in seq.regions:
        lower = r.lbias + r.h * max(0.0, r.lskew)
        upper = r.ubias + r.h * min(0.0, r.uskew)
        out.append(replace(
            r,
            lbias=lower, lskew=0.0,
            ubias=upper, uskew=0.0,
            feasible=bool(lower <= upper),
        ))
    return CorridorSequence(regions=tuple(out))


def dump_corridors_json(seq: CorridorSequence, path) -> None:
    data = [
        {
            "k": k,
            "T_k": r.t_beg,
            "T_k1": r.t_end,
            "lbias": r.lbias,
            "lskew": r.lskew,
            "ubias": r.ubias,
            "uskew": r.uskew,
            "l_beg": r.l_beg,
            "l_end": r.l_end,
        }
        for k, r in enumerate(seq.regions)
    ]
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
