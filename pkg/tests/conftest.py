import copy
from pathlib import Path

import numpy as np
import pytest

import slt_planner
from slt_planner import load_scenario
from slt_planner.scenario import scenario_from_dict, scenario_to_dict

SCENARIO_DIR = Path(slt_planner.__file__).parent / "scenarios"

LANE_W = 3.5


@pytest.fixture(scope="session")
def merging_scenario():
    return load_scenario(SCENARIO_DIR / "merging.json")


@pytest.fixture(scope="session")
def overtaking_scenario():
    return load_scenario(SCENARIO_DIR / "overtaking.json")


@pytest.fixture(scope="session")
def left_turn_scenario():
    return load_scenario(SCENARIO_DIR / "left_turn.json")


def ego_variant(sc, **ego_overrides):
    """Copy of a scenario with some ego fields replaced."""
    d = copy.deepcopy(scenario_to_dict(sc))
    d["ego"].update(ego_overrides)
    return scenario_from_dict(d)


def random_scenario(rng):
    """Random multi-lane scenario; feasible for most draws, never invalid."""
    nlanes = int(rng.integers(2, 4))
    horizon, dt = 5.0, 0.1
    ego_lane = int(rng.integers(nlanes))
    goal_lane = int(rng.integers(nlanes))
    vs0 = float(rng.uniform(3.0, 9.0))
    v_goal = float(rng.uniform(0.7, 1.1)) * vs0

    obstacles = []
    for _ in range(int(rng.integers(0, 3))):
        kind = ["static", "longitudinal-only", "longitudinal-and-lateral"][int(rng.integers(3))]
        lane = int(rng.integers(nlanes))
        l_c = (lane + 0.5) * LANE_W
        if kind == "static":
            if lane in (ego_lane, goal_lane):
                continue  # keep a clear route so most draws are feasible
            obstacles.append({"kind": kind, "length": 5.0, "width": 2.0,
                              "s": float(rng.uniform(20.0, 60.0)), "l": l_c,
                              "vs": 0.0, "vl": 0.0})
        elif kind == "longitudinal-only":
            obstacles.append({"kind": kind, "length": 4.6, "width": 1.8,
                              "s": float(rng.uniform(15.0, 40.0)), "l": l_c,
                              "vs": float(rng.uniform(vs0 + 0.5, vs0 + 4.0)), "vl": 0.0})
        else:
            obstacles.append({"kind": kind, "length": 4.6, "width": 1.8,
                              "s": float(rng.uniform(20.0, 50.0)), "l": l_c,
                              "vs": float(rng.uniform(vs0 + 1.0, vs0 + 5.0)),
                              "vl": float(rng.uniform(-0.5, 0.5))})

    return scenario_from_dict({
        "ego": {"s": 0.0, "l": (ego_lane + 0.5) * LANE_W,
                "vs": vs0, "vl": 0.0, "as": 0.0, "al": 0.0},
        "road": {"s_min": 0.0, "s_max": 200.0, "l_min": 0.0,
                 "l_max": nlanes * LANE_W, "speed_limit": 15.0, "curvature": []},
        "obstacles": obstacles,
        "horizon": horizon,
        "dt": dt,
        "goal": {"s_min": v_goal * horizon - 3.0, "s_max": v_goal * horizon + 3.0,
                 "l_min": goal_lane * LANE_W, "l_max": (goal_lane + 1) * LANE_W},
    })


def random_bound_profile(rng, nums, dt):
    """Piecewise-linear lb/ub profiles whose sampled slopes change by clearly
    more than the merge tolerance at a few random break indices."""
    def profile(base):
        slopes = np.zeros(nums - 1)
        slope = 0.0
        for i in range(nums - 1):
            if i == 0 or rng.uniform() < 0.15:
                slope = float(rng.choice([-2.0, -0.5, 0.0, 0.5, 2.0, 4.0]))
            slopes[i] = slope
        return base + np.concatenate(([0.0], np.cumsum(slopes) * dt))

    lb = profile(0.0)
    ub = profile(0.0)
    ub += np.max(lb - ub) + float(rng.uniform(0.5, 3.0))
    return lb, ub


def brute_force_convexify(lb, ub, dt, eps, threshold):
    """Reference segmenter: split where sampled slopes leave the first
    meta-piece's slope by more than eps, then split long regions equally.
    Returns (t_beg, t_end, lbias, lskew, ubias, uskew) tuples."""
    nums = len(lb)
    sl = np.diff(lb) / dt
    su = np.diff(ub) / dt
    bounds = [0]
    anchor = 0
    for i in range(1, nums - 1):
        if abs(sl[i] - sl[anchor]) > eps or abs(su[i] - su[anchor]) > eps:
            bounds.append(i)
            anchor = i
    bounds.append(nums - 1)

    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        h = (b - a) * dt
        parts = max(1, int(np.ceil(h / threshold - 1e-12)))
        sub = h / parts
        for p in range(parts):
            t0 = a * dt + p * sub
            out.append((
                t0, t0 + sub,
                lb[a] + sl[a] * p * sub, sl[a],
                ub[a] + su[a] * p * sub, su[a],
            ))
    return out


def dense_corridor_violation(trajectory, seq, npoints=10_000):
    """Worst corridor-bound violation over a dense time sampling, in meters."""
    ts = np.linspace(trajectory.t_start, trajectory.t_end, npoints)
    s, l = trajectory.eval(ts)
    idx = trajectory.piece_index(ts)
    worst = 0.0
    for k, r in enumerate(seq.regions):
        m = idx == k
        if not np.any(m):
            continue
        worst = max(
            worst,
            float(np.max(r.lower(ts[m]) - s[m])),
            float(np.max(s[m] - r.upper(ts[m]))),
            float(np.max(r.l_beg - l[m])),
            float(np.max(l[m] - r.l_end)),
        )
    return worst
