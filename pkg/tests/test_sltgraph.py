import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slt_planner.scenario import PlannerConfig, generate_reference, scenario_from_dict
from slt_planner.sltgraph import (
    LATERAL_FACES,
    LONGITUDINAL_FACES,
    FaceSelectionError,
    SltObstacle,
    build_slices,
    dump_slices_csv,
    face_selection_check,
    obstacle_from_prediction,
    obstacles_from_scenario,
    over_approximate,
    points_free,
)


def _scenario(obstacles=()):
    return scenario_from_dict({
        "ego": {"s": 0.0, "l": 1.75, "vs": 5.0, "vl": 0.0, "as": 0.0, "al": 0.0},
        "road": {"s_min": 0.0, "s_max": 100.0, "l_min": 0.0, "l_max": 7.0,
                 "speed_limit": 15.0, "curvature": []},
        "obstacles": list(obstacles),
        "horizon": 5.0,
        "dt": 0.1,
        "goal": {"s_min": 20.0, "s_max": 30.0, "l_min": 0.0, "l_max": 3.5},
    })


def _obs(kind, vs=0.0, vl=0.0, s=30.0, l=5.0):
    return {"kind": kind, "length": 4.0, "width": 2.0, "s": s, "l": l, "vs": vs, "vl": vl}


def test_classification_and_margin_inflation():
    sc = _scenario([_obs("longitudinal-and-lateral", vs=3.0, vl=0.5)])
    cfg = PlannerConfig()
    o = obstacle_from_prediction(sc.obstacles[0], sc, cfg)
    assert o.zero_slope_faces == 2
    assert o.s_hi - o.s_lo == pytest.approx(4.0 + cfg.ego_length)
    assert o.l_hi - o.l_lo == pytest.approx(2.0 + 2 * cfg.lateral_margin)


@pytest.mark.parametrize("kind,vs,vl,faces", [
    ("static", 0.0, 0.0, 6),
    ("longitudinal-only", 3.0, 0.0, 4),
    ("longitudinal-only", 0.0, 0.0, 6),   # zero-velocity downgrade
    ("longitudinal-and-lateral", 3.0, 0.5, 2),
    ("longitudinal-and-lateral", 3.0, 0.0, 4),
    ("longitudinal-and-lateral", 0.0, 0.0, 6),
])
def test_zero_slope_face_count(kind, vs, vl, faces):
    sc = _scenario([_obs(kind, vs=vs, vl=vl)])
    o = obstacle_from_prediction(sc.obstacles[0], sc, PlannerConfig())
    assert o.zero_slope_faces == faces


def test_face_selection_check():
    sc = _scenario([_obs("longitudinal-and-lateral", vs=3.0, vl=0.5)])
    o = obstacle_from_prediction(sc.obstacles[0], sc, PlannerConfig())
    assert face_selection_check(o) == LATERAL_FACES
    fast_lat = SltObstacle(s_lo=0, s_hi=1, l_lo=0, l_hi=1, ds=0.5, dl=3.0,
                           zero_slope_faces=2)
    assert face_selection_check(fast_lat) == LONGITUDINAL_FACES
    tie = SltObstacle(s_lo=0, s_hi=1, l_lo=0, l_hi=1, ds=1.0, dl=1.0,
                      zero_slope_faces=2)
    assert face_selection_check(tie) == LONGITUDINAL_FACES
    with pytest.raises(FaceSelectionError):
        face_selection_check(over_approximate(fast_lat, 5.0))


@settings(max_examples=60, deadline=None)
@given(
    dl=st.floats(min_value=-2.0, max_value=2.0),
    t=st.floats(min_value=0.0, max_value=5.0),
    fs=st.floats(min_value=0.0, max_value=1.0),
    fl=st.floats(min_value=0.0, max_value=1.0),
)
def test_over_approximation_is_superset(dl, t, fs, fl):
    o = SltObstacle(s_lo=10.0, s_hi=14.0, l_lo=2.0, l_hi=4.0, ds=3.0, dl=dl,
                    zero_slope_faces=2 if dl != 0.0 else 4)
    over = over_approximate(o, horizon=5.0)
    assert over.dl == 0.0 and over.zero_slope_faces >= 4
    # any point inside the original swept volume stays inside the cover
    s_lo, s_hi = o.s_extent(t)
    l_lo, l_hi = o.l_extent(t)
    s = s_lo + fs * (s_hi - s_lo)
    l = l_lo + fl * (l_hi - l_lo)
    assert bool(over.contains(t, s, l))


def test_slice_partition_covers_road():
    sc = _scenario([
        _obs("static", l=5.0),
        _obs("longitudinal-only", vs=4.0, s=40.0, l=1.75),
    ])
    cfg = PlannerConfig()
    ref = generate_reference(sc, cfg)
    obs = obstacles_from_scenario(sc, cfg)
    slices = build_slices(sc, obs, ref, cfg)
    assert slices[0].l_beg == sc.road.l_min
    assert slices[-1].l_end == sc.road.l_max
    for a, b in zip(slices, slices[1:]):
        assert a.l_end == pytest.approx(b.l_beg)
    # every obstacle L edge inside the road appears as a boundary
    edges = {round(v, 9) for sl in slices for v in (sl.l_beg, sl.l_end)}
    for o in obs:
        for v in (o.l_lo, o.l_hi):
            if sc.road.l_min < v < sc.road.l_max:
                assert round(v, 9) in edges


def test_slices_require_over_approximated_input():
    sc = _scenario([_obs("longitudinal-and-lateral", vs=3.0, vl=0.5)])
    cfg = PlannerConfig()
    raw = obstacle_from_prediction(sc.obstacles[0], sc, cfg)
    ref = generate_reference(sc, cfg)
    with pytest.raises(ValueError, match="over-approximated"):
        build_slices(sc, [raw], ref, cfg)


def test_slice_bounds_bracket_reference_and_exclude_obstacles():
    sc = _scenario([_obs("longitudinal-only", vs=4.0, s=40.0, l=1.75)])
    cfg = PlannerConfig()
    ref = generate_reference(sc, cfg)
    obs = obstacles_from_scenario(sc, cfg)
    slices = build_slices(sc, obs, ref, cfg)
    o = obs[0]
    for sl in slices:
        hit = o.l_lo < sl.l_end and o.l_hi > sl.l_beg
        for i, t in enumerate(sc.time_grid):
            if not sl.feasible[i]:
                assert np.isnan(sl.lb_s[i]) and np.isnan(sl.ub_s[i])
                continue
            assert sl.lb_s[i] <= np.clip(ref.s[i], *sorted((sl.lb_s[i], sl.ub_s[i]))) <= sl.ub_s[i]
            if hit:
                s_lo, s_hi = o.s_extent(t)
                # selected interval never overlaps the obstacle band
                assert sl.ub_s[i] <= s_lo + 1e-9 or sl.lb_s[i] >= s_hi - 1e-9


def test_blocked_step_marked_infeasible():
    # static wall sits on the reference path: its slice is blocked throughout
    sc = _scenario([_obs("static", s=12.5, l=1.75)])
    cfg = PlannerConfig()
    ref = generate_reference(sc, cfg)
    obs = obstacles_from_scenario(sc, cfg)
    slices = build_slices(sc, obs, ref, cfg)
    wall = obs[0]
    blocked_slice = next(sl for sl in slices
                         if sl.l_beg >= wall.l_lo - 1e-9 and sl.l_end <= wall.l_hi + 1e-9)
    i_blocked = int(np.argmin(np.abs(ref.s - 12.5)))
    assert not blocked_slice.feasible[i_blocked]


def test_points_free_vectorized():
    sc = _scenario([_obs("static", s=30.0, l=5.0)])
    obs = obstacles_from_scenario(sc, PlannerConfig())
    t = np.zeros(3)
    free = points_free(obs, sc.road, t, np.array([30.0, 5.0, -1.0]),
                       np.array([5.0, 5.0, 3.0]))
    assert free.tolist() == [False, True, False]


def test_dump_slices_csv(tmp_path):
    sc = _scenario([_obs("static", l=5.0)])
    cfg = PlannerConfig()
    ref = generate_reference(sc, cfg)
    obs = obstacles_from_scenario(sc, cfg)
    slices = build_slices(sc, obs, ref, cfg)
    out = tmp_path / "slices.csv"
    dump_slices_csv(slices, sc.dt, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "slice_id,l_beg,l_end,t,lb_s,ub_s"
    assert len(lines) == 1 + len(slices) * sc.nums
