import json

import numpy as np
import pytest
from conftest import SCENARIO_DIR, ego_variant

from slt_planner.cli import main, parse_limits, parse_weights
from slt_planner.scenario import save_scenario


def test_parse_weights():
    w = parse_weights("w1=2,w10=0")
    assert w.w1 == 2.0 and w.w10 == 0.0 and w.w2 == 0.5
    with pytest.raises(ValueError, match="unknown weight"):
        parse_weights("w11=1")
    with pytest.raises(ValueError, match="key=value"):
        parse_weights("w1:2")


def test_parse_limits():
    lim = parse_limits("long_acc_max=1.5,a_cm=3.0")
    assert lim.long_acc == (-3.0, 1.5)
    assert lim.a_cm == 3.0
    with pytest.raises(ValueError, match="unknown limit"):
        parse_limits("warp_factor=9")


def _read_csv(path):
    lines = path.read_text().splitlines()
    cols = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return cols, data


def test_run_left_turn_both_modes(tmp_path, capsys):
    rc = main(["--scenario", str(SCENARIO_DIR / "left_turn.json"),
               "--mode", "both", "--out", str(tmp_path),
               "--dump-slices", "--dump-corridors", "--dump-qp"])
    assert rc == 0
    for mode in ("trap", "cub"):
        cols, data = _read_csv(tmp_path / f"trajectory_{mode}.csv")
        assert cols == ["t", "s", "l", "vs", "vl", "as", "al", "js", "jl"]
        assert len(data) == 701  # 7 s at 100 Hz inclusive
        assert data[0, 0] == 0.0 and data[-1, 0] == 7.0
        assert (tmp_path / f"corridors_{mode}.json").exists()
        assert (tmp_path / f"qp_{mode}.txt").exists()
    assert (tmp_path / "slices.csv").exists()
    report = capsys.readouterr().out.splitlines()
    assert report[0].startswith("mode status objective")
    assert len([ln for ln in report if ln.startswith(("trap ", "cub "))]) == 2
    assert any(ln.startswith("delta ") for ln in report)


def test_csv_derivative_consistency(tmp_path):
    rc = main(["--scenario", str(SCENARIO_DIR / "merging.json"),
               "--mode", "trap", "--out", str(tmp_path)])
    assert rc == 0
    _, data = _read_csv(tmp_path / "trajectory_trap.csv")
    t, s, vs = data[:, 0], data[:, 1], data[:, 3]
    assert np.max(np.abs(np.gradient(s, t) - vs)) <= 1e-2


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["--scenario", str(SCENARIO_DIR / "merging.json"),
                     "--mode", "both", "--out", str(out)]) == 0
    for mode in ("trap", "cub"):
        assert (a / f"trajectory_{mode}.csv").read_bytes() == \
               (b / f"trajectory_{mode}.csv").read_bytes()


def test_custom_rate(tmp_path):
    rc = main(["--scenario", str(SCENARIO_DIR / "left_turn.json"),
               "--mode", "trap", "--out", str(tmp_path), "--rate", "10"])
    assert rc == 0
    _, data = _read_csv(tmp_path / "trajectory_trap.csv")
    assert len(data) == 71


def test_exit_code_infeasible(tmp_path, merging_scenario):
    sc = ego_variant(merging_scenario, vs=10.5, **{"as": 2.0}, vl=2.0, al=1.2)
    path = tmp_path / "extreme.json"
    save_scenario(sc, path)
    rc = main(["--scenario", str(path), "--mode", "cub", "--out", str(tmp_path)])
    assert rc == 2
    assert not (tmp_path / "trajectory_cub.csv").exists()


def test_exit_code_errors(tmp_path, capsys):
    assert main(["--scenario", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"ego": {}}))
    assert main(["--scenario", str(bad), "--out", str(tmp_path)]) == 1
    assert main(["--scenario", str(SCENARIO_DIR / "left_turn.json"),
                 "--out", str(tmp_path), "--rate", "-5"]) == 1
    assert main(["--scenario", str(SCENARIO_DIR / "left_turn.json"),
                 "--out", str(tmp_path), "--weights", "w99=1"]) == 1
    capsys.readouterr()


def test_weight_override_changes_solution(tmp_path):
    base, smooth = tmp_path / "base", tmp_path / "smooth"
    main(["--scenario", str(SCENARIO_DIR / "overtaking.json"),
          "--mode", "cub", "--out", str(base)])
    main(["--scenario", str(SCENARIO_DIR / "overtaking.json"),
          "--mode", "cub", "--out", str(smooth), "--weights", "w3=50"])
    _, a = _read_csv(base / "trajectory_cub.csv")
    _, b = _read_csv(smooth / "trajectory_cub.csv")
    # heavier acceleration weight lowers the peak longitudinal acceleration
    assert np.max(np.abs(b[:, 5])) < np.max(np.abs(a[:, 5]))
