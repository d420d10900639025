"""Command-line front end: run the planner and export trajectories/reports.

Exit codes: 0 all requested modes optimal, 2 at least one infeasible,
1 on errors (bad input, solver limit, unexpected failure).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .corridor import dump_corridors_json
from .pipeline import plan
from .qpopt import PhysicalLimits, Weights, dump_qp_text
from .scenario import PlannerConfig, ScenarioError, load_scenario
from .sltgraph import dump_slices_csv

CSV_HEADER = "t,s,l,vs,vl,as,al,js,jl"

_LIMIT_KEYS = {
    "long_vel_min": ("long_vel", 0), "long_vel_max": ("long_vel", 1),
    "long_acc_min": ("long_acc", 0), "long_acc_max": ("long_acc", 1),
    "long_jerk_min": ("long_jerk", 0), "long_jerk_max": ("long_jerk", 1),
    "lat_vel_min": ("lat_vel", 0), "lat_vel_max": ("lat_vel", 1),
    "lat_acc_min": ("lat_acc", 0), "lat_acc_max": ("lat_acc", 1),
    "lat_jerk_min": ("lat_jerk", 0), "lat_jerk_max": ("lat_jerk", 1),
    "a_cm": ("a_cm", None),
}


def _parse_kv(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for item in filter(None, text.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {item!r}")
        out[key.strip()] = float(val)
    return out


def parse_weights(text: str | None) -> Weights:
    w = Weights()
    if not text:
        return w
    overrides = _parse_kv(text)
    valid = {f.name for f in dataclasses.fields(Weights)}
    unknown = set(overrides) - valid
    if unknown:
        raise ValueError(f"unknown weight keys: {sorted(unknown)}")
    return dataclasses.replace(w, **overrides)


def parse_limits(text: str | None) -> PhysicalLimits:
    lim = PhysicalLimits()
    if not text:
        return lim
    for key, val in _parse_kv(text).items():
        if key not in _LIMIT_KEYS:
            raise ValueError(f"unknown limit key: {key}")
        field, side = _LIMIT_KEYS[key]
        if side is None:
            lim = dataclasses.replace(lim, **{field: val})
        else:
            pair = list(getattr(lim, field))
            pair[side] = val
            lim = dataclasses.replace(lim, **{field: tuple(pair)})
    return lim


def export_csv(trajectory, horizon: float, rate: float, path: Path) -> None:
    nsteps = int(round(horizon * rate))
    times = np.arange(nsteps + 1) / rate
    cols = trajectory.sample(times)
    keys = CSV_HEADER.split(",")
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for i in range(len(times)):
            fh.write(",".join(f"{float(cols[k][i]):.9g}" for k in keys) + "\n")


@dataclasses.dataclass
class ModeReport:
    mode: str
    status: str
    objective: float | None = None
    solve_time_ms: float = 0.0
    regions: int = 0
    max_as: float | None = None
    max_al: float | None = None
    max_v: float | None = None
    message: str = ""


def _mode_report(mode: str, result, art, horizon: float, rate: float) -> ModeReport:
    rep = ModeReport(mode=mode, status=result.status,
                     solve_time_ms=result.solve_time_ms, message=result.message)
    if art.corridors is not None:
        rep.regions = len(art.corridors.regions)
    if result.status == "optimal":
        nsteps = int(round(horizon * rate))
        cols = result.trajectory.sample(np.arange(nsteps + 1) / rate)
        rep.objective = result.objective
        rep.max_as = float(np.max(np.abs(cols["as"])))
        rep.max_al = float(np.max(np.abs(cols["al"])))
        rep.max_v = float(np.max(np.hypot(cols["vs"], cols["vl"])))
    return rep


def _print_report(reports: list[ModeReport], out=None) -> None:
    out = out if out is not None else sys.stdout

    def fmt(v):
        return "-" if v is None else f"{v:.9g}"

    out.write("mode status objective solve_ms regions max_abs_as max_abs_al max_v\n")
    for r in reports:
        out.write(" ".join([
            r.mode, r.status, fmt(r.objective), f"{r.solve_time_ms:.3g}",
            str(r.regions), fmt(r.max_as), fmt(r.max_al), fmt(r.max_v),
        ]) + "\n")
        if r.message:
            out.write(f"# {r.mode}: {r.message}\n")
    if len(reports) == 2 and all(r.status == "optimal" for r in reports):
        a, b = reports
        out.write(
            f"delta {a.mode}-{b.mode} "
            f"objective={a.objective - b.objective:.9g} "
            f"max_abs_as={a.max_as - b.max_as:.9g} "
            f"max_abs_al={a.max_al - b.max_al:.9g}\n"
        )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="slt-planner",
        description="Corridor-constrained piecewise Bezier trajectory planner",
    )
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--mode", choices=["trap", "cub", "both"], default="trap",
                   help="corridor mode: trapezoidal, cuboidal, or both")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--rate", type=float, default=100.0, help="export sample rate (Hz)")
    p.add_argument("--dump-slices", action="store_true", help="write slices.csv")
    p.add_argument("--dump-corridors", action="store_true",
                   help="write corridors_<mode>.json")
    p.add_argument("--dump-qp", action="store_true", help="write qp_<mode>.txt")
    p.add_argument("--weights", default=None, metavar="k=v,...",
                   help="override objective weights w1..w10")
    p.add_argument("--limits", default=None, metavar="k=v,...",
                   help="override physical limits, e.g. long_acc_max=1.5")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.rate <= 0:
            raise ValueError("--rate must be positive")
        sc = load_scenario(args.scenario)
        weights = parse_weights(args.weights)
        limits = parse_limits(args.limits)
    except (OSError, ValueError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    modes = ["trap", "cub"] if args.mode == "both" else [args.mode]

    reports = []
    slices_dumped = False
    for mode in modes:
        try:
            result, art = plan(sc, mode=mode, weights=weights, limits=limits)
        except Exception as exc:  # pragma: no cover - defensive
            print(f"error: {mode}: {exc}", file=sys.stderr)
            return 1
        reports.append(_mode_report(mode, result, art, sc.horizon, args.rate))
        if result.status == "optimal":
            export_csv(result.trajectory, sc.horizon, args.rate,
                       out_dir / f"trajectory_{mode}.csv")
        if args.dump_slices and not slices_dumped and art.slices is not None:
            dump_slices_csv(art.slices, sc.dt, out_dir / "slices.csv")
            slices_dumped = True
        if args.dump_corridors and art.corridors is not None:
            dump_corridors_json(art.corridors, out_dir / f"corridors_{mode}.json")
        if args.dump_qp and art.qp is not None:
            dump_qp_text(art.qp, out_dir / f"qp_{mode}.txt")

    _print_report(reports)
    statuses = {r.status for r in reports}
    if statuses == {"optimal"}:
        return 0
    if "solver-limit" in statuses:
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
