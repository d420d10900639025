"""End-to-end planning pipeline: scenario -> occupancy -> corridors -> QP."""

from __future__ import annotations

from dataclasses import dataclass

from .corridor import (
    CorridorSequence,
    NoCorridorError,
    generate_3d_regions,
    inscribe_cuboids,
)
from .qpopt import (
    CUBOIDAL,
    TRAPEZOIDAL,
    PhysicalLimits,
    PlanResult,
    QpProblem,
    Weights,
    assemble_qp,
    solve,
)
from .scenario import (
    NoReferenceError,
    PlannerConfig,
    ReferenceTrajectory,
    Scenario,
    generate_reference,
)
from .sltgraph import LSlice, SltObstacle, build_slices, obstacles_from_scenario

MODE_ALIASES = {
    "trap": TRAPEZOIDAL,
    "cub": CUBOIDAL,
    TRAPEZOIDAL: TRAPEZOIDAL,
    CUBOIDAL: CUBOIDAL,
}


@dataclass
class PlanArtifacts:
    """Intermediate products kept for dumping and analysis."""

    reference: ReferenceTrajectory | None = None
    obstacles: list[SltObstacle] | None = None
    slices: list[LSlice] | None = None
    trapezoids: CorridorSequence | None = None
    corridors: CorridorSequence | None = None  # the mode actually optimized
    qp: QpProblem | None = None


def build_corridors(
    sc: Scenario, cfg: PlannerConfig | None = None
) -> tuple[ReferenceTrajectory, list[SltObstacle], list[LSlice], CorridorSequence]:
    """Run the geometric half of the pipeline up to the trapezoidal chain."""
    cfg = cfg or PlannerConfig()
    sc.validate()
    ref = generate_reference(sc, cfg)
    obstacles = obstacles_from_scenario(sc, cfg)
    slices = build_slices(sc, obstacles, ref, cfg)
    trapezoids = generate_3d_regions(sc, slices, ref, cfg)
    return ref, obstacles, slices, trapezoids


def plan(
    sc: Scenario,
    mode: str = "trap",
    weights: Weights | None = None,
    limits: PhysicalLimits | None = None,
    cfg: PlannerConfig | None = None,
) -> tuple[PlanResult, PlanArtifacts]:
    """Plan one trajectory in the requested corridor mode.

    Geometric dead ends (no reference route, reference crossing a blocked
    slice) are reported as infeasible results rather than raised, so callers
    can tabulate outcomes uniformly.
    """
    try:
        corridor_mode = MODE_ALIASES[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}; expected trap or cub") from None
    cfg = cfg or PlannerConfig()
    weights = weights or Weights()
    limits = limits or PhysicalLimits()
    art = PlanArtifacts()
    try:
        ref, obstacles, slices, trapezoids = build_corridors(sc, cfg)
    except (NoReferenceError, NoCorridorError) as exc:
        return (
            PlanResult(status="infeasible", trajectory=None, objective=None,
                       solve_time_ms=0.0, violations={}, message=str(exc)),
            art,
        )
    art.reference, art.obstacles, art.slices, art.trapezoids = ref, obstacles, slices, trapezoids
    art.corridors = trapezoids if corridor_mode == TRAPEZOIDAL else inscribe_cuboids(trapezoids)
    art.qp = assemble_qp(
        art.corridors, ref, sc.ego, sc.road, weights, limits, corridor_mode, n=cfg.order
    )
    return solve(art.qp), art
