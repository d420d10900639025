"""Spatio-temporal corridor planner with piecewise Bezier QP optimization."""

from .bezier import BezierPiece, PiecewiseBezierTrajectory
from .corridor import (
    ConvexRegion,
    CorridorSequence,
    NoCorridorError,
    convexify_2d,
    generate_3d_regions,
    inscribe_cuboids,
)
from .pipeline import PlanArtifacts, build_corridors, plan
from .qpopt import PhysicalLimits, PlanResult, Weights, assemble_qp, solve
from .scenario import (
    NoReferenceError,
    PlannerConfig,
    Scenario,
    ScenarioError,
    generate_reference,
    load_scenario,
    scenario_from_dict,
)
from .sltgraph import SltObstacle, build_slices, obstacles_from_scenario

__version__ = "0.1.0"

__all__ = [
    "BezierPiece",
    "PiecewiseBezierTrajectory",
    "ConvexRegion",
    "CorridorSequence",
    "NoCorridorError",
    "convexify_2d",
    "generate_3d_regions",
    "inscribe_cuboids",
    "PlanArtifacts",
    "build_corridors",
    "plan",
    "PhysicalLimits",
    "PlanResult",
    "Weights",
    "assemble_qp",
    "solve",
    "NoReferenceError",
    "PlannerConfig",
    "Scenario",
    "ScenarioError",
    "generate_reference",
    "load_scenario",
    "scenario_from_dict",
    "SltObstacle",
    "build_slices",
    "obstacles_from_scenario",
    "__version__",
]
