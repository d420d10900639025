"""Quadratic program assembly and solution for corridor-constrained Bezier pieces.

Decision variables are the position-scaled control points (h_k * c_i) of
every piece, longitudinal block first, then lateral. With that convention
the position curve is the plain Bernstein combination of the variables and
all corridor, boundary, continuity, and derivative constraints are linear.
The backend contract is a sparse convex QP (PSD quadratic term, equality
and inequality blocks); Clarabel is the default backend.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .bezier import BezierPiece, PiecewiseBezierTrajectory, binomial_row, transition_matrix
from .corridor import CorridorSequence
from .scenario import EgoState, ReferenceTrajectory, RoadSpec

FEASIBILITY_TOL = 1e-6

TRAPEZOIDAL = "trapezoidal"
CUBOIDAL = "cuboidal"


@dataclass(frozen=True)
class Weights:
    """Nonnegative cost weights: w1..w5 longitudinal, w6..w10 lateral.

    Per dimension the five terms are position tracking, velocity tracking,
    acceleration, jerk, and terminal position deviation.
    """

    w1: float = 1.0
    w2: float = 0.5
    w3: float = 1.0
    w4: float = 0.1
    w5: float = 10.0
    w6: float = 1.0
    w7: float = 0.5
    w8: float = 1.0
    w9: float = 0.1
    w10: float = 10.0

    def validate(self) -> None:
        vals = [self.w1, self.w2, self.w3, self.w4, self.w5,
                self.w6, self.w7, self.w8, self.w9, self.w10]
        if any(w < 0 for w in vals):
            raise ValueError("weights must be nonnegative")
        if self.w3 == 0 and self.w4 == 0:
            raise ValueError("need w3 or w4 > 0 for a coercive longitudinal objective")
        if self.w8 == 0 and self.w9 == 0:
            raise ValueError("need w8 or w9 > 0 for a coercive lateral objective")

    def longitudinal(self):
        return self.w1, self.w2, self.w3, self.w4, self.w5

    def lateral(self):
        return self.w6, self.w7, self.w8, self.w9, self.w10


@dataclass(frozen=True)
class PhysicalLimits:
    """Velocity, acceleration, and jerk bounds plus the centripetal cap."""

    long_vel: tuple[float, float] = (0.0, math.inf)  # upper capped by speed limit
    long_acc: tuple[float, float] = (-3.0, 2.0)
    long_jerk: tuple[float, float] = (-4.0, 4.0)
    lat_vel: tuple[float, float] = (-3.0, 3.0)
    lat_acc: tuple[float, float] = (-2.0, 2.0)
    lat_jerk: tuple[float, float] = (-4.0, 4.0)
    a_cm: float = 2.0

    def validate(self) -> None:
        for name in ("long_vel", "long_acc", "long_jerk", "lat_vel", "lat_acc", "lat_jerk"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} bounds are inverted")
        if self.a_cm <= 0:
            raise ValueError("a_cm must be positive")

    def long_speed_cap(self, speed_limit: float, kappa: float) -> float:
        cap = min(self.long_vel[1], speed_limit)
        if kappa > 1e-12:
            cap = min(cap, math.sqrt(self.a_cm / kappa))
        return cap


@dataclass
class QpProblem:
    Q: sp.csc_matrix
    q: np.ndarray
    const: float
    A_eq: sp.csc_matrix
    b_eq: np.ndarray
    eq_families: list[str]
    A_ie: sp.csc_matrix
    b_ie: np.ndarray
    ie_families: list[str]
    order: int
    piece_times: list[tuple[float, float]]  # (t0, h) per piece
    pre_infeasible: list[str] = field(default_factory=list)

    @property
    def nvar(self) -> int:
        return self.Q.shape[0]


@dataclass
class PlanResult:
    status: str  # optimal | infeasible | solver-limit
    trajectory: PiecewiseBezierTrajectory | None
    objective: float | None
    solve_time_ms: float
    violations: dict[str, float]
    message: str = ""


def _gram(n: int) -> np.ndarray:
    """Bernstein product integrals: G[i,j] = integral_0^1 b_n^i b_n^j dt."""
    row = binomial_row(n)
    row2 = binomial_row(2 * n)
    G = np.empty((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(n + 1):
            G[i, j] = row[i] * row[j] / (row2[i + j] * (2 * n + 1))
    return G


def _diff_op(n_from: int, h: float) -> np.ndarray:
    """Hodograph matrix mapping order-n points to order-(n-1) derivative points."""
    D = np.zeros((n_from, n_from + 1))
    for i in range(n_from):
        D[i, i] = -n_from / h
        D[i, i + 1] = n_from / h
    return D


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


def _segment_quadrature(t0: float, t1: float, cut_points: np.ndarray):
    """Gauss-Legendre nodes/weights over [t0, t1], split at interior cut points."""
    cuts = cut_points[(cut_points > t0 + 1e-12) & (cut_points < t1 - 1e-12)]
    edges = np.concatenate(([t0], cuts, [t1]))
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        nodes.append(0.5 * (a + b) + half * _GL_NODES)
        weights.append(half * _GL_WEIGHTS)
    return np.concatenate(nodes), np.concatenate(weights)


class _RefFuncs:
    """Canonical piecewise interpretation of the sampled reference.

    Position is linear between waypoints; the tracking velocity is its
    per-interval constant derivative.
    """

    def __init__(self, ref: ReferenceTrajectory):
        self.t = np.asarray(ref.t, dtype=float)
        self.dt = float(self.t[1] - self.t[0])
        self.s = np.asarray(ref.s, dtype=float)
        self.l = np.asarray(ref.l, dtype=float)
        self.vs = np.diff(self.s) / self.dt
        self.vl = np.diff(self.l) / self.dt

    def pos(self, dim: str, tq):
        return np.interp(tq, self.t, self.s if dim == "s" else self.l)

    def vel(self, dim: str, tq):
        idx = np.clip(np.searchsorted(self.t, tq, side="right") - 1, 0, len(self.t) - 2)
        return (self.vs if dim == "s" else self.vl)[idx]


def _var_index(dim: str, k: int, i: int, n: int, npieces: int) -> int:
    base = 0 if dim == "s" else npieces * (n + 1)
    return base + k * (n + 1) + i


def build_objective(
    seq: CorridorSequence,
    ref: ReferenceTrajectory,
    w: Weights,
    n: int,
) -> tuple[sp.csc_matrix, np.ndarray, float]:
    """Quadratic expansion of the tracking/smoothness objective.

    Returns (Q, q, const) with J = 1/2 c'Qc + q'c + const. Quadratic blocks
    use closed-form Bernstein Gram integrals; reference cross terms are
    integrated exactly with Gauss-Legendre quadrature split at the reference
    grid (the integrands are polynomial times piecewise linear).
    """
    w.validate()
    npieces = len(seq.regions)
    nvar = 2 * npieces * (n + 1)
    H = np.zeros((nvar, nvar))
    g = np.zeros(nvar)
    const = 0.0
    rf = _RefFuncs(ref)

    from .bezier import bernstein_basis

    G = {d: _gram(n - d) for d in range(4)}

    for dim, (wp, wv, wa, wj, wT) in (("s", w.longitudinal()), ("l", w.lateral())):
        for k, r in enumerate(seq.regions):
            h = r.h
            sl = slice(_var_index(dim, k, 0, n, npieces), _var_index(dim, k, n, n, npieces) + 1)
            D1 = _diff_op(n, h)
            D2 = _diff_op(n - 1, h) @ D1
            D3 = _diff_op(n - 2, h) @ D2
            Hk = wp * h * G[0]
            Hk += wv * h * (D1.T @ G[1] @ D1)
            Hk += wa * h * (D2.T @ G[2] @ D2)
            Hk += wj * h * (D3.T @ G[3] @ D3)
            H[sl, sl] += Hk

            tq, tw = _segment_quadrature(r.t_beg, r.t_end, rf.t)
            u = (tq - r.t_beg) / h
            B0 = bernstein_basis(n, u)       # (nq, n+1)
            B1 = bernstein_basis(n - 1, u)   # (nq, n)
            pos_ref = rf.pos(dim, tq)
            vel_ref = rf.vel(dim, tq)
            g[sl] += -2.0 * wp * (tw * pos_ref) @ B0
            g[sl] += -2.0 * wv * ((tw * vel_ref) @ B1) @ D1
            const += wp * float(tw @ pos_ref**2) + wv * float(tw @ vel_ref**2)

        # terminal deviation acts on the last control point of the last piece
        end_idx = _var_index(dim, npieces - 1, n, n, npieces)
        ref_T = rf.pos(dim, seq.t_end)
        H[end_idx, end_idx] += wT
        g[end_idx] += -2.0 * wT * ref_T
        const += wT * float(ref_T) ** 2

    Q = _ensure_psd(2.0 * H)
    return sp.csc_matrix(Q), g, const


def _ensure_psd(Q: np.ndarray) -> np.ndarray:
    Q = 0.5 * (Q + Q.T)
    min_eig = float(np.linalg.eigvalsh(Q)[0])
    if min_eig < -1e-9:
        raise ValueError(f"objective matrix is indefinite (min eig {min_eig})")
    if min_eig < 0.0:
        Q = Q + (1e-9 - min_eig) * np.eye(Q.shape[0])
    return Q


def _deriv_row(n: int, h: float, order: int, endpoint: str) -> np.ndarray:
    """Row mapping a piece's scaled points to a derivative value at an endpoint."""
    op = np.eye(n + 1)
    deg = n
    for _ in range(order):
        op = _diff_op(deg, h) @ op
        deg -= 1
    return op[0] if endpoint == "start" else op[-1]


def build_boundary_constraints(
    ego: EgoState, npieces: int, n: int, h0: float
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Pin first-piece start position/velocity/acceleration to the ego state."""
    if n < 3:
        raise ValueError("order >= 3 required for independent endpoint derivatives")
    nvar = 2 * npieces * (n + 1)
    rows, rhs, fams = [], [], []
    targets = {"s": (ego.s0, ego.vs0, ego.as0), "l": (ego.l0, ego.vl0, ego.al0)}
    for dim in ("s", "l"):
        for order in range(3):
            row = np.zeros(nvar)
            base = _var_index(dim, 0, 0, n, npieces)
            row[base : base + n + 1] = _deriv_row(n, h0, order, "start")
            rows.append(row)
            rhs.append(targets[dim][order])
            fams.append("boundary")
    return np.array(rows), np.array(rhs), fams


def build_continuity_constraints(
    seq: CorridorSequence, n: int
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Position/velocity/acceleration continuity at every interior knot."""
    npieces = len(seq.regions)
    if npieces < 2:
        return np.zeros((0, 2 * npieces * (n + 1))), np.zeros(0), []
    nvar = 2 * npieces * (n + 1)
    rows, rhs, fams = [], [], []
    for k in range(npieces - 1):
        hk = seq.regions[k].h
        hk1 = seq.regions[k + 1].h
        for dim in ("s", "l"):
            for order in range(3):
                row = np.zeros(nvar)
                a = _var_index(dim, k, 0, n, npieces)
                b = _var_index(dim, k + 1, 0, n, npieces)
                row[a : a + n + 1] = _deriv_row(n, hk, order, "end")
                row[b : b + n + 1] -= _deriv_row(n, hk1, order, "start")
                rows.append(row)
                rhs.append(0.0)
                fams.append("continuity")
    return np.array(rows), np.array(rhs), fams


def build_safety_constraints(
    seq: CorridorSequence, mode: str, n: int
) -> tuple[np.ndarray, np.ndarray, list[str], list[str]]:
    """Corridor containment rows on the scaled control points.

    Trapezoidal mode linearly interpolates the bound lines across control
    point indices via column 1 of the Bernstein-to-monomial transition
    matrix (M[i,1] = i/n); cuboidal mode uses the inscribed box directly.
    Returns (A, b, families, pre_infeasible_reasons).
    """
    if mode not in (TRAPEZOIDAL, CUBOIDAL):
        raise ValueError(f"unknown corridor mode {mode!r}")
    M1 = transition_matrix(n)[:, 1]
    npieces = len(seq.regions)
    nvar = 2 * npieces * (n + 1)
    rows, rhs, fams = [], [], []
    reasons = []
    for k, r in enumerate(seq.regions):
        if not r.feasible:
            reasons.append(
                f"piece {k}: cuboid collapsed, h={r.h:.3g} exceeds the feasible interval"
            )
        for i in range(n + 1):
            lo = r.lbias + r.h * r.lskew * M1[i]
            hi = r.ubias + r.h * r.uskew * M1[i]
            if lo > hi and r.feasible:
                reasons.append(f"piece {k}: empty control-point interval at index {i}")
            idx = _var_index("s", k, i, n, npieces)
            row = np.zeros(nvar)
            row[idx] = -1.0
            rows.append(row); rhs.append(-lo); fams.append("safety-s")
            row = np.zeros(nvar)
            row[idx] = 1.0
            rows.append(row); rhs.append(hi); fams.append("safety-s")

            idx = _var_index("l", k, i, n, npieces)
            row = np.zeros(nvar)
            row[idx] = -1.0
            rows.append(row); rhs.append(-r.l_beg); fams.append("safety-l")
            row = np.zeros(nvar)
            row[idx] = 1.0
            rows.append(row); rhs.append(r.l_end); fams.append("safety-l")
    return np.array(rows), np.array(rhs), fams, reasons


def build_physical_constraints(
    seq: CorridorSequence, lim: PhysicalLimits, road: RoadSpec, n: int
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Velocity/acceleration/jerk bounds on hodograph control points.

    The longitudinal speed cap combines the road speed limit with the
    centripetal limit sqrt(a_cm / kappa_k), where kappa_k is the largest
    curvature over the piece's corridor S range.
    """
    lim.validate()
    npieces = len(seq.regions)
    nvar = 2 * npieces * (n + 1)
    rows, rhs, fams = [], [], []

    def add_bound_rows(dim, k, op, lo, hi, family):
        base = _var_index(dim, k, 0, n, npieces)
        for r_idx in range(op.shape[0]):
            row = np.zeros(nvar)
            row[base : base + n + 1] = op[r_idx]
            rows.append(-row); rhs.append(-lo); fams.append(family)
            rows.append(row.copy()); rhs.append(hi); fams.append(family)

    for k, r in enumerate(seq.regions):
        h = r.h
        D1 = _diff_op(n, h)
        D2 = _diff_op(n - 1, h) @ D1
        D3 = _diff_op(n - 2, h) @ D2
        s_span = (min(r.lower(r.t_beg), r.lower(r.t_end)),
                  max(r.upper(r.t_beg), r.upper(r.t_end)))
        kappa = road.max_kappa(*s_span)
        vs_hi = lim.long_speed_cap(road.speed_limit, kappa)
        add_bound_rows("s", k, D1, lim.long_vel[0], vs_hi, "vel-s")
        add_bound_rows("s", k, D2, *lim.long_acc, "acc-s")
        add_bound_rows("s", k, D3, *lim.long_jerk, "jerk-s")
        add_bound_rows("l", k, D1, *lim.lat_vel, "vel-l")
        add_bound_rows("l", k, D2, *lim.lat_acc, "acc-l")
        add_bound_rows("l", k, D3, *lim.lat_jerk, "jerk-l")
    return np.array(rows), np.array(rhs), fams


def assemble_qp(
    seq: CorridorSequence,
    ref: ReferenceTrajectory,
    ego: EgoState,
    road: RoadSpec,
    weights: Weights,
    limits: PhysicalLimits,
    mode: str,
    n: int = 5,
) -> QpProblem:
    """Full QP for one corridor mode."""
    npieces = len(seq.regions)
    Q, q, const = build_objective(seq, ref, weights, n)
    A_b, b_b, f_b = build_boundary_constraints(ego, npieces, n, seq.regions[0].h)
    A_c, b_c, f_c = build_continuity_constraints(seq, n)
    A_s, b_s, f_s, reasons = build_safety_constraints(seq, mode, n)
    A_p, b_p, f_p = build_physical_constraints(seq, limits, road, n)

    A_eq = sp.csc_matrix(np.vstack([A_b, A_c]) if len(f_c) else A_b)
    b_eq = np.concatenate([b_b, b_c]) if len(f_c) else b_b
    A_ie = sp.csc_matrix(np.vstack([A_s, A_p]))
    b_ie = np.concatenate([b_s, b_p])
    return QpProblem(
        Q=Q, q=q, const=const,
        A_eq=A_eq, b_eq=b_eq, eq_families=f_b + f_c,
        A_ie=A_ie, b_ie=b_ie, ie_families=f_s + f_p,
        order=n,
        piece_times=[(r.t_beg, r.h) for r in seq.regions],
        pre_infeasible=reasons,
    )


def clarabel_backend(qp: QpProblem) -> tuple[str, np.ndarray | None, float]:
    """Default QP backend. Returns (status, primal, solve_time_ms)."""
    import clarabel

    A = sp.vstack([qp.A_eq, qp.A_ie]).tocsc()
    b = np.concatenate([qp.b_eq, qp.b_ie])
    cones = [clarabel.ZeroConeT(qp.A_eq.shape[0]),
             clarabel.NonnegativeConeT(qp.A_ie.shape[0])]
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = 1e-9
    settings.tol_gap_abs = 1e-9
    settings.tol_gap_rel = 1e-9
    solver = clarabel.DefaultSolver(sp.csc_matrix(qp.Q), qp.q, A, b, cones, settings)
    sol = solver.solve()
    status = str(sol.status)
    elapsed_ms = sol.solve_time * 1e3
    if status in ("Solved", "AlmostSolved"):
        return "optimal", np.asarray(sol.x), elapsed_ms
    if "Infeasible" in status:
        return "infeasible", None, elapsed_ms
    return "solver-limit", None, elapsed_ms


def _constraint_violations(qp: QpProblem, x: np.ndarray) -> dict[str, float]:
    out: dict[str, float] = {}
    if qp.A_eq.shape[0]:
        resid = np.abs(qp.A_eq @ x - qp.b_eq)
        for fam, v in zip(qp.eq_families, resid):
            out[fam] = max(out.get(fam, 0.0), float(v))
    if qp.A_ie.shape[0]:
        resid = qp.A_ie @ x - qp.b_ie
        for fam, v in zip(qp.ie_families, resid):
            out[fam] = max(out.get(fam, 0.0), float(max(v, 0.0)))
    return out


def extract_trajectory(qp: QpProblem, x: np.ndarray) -> PiecewiseBezierTrajectory:
    n = qp.order
    npieces = len(qp.piece_times)
    pieces = []
    for k, (t0, h) in enumerate(qp.piece_times):
        cs = x[k * (n + 1) : (k + 1) * (n + 1)] / h
        off = npieces * (n + 1)
        cl = x[off + k * (n + 1) : off + (k + 1) * (n + 1)] / h
        pieces.append(BezierPiece(t0=t0, h=h, cs=cs, cl=cl))
    return PiecewiseBezierTrajectory(pieces=tuple(pieces))


def solve(qp: QpProblem, backend=clarabel_backend) -> PlanResult:
    """Solve the QP and independently verify every constraint family.

    Cuboidal pieces flagged infeasible during assembly short-circuit the
    solve; a solver-reported optimum failing the feasibility tolerance is
    downgraded to solver-limit rather than silently accepted.
    """
    if qp.pre_infeasible:
        return PlanResult(
            status="infeasible", trajectory=None, objective=None,
            solve_time_ms=0.0, violations={},
            message="; ".join(qp.pre_infeasible),
        )
    t0 = time.perf_counter()
    status, x, solver_ms = backend(qp)
    wall_ms = (time.perf_counter() - t0) * 1e3
    if status != "optimal":
        return PlanResult(status=status, trajectory=None, objective=None,
                          solve_time_ms=wall_ms, violations={})
    violations = _constraint_violations(qp, x)
    worst = max(violations.values(), default=0.0)
    if worst > FEASIBILITY_TOL:
        return PlanResult(
            status="solver-limit", trajectory=None, objective=None,
            solve_time_ms=wall_ms, violations=violations,
            message=f"solution violates constraints by {worst:.2e}",
        )
    objective = float(0.5 * x @ (qp.Q @ x) + qp.q @ x + qp.const)
    return PlanResult(
        status="optimal",
        trajectory=extract_trajectory(qp, x),
        objective=objective,
        solve_time_ms=wall_ms,
        violations=violations,
    )


def dump_qp_text(qp: QpProblem, path) -> None:
    """Plain-text sparse triplet dump for external cross-checking."""
    with open(path, "w") as fh:
        coo = qp.Q.tocoo()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"Q {r} {c} {v:.17g}\n")
        fh.write("q " + " ".join(f"{v:.17g}" for v in qp.q) + "\n")
        fh.write(f"const {qp.const:.17g}\n")
        for name, mat, vec in (("Aeq", qp.A_eq, qp.b_eq), ("Aie", qp.A_ie, qp.b_ie)):
            coo = mat.tocoo()
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{name} {r} {c} {v:.17g}\n")
            fh.write(f"b{name[1:]} " + " ".join(f"{v:.17g}" for v in vec) + "\n")
