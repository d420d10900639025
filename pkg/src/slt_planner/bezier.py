"""Bernstein basis algebra and piecewise scaled Bezier trajectories.

Control points are stored unscaled; the position curve of a piece is
``h * B((t - t0) / h)`` where ``h`` is the piece duration. Evaluation uses
de Casteljau recursion; the closed-form basis product is exposed separately
for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "binomial_row",
    "eval_bernstein",
    "bernstein_basis",
    "de_casteljau",
    "hodograph",
    "transition_matrix",
    "BezierPiece",
    "PiecewiseBezierTrajectory",
]


def binomial_row(n: int) -> np.ndarray:
    """Binomial coefficients C(n, 0..n) built from Pascal's triangle (exact integers)."""
    row = np.ones(1, dtype=np.int64)
    for _ in range(n):
        row = np.concatenate(([1], row[:-1] + row[1:], [1]))
    return row.astype(float)


def eval_bernstein(n: int, i: int, t: float) -> float:
    """Closed-form Bernstein basis value C(n,i) * t^i * (1-t)^(n-i)."""
    if not 0 <= i <= n:
        raise ValueError(f"index i={i} outside 0..{n}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"parameter t={t} outside [0, 1]")
    return float(binomial_row(n)[i] * t**i * (1.0 - t) ** (n - i))


def bernstein_basis(n: int, t) -> np.ndarray:
    """All n+1 basis values at parameter(s) t, shape (..., n+1).

    Uses the stable iterative de Casteljau-style recurrence rather than the
    closed-form product.
    """
    t = np.asarray(t, dtype=float)
    vals = np.zeros(t.shape + (n + 1,))
    vals[..., 0] = 1.0
    for deg in range(1, n + 1):
        prev = vals[..., :deg].copy()
        vals[..., : deg + 1] = 0.0
        vals[..., :deg] += prev * (1.0 - t)[..., None]
        vals[..., 1 : deg + 1] += prev * t[..., None]
    return vals


def de_casteljau(points: np.ndarray, t) -> np.ndarray:
    """Evaluate a Bezier curve with the given control points at parameter(s) t."""
    points = np.asarray(points, dtype=float)
    t = np.asarray(t, dtype=float)
    beta = np.broadcast_to(points, t.shape + points.shape).copy()
    n = points.shape[-1] - 1
    for deg in range(n):
        beta = beta[..., :-1] * (1.0 - t)[..., None] + beta[..., 1:] * t[..., None]
    return beta[..., 0]


def hodograph(points: np.ndarray) -> np.ndarray:
    """Derivative-curve control points n * (c_{i+1} - c_i)."""
    points = np.asarray(points, dtype=float)
    n = points.shape[-1] - 1
    if n < 1:
        raise ValueError("curve of order 0 has no derivative control points")
    return n * np.diff(points, axis=-1)


def transition_matrix(n: int) -> np.ndarray:
    """Matrix M with t^j = sum_i M[i, j] * b_n^i(t).

    Lower triangular with M[i, j] = C(i, j) / C(n, j); column 0 is all ones
    and column 1 is i/n.
    """
    if n < 1:
        raise ValueError("order must be >= 1")
    M = np.zeros((n + 1, n + 1))
    rows = [binomial_row(i) for i in range(n + 1)]
    top = binomial_row(n)
    for i in range(n + 1):
        for j in range(i + 1):
            M[i, j] = rows[i][j] / top[j]
    return M


@dataclass(frozen=True)
class BezierPiece:
    """One trajectory piece: unscaled control points plus time scaling.

    ``cs``/``cl`` hold the S and L control points; position at absolute time
    t in [t0, t0 + h] is ``h * B((t - t0) / h)`` per dimension.
    """

    t0: float
    h: float
    cs: np.ndarray
    cl: np.ndarray

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("piece duration must be positive")
        if len(self.cs) != len(self.cl):
            raise ValueError("S and L control point counts differ")

    @property
    def order(self) -> int:
        return len(self.cs) - 1

    @property
    def t1(self) -> float:
        return self.t0 + self.h

    def eval(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Position (s, l) at absolute time(s) t within the piece interval."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t0 - 1e-12) or np.any(t > self.t1 + 1e-12):
            raise ValueError("time outside piece interval")
        u = np.clip((t - self.t0) / self.h, 0.0, 1.0)
        return self.h * de_casteljau(self.cs, u), self.h * de_casteljau(self.cl, u)

    def derivative_points(self, dim: str, order: int) -> np.ndarray:
        """Control points of the order-th time derivative, scaled to physical units.

        Position-scaled points are h * c; each time derivative divides by h,
        so the order-th derivative carries a factor h**(1 - order).
        """
        pts = self.cs if dim == "s" else self.cl
        scaled = self.h * np.asarray(pts, dtype=float)
        for _ in range(order):
            scaled = hodograph(scaled) / self.h
        return scaled

    def eval_derivative(self, t, dim: str, order: int):
        t = np.asarray(t, dtype=float)
        u = np.clip((t - self.t0) / self.h, 0.0, 1.0)
        return de_casteljau(self.derivative_points(dim, order), u)


@dataclass(frozen=True)
class PiecewiseBezierTrajectory:
    """Knot-ordered chain of pieces covering [pieces[0].t0, pieces[-1].t1]."""

    pieces: tuple[BezierPiece, ...]

    def __post_init__(self):
        for a, b in zip(self.pieces, self.pieces[1:]):
            if abs(a.t1 - b.t0) > 1e-9:
                raise ValueError("piece intervals are not contiguous")

    @property
    def t_start(self) -> float:
        return self.pieces[0].t0

    @property
    def t_end(self) -> float:
        return self.pieces[-1].t1

    @property
    def knots(self) -> np.ndarray:
        return np.array([p.t0 for p in self.pieces] + [self.t_end])

    def piece_index(self, t) -> np.ndarray:
        starts = np.array([p.t0 for p in self.pieces])
        idx = np.searchsorted(starts, np.asarray(t, dtype=float), side="right") - 1
        return np.clip(idx, 0, len(self.pieces) - 1)

    def eval(self, t) -> tuple[np.ndarray, np.ndarray]:
        return self._eval_order(t, 0)

    def derivative(self, t, order: int) -> tuple[np.ndarray, np.ndarray]:
        return self._eval_order(t, order)

    def _eval_order(self, t, order: int):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        idx = self.piece_index(t)
        s = np.empty_like(t)
        l = np.empty_like(t)
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if not np.any(mask):
                continue
            tk = np.clip(t[mask], piece.t0, piece.t1)
            s[mask] = piece.eval_derivative(tk, "s", order)
            l[mask] = piece.eval_derivative(tk, "l", order)
        if scalar:
            return float(s[0]), float(l[0])
        return s, l

    def sample(self, times) -> dict[str, np.ndarray]:
        """Sample position through jerk; keys t, s, l, vs, vl, as, al, js, jl."""
        times = np.asarray(times, dtype=float)
        out = {"t": times}
        names = [("s", "l"), ("vs", "vl"), ("as", "al"), ("js", "jl")]
        for order, (ks, kl) in enumerate(names):
            vs, vl = self._eval_order(times, order)
            out[ks], out[kl] = vs, vl
        return out
