"""Transient solution of the truncated forward Kolmogorov system.

Integration uses the Dormand-Prince 5(4) pair with local extrapolation,
absolute max-norm error control and steps clipped to land on every output
time, so no interpolation error enters the reported values.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundReport
from .errors import SolverError
from .generator import AffineGenerator
from .model import QueueModel, WeightSequence

__all__ = [
    "SolverStats",
    "Trajectory",
    "PairDiagnostics",
    "LimitCheck",
    "delta",
    "dopri45",
    "solve_forward",
    "solve_reduced",
    "pair_diagnostics",
    "conditional_mean",
    "mean_difference",
    "limiting_regime_check",
]

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

NEGATIVITY_LIMIT = 1e-9


@dataclass
class SolverStats:
    steps: int = 0
    rejected: int = 0
    rhs_evals: int = 0
    max_local_error: float = 0.0
    min_value: float = math.inf


def dopri45(rhs, y0: np.ndarray, t_grid: np.ndarray, tol: float = 1e-10,
            h0: float | None = None, check_negative: bool = True,
            max_steps: int = 10_000_000) -> tuple[np.ndarray, SolverStats]:
    """Integrate ``y' = rhs(t, y)`` and return ``y`` at each time of ``t_grid``.

    The local error estimate (difference of the embedded 4th and 5th order
    solutions, max norm) is kept below ``tol`` on every accepted step.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be a nondecreasing 1-D array")
    y = np.array(y0, dtype=float)
    out = np.empty((len(t_grid),) + y.shape)
    stats = SolverStats(min_value=float(y.min()))
    t = float(t_grid[0])
    out[0] = y
    k1 = rhs(t, y)
    stats.rhs_evals += 1
    scale = float(np.max(np.abs(k1))) or 1.0
    h = h0 if h0 is not None else 0.5 * (tol / scale) ** 0.2
    k = np.empty((7,) + y.shape)
    for idx in range(1, len(t_grid)):
        t_end = float(t_grid[idx])
        while t < t_end:
            if stats.steps + stats.rejected >= max_steps:
                raise SolverError(f"step budget {max_steps} exhausted at t={t:.6g}")
            if h < 1e-14 * max(1.0, abs(t)):
                raise SolverError(f"step size underflow at t={t:.6g}; try a larger tol or N")
            last = t + h >= t_end
            step = t_end - t if last else h
            k[0] = k1
            for s in range(1, 7):
                ys = y + step * np.tensordot(_A[s], k[:s], axes=1)
                k[s] = rhs(t + _C[s] * step, ys)
            stats.rhs_evals += 6
            y_new = ys  # the 7th stage is evaluated at the 5th order solution (FSAL)
            err = float(np.max(np.abs(step * np.tensordot(_E, k, axes=1))))
            if err <= tol:
                t = t_end if last else t + step
                y = y_new
                k1 = k[6].copy()
                stats.steps += 1
                stats.max_local_error = max(stats.max_local_error, err)
                low = float(y.min())
                stats.min_value = min(stats.min_value, low)
                if check_negative and low < -NEGATIVITY_LIMIT:
                    raise SolverError(
                        f"probability {low:.3g} below -{NEGATIVITY_LIMIT:g} at t={t:.6g}; "
                        "increase N or decrease tol")
            else:
                stats.rejected += 1
            factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * (tol / err) ** 0.2))
            if not (err <= tol and last and step < h):
                h = step * factor  # a clipped accepted step says nothing about h
        out[idx] = y
    return out, stats


LIMIT_SLACK = 1e-9


def delta(k: int, N: int) -> np.ndarray:
    """Point mass on state ``k`` of a length ``N+1`` vector."""
    if not 0 <= k <= N:
        raise ValueError(f"state {k} outside 0..{N}")
    p = np.zeros(N + 1)
    p[k] = 1.0
    return p


def _check_initial(p0, N: int) -> np.ndarray:
    p0 = np.asarray(p0, dtype=float)
    if p0.ndim == 0:
        return delta(int(p0), N)
    if p0.shape != (N + 1,):
        raise ValueError(f"initial vector must have length N+1={N + 1}")
    if p0.min() < 0 or abs(p0.sum() - 1.0) > 1e-12:
        raise ValueError("initial vector must be a probability distribution")
    return p0


@dataclass
class Trajectory:
    t: np.ndarray
    p: np.ndarray  # shape (len(t), N+1)
    weights: WeightSequence
    closure: str
    stats: SolverStats

    @property
    def N(self) -> int:
        return self.p.shape[1] - 1

    @property
    def total_mass(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def tail_defect(self) -> np.ndarray:
        """``1 - sum p``: mass lost past N (defect tracking) or solver drift (reflecting)."""
        return 1.0 - self.total_mass

    @property
    def norm_1D(self) -> np.ndarray:
        return self.p @ self.weights.d(np.arange(self.N + 1))

    @property
    def mean(self) -> np.ndarray:
        return self.p @ np.arange(self.N + 1)

    def at(self, t: float) -> np.ndarray:
        idx = np.flatnonzero(np.isclose(self.t, t, rtol=0, atol=1e-12))
        if not idx.size:
            raise KeyError(f"t={t} is not on the output grid")
        return self.p[idx[0]]

    def table(self) -> tuple[list[str], np.ndarray]:
        header = ["t"] + [f"p{k}" for k in range(self.N + 1)] + ["tail_defect", "norm_1D", "mean"]
        data = np.column_stack((self.t, self.p, self.tail_defect, self.norm_1D, self.mean))
        return header, data


def _solve(model, N, p0, t_grid, tol, weights, closure, reduced):
    p0 = _check_initial(p0, N)
    gen = AffineGenerator(model, N, closure, reduced=reduced)
    if reduced:
        e0 = np.zeros(N + 1)
        e0[0] = 1.0

        def rhs(t, p):
            return gen.matvec(t, p) + model.beta_star(t) * e0
    else:
        rhs = gen.matvec
    p, stats = dopri45(rhs, p0, t_grid, tol)
    return Trajectory(np.asarray(t_grid, dtype=float), p,
                      weights or WeightSequence.ones(), closure, stats)


def solve_forward(model: QueueModel, N: int, p0, t_grid, tol: float = 1e-10,
                  weights: WeightSequence | None = None,
                  closure: str = "reflecting") -> Trajectory:
    """Integrate ``p' = A(t) p`` on states ``0..N``."""
    return _solve(model, N, p0, t_grid, tol, weights, closure, reduced=False)


def solve_reduced(model: QueueModel, N: int, p0, t_grid, tol: float = 1e-10,
                  weights: WeightSequence | None = None,
                  closure: str = "reflecting") -> Trajectory:
    """Integrate ``p' = A*(t) p + g(t)``; equal to ``solve_forward`` on distributions."""
    return _solve(model, N, p0, t_grid, tol, weights, closure, reduced=True)


def _solve_many(model, N, initials, t_grid, tol):
    """Integrate several initial vectors at once (columns of one system)."""
    Y0 = np.column_stack([_check_initial(p, N) for p in initials])
    gen = AffineGenerator(model, N, "reflecting")
    P, stats = dopri45(gen.matvec, Y0, t_grid, tol)
    return P, stats


@dataclass
class PairDiagnostics:
    t: np.ndarray
    norm_l1: np.ndarray
    norm_1D: np.ndarray
    bound_contraction: np.ndarray  # exp(-int beta) * ||D y(0)||, bounds norm_1D
    bound_general: np.ndarray  # the same over d, bounds norm_l1
    bound_uniform: np.ndarray | None
    ratio: np.ndarray
    norm_equivalence: bool
    mean_gap: np.ndarray  # E(t) of the second start minus that of the first
    stats: SolverStats

    @property
    def violation_ratio(self) -> float | None:
        """Largest observed/bound ratio; None when both solutions coincide."""
        if np.all(np.isnan(self.ratio)):
            return None
        return float(np.nanmax(self.ratio))

    def table(self) -> tuple[list[str], np.ndarray]:
        header = ["t", "norm_l1", "norm_1D", "bound_contraction", "bound_general", "ratio"]
        return header, np.column_stack((self.t, self.norm_l1, self.norm_1D,
                                        self.bound_contraction, self.bound_general, self.ratio))


def _ratio(obs, bound):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(obs == 0, 0.0, obs / bound)
    return r


def pair_diagnostics(model: QueueModel, N: int, p0a, p0b, w: WeightSequence,
                     report: BoundReport, t_grid, tol: float = 1e-10) -> PairDiagnostics:
    """Observed distances between two solutions against the contraction bounds."""
    t_grid = np.asarray(t_grid, dtype=float)
    P, stats = _solve_many(model, N, [p0a, p0b], t_grid, tol)
    y = P[:, :, 0] - P[:, :, 1]
    dk = w.d(np.arange(N + 1))
    norm_l1 = np.abs(y).sum(axis=1)
    norm_1D = np.abs(y) @ dk
    decay = np.exp(-report.integral(t_grid))
    d, d_star, _ = w.constants(N)
    b_con = decay * norm_1D[0]
    b_gen = b_con / d
    ratios = [_ratio(norm_1D, b_con), _ratio(norm_l1, b_gen)]
    b_uni = None
    if math.isfinite(d_star):
        b_uni = 2.0 * d_star / d * decay
        ratios.append(_ratio(norm_l1, b_uni))
    ratio = np.max(ratios, axis=0)
    if norm_1D[0] == 0:
        ratio = np.full(len(t_grid), np.nan)
    slack = 1e-12
    equiv = bool(np.all(d * norm_l1 <= norm_1D + slack))
    if math.isfinite(d_star):
        equiv = equiv and bool(np.all(norm_1D <= d_star * norm_l1 + slack))
    states = np.arange(N + 1)
    gap = P[:, :, 1] @ states - P[:, :, 0] @ states
    return PairDiagnostics(t_grid, norm_l1, norm_1D, b_con, b_gen, b_uni, ratio, equiv, gap, stats)


def _warn_tail(P: np.ndarray, N: int):
    hi = max(int(0.9 * N), 1)
    tail = P[:, hi:].sum(axis=1).max() if P.ndim == 2 else P[:, hi:, :].sum(axis=1).max()
    if tail > 1e-6:
        warnings.warn(f"mass {tail:.3g} in states above {hi}; means may be under-truncated",
                      stacklevel=3)


def conditional_mean(model: QueueModel, N: int, k: int, t_grid, tol: float = 1e-10) -> np.ndarray:
    """``E(t, k)``: mean queue length at each output time starting from state ``k``."""
    traj = solve_forward(model, N, delta(k, N), t_grid, tol)
    _warn_tail(traj.p, N)
    return traj.mean


@dataclass
class MeanDifference:
    t: np.ndarray
    observed: np.ndarray
    bound: np.ndarray
    coefficient: float

    @property
    def violation_ratio(self) -> float:
        return float(np.max(_ratio(self.observed, self.bound)))


def mean_difference(model: QueueModel, N: int, j: int, w: WeightSequence,
                    report: BoundReport, t_grid, tol: float = 1e-10) -> MeanDifference:
    """``|E(t,j) - E(t,0)|`` against ``(d_0 + d_j)/W * exp(-int beta)``."""
    from .bounds import mean_coefficient

    t_grid = np.asarray(t_grid, dtype=float)
    P, _ = _solve_many(model, N, [delta(0, N), delta(j, N)], t_grid, tol)
    _warn_tail(P, N)
    states = np.arange(N + 1)
    diff = np.abs(P[:, :, 1] @ states - P[:, :, 0] @ states)
    coef = mean_coefficient(w, j)
    return MeanDifference(t_grid, diff, coef * np.exp(-report.integral(t_grid)), coef)


@dataclass
class LimitCheck:
    observed_sup: float
    limit_bound: float | None
    window: tuple[float, float]
    passed: bool
    trajectory: Trajectory = field(repr=False)


def limiting_regime_check(model: QueueModel, N: int, w: WeightSequence, report: BoundReport,
                          t_grid, window: tuple[float, float] | None = None, p0=0,
                          tol: float = 1e-10) -> LimitCheck:
    """Late-time sup of ``||p(t)||_1D`` against ``R d_0 b_star / b``."""
    t_grid = np.asarray(t_grid, dtype=float)
    t_max = float(t_grid[-1])
    window = window or (0.8 * t_max, t_max)
    traj = solve_forward(model, N, p0, t_grid, tol, weights=w)
    mask = (t_grid >= window[0] - 1e-12) & (t_grid <= window[1] + 1e-12)
    observed = float(traj.norm_1D[mask].max())
    bound = report.limit_bound()
    # relative slack absorbs rounding when the bound is attained, e.g. by a point mass
    passed = bound is not None and observed <= bound * (1.0 + LIMIT_SLACK)
    return LimitCheck(observed, bound, window, passed, traj)
