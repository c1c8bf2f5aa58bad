"""Contraction rate of the weighted reduced system and the resulting bounds.

For the weighted reduced matrix ``A*_D = D A* D^{-1}`` every diagonal entry
is nonpositive, so the column functional

    |a_jj| - sum_{i != j} a_ij  =  -(sum_i d_i a*_ij) / d_j

is linear in the matrix.  Each generator term therefore contributes a fixed
vector over columns, and ``beta_**(t)`` is the minimum over columns of a
small matrix product.  Columns beyond the truncation level are handled by
closed forms per model family (see ``ContractionRate``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate as sint

from .errors import BoundUndefinedError, NotExponentiallyErgodicError, QuadratureError
from .generator import AffineGenerator
from .model import (
    BatchArrivals,
    LevelJumpArrivals,
    QueueModel,
    RateTable,
    SingleServer,
    TimeFunction,
    WeightSequence,
)

__all__ = [
    "ContractionRate",
    "RateProfile",
    "Envelope",
    "PublishedClaims",
    "ConvergenceBounds",
    "BoundReport",
    "beta_double_star",
    "integrate_beta",
    "fit_envelope",
    "convergence_bounds",
    "limit_bound",
    "limit_bound_value",
    "mean_coefficient",
    "build_report",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)

INF_STATE_ASSUMPTION = ("common catastrophe rate is the infimum over states i >= 1; "
                        "state 0 has no catastrophe transition")


def _is_linear_like(weights: WeightSequence) -> bool:
    aff = weights.affine_tail()
    if aff is None:
        return False
    slope, icpt, start = aff
    if weights.kind == "explicit":
        head = np.asarray(weights.values)
        return slope > 0 and np.allclose(head, slope * (np.arange(len(head)) + 1), rtol=0,
                                         atol=1e-15 * slope) and icpt == slope
    return slope > 0 and icpt == slope


def _is_all_ones(weights: WeightSequence) -> bool:
    if weights.kind == "constant_one":
        return True
    if weights.kind == "explicit":
        slope, icpt, _ = weights.affine_tail()
        return slope == 0 and all(v == icpt for v in weights.values)
    return False


class ContractionRate:
    """``beta_**(t)`` for a model and weight sequence, over all states.

    Columns ``0..N`` come from column sums of the defect-tracking weighted
    reduced matrix, corrected by the weighted outflow whose destination lies
    beyond ``N``.  Columns ``j > N`` use

    * all-ones weights: every column ``j >= 1`` equals ``beta_*(t)``;
    * linear weights ``d_k = k + 1``: with ``x = 1/(j+1)`` the column is the
      concave quadratic ``a + c1*x - c2*x**2`` once the model is in its
      closed-form regime, so the infimum sits at an end of ``(0, x_max]``;
    * geometric weights with finitely many arrival sizes: the certified lower
      bound ``beta_* + mu(1 - 1/rho) + lambda*sum c_k (1 - rho**k)``;
    * anything else: a scan over a dense and a geometric grid of columns,
      flagged as not certified.
    """

    def __init__(self, model: QueueModel, weights: WeightSequence, N: int):
        self.model = model
        self.weights = weights
        self.N = N
        arr = model.arrivals
        if isinstance(arr, LevelJumpArrivals) and not math.isfinite(arr.b.weighted_tail(1, weights)):
            raise BoundUndefinedError(
                f"series sum_i d_i b_i diverges for {weights.kind} weights; "
                "weighted arrival column sums are infinite")
        gen = AffineGenerator(model, N, "defect_tracking", reduced=True)
        self.generator = gen
        wgen = gen.weighted(weights)
        self.weighted_generator = wgen
        d = weights.d(np.arange(N + 1))
        leaks = gen.leaks(weights)
        self.C = np.array([-np.asarray(tm.matrix.sum(axis=0)).ravel() for tm in wgen.terms])
        if len(self.C):
            self.C -= leaks / d
        else:
            self.C = np.zeros((0, N + 1))
        self._plan()

    # -- tail planning ------------------------------------------------------
    def _plan(self):
        model, w, N = self.model, self.weights, self.N
        cat, arr, srv = model.catastrophes, model.arrivals, model.services
        j1 = N + 1
        if cat.prefix:
            j1 = max(j1, len(cat.prefix) + 1)
        if isinstance(arr, LevelJumpArrivals) and arr.b.support is not None:
            j1 = max(j1, arr.b.support)
        if isinstance(arr, RateTable):
            j1 = max(j1, arr.max_source + 1)
        if isinstance(srv, RateTable):
            j1 = max(j1, srv.max_source + 1)
        aff = w.affine_tail()
        if aff is not None:
            j1 = max(j1, aff[2] + 1)
        self.regime_start = j1
        self.explicit_tail = np.arange(N + 1, j1)
        finite_arrivals = not (isinstance(arr, LevelJumpArrivals) and arr.b.support is None)
        if _is_all_ones(w):
            self.tail_kind = "exact"
            self.explicit_tail = np.arange(0)
        elif _is_linear_like(w):
            self.tail_kind = "exact"
        elif w.kind == "geometric" and finite_arrivals:
            self.tail_kind = "lower_bound"
        else:
            self.tail_kind = "scan"
            self.explicit_tail = np.unique(np.concatenate((
                np.arange(N + 1, N + 2049),
                np.round(np.geomspace(N + 2049, 1e9, 400)).astype(np.int64))))
        self.tail_certified = self.tail_kind != "scan"

    # -- evaluation ---------------------------------------------------------
    def beta_star(self, t):
        return self.generator.terms[-1].coefficient.evaluate(t)

    def columns(self, t) -> np.ndarray:
        """Column functionals for states ``0..N``; shape ``t.shape + (N+1,)``."""
        coef = self.generator.coefficients(t)
        return coef @ self.C

    def column_direct(self, j: int, t) -> np.ndarray:
        """Column ``j`` of the untruncated model straight from the rates."""
        model, w = self.model, self.weights
        t = np.asarray(t, dtype=float)
        bs = self.beta_star(t)
        dj = float(w.d(j))
        diag = np.zeros(t.shape)
        off = np.zeros(t.shape)
        arr = model.arrivals
        if isinstance(arr, LevelJumpArrivals):
            lam = arr.rate.evaluate(t)
            diag += lam * arr.b.tail_mass(j + 1)
            off += lam * arr.b.weighted_tail(j + 1, w) / dj
        elif isinstance(arr, BatchArrivals):
            lam = arr.rate.evaluate(t)
            diag += lam * arr.total
            off += lam * math.fsum(c * float(w.d(j + k)) for k, c in enumerate(arr.sizes, 1)) / dj
        elif isinstance(arr, RateTable):
            for src, size, f in arr.entries:
                if src == j:
                    v = f.evaluate(t)
                    diag += v
                    off += v * float(w.d(j + size)) / dj
        srv = model.services
        if isinstance(srv, SingleServer) and j >= 1:
            mu = srv.rate.evaluate(t)
            diag += mu
            off += mu * float(w.d(j - 1)) / dj
        elif isinstance(srv, RateTable):
            for src, size, f in srv.entries:
                if src == j:
                    v = f.evaluate(t)
                    diag += v
                    off += v * float(w.d(j - size)) / dj
        if j == 0:
            diag += bs
        else:
            beta_j = sum(f.evaluate(t) * s for f, s in model.catastrophes.components(j))
            diag += beta_j
            off += (beta_j - bs) * float(w.d(0)) / dj
        return diag - off

    def tail(self, t) -> np.ndarray:
        """Infimum (or certified lower bound) over columns ``j > N``."""
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, np.inf)
        for j in self.explicit_tail:
            out = np.minimum(out, self.column_direct(int(j), t))
        if self.tail_kind == "scan":
            return out
        bs = self.beta_star(t)
        if _is_all_ones(self.weights):
            return np.minimum(out, bs)
        model = self.model
        cat, arr, srv = model.catastrophes, model.arrivals, model.services
        lam = arr.rate.evaluate(t) if isinstance(arr, (LevelJumpArrivals, BatchArrivals)) \
            else np.zeros(t.shape)
        mu = srv.rate.evaluate(t) if isinstance(srv, SingleServer) else np.zeros(t.shape)
        if self.tail_kind == "lower_bound":
            rho = self.weights.rho
            val = bs + mu * (1.0 - 1.0 / rho)
            if isinstance(arr, BatchArrivals):
                val = val + lam * math.fsum(c * (1.0 - rho ** k) for k, c in enumerate(arr.sizes, 1))
            return np.minimum(out, val)
        # linear weights: a + c1 x - c2 x^2 on x in (0, 1/(J1+1)]
        if cat.is_zero:
            a, cc = np.zeros(t.shape), np.zeros(t.shape)
        elif cat.tail is None:
            a, cc = cat.prefix[-1].evaluate(t), np.zeros(t.shape)
        else:
            a = cat.tail.base.evaluate(t)
            cc = cat.tail.coefficient.evaluate(t) if cat.tail.kind == "harmonic" else np.zeros(t.shape)
        c1 = cc - a + bs + mu
        c2 = np.zeros(t.shape)
        if isinstance(arr, BatchArrivals):
            c1 = c1 - lam * arr.mean_size
        if isinstance(arr, LevelJumpArrivals) and arr.b.support is None:
            c2 = 2.0 * lam
        x = 1.0 / (self.regime_start + 1.0)
        end = a + c1 * x - c2 * x * x
        return np.minimum(out, np.minimum(a, end))

    def evaluate_with_column(self, t):
        t = np.asarray(t, dtype=float)
        cols = self.columns(t)
        j = np.argmin(cols, axis=-1)
        inside = np.take_along_axis(cols, j[..., None], axis=-1)[..., 0]
        tail = self.tail(t)
        val = np.minimum(inside, tail)
        which = np.where(tail < inside, -1, j)
        return val, which

    def evaluate(self, t):
        return self.evaluate_with_column(t)[0]

    def __call__(self, t: float) -> float:
        return float(self.evaluate(t))


@dataclass(frozen=True)
class ColumnInfimum:
    value: float
    column: int | str  # state index, or "tail" for j > N
    displayed_formula: float | None
    tail_certified: bool


def beta_double_star(model: QueueModel, w: WeightSequence, N: int, t: float) -> ColumnInfimum:
    """``beta_**(t)`` with the binding column.

    For level-jump models also returns ``beta_*(t) - lambda(t) * sum_k (d_k - 1) b_k``,
    the closed form obtained by reading off column 0 alone.
    """
    rate = ContractionRate(model, w, N)
    val, col = rate.evaluate_with_column(t)
    formula = None
    if isinstance(model.arrivals, LevelJumpArrivals):
        formula = model.beta_star(t) - model.arrivals.rate(t) * weighted_arrival_excess(model, w)
    col = int(col)
    return ColumnInfimum(float(val), "tail" if col < 0 else col, formula, rate.tail_certified)


def weighted_arrival_excess(model: QueueModel, w: WeightSequence) -> float:
    """``sum_{k>=1} (d_k - 1) b_k`` of a level-jump model."""
    b = model.arrivals.b
    return b.weighted_tail(1, w) - b.tail_mass(1)


# ---------------------------------------------------------------------------
# integrals
# ---------------------------------------------------------------------------

class RateProfile:
    """A rate function of time with a fast cumulative integral.

    A ``TimeFunction`` integrates exactly.  Anything else with a vectorized
    ``evaluate`` is tabulated with 10-point Gauss-Legendre per cell over one
    period (extended periodically) or over ``[0, t_max]``.
    """

    def __init__(self, func, period: float | None = None, t_max: float | None = None,
                 cells: int = 2048):
        self.func = func
        self.period = period
        self.exact = isinstance(func, TimeFunction)
        if self.exact:
            return
        span = period if period is not None else t_max
        if span is None:
            raise ValueError("need a period or t_max to tabulate the integral")
        self.span = float(span)
        self.h = self.span / cells
        a = np.arange(cells) * self.h
        nodes = a[:, None] + 0.5 * self.h * (_GL_X + 1.0)
        vals = func.evaluate(nodes)
        cell_int = 0.5 * self.h * vals @ _GL_W
        self.cum = np.concatenate(([0.0], np.cumsum(cell_int)))
        self.cells = cells

    def evaluate(self, t):
        return self.func.evaluate(t)

    def __call__(self, t: float) -> float:
        return float(self.evaluate(t))

    def _partial(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.floor(t / self.h).astype(int), 0, self.cells - 1)
        a = k * self.h
        half = 0.5 * (t - a)
        nodes = a[..., None] + half[..., None] * (_GL_X + 1.0)
        return self.cum[k] + half * (self.func.evaluate(nodes) @ _GL_W)

    def antiderivative(self, t):
        """``int_0^t`` of the rate (vectorized)."""
        if self.exact:
            return self.func.antiderivative(t)
        t = np.asarray(t, dtype=float)
        if self.period is None:
            if np.any(t > self.span * (1 + 1e-12)):
                raise ValueError("t beyond the tabulated range")
            return self._partial(np.minimum(t, self.span))
        n = np.floor(t / self.span)
        return n * self.cum[-1] + self._partial(t - n * self.span)

    def integral(self, t0: float, t1: float) -> float:
        return float(self.antiderivative(t1) - self.antiderivative(t0))


def integrate_beta(beta, t0: float, t1: float, atol: float = 1e-10,
                   period: float | None = None) -> float:
    """``int_{t0}^{t1} beta(tau) dtau``.

    Exact for a ``TimeFunction``; adaptive quadrature otherwise, split at
    period boundaries.  Raises ``QuadratureError`` when ``atol`` is missed.
    """
    if t1 < t0:
        raise ValueError("need t0 <= t1")
    if isinstance(beta, TimeFunction):
        return beta.integral(t0, t1)
    if isinstance(beta, RateProfile) and beta.exact:
        return beta.integral(t0, t1)
    f = beta if callable(beta) else beta.evaluate
    edges = [t0]
    if period:
        k = math.floor(t0 / period) + 1
        while k * period < t1:
            edges.append(k * period)
            k += 1
    edges.append(t1)
    total, err = 0.0, 0.0
    tol = atol / max(len(edges) - 1, 1)
    for a, b in zip(edges[:-1], edges[1:]):
        val, e, info = sint.quad(lambda s: float(f(s)), a, b, epsabs=tol, epsrel=0.0,
                                 limit=500, full_output=True)[:3]
        total += val
        err += e
    if err > atol:
        raise QuadratureError(f"quadrature reached only {err:.3g} (wanted {atol:.3g})")
    return float(total)


# ---------------------------------------------------------------------------
# envelope
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    """``exp(-int_s^t beta) <= R * exp(-b (t - s))`` for all ``0 <= s <= t``."""

    R: float
    b: float
    period: float
    log_R_grid: float
    grid_delta: float
    checked_pairs: int
    max_excess: float

    def bound(self, dt):
        return self.R * np.exp(-self.b * np.asarray(dt, dtype=float))


def _sup_rise(G: np.ndarray) -> float:
    """``max_{s <= u} G[u] - G[s]`` over a sampled path."""
    return float(np.max(G - np.minimum.accumulate(G)))


def fit_envelope(beta, T: float, nodes: int = 2048, pairs: int = 10_000,
                 seed: int = 0) -> Envelope:
    """Exponential envelope of a ``T``-periodic contraction rate.

    ``b`` is the period mean and ``log R`` the largest rise of
    ``u -> int_0^u (b - beta)`` over two periods, taken on ``nodes`` points
    per period; the difference to the half-resolution grid is added as a
    refinement margin.  The pair is then checked on ``pairs`` random
    ``(s, t)`` samples.
    """
    if nodes < 512:
        raise ValueError("need at least 512 nodes per period")
    prof = beta if isinstance(beta, RateProfile) else RateProfile(beta, period=T)
    b = prof.integral(0.0, T) / T
    if not b > 0:
        raise NotExponentiallyErgodicError(
            f"period mean of the contraction rate is {b:.6g} <= 0; no envelope with b > 0")

    def log_r(n):
        u = np.linspace(0.0, 2.0 * T, 2 * n + 1)
        return max(0.0, _sup_rise(b * u - prof.antiderivative(u)))

    fine = log_r(nodes)
    delta = abs(fine - log_r(nodes // 2))
    log_R = fine + delta

    rng = np.random.default_rng(seed)
    s = rng.uniform(0.0, 3.0 * T, pairs)
    t = s + rng.uniform(0.0, 3.0 * T, pairs)
    lhs = np.exp(-(prof.antiderivative(t) - prof.antiderivative(s)))
    rhs = math.exp(log_R) * np.exp(-b * (t - s))
    excess = float(np.max(lhs - rhs))
    if excess > 1e-12:
        # grid missed the supremum; widen R to cover every checked pair
        log_R = max(log_R, float(np.max(-(prof.antiderivative(t) - prof.antiderivative(s))
                                        + b * (t - s))))
    return Envelope(R=math.exp(log_R), b=float(b), period=float(T), log_R_grid=fine,
                    grid_delta=delta, checked_pairs=pairs, max_excess=max(excess, 0.0))


# ---------------------------------------------------------------------------
# evaluated bounds
# ---------------------------------------------------------------------------

def limit_bound_value(R: float, d0: float, b_star: float, b_double_star: float) -> float:
    """``R * d0 * b_star / b_double_star``: bound on limsup of the weighted norm."""
    if not b_double_star > 0:
        raise BoundUndefinedError("envelope rate must be positive")
    return R * d0 * b_star / b_double_star


def mean_coefficient(weights: WeightSequence, j: int, R: float = 1.0,
                     convention: str = "pair") -> float:
    """Coefficient of ``exp(-int beta)`` (or of ``exp(-b t)`` when ``R`` is an envelope
    constant) in the bound on ``|E(t,j) - E(t,0)|``.

    ``pair`` is ``(d_0 + d_j)/W``, the weighted norm of ``delta_j - delta_0``
    over ``W``; ``state`` drops the ``d_0`` term, ``d_j/W``.
    """
    _, _, W = weights.constants()
    if W <= 0:
        raise BoundUndefinedError("mean bound needs W = inf d_i/i > 0")
    dj, d0 = float(weights.d(j)), float(weights.d(0))
    if convention == "pair":
        return R * (d0 + dj) / W
    if convention == "state":
        return R * dj / W
    raise ValueError(f"unknown convention {convention!r}")


@dataclass
class ConvergenceBounds:
    """Bound curves on the distance between two solutions and between means."""

    d: float
    d_star: float
    W: float
    d0: float
    weights: WeightSequence
    integral: Callable  # t -> int_0^t beta_**

    @property
    def applicable(self) -> dict:
        return {"general": True, "uniform": math.isfinite(self.d_star), "mean": self.W > 0}

    def decay(self, t):
        return np.exp(-self.integral(t))

    def general(self, t, initial_weighted_norm: float):
        """Bound on ``||p*(t) - p**(t)||`` given ``||D(p*(0) - p**(0))||``."""
        return initial_weighted_norm / self.d * self.decay(t)

    def uniform(self, t):
        if not math.isfinite(self.d_star):
            raise BoundUndefinedError("uniform bound needs sup d_k < inf")
        return 2.0 * self.d_star / self.d * self.decay(t)

    def mean(self, t, j: int):
        return mean_coefficient(self.weights, j) * self.decay(t)

    def to_dict(self) -> dict:
        app = self.applicable
        return {
            "general": {"applicable": True, "coefficient": 1.0 / self.d,
                        "times": "weighted initial distance"},
            "uniform": {"applicable": app["uniform"],
                        "coefficient": 2.0 * self.d_star / self.d if app["uniform"] else None},
            "mean": {"applicable": app["mean"],
                     "coefficient": (f"({self.d0:g} + d_j)/{self.W:g}" if app["mean"] else None)},
        }


def convergence_bounds(report: "BoundReport") -> ConvergenceBounds:
    d, d_star, W = report.weights.constants(report.N)
    return ConvergenceBounds(d, d_star, W, float(report.weights.d(0)), report.weights,
                             report.profile.antiderivative)


def limit_bound(report: "BoundReport") -> float:
    """``R * d_0 * b_star / b`` from a report with an envelope."""
    if report.envelope is None or report.b_star is None:
        raise BoundUndefinedError(report.message or "no exponential envelope available")
    return limit_bound_value(report.envelope.R, float(report.weights.d(0)), report.b_star,
                             report.envelope.b)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PublishedClaims:
    """Constants asserted for a model elsewhere, compared against recomputation."""

    weighted_arrival_excess: float | None = None
    beta_double_star: TimeFunction | None = None
    R_star_star: float | None = None
    b_star_star: float | None = None
    b_star: float | None = None
    limit_bound: float | None = None
    mean_coefficient: tuple[float, float] | None = None  # c0 + c1 * j


def _agrees(a, b, rtol=1e-9) -> bool:
    if a is None or b is None:
        return False
    return bool(abs(a - b) <= rtol * max(1.0, abs(a), abs(b)))


@dataclass
class BoundReport:
    model: QueueModel
    weights: WeightSequence
    N: int
    profile: RateProfile
    period: float | None
    grid: np.ndarray
    beta_samples: np.ndarray
    binding: np.ndarray
    b_star: float | None
    b_star_delta: float
    envelope: Envelope | None
    ergodicity: dict
    tail_certified: bool
    tail_kind: str
    status: str = "ok"
    message: str = ""
    comparisons: list[dict] = field(default_factory=list)
    assumptions: list[str] = field(default_factory=list)
    summability: dict = field(default_factory=dict)
    overridden: bool = False

    @property
    def discrepancies(self) -> list[dict]:
        return [c for c in self.comparisons if not c["agrees"]]

    @property
    def beta_mean(self) -> float:
        if self.period is not None:
            return self.profile.integral(0.0, self.period) / self.period
        span = float(self.grid[-1])
        return self.profile.integral(0.0, span) / span

    def integral(self, t):
        return self.profile.antiderivative(t)

    def bounds(self) -> ConvergenceBounds:
        return convergence_bounds(self)

    def limit_bound(self) -> float | None:
        try:
            return limit_bound(self)
        except BoundUndefinedError:
            return None

    def to_json(self) -> dict:
        d, d_star, W = self.weights.constants(self.N)
        env = self.envelope
        cb = self.bounds().to_dict()
        if env is not None:
            cb["envelope_form"] = {
                "rate": env.b,
                "general_coefficient": env.R / d,
                "uniform_coefficient": 2 * env.R * d_star / d if math.isfinite(d_star) else None,
            }

        def fin(x):
            return None if x is None or not math.isfinite(x) else x

        return {
            "status": self.status,
            "message": self.message,
            "b_star": self.b_star,
            "b_star_grid_delta": self.b_star_delta,
            "b_double_star_mean": self.beta_mean,
            "R_star_star": env.R if env else None,
            "b_star_star": env.b if env else None,
            "envelope": None if env is None else {
                "period": env.period, "log_R_grid": env.log_R_grid,
                "grid_delta": env.grid_delta, "checked_pairs": env.checked_pairs,
                "max_excess": env.max_excess},
            "weights": {"kind": self.weights.kind, "d": d, "d_star": fin(d_star), "W": W},
            "convergence": cb,
            "limit_bound": self.limit_bound(),
            "ergodicity": self.ergodicity,
            "discrepancies": self.discrepancies,
            "comparisons": self.comparisons,
            "truncation": {"N": self.N, "tail_certified": self.tail_certified,
                           "tail_kind": self.tail_kind},
            "binding_columns": sorted({("tail" if c < 0 else int(c)) for c in self.binding},
                                      key=lambda c: (isinstance(c, str), c if isinstance(c, int) else 0)),
            "summability": {k: (v if math.isfinite(v) else "diverges")
                            for k, v in self.summability.items()},
            "assumptions": self.assumptions,
            "rate_override": self.overridden,
        }

    def csv_rows(self, times, initial_weighted_norm: float = 1.0):
        """Rows ``(t, beta, integral, general bound)``; the bound is per unit
        weighted initial distance unless ``initial_weighted_norm`` is given."""
        times = np.asarray(times, dtype=float)
        beta = self.profile.evaluate(times)
        I = self.integral(times)
        gen = self.bounds().general(times, initial_weighted_norm)
        return np.column_stack((times, beta, I, gen))


def _compare(model, weights, report_parts, claims: PublishedClaims) -> list[dict]:
    out = []
    rate, period, b_star, env, limit = report_parts

    def add(name, published, computed, note=""):
        out.append({"quantity": name, "published": published, "computed": computed,
                    "agrees": _agrees(published, computed), "note": note})

    grid = np.linspace(0.0, period or 1.0, 2049)
    if claims.weighted_arrival_excess is not None and isinstance(model.arrivals, LevelJumpArrivals):
        exc = weighted_arrival_excess(model, weights)
        add("weighted_arrival_excess", claims.weighted_arrival_excess, exc,
            "sum_k (d_k - 1) b_k")
        lam = model.arrivals.rate.evaluate(grid)
        bs = model.catastrophes
        inf = np.array([bs.infimum(t) for t in grid])
        pub = inf - claims.weighted_arrival_excess * lam
        first = rate.evaluate(grid)
        if claims.beta_double_star is not None:
            gap = float(np.max(np.abs(claims.beta_double_star.evaluate(grid) - pub)))
            add("closed_form_vs_formula_max_gap", 0.0, gap,
                "stated closed form against beta_* - excess*lambda with the published excess")
        add("beta_double_star_formula_mean", float(np.trapezoid(pub, grid) / grid[-1]),
            float(np.trapezoid(first, grid) / grid[-1]),
            "beta_* - excess*lambda with the published excess vs column sums")
    if claims.beta_double_star is not None:
        f = claims.beta_double_star
        first = rate.evaluate(grid)
        add("beta_double_star_mean", f.mean(grid[-1]), float(np.trapezoid(first, grid) / grid[-1]),
            f"max pointwise gap {float(np.max(np.abs(f.evaluate(grid) - first))):.6g}")
    if claims.b_star is not None:
        add("b_star", claims.b_star, b_star)
    if claims.R_star_star is not None:
        add("R_star_star", claims.R_star_star, env.R if env else None,
            "published value is an upper estimate" if env and env.R <= claims.R_star_star else "")
    if claims.b_star_star is not None:
        add("b_star_star", claims.b_star_star, env.b if env else None)
    if claims.limit_bound is not None:
        add("limit_bound", claims.limit_bound, limit)
    if claims.mean_coefficient is not None and claims.R_star_star is not None:
        try:
            c0, c1 = claims.mean_coefficient
            for j in (1, 5, 20):
                add(f"mean_coefficient_j{j}", c0 + c1 * j,
                    mean_coefficient(weights, j, R=claims.R_star_star),
                    "envelope-scaled (d_0 + d_j)/W with the published R")
        except BoundUndefinedError:
            pass
    return out


def build_report(model: QueueModel, weights: WeightSequence, N: int, t_max: float = 10.0,
                 nodes: int = 2048, claims: PublishedClaims | None = None,
                 beta_override: TimeFunction | None = None) -> BoundReport:
    """Compute the contraction rate, its integral, envelope and limit bound.

    ``beta_override`` replaces the computed rate by a user-supplied one (for
    falsification runs); the report is then flagged as overridden.
    """
    rate = ContractionRate(model, weights, N)
    period = model.period()
    func = beta_override if beta_override is not None else rate
    if beta_override is not None and period is None:
        period = beta_override.effective_period
    profile = RateProfile(func, period=period, t_max=None if period else t_max, cells=nodes)
    span = period if period is not None else t_max
    grid = np.linspace(0.0, span, nodes + 1)
    samples, binding = rate.evaluate_with_column(grid)
    if beta_override is not None:
        samples = beta_override.evaluate(grid)

    bs_grid = rate.beta_star(grid)
    bs_half = rate.beta_star(np.linspace(0.0, span, nodes // 2 + 1))
    b_star = float(bs_grid.max())
    b_star_delta = float(abs(b_star - bs_half.max()))

    env, status, message = None, "ok", ""
    if period is not None:
        try:
            env = fit_envelope(profile, period, nodes=nodes)
        except NotExponentiallyErgodicError as exc:
            status, message = "bound_undefined", str(exc)
        ergo = {"certified": env is not None, "method": "positive period mean",
                "period_mean": profile.integral(0.0, period) / period}
    else:
        I_end = profile.integral(0.0, t_max)
        I_half = profile.integral(0.0, t_max / 2)
        ergo = {"certified": False, "method": "heuristic: integral growth on [0, t_max]",
                "plausible": bool(I_end > I_half > 0)}
        if not ergo["plausible"]:
            status, message = "bound_undefined", "integral of the contraction rate does not grow"
    limit = None
    if env is not None:
        limit = limit_bound_value(env.R, float(weights.d(0)), b_star, env.b)

    assumptions = [INF_STATE_ASSUMPTION]
    if not rate.tail_certified:
        assumptions.append(f"truncated infimum: columns beyond {N} scanned, not certified")
    if beta_override is not None:
        assumptions.append("contraction rate overridden by user input")
    report = BoundReport(
        model=model, weights=weights, N=N, profile=profile, period=period, grid=grid,
        beta_samples=samples, binding=binding, b_star=b_star, b_star_delta=b_star_delta,
        envelope=env, ergodicity=ergo, tail_certified=rate.tail_certified,
        tail_kind=rate.tail_kind, status=status, message=message, assumptions=assumptions,
        summability=model.summability(weights), overridden=beta_override is not None)
    if claims is not None:
        report.comparisons = _compare(model, weights, (rate, period, b_star, env, limit), claims)
    return report
