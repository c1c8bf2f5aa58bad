"""Time-varying intensities, queue models with catastrophes, weight sequences.

Everything here is an immutable value object validated on construction.
Per-state sequences (catastrophe rates, arrival target weights, weights
``d_k``) always carry a tail rule, so infima and suprema over the whole
infinite state space are exact rather than truncated guesses.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    InvalidWeightsError,
    ModelValidationError,
    UnsupportedFamilyError,
)

__all__ = [
    "TimeFunction",
    "BSequence",
    "LevelJumpArrivals",
    "BatchArrivals",
    "SingleServer",
    "RateTable",
    "CatastropheTail",
    "Catastrophes",
    "QueueModel",
    "WeightSequence",
    "eval_rate",
    "b_partial_tail",
    "beta_star",
    "weight_constants",
    "common_period",
]

TIME_KINDS = ("constant", "trig_poly", "piecewise_constant", "tabulated")

# round-off below this is treated as zero rather than a negative intensity
_NEG_TOL = 1e-12


def _as_tuple(xs) -> tuple:
    return tuple(float(x) for x in xs)


@dataclass(frozen=True)
class TimeFunction:
    """Nonnegative scalar intensity of time.

    ``signed=True`` lifts the nonnegativity requirement; it is meant for
    contraction rates, never for intensities.

    Kinds
    -----
    constant
        ``value``.
    trig_poly
        ``offset + sum(a*cos(2 pi f t) + b*sin(2 pi f t))`` with ``terms`` a
        tuple of ``(a, b, f)``.
    piecewise_constant
        ``values[0]`` on ``[0, breakpoints[0])``, ``values[i]`` on
        ``[breakpoints[i-1], breakpoints[i])``, last value afterwards.
    tabulated
        Linear interpolation through ``(times, values)``, constant outside.

    With ``period`` set, piecewise and tabulated functions are evaluated at
    ``t mod period``; for trig polynomials the period is checked against the
    frequencies.
    """

    kind: str
    value: float = 0.0
    offset: float = 0.0
    terms: tuple[tuple[float, float, float], ...] = ()
    breakpoints: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    times: tuple[float, ...] = ()
    period: float | None = None
    signed: bool = False
    name: str = field(default="", compare=False)

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, value: float, name: str = "", signed: bool = False) -> "TimeFunction":
        return cls("constant", value=float(value), signed=signed, name=name)

    @classmethod
    def trig(cls, offset: float, terms=(), period: float | None = None,
             name: str = "", signed: bool = False) -> "TimeFunction":
        terms = tuple((float(a), float(b), float(f)) for a, b, f in terms)
        return cls("trig_poly", offset=float(offset), terms=terms,
                   period=None if period is None else float(period), signed=signed,
                   name=name)

    @classmethod
    def piecewise(cls, breakpoints, values, period: float | None = None,
                  name: str = "") -> "TimeFunction":
        return cls("piecewise_constant", breakpoints=_as_tuple(breakpoints),
                   values=_as_tuple(values),
                   period=None if period is None else float(period), name=name)

    @classmethod
    def tabulated(cls, times, values, period: float | None = None,
                  name: str = "") -> "TimeFunction":
        return cls("tabulated", times=_as_tuple(times), values=_as_tuple(values),
                   period=None if period is None else float(period), name=name)

    def named(self, name: str) -> "TimeFunction":
        return TimeFunction(self.kind, self.value, self.offset, self.terms,
                            self.breakpoints, self.values, self.times,
                            self.period, self.signed, name)

    # -- validation -------------------------------------------------------
    def __post_init__(self):
        label = self.name or self.kind
        if self.kind not in TIME_KINDS:
            raise ModelValidationError(f"{label}: unknown time-function kind {self.kind!r}")
        if self.period is not None and not (math.isfinite(self.period) and self.period > 0):
            raise ModelValidationError(f"{label}: period must be positive, got {self.period}")
        nums = (self.value, self.offset, *self.breakpoints, *self.values, *self.times,
                *(x for term in self.terms for x in term))
        if not all(math.isfinite(x) for x in nums):
            raise ModelValidationError(f"{label}: non-finite parameter")

        if self.kind == "constant":
            if self.value < 0 and not self.signed:
                raise ModelValidationError(f"{label}: negative constant rate {self.value}")
        elif self.kind == "trig_poly":
            for _, _, f in self.terms:
                if f < 0:
                    raise ModelValidationError(f"{label}: negative frequency {f}")
            if self.period is not None:
                for _, _, f in self.terms:
                    k = f * self.period
                    if abs(k - round(k)) > 1e-9:
                        raise ModelValidationError(
                            f"{label}: frequency {f} incompatible with period {self.period}")
            if self.offset - self._amplitude() < -_NEG_TOL and not self.signed:
                span = self.effective_period or 1.0
                grid = np.linspace(0.0, span, 4097)
                vals = self._raw(grid)
                i = int(np.argmin(vals))
                if vals[i] < -_NEG_TOL:
                    raise ModelValidationError(
                        f"{label}: negative rate {vals[i]:.6g} at t={grid[i]:.6g}")
        elif self.kind == "piecewise_constant":
            if len(self.values) != len(self.breakpoints) + 1:
                raise ModelValidationError(f"{label}: need len(values) == len(breakpoints)+1")
            bp = np.asarray(self.breakpoints)
            if np.any(np.diff(bp) <= 0) or np.any(bp <= 0):
                raise ModelValidationError(f"{label}: breakpoints must be positive and increasing")
            if self.period is not None and len(bp) and bp[-1] >= self.period:
                raise ModelValidationError(f"{label}: breakpoints must lie inside the period")
            if min(self.values) < 0 and not self.signed:
                raise ModelValidationError(f"{label}: negative piece value {min(self.values)}")
        else:
            if len(self.times) != len(self.values) or not self.times:
                raise ModelValidationError(f"{label}: times/values length mismatch")
            tt = np.asarray(self.times)
            if np.any(np.diff(tt) <= 0) or tt[0] < 0:
                raise ModelValidationError(f"{label}: sample times must be nonnegative and increasing")
            if self.period is not None and tt[-1] > self.period:
                raise ModelValidationError(f"{label}: samples extend beyond the period")
            if min(self.values) < 0 and not self.signed:
                raise ModelValidationError(f"{label}: negative sample {min(self.values)}")

    def _amplitude(self) -> float:
        amp = 0.0
        for a, b, f in self.terms:
            amp += abs(a) if f == 0 else math.hypot(a, b)
        return amp

    # -- structure --------------------------------------------------------
    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "trig_poly":
            return all(f == 0 or (a == 0 and b == 0) for a, b, f in self.terms)
        return len(set(self.values)) <= 1

    @property
    def effective_period(self) -> float | None:
        """Declared period, or the fundamental period of a trig polynomial."""
        if self.period is not None:
            return self.period
        if self.kind != "trig_poly":
            return None
        freqs = [f for a, b, f in self.terms if f > 0 and (a or b)]
        if not freqs:
            return None
        g = None
        for f in freqs:
            q = Fraction(f).limit_denominator(10**6)
            if abs(float(q) - f) > 1e-12:
                return None
            g = q if g is None else Fraction(math.gcd(g.numerator * q.denominator,
                                                      q.numerator * g.denominator),
                                             g.denominator * q.denominator)
        return float(1 / g)

    # -- evaluation -------------------------------------------------------
    def _wrap(self, t):
        return np.mod(t, self.period) if self.period is not None else t

    def _knots(self):
        """Piecewise-linear knots (from 0) for the tabulated kind."""
        tt = np.asarray(self.times, dtype=float)
        vv = np.asarray(self.values, dtype=float)
        if tt[0] > 0:
            tt = np.concatenate(([0.0], tt))
            vv = np.concatenate(([vv[0]], vv))
        return tt, vv

    def _raw(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full(t.shape, self.value)
        if self.kind == "trig_poly":
            out = np.full(t.shape, self.offset)
            for a, b, f in self.terms:
                w = 2.0 * math.pi * f * t
                out = out + a * np.cos(w) + b * np.sin(w)
            return out
        s = self._wrap(t)
        if self.kind == "piecewise_constant":
            idx = np.searchsorted(np.asarray(self.breakpoints), s, side="right")
            return np.asarray(self.values)[idx]
        return np.interp(s, self.times, self.values)

    def evaluate(self, t):
        """Vectorized evaluation; raises on a negative intensity."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise ValueError("rates are defined for t >= 0 only")
        out = self._raw(t_arr)
        if out.size and out.min() < 0 and not self.signed:
            bad = np.flatnonzero(out < -_NEG_TOL)
            if bad.size:
                i = bad[0]
                raise ModelValidationError(
                    f"{self.name or self.kind}: negative rate {out.flat[i]:.6g} "
                    f"at t={t_arr.flat[i] if t_arr.ndim else float(t_arr):.6g}")
            out = np.maximum(out, 0.0)
        return out

    def __call__(self, t: float) -> float:
        return float(self.evaluate(t))

    @cached_property
    def scalar(self):
        """Float-to-float evaluator for hot loops; falls back to ``evaluate``
        whenever a value would need checking."""
        if self.kind == "constant":
            v = self.value if (self.value >= 0 or self.signed) else None
            return (lambda t: v) if v is not None else (lambda t: float(self.evaluate(t)))
        if self.kind == "trig_poly":
            a0, signed = self.offset, self.signed
            terms = [(a, b, 2.0 * math.pi * f) for a, b, f in self.terms]

            def trig(t):
                s = a0
                for a, b, w in terms:
                    s += a * math.cos(w * t) + b * math.sin(w * t)
                return s if (s >= 0.0 or signed) else float(self.evaluate(t))
            return trig
        return lambda t: float(self.evaluate(t))

    # -- integrals and bounds ---------------------------------------------
    def _antiderivative_period(self, s):
        """Integral from 0 to s for s within [0, period] (or unbounded if aperiodic)."""
        s = np.asarray(s, dtype=float)
        if self.kind == "piecewise_constant":
            knots = np.concatenate(([0.0], self.breakpoints))
            vals = np.asarray(self.values)
            cum = np.concatenate(([0.0], np.cumsum(vals[:-1] * np.diff(knots))))
            idx = np.searchsorted(np.asarray(self.breakpoints), s, side="right")
            return cum[idx] + vals[idx] * (s - knots[idx])
        # tabulated
        kt, kv = self._knots()
        seg = np.diff(kt)
        cum = np.concatenate(([0.0], np.cumsum(0.5 * (kv[:-1] + kv[1:]) * seg)))
        idx = np.clip(np.searchsorted(kt, s, side="right") - 1, 0, len(kt) - 1)
        slope = np.zeros(len(kt))
        slope[:-1] = np.diff(kv) / seg
        ds = s - kt[idx]
        return cum[idx] + kv[idx] * ds + 0.5 * slope[idx] * ds * ds

    def antiderivative(self, t):
        """Exact integral of the function from 0 to ``t`` (vectorized)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return self.value * t
        if self.kind == "trig_poly":
            out = self.offset * t
            for a, b, f in self.terms:
                if f == 0:
                    out = out + a * t
                else:
                    w = 2.0 * math.pi * f
                    out = out + (a * np.sin(w * t) - b * (np.cos(w * t) - 1.0)) / w
            return out
        if self.period is None:
            return self._antiderivative_period(t)
        n = np.floor(t / self.period)
        full = self._antiderivative_period(self.period)
        return n * full + self._antiderivative_period(t - n * self.period)

    def integral(self, t0: float, t1: float) -> float:
        return float(self.antiderivative(t1) - self.antiderivative(t0))

    def mean(self, span: float) -> float:
        return self.integral(0.0, span) / span

    def sup_bound(self, t0: float, t1: float) -> float:
        """Certified upper bound of the function on ``[t0, t1]``."""
        if self.kind == "constant":
            return self.value
        if self.kind == "trig_poly":
            return self.offset + self._amplitude()
        if self.period is not None and t1 - t0 >= self.period:
            return max(self.values)
        s0 = float(self._wrap(t0))
        s1 = s0 + (t1 - t0)
        spans = [(s0, s1)]
        if self.period is not None and s1 > self.period:
            spans = [(s0, self.period), (0.0, s1 - self.period)]
        best = 0.0
        for a, b in spans:
            if self.kind == "piecewise_constant":
                bp = np.asarray(self.breakpoints)
                i0 = int(np.searchsorted(bp, a, side="right"))
                i1 = int(np.searchsorted(bp, b, side="right"))
                best = max(best, max(self.values[i0:i1 + 1]))
            else:
                inside = [v for ti, v in zip(self.times, self.values) if a < ti < b]
                ends = np.interp([a, b], self.times, self.values)
                best = max(best, *inside, *ends)
        return float(best)


def eval_rate(f: TimeFunction, t: float) -> float:
    """Evaluate an intensity at ``t >= 0``."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return f(t)


def common_period(functions: Sequence[TimeFunction]) -> float | None:
    """Smallest period shared by all non-constant functions, or None."""
    periods = []
    for f in functions:
        if f.is_constant:
            continue
        p = f.effective_period
        if p is None:
            return None
        periods.append(p)
    if not periods:
        return 1.0
    big = max(periods)
    for p in periods:
        r = big / p
        if abs(r - round(r)) > 1e-9:
            return None
    return big


# ---------------------------------------------------------------------------
# per-state sequences
# ---------------------------------------------------------------------------

B_KINDS = ("cubic_telescoping", "explicit")


@dataclass(frozen=True)
class BSequence:
    """Arrival target weights ``b_1, b_2, ...``.

    ``cubic_telescoping`` is ``b_k = 4/(k(k+1)(k+2))`` whose tail sums
    telescope: ``B_m = 2/(m(m+1))`` and ``sum_{i>=m} i*b_i = 4/(m+1)``.
    ``explicit`` lists ``b_1..b_K`` with zeros afterwards.
    """

    kind: str
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in B_KINDS:
            raise ModelValidationError(f"unknown b-sequence kind {self.kind!r}")
        if self.kind == "explicit":
            if not self.values:
                raise ModelValidationError("explicit b-sequence needs at least one value")
            if any(not math.isfinite(v) or v < 0 for v in self.values):
                raise ModelValidationError("b_k must be finite and nonnegative")

    @classmethod
    def cubic(cls) -> "BSequence":
        return cls("cubic_telescoping")

    @property
    def support(self) -> int | None:
        """Largest index with possibly nonzero ``b_k``; None when infinite."""
        return None if self.kind == "cubic_telescoping" else len(self.values)

    def b(self, k):
        k = np.asarray(k, dtype=float)
        if self.kind == "cubic_telescoping":
            safe = np.maximum(k, 1.0)
            return np.where(k >= 1, 4.0 / (safe * (safe + 1) * (safe + 2)), 0.0)
        vals = np.concatenate(([0.0], self.values, [0.0]))
        idx = np.clip(k.astype(int), 0, len(vals) - 1)
        return np.where((k >= 1) & (k <= len(self.values)), vals[idx], 0.0)

    def tail_mass(self, m: int) -> float:
        """``B_m = sum_{i>=m} b_i``, for ``m >= 1``."""
        m = max(int(m), 1)
        if self.kind == "cubic_telescoping":
            return 2.0 / (m * (m + 1.0))
        return float(math.fsum(self.values[m - 1:]))

    def first_moment_tail(self, m: int) -> float:
        """``sum_{i>=m} i * b_i``."""
        m = max(int(m), 1)
        if self.kind == "cubic_telescoping":
            return 4.0 / (m + 1.0)
        return float(math.fsum(i * v for i, v in enumerate(self.values, 1) if i >= m))

    def weighted_tail(self, m: int, weights: "WeightSequence") -> float:
        """``sum_{i>=m} d_i * b_i``; ``inf`` when the series diverges."""
        m = max(int(m), 1)
        if self.kind == "explicit":
            idx = np.arange(m, len(self.values) + 1)
            if idx.size == 0:
                return 0.0
            return float(math.fsum(weights.d(idx) * np.asarray(self.values[m - 1:])))
        aff = weights.affine_tail()
        if aff is None:
            return math.inf
        slope, intercept, start = aff
        head = 0.0
        if m < start:
            idx = np.arange(m, start)
            head = math.fsum(weights.d(idx) * self.b(idx))
            m = start
        return head + slope * self.first_moment_tail(m) + intercept * self.tail_mass(m)

    def sum_k_tail_mass(self) -> float:
        """``sum_k k * B_k`` (inf when divergent, as for the cubic family)."""
        if self.kind == "cubic_telescoping":
            return math.inf
        return float(math.fsum(k * self.tail_mass(k) for k in range(1, len(self.values) + 1)))

    def sample_target(self, x: int, u: float) -> int:
        """Inverse-CDF draw of a jump target ``i > x`` with prob ``b_i / B_{x+1}``."""
        v = u * self.tail_mass(x + 1)
        if self.kind == "cubic_telescoping":
            # B_i >= v  <=>  i(i+1) <= 2/v; target is the largest such i
            i = max(int((math.sqrt(1.0 + 8.0 / v) - 1.0) / 2.0), x + 1) if v > 0 else x + 1
            while i > x + 1 and self.tail_mass(i) < v:
                i -= 1
            while self.tail_mass(i + 1) >= v and v > 0:
                i += 1
            return i
        cum = 0.0
        last = x + 1
        for i in range(len(self.values), x, -1):
            if self.values[i - 1] > 0:
                cum += self.values[i - 1]
                last = i
                if cum >= v:
                    return i
        return last


@dataclass(frozen=True)
class LevelJumpArrivals:
    """From state ``j`` a group arrives taking the queue to ``i > j`` at rate ``rate(t) * b_i``."""

    rate: TimeFunction
    b: BSequence


@dataclass(frozen=True)
class BatchArrivals:
    """From every state ``j`` a batch of ``k`` arrives at rate ``rate(t) * sizes[k-1]``."""

    rate: TimeFunction
    sizes: tuple[float, ...]

    def __post_init__(self):
        if not self.sizes or any(not math.isfinite(c) or c < 0 for c in self.sizes):
            raise ModelValidationError("batch sizes must be a nonempty nonnegative list")

    @property
    def total(self) -> float:
        return float(math.fsum(self.sizes))

    @property
    def mean_size(self) -> float:
        return float(math.fsum(k * c for k, c in enumerate(self.sizes, 1)))


@dataclass(frozen=True)
class SingleServer:
    """One-step service ``j -> j-1`` at rate ``rate(t)`` for ``j >= 1``."""

    rate: TimeFunction


@dataclass(frozen=True)
class RateTable:
    """Explicit transitions ``(source, size, rate)``.

    Used for arrivals (``source -> source + size``) or services
    (``source -> source - size``); no transition exists outside the table.
    """

    entries: tuple[tuple[int, int, TimeFunction], ...]

    def __post_init__(self):
        for src, size, f in self.entries:
            if src < 0 or size < 1:
                raise ModelValidationError(f"bad transition entry (from={src}, size={size})")
            if not isinstance(f, TimeFunction):
                raise ModelValidationError("rate table entries need TimeFunction rates")

    @property
    def max_source(self) -> int:
        return max((s for s, _, _ in self.entries), default=-1)


CATASTROPHE_TAILS = ("constant", "harmonic")


@dataclass(frozen=True)
class CatastropheTail:
    """Closed-form catastrophe rates beyond the explicit prefix.

    ``constant``: ``beta_k(t) = base(t)``.
    ``harmonic``: ``beta_k(t) = base(t) + coefficient(t)/k``; the coefficient
    is an intensity (nonnegative), so the sequence decreases in ``k`` and its
    infimum is the limit ``base(t)``.
    """

    kind: str
    base: TimeFunction
    coefficient: TimeFunction | None = None

    def __post_init__(self):
        if self.kind not in CATASTROPHE_TAILS:
            raise ModelValidationError(f"unknown catastrophe tail kind {self.kind!r}")
        if self.kind == "harmonic" and self.coefficient is None:
            raise ModelValidationError("harmonic tail needs a coefficient function")
        if self.kind == "constant" and self.coefficient is not None:
            raise ModelValidationError("constant tail takes no coefficient")


@dataclass(frozen=True)
class Catastrophes:
    """Per-state disaster intensities ``beta_k(t)``, ``k >= 1``.

    States ``1..len(prefix)`` use the prefix; higher states follow ``tail``.
    Without a tail, the last prefix entry applies to every higher state.
    No prefix and no tail means no catastrophes at all.
    """

    prefix: tuple[TimeFunction, ...] = ()
    tail: CatastropheTail | None = None

    @property
    def is_zero(self) -> bool:
        return not self.prefix and self.tail is None

    def components(self, k: int) -> list[tuple[TimeFunction, float]]:
        """``beta_k`` as a list of ``(function, scale)`` pairs summed together."""
        if k < 1 or self.is_zero:
            return []
        if k <= len(self.prefix):
            return [(self.prefix[k - 1], 1.0)]
        if self.tail is None:
            return [(self.prefix[-1], 1.0)]
        out = [(self.tail.base, 1.0)]
        if self.tail.kind == "harmonic":
            out.append((self.tail.coefficient, 1.0 / k))
        return out

    def rate(self, k: int, t: float) -> float:
        return float(sum(f(t) * s for f, s in self.components(k)))

    def infimum(self, t: float) -> float:
        """``inf_{k>=1} beta_k(t)``, exact by the tail rule."""
        if self.is_zero:
            return 0.0
        vals = [f(t) for f in self.prefix]
        if self.tail is not None:
            vals.append(self.tail.base(t))
        return float(min(vals))

    def sup_bound(self, k: int, t0: float, t1: float) -> float:
        return float(sum(f.sup_bound(t0, t1) * s for f, s in self.components(k)))

    def functions(self) -> Iterator[TimeFunction]:
        yield from self.prefix
        if self.tail is not None:
            yield self.tail.base
            if self.tail.coefficient is not None:
                yield self.tail.coefficient


@dataclass(frozen=True)
class QueueModel:
    """Nonstationary Markovian queue with batch arrivals, services and catastrophes."""

    arrivals: LevelJumpArrivals | BatchArrivals | RateTable | None = None
    services: SingleServer | RateTable | None = None
    catastrophes: Catastrophes = field(default_factory=Catastrophes)

    def __post_init__(self):
        if isinstance(self.services, RateTable):
            for src, size, _ in self.services.entries:
                if size > src:
                    raise ModelValidationError(
                        f"service of {size} customers from state {src} leaves the state space")

    @property
    def family(self) -> str:
        if isinstance(self.arrivals, LevelJumpArrivals):
            return "level_jump"
        if isinstance(self.arrivals, BatchArrivals):
            return "batch"
        return "general"

    def functions(self) -> list[TimeFunction]:
        fs: list[TimeFunction] = []
        for part in (self.arrivals, self.services):
            if isinstance(part, RateTable):
                fs.extend(f for _, _, f in part.entries)
            elif part is not None:
                fs.append(part.rate)
        fs.extend(self.catastrophes.functions())
        return fs

    def period(self) -> float | None:
        return common_period(self.functions())

    def beta_star(self, t: float) -> float:
        return self.catastrophes.infimum(t)

    def validate(self, t_max: float = 10.0, n: int = 1001) -> None:
        """Sample every intensity on a grid; raises on negative values."""
        grid = np.linspace(0.0, t_max, n)
        for f in self.functions():
            f.evaluate(grid)
        if isinstance(self.arrivals, LevelJumpArrivals):
            if self.arrivals.b.tail_mass(1) > 1.0 + 1e-12:
                warnings.warn("sum of b_k exceeds 1; arrival rate from state 0 exceeds rate(t)",
                              stacklevel=2)

    def summability(self, weights: "WeightSequence | None" = None) -> dict:
        """Series that must converge for the weighted bounds, plus the advisory ``sum k B_k``."""
        out: dict = {}
        if isinstance(self.arrivals, LevelJumpArrivals):
            b = self.arrivals.b
            out["sum_b"] = b.tail_mass(1)
            out["sum_k_B_k"] = b.sum_k_tail_mass()
            if weights is not None:
                out["sum_d_b"] = b.weighted_tail(1, weights)
        return out

    # -- transition enumeration (used by the simulator) ---------------------
    def max_diagonal(self, N: int, t: float) -> float:
        """``max_{i<=N} |q_ii(t)|`` on the infinite model (no truncation losses)."""
        best = 0.0
        for x in range(N + 1):
            best = max(best, self.total_outflow(x, t))
        return best

    def arrival_outflow(self, x: int, t: float) -> float:
        a = self.arrivals
        if isinstance(a, LevelJumpArrivals):
            return a.rate(t) * a.b.tail_mass(x + 1)
        if isinstance(a, BatchArrivals):
            return a.rate(t) * a.total
        if isinstance(a, RateTable):
            return float(sum(f(t) for s, _, f in a.entries if s == x))
        return 0.0

    def service_outflow(self, x: int, t: float) -> float:
        s = self.services
        if isinstance(s, SingleServer):
            return s.rate(t) if x >= 1 else 0.0
        if isinstance(s, RateTable):
            return float(sum(f(t) for src, _, f in s.entries if src == x))
        return 0.0

    def total_outflow(self, x: int, t: float) -> float:
        return (self.arrival_outflow(x, t) + self.service_outflow(x, t)
                + (self.catastrophes.rate(x, t) if x >= 1 else 0.0))


def b_partial_tail(model: QueueModel, k: int) -> float:
    """``B_k = sum_{i>=k} b_i`` of a level-jump model."""
    if not isinstance(model.arrivals, LevelJumpArrivals):
        raise UnsupportedFamilyError(f"B_k is defined for level_jump models, not {model.family}")
    if k < 1:
        raise ValueError("k must be >= 1")
    return model.arrivals.b.tail_mass(k)


def beta_star(model: QueueModel, t: float) -> float:
    """Common catastrophe rate ``inf_{i>=1} beta_i(t)``."""
    return model.beta_star(t)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

WEIGHT_KINDS = ("constant_one", "linear", "geometric", "explicit")


@dataclass(frozen=True)
class WeightSequence:
    """Positive weights ``d_0, d_1, ...`` for the weighted l1 norm.

    ``linear`` is ``d_k = k + 1``; ``geometric`` is ``d_k = rho**k``;
    ``explicit`` lists ``d_0..d_{P-1}`` and continues with
    ``tail_slope * k + tail_intercept`` (default: repeat the last value).
    """

    kind: str
    rho: float = 0.0
    values: tuple[float, ...] = ()
    tail_slope: float = 0.0
    tail_intercept: float | None = None

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise InvalidWeightsError(f"unknown weight kind {self.kind!r}")
        if self.kind == "geometric" and not (self.rho > 1.0 and math.isfinite(self.rho)):
            raise InvalidWeightsError(f"geometric weights need rho > 1, got {self.rho}")
        if self.kind == "explicit":
            if not self.values or min(self.values) <= 0:
                raise InvalidWeightsError("explicit weights must be positive")
            slope, icpt, start = self.affine_tail()
            if slope < 0 or (slope == 0 and icpt <= 0) or slope * start + icpt <= 0:
                raise InvalidWeightsError("weight tail must stay positive (inf d_k = 0)")

    @classmethod
    def linear(cls) -> "WeightSequence":
        return cls("linear")

    @classmethod
    def ones(cls) -> "WeightSequence":
        return cls("constant_one")

    @classmethod
    def geometric(cls, rho: float) -> "WeightSequence":
        return cls("geometric", rho=float(rho))

    def d(self, k):
        k = np.asarray(k, dtype=float)
        if self.kind == "constant_one":
            return np.ones_like(k)
        if self.kind == "linear":
            return k + 1.0
        if self.kind == "geometric":
            return self.rho ** k
        slope, icpt, start = self.affine_tail()
        vals = np.asarray(self.values)
        idx = np.clip(k.astype(int), 0, len(vals) - 1)
        return np.where(k < start, vals[idx], slope * k + icpt)

    def affine_tail(self) -> tuple[float, float, int] | None:
        """``(slope, intercept, start)`` with ``d_k = slope*k + intercept`` for ``k >= start``."""
        if self.kind == "constant_one":
            return 0.0, 1.0, 0
        if self.kind == "linear":
            return 1.0, 1.0, 0
        if self.kind == "geometric":
            return None
        start = len(self.values)
        icpt = self.values[-1] if self.tail_intercept is None else self.tail_intercept
        return self.tail_slope, icpt, start

    def constants(self, N: int = 1) -> tuple[float, float, float]:
        """``(d, d_star, W)``: ``inf d_k``, ``sup d_k``, ``inf_{i>=1} d_i / i``."""
        if N < 1:
            raise ValueError("N must be >= 1")
        if self.kind == "constant_one":
            return 1.0, 1.0, 0.0
        if self.kind == "linear":
            return 1.0, math.inf, 1.0
        if self.kind == "geometric":
            # rho**x / x is minimized at x = 1/ln(rho); check the neighbouring integers
            x = 1.0 / math.log(self.rho)
            cands = {1, max(1, math.floor(x)), max(1, math.ceil(x))}
            return 1.0, math.inf, min(self.rho ** i / i for i in cands)
        slope, icpt, start = self.affine_tail()
        head = np.asarray(self.values)
        # tail values slope*k + icpt, k >= start: monotone in k
        tail_first = slope * start + icpt
        d_inf = min(head.min(), tail_first if slope >= 0 else -math.inf)
        d_sup = math.inf if slope > 0 else max(head.max(), tail_first)
        ratios = [head[i] / i for i in range(1, len(head))]
        # slope + icpt/k: decreasing to slope when icpt >= 0, increasing otherwise
        k0 = max(start, 1)
        ratios.append(slope if icpt >= 0 else slope + icpt / k0)
        if d_inf <= 0:
            raise InvalidWeightsError("inf d_k = 0")
        return float(d_inf), float(d_sup), float(min(ratios))


def weight_constants(w: WeightSequence, N: int = 1) -> tuple[float, float, float]:
    """Exact ``(d, d_star, W)`` of a weight sequence."""
    return w.constants(N)
