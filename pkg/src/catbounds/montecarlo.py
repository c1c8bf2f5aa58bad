"""Sample paths of the time-inhomogeneous chain by thinning.

Each path owns a generator spawned from ``SeedSequence(seed)``, so path
``m`` is the same whatever the path count or evaluation order.  Proposals
run at a majorant of the total outflow of the current state over a window
of unit length; the majorant is rebuilt at window boundaries and after every
jump.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MajorantError
from .model import (
    BatchArrivals,
    LevelJumpArrivals,
    QueueModel,
    RateTable,
    SingleServer,
    TimeFunction,
)
from .solver import Trajectory

__all__ = ["Event", "PathEnsemble", "TVComparison", "simulate_paths", "compare_tv"]

KINDS = ("arrival", "service", "catastrophe")
WINDOW = 1.0


@dataclass(frozen=True)
class Event:
    time: float
    source: int
    target: int
    kind: str


class _Transitions:
    """Outflow rates, majorants and jump targets of a model's states."""

    def __init__(self, model: QueueModel):
        self.model = model
        self._sup: dict[tuple[TimeFunction, int], float] = {}
        arr, srv = model.arrivals, model.services
        self.arr_table = self._table(arr) if isinstance(arr, RateTable) else {}
        self.srv_table = self._table(srv) if isinstance(srv, RateTable) else {}

    @staticmethod
    def _table(tab: RateTable) -> dict[int, list[tuple[int, TimeFunction]]]:
        out: dict[int, list] = {}
        for src, size, f in tab.entries:
            out.setdefault(src, []).append((size, f))
        return out

    @staticmethod
    def f(fn: TimeFunction, t: float) -> float:
        return fn.scalar(t)

    def sup(self, fn: TimeFunction, window: int) -> float:
        key = (fn, window)
        if key not in self._sup:
            self._sup[key] = fn.sup_bound(window * WINDOW, (window + 1) * WINDOW)
        return self._sup[key]

    def _parts(self, x: int):
        """``[(kind, function, scale)]`` with every outflow of state ``x``."""
        arr, srv = self.model.arrivals, self.model.services
        parts = []
        if isinstance(arr, LevelJumpArrivals):
            parts.append(("arrival", arr.rate, arr.b.tail_mass(x + 1)))
        elif isinstance(arr, BatchArrivals):
            parts.append(("arrival", arr.rate, arr.total))
        else:
            parts.extend(("arrival", f, 1.0) for _, f in self.arr_table.get(x, ()))
        if isinstance(srv, SingleServer) and x >= 1:
            parts.append(("service", srv.rate, 1.0))
        else:
            parts.extend(("service", f, 1.0) for _, f in self.srv_table.get(x, ()))
        if x >= 1:
            parts.extend(("catastrophe", f, s) for f, s in self.model.catastrophes.components(x))
        return [p for p in parts if p[2] > 0]

    def rates(self, x: int, t: float) -> tuple[float, float, float]:
        acc = {"arrival": 0.0, "service": 0.0, "catastrophe": 0.0}
        for kind, fn, scale in self._parts(x):
            acc[kind] += scale * self.f(fn, t)
        return acc["arrival"], acc["service"], acc["catastrophe"]

    def majorant(self, x: int, window: int) -> float:
        return sum(scale * self.sup(fn, window) for _, fn, scale in self._parts(x))

    def _pick(self, options, t: float, u: float) -> int:
        rates = [self.f(fn, t) for _, fn in options]
        v, cum = u * sum(rates), 0.0
        for (size, _), r in zip(options, rates):
            cum += r
            if v < cum:
                return size
        return options[-1][0]

    def arrival_target(self, x: int, t: float, u: float) -> int:
        arr = self.model.arrivals
        if isinstance(arr, LevelJumpArrivals):
            return arr.b.sample_target(x, u)
        if isinstance(arr, BatchArrivals):
            cum = np.cumsum(arr.sizes)
            k = int(np.searchsorted(cum, u * cum[-1], side="right"))
            return x + min(k, len(arr.sizes) - 1) + 1
        return x + self._pick(self.arr_table[x], t, u)

    def service_target(self, x: int, t: float, u: float) -> int:
        if isinstance(self.model.services, SingleServer):
            return x - 1
        return x - self._pick(self.srv_table[x], t, u)


def _path(tr: _Transitions, x0: int, t_max: float, eval_times: np.ndarray,
          rng: np.random.Generator, record: bool):
    """One path: states at ``eval_times`` and (optionally) its events."""
    states = np.empty(len(eval_times), dtype=np.int64)
    events: list[Event] = []
    n_events = 0
    x, t, nxt = x0, 0.0, 0
    while True:
        window = int(t // WINDOW)
        w_end = min((window + 1) * WINDOW, t_max)
        lam = tr.majorant(x, window)
        t_new = t + rng.exponential(1.0 / lam) if lam > 0 else math.inf
        if t_new >= w_end:
            t_new = w_end
            jump = False
        else:
            a, s, c = tr.rates(x, t_new)
            total = a + s + c
            if total > lam * (1.0 + 1e-12):
                raise MajorantError(
                    f"outflow {total:.6g} of state {x} at t={t_new:.6g} exceeds majorant {lam:.6g}")
            u = rng.random()
            jump = u * lam < total
        while nxt < len(eval_times) and eval_times[nxt] < t_new:
            states[nxt] = x
            nxt += 1
        if t_new >= t_max:
            break
        t = t_new
        if not jump:
            continue
        v = rng.random() * total
        if v < a:
            y, kind = tr.arrival_target(x, t, rng.random()), "arrival"
        elif v < a + s:
            y, kind = tr.service_target(x, t, rng.random()), "service"
        else:
            y, kind = 0, "catastrophe"
        n_events += 1
        if record:
            events.append(Event(t, x, y, kind))
        x = y
    while nxt < len(eval_times):
        states[nxt] = x
        nxt += 1
    return states, events, n_events


@dataclass
class PathEnsemble:
    seed: int | None
    x0: int
    t_max: float
    eval_times: np.ndarray
    states: np.ndarray  # shape (M, len(eval_times))
    events: list[list[Event]] | None = None
    event_counts: np.ndarray | None = None

    @property
    def M(self) -> int:
        return self.states.shape[0]

    def _index(self, t: float) -> int:
        idx = np.flatnonzero(np.isclose(self.eval_times, t, rtol=0, atol=1e-12))
        if not idx.size:
            raise KeyError(f"t={t} is not an evaluation time")
        return int(idx[0])

    def distribution(self, t: float, size: int | None = None) -> np.ndarray:
        """Empirical ``P(X(t) = k)`` for ``k < size`` (default: largest state seen)."""
        col = self.states[:, self._index(t)]
        size = size or int(self.states.max()) + 1
        return np.bincount(col[col < size], minlength=size) / self.M

    def stderr(self, t: float, size: int | None = None) -> np.ndarray:
        p = self.distribution(t, size)
        return np.sqrt(p * (1.0 - p) / self.M)

    def first_exit_times(self) -> np.ndarray:
        """Time of the first jump out of ``x0`` on each path (``inf`` if none by ``t_max``).

        Unlike pooled sojourns, these are not censored toward short values:
        ``P(T > t) = exp(-int_0^t q(x0, u) du)`` for every ``t < t_max``.
        """
        if self.events is None:
            raise ValueError("exit times need an ensemble simulated with record_events=True")
        return np.array([evs[0].time if evs else math.inf for evs in self.events])

    def summary_rows(self) -> list[tuple[float, int, float, float]]:
        size = int(self.states.max()) + 1
        rows = []
        for t in self.eval_times:
            p, se = self.distribution(t, size), self.stderr(t, size)
            rows.extend((float(t), k, float(p[k]), float(se[k])) for k in range(size))
        return rows

    def event_lines(self) -> list[str]:
        if self.events is None:
            return []
        return [json.dumps({"path": m, "t": e.time, "from": e.source, "to": e.target,
                            "kind": e.kind})
                for m, evs in enumerate(self.events) for e in evs]

    @classmethod
    def from_distribution(cls, p: np.ndarray, t: float, M: int, seed: int) -> "PathEnsemble":
        """Ensemble whose states at ``t`` are iid draws from ``p`` (parametric bootstrap)."""
        rng = np.random.default_rng(seed)
        p = np.clip(np.asarray(p, dtype=float), 0.0, None)
        draws = rng.choice(len(p), size=M, p=p / p.sum())
        return cls(seed, 0, t, np.array([t]), draws[:, None])


def simulate_paths(model: QueueModel, x0: int, t_max: float, M: int, seed: int,
                   eval_times=None, record_events: bool = False) -> PathEnsemble:
    """Simulate ``M`` independent paths from state ``x0`` on ``[0, t_max]``."""
    if x0 < 0 or M < 1 or not t_max > 0:
        raise ValueError("need x0 >= 0, M >= 1 and t_max > 0")
    eval_times = np.linspace(0.0, t_max, 11) if eval_times is None else np.asarray(eval_times, float)
    if np.any(np.diff(eval_times) < 0) or eval_times.min() < 0 or eval_times.max() > t_max:
        raise ValueError("evaluation times must be sorted and inside [0, t_max]")
    tr = _Transitions(model)
    streams = np.random.SeedSequence(seed).spawn(M)
    states = np.empty((M, len(eval_times)), dtype=np.int64)
    counts = np.empty(M, dtype=np.int64)
    events = [] if record_events else None
    for m, ss in enumerate(streams):
        st, evs, n = _path(tr, x0, t_max, eval_times, np.random.default_rng(ss), record_events)
        states[m] = st
        counts[m] = n
        if record_events:
            events.append(evs)
    return PathEnsemble(seed, x0, t_max, eval_times, states, events, counts)


@dataclass(frozen=True)
class TVComparison:
    t: float
    tv: float
    stderr: float  # bootstrap standard error of tv
    null_mean: float  # tv expected from sampling noise alone
    null_sd: float
    details: dict = field(default_factory=dict, compare=False)

    @property
    def consistent(self) -> bool:
        """tv within three null standard deviations of the pure-noise level."""
        return self.tv <= self.null_mean + 3.0 * self.null_sd


def _tv(p_hat: np.ndarray, p: np.ndarray) -> float:
    return 0.5 * float(np.abs(p_hat - p).sum())


def compare_tv(ensemble: PathEnsemble, trajectory: Trajectory, t: float,
               resamples: int = 200, seed: int = 0) -> TVComparison:
    """Total variation between the empirical law at ``t`` and the ODE solution.

    States above the truncation level are lumped into one extra cell whose
    ODE mass is ``1 - sum p``.
    """
    p_ode = np.clip(trajectory.at(t), 0.0, None)
    n = len(p_ode)
    ref = np.append(p_ode, max(0.0, 1.0 - p_ode.sum()))
    col = np.minimum(ensemble.states[:, ensemble._index(t)], n)
    M = len(col)
    tv = _tv(np.bincount(col, minlength=n + 1) / M, ref)
    rng = np.random.default_rng(seed)
    boot = np.array([_tv(np.bincount(rng.choice(col, M), minlength=n + 1) / M, ref)
                     for _ in range(resamples)])
    null = np.array([_tv(rng.multinomial(M, ref / ref.sum()) / M, ref) for _ in range(resamples)])
    return TVComparison(float(t), tv, float(boot.std(ddof=1)), float(null.mean()),
                        float(null.std(ddof=1)), {"M": M, "resamples": resamples})
