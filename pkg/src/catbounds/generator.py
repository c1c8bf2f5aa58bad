"""Truncated sparse snapshots of the transposed generator.

A model is decomposed once into terms ``coefficient(t) * M`` with fixed
sparse matrices ``M``; a snapshot at time ``t`` is the weighted sum of the
term matrices and a matrix-vector product never materializes the sum.

Entry ``(i, j)`` is the flow rate from state ``j`` into state ``i``, so
columns belong to source states.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

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
    "CLOSURES",
    "GeneratorTerm",
    "AffineGenerator",
    "TruncatedGenerator",
    "ForcingVector",
    "build_A",
    "build_A_star",
    "apply_weights",
]

CLOSURES = ("reflecting", "defect_tracking")
VARIANTS = ("A", "A_star", "A_star_weighted")


class _Infimum:
    """Vectorized ``beta_*(t)`` of a model, usable as a term coefficient."""

    def __init__(self, model: QueueModel):
        self.catastrophes = model.catastrophes

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        cat = self.catastrophes
        if cat.is_zero:
            return np.zeros(t.shape)
        vals = [f.evaluate(t) for f in cat.prefix]
        if cat.tail is not None:
            vals.append(cat.tail.base.evaluate(t))
        return np.minimum.reduce(vals)

    def __call__(self, t: float) -> float:
        return float(self.evaluate(t))

    def scalar(self, t: float) -> float:
        cat = self.catastrophes
        if cat.is_zero:
            return 0.0
        vals = [f.scalar(t) for f in cat.prefix]
        if cat.tail is not None:
            vals.append(cat.tail.base.scalar(t))
        return min(vals)


@dataclass
class GeneratorTerm:
    coefficient: Callable  # TimeFunction or _Infimum: has .evaluate(array)
    matrix: sp.csc_matrix
    label: str


@dataclass(frozen=True)
class TruncatedGenerator:
    N: int
    t: float
    matrix: sp.csc_matrix
    closure: str
    variant: str

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def coo_text(self) -> str:
        """Debug dump: one ``i j value`` line per stored entry, sorted by (j, i)."""
        m = self.matrix.tocoo()
        order = np.lexsort((m.row, m.col))
        return "".join(f"{m.row[k]} {m.col[k]} {m.data[k]:.17g}\n" for k in order)


@dataclass(frozen=True)
class ForcingVector:
    values: np.ndarray

    @property
    def beta_star(self) -> float:
        return float(self.values[0])


class _Builder:
    """Accumulates COO triplets for one term matrix."""

    def __init__(self, n: int):
        self.n = n
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []

    def add(self, i: int, j: int, v: float):
        if v != 0.0:
            self.rows.append(i)
            self.cols.append(j)
            self.vals.append(v)

    def add_many(self, rows, cols, vals):
        self.rows.extend(np.asarray(rows, dtype=int).tolist())
        self.cols.extend(np.asarray(cols, dtype=int).tolist())
        self.vals.extend(np.asarray(vals, dtype=float).tolist())

    def build(self) -> sp.csc_matrix:
        m = sp.coo_matrix((self.vals, (self.rows, self.cols)), shape=(self.n, self.n))
        return m.tocsc()


class AffineGenerator:
    """``A(t)`` (or ``A*(t)``) as a sum of time coefficients times sparse matrices."""

    def __init__(self, model: QueueModel, N: int, closure: str = "reflecting",
                 reduced: bool = False):
        if N < 1:
            raise ValueError("truncation level N must be >= 1")
        if closure not in CLOSURES:
            raise ValueError(f"closure must be one of {CLOSURES}, got {closure!r}")
        self.model = model
        self.N = N
        self.closure = closure
        self.variant = "A_star" if reduced else "A"
        self.weights: WeightSequence | None = None
        self.terms: list[GeneratorTerm] = []
        self._build(reduced)
        self._compile()

    # -- assembly ---------------------------------------------------------
    def _build(self, reduced: bool):
        model, N, n = self.model, self.N, self.N + 1
        defect = self.closure == "defect_tracking"
        arr = model.arrivals

        if isinstance(arr, LevelJumpArrivals):
            b = arr.b
            if b.tail_mass(N + 1) > 0.5:
                warnings.warn(f"truncation N={N} discards B_(N+1)={b.tail_mass(N + 1):.3g} "
                              "of the arrival mass", stacklevel=3)
            bld = _Builder(n)
            bi = b.b(np.arange(n))
            # within-range tail masses: sum_{i=j+1}^{N} b_i
            inside = np.concatenate((np.cumsum(bi[::-1])[::-1][1:], [0.0]))
            for j in range(N):
                rows = np.arange(j + 1, n)
                keep = bi[rows] != 0
                bld.add_many(rows[keep], np.full(keep.sum(), j), bi[rows][keep])
            for j in range(n):
                bld.add(j, j, -(b.tail_mass(j + 1) if defect else inside[j]))
            self.terms.append(GeneratorTerm(arr.rate, bld.build(), "arrival"))
        elif isinstance(arr, BatchArrivals):
            bld = _Builder(n)
            for j in range(n):
                out = 0.0
                for k, c in enumerate(arr.sizes, 1):
                    if j + k <= N:
                        bld.add(j + k, j, c)
                        out += c
                bld.add(j, j, -(arr.total if defect else out))
            self.terms.append(GeneratorTerm(arr.rate, bld.build(), "arrival"))
        elif isinstance(arr, RateTable):
            for src, size, f in arr.entries:
                if src > N:
                    continue
                bld = _Builder(n)
                if src + size <= N:
                    bld.add(src + size, src, 1.0)
                    bld.add(src, src, -1.0)
                elif defect:
                    bld.add(src, src, -1.0)
                m = bld.build()
                if m.nnz:
                    self.terms.append(GeneratorTerm(f, m, f"arrival {src}+{size}"))

        srv = model.services
        if isinstance(srv, SingleServer):
            bld = _Builder(n)
            j = np.arange(1, n)
            bld.add_many(j - 1, j, np.ones(N))
            bld.add_many(j, j, -np.ones(N))
            self.terms.append(GeneratorTerm(srv.rate, bld.build(), "service"))
        elif isinstance(srv, RateTable):
            for src, size, f in srv.entries:
                if src > N:
                    continue
                bld = _Builder(n)
                bld.add(src - size, src, 1.0)
                bld.add(src, src, -1.0)
                self.terms.append(GeneratorTerm(f, bld.build(), f"service {src}-{size}"))

        groups: dict[TimeFunction, _Builder] = {}
        order: list[TimeFunction] = []
        for k in range(1, n):
            for f, scale in model.catastrophes.components(k):
                if f not in groups:
                    groups[f] = _Builder(n)
                    order.append(f)
                groups[f].add(0, k, scale)
                groups[f].add(k, k, -scale)
        for f in order:
            self.terms.append(GeneratorTerm(f, groups[f].build(), "catastrophe"))

        if reduced:
            bld = _Builder(n)
            j = np.arange(n)
            bld.add_many(np.zeros(n), j, -np.ones(n))
            self.terms.append(GeneratorTerm(_Infimum(model), bld.build(), "beta_star"))

    def _compile(self):
        """Lay every term on the union sparsity pattern (CSC order).

        A snapshot is then ``coefficients @ self._data`` on a fixed structure,
        which avoids sparse additions at each evaluation.
        """
        n = self.N + 1
        coos = [tm.matrix.tocoo() for tm in self.terms]
        keys = [c.col.astype(np.int64) * n + c.row for c in coos]
        union = np.unique(np.concatenate(keys)) if keys else np.zeros(0, dtype=np.int64)
        self._data = np.zeros((len(self.terms), union.size))
        for k, (c, key) in enumerate(zip(coos, keys)):
            np.add.at(self._data[k], np.searchsorted(union, key), c.data)
        self._indices = (union % n).astype(np.int32)
        self._indptr = np.searchsorted(union // n, np.arange(n + 1)).astype(np.int32)
        self._work = sp.csc_matrix((np.zeros(union.size), self._indices, self._indptr),
                                   shape=(n, n))

    def _matrix(self, coef: np.ndarray) -> sp.csc_matrix:
        n = self.N + 1
        return sp.csc_matrix((coef @ self._data, self._indices, self._indptr), shape=(n, n))

    # -- weighting ----------------------------------------------------------
    def weighted(self, weights: WeightSequence) -> "AffineGenerator":
        """Copy with every term conjugated by ``D = diag(d_k)``."""
        if self.variant != "A_star":
            raise ValueError("weights are applied to the reduced matrix A*")
        out = object.__new__(AffineGenerator)
        out.__dict__.update(self.__dict__)
        d = weights.d(np.arange(self.N + 1))
        D, Dinv = sp.diags(d), sp.diags(1.0 / d)
        out.terms = [GeneratorTerm(tm.coefficient, (D @ tm.matrix @ Dinv).tocsc(), tm.label)
                     for tm in self.terms]
        out.variant = "A_star_weighted"
        out.weights = weights
        out._compile()
        return out

    def leaks(self, weights: WeightSequence) -> np.ndarray:
        """Per-term, per-column ``sum_{i>N} d_i * M_ij`` of the untruncated term.

        Only meaningful for the defect-tracking closure, where the diagonal
        already accounts for the outflow whose destinations are cut off.
        """
        N, n = self.N, self.N + 1
        out = np.zeros((len(self.terms), n))
        arr = self.model.arrivals
        for idx, tm in enumerate(self.terms):
            if tm.label == "arrival" and isinstance(arr, LevelJumpArrivals):
                out[idx, :] = arr.b.weighted_tail(N + 1, weights)
            elif tm.label == "arrival" and isinstance(arr, BatchArrivals):
                for j in range(n):
                    out[idx, j] = math.fsum(c * float(weights.d(j + k))
                                            for k, c in enumerate(arr.sizes, 1) if j + k > N)
            elif tm.label.startswith("arrival "):
                src, size = map(int, tm.label.split()[1].split("+"))
                if src + size > N:
                    out[idx, src] = float(weights.d(src + size))
        return out

    # -- evaluation ---------------------------------------------------------
    def coefficients(self, t) -> np.ndarray:
        """Term coefficients; shape ``(n_terms,)`` or ``(len(t), n_terms)``."""
        if np.ndim(t) == 0:
            return np.array([tm.coefficient.scalar(float(t)) for tm in self.terms])
        cols = [tm.coefficient.evaluate(t) for tm in self.terms]
        return np.stack(cols, axis=-1) if cols else np.zeros(np.shape(t) + (0,))

    def snapshot(self, t: float) -> TruncatedGenerator:
        mat = self._matrix(self.coefficients(t))
        mat.eliminate_zeros()
        return TruncatedGenerator(self.N, float(t), mat, self.closure, self.variant)

    def matvec(self, t: float, p: np.ndarray) -> np.ndarray:
        # the work matrix keeps its structure; only the values change
        self._work.data[:] = self.coefficients(t) @ self._data
        return self._work @ p


def build_A(model: QueueModel, N: int, t: float,
            closure: str = "reflecting") -> TruncatedGenerator:
    """Snapshot of the transposed intensity matrix on states ``0..N``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return AffineGenerator(model, N, closure).snapshot(t)


def build_A_star(model: QueueModel, N: int, t: float,
                 closure: str = "reflecting") -> tuple[TruncatedGenerator, ForcingVector]:
    """Reduced matrix ``A*(t)`` and forcing ``g(t) = (beta_*(t), 0, ...)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    snap = AffineGenerator(model, N, closure, reduced=True).snapshot(t)
    g = np.zeros(N + 1)
    g[0] = model.beta_star(t)
    return snap, ForcingVector(g)


def apply_weights(A_star: TruncatedGenerator, w: WeightSequence) -> TruncatedGenerator:
    """``D A* D^{-1}``: entry ``(i, j)`` scaled by ``d_i / d_j``."""
    if A_star.variant != "A_star":
        raise ValueError(f"expected an A_star snapshot, got {A_star.variant}")
    d = w.d(np.arange(A_star.N + 1))
    mat = (sp.diags(d) @ A_star.matrix @ sp.diags(1.0 / d)).tocsc()
    return TruncatedGenerator(A_star.N, A_star.t, mat, A_star.closure, "A_star_weighted")
