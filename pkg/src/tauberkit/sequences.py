"""Double sequences, positive weight systems, and finite evaluation grids.

A DoubleSequence is a pure rule on the integer quarter-plane m,n >= 0,
evaluated through a single vectorized path so scalar lookups and bulk grids
agree bit for bit.  A WeightSequence owns a one-sided positive weight rule
together with a cached, extendable array of partial sums; the cache is
grow-only and safe to read concurrently while one writer extends it.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import (
    HorizonError,
    MonotonicityError,
    NonFiniteValueError,
    PrefixOverflowError,
    ResourceLimitError,
    WeightDomainError,
)

# Hard ceiling on cells materialized by eval_grid; ~2 GiB of float64.
MAX_GRID_CELLS = 1 << 28


class ScalarKind(Enum):
    REAL = "real"
    COMPLEX = "complex"


@dataclass(frozen=True)
class DoubleSequence:
    """A rule u(m, n) on m, n >= 0 with a declared scalar kind.

    ``rule`` receives integer ndarrays (broadcastable to a common shape) and
    must return values of that shape.  Scalar evaluation goes through the
    same code path as block evaluation, so there is exactly one rounding
    story per cell.
    """

    name: str
    rule: Callable[[np.ndarray, np.ndarray], np.ndarray]
    kind: ScalarKind = ScalarKind.REAL
    declared_limit: float | complex | None = None
    declared_bounded: bool = True

    def block(self, m_idx: np.ndarray, n_idx: np.ndarray) -> np.ndarray:
        """Evaluate on the product of two index vectors; shape (len(m), len(n))."""
        m_idx = np.asarray(m_idx, dtype=np.int64)
        n_idx = np.asarray(n_idx, dtype=np.int64)
        if m_idx.size and m_idx.min() < 0:
            raise ValueError(f"{self.name}: negative row index {int(m_idx.min())}")
        if n_idx.size and n_idx.min() < 0:
            raise ValueError(f"{self.name}: negative column index {int(n_idx.min())}")
        dtype = np.complex128 if self.kind is ScalarKind.COMPLEX else np.float64
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            out = self.rule(m_idx[:, None], n_idx[None, :])
        out = np.asarray(out, dtype=dtype)
        if out.shape != (m_idx.size, n_idx.size):
            out = np.broadcast_to(out, (m_idx.size, n_idx.size)).copy()
        return out

    def evaluate(self, m: int, n: int) -> float | complex:
        if m < 0 or n < 0:
            raise ValueError(f"{self.name}: indices must be >= 0, got ({m}, {n})")
        return self.block(np.array([m]), np.array([n]))[0, 0].item()


@dataclass(frozen=True)
class Grid:
    """A materialized rectangle of sequence values, rows 0..m_max, cols 0..n_max."""

    m_max: int
    n_max: int
    values: np.ndarray = field(repr=False)
    kind: ScalarKind = ScalarKind.REAL

    def __post_init__(self):
        expect = (self.m_max + 1, self.n_max + 1)
        if self.values.shape != expect:
            raise ValueError(f"grid shape {self.values.shape} != {expect}")


def eval_grid(seq: DoubleSequence, m_max: int, n_max: int) -> Grid:
    """Materialize u on [0..m_max] x [0..n_max], rejecting non-finite cells."""
    if m_max < 0 or n_max < 0:
        raise ValueError(f"grid bounds must be >= 0, got ({m_max}, {n_max})")
    cells = (m_max + 1) * (n_max + 1)
    if cells > MAX_GRID_CELLS:
        raise ResourceLimitError(
            f"{seq.name}: grid of {cells} cells exceeds budget {MAX_GRID_CELLS}"
        )
    vals = seq.block(np.arange(m_max + 1), np.arange(n_max + 1))
    finite = np.isfinite(vals) if seq.kind is ScalarKind.REAL else np.isfinite(vals.real) & np.isfinite(vals.imag)
    if not finite.all():
        bad = np.argwhere(~finite)[0]
        bm, bn = int(bad[0]), int(bad[1])
        raise NonFiniteValueError(
            f"{seq.name}: non-finite value at ({bm}, {bn})", m=bm, n=bn
        )
    return Grid(m_max, n_max, vals, seq.kind)


def delta10(seq: DoubleSequence, m: int, n: int) -> float | complex:
    """Row difference u(m, n) - u(m-1, n); requires m >= 1."""
    if m < 1:
        raise ValueError(f"row difference needs m >= 1, got m={m}")
    return seq.evaluate(m, n) - seq.evaluate(m - 1, n)


def delta01(seq: DoubleSequence, m: int, n: int) -> float | complex:
    """Column difference u(m, n) - u(m, n-1); requires n >= 1."""
    if n < 1:
        raise ValueError(f"column difference needs n >= 1, got n={n}")
    return seq.evaluate(m, n) - seq.evaluate(m, n - 1)


class WeightSequence:
    """Positive one-sided weights p_0, p_1, ... with cached partial sums.

    Partial sums are accumulated with compensated (Neumaier) summation and
    published as float64.  The cache only grows.  Readers take a snapshot
    without locking: the published count is read before the buffer
    reference, and buffers are never shrunk or mutated below the count, so
    a stale pair is still internally consistent.  Writers serialize on a
    lock and extension is idempotent.
    """

    def __init__(
        self,
        weight: Callable[[int], float],
        name: str,
        max_index: int = 1 << 23,
    ):
        self.name = name
        self.max_index = int(max_index)
        self._weight = weight
        self._lock = threading.Lock()
        self._weights = np.empty(1024, dtype=np.float64)
        self._sums = np.empty(1024, dtype=np.float64)
        self._count = 0
        self._acc = 0.0
        self._comp = 0.0

    # -- writers ---------------------------------------------------------

    def ensure(self, m: int) -> None:
        """Extend the cache so indices 0..m are evaluated."""
        if m < self._count:
            return
        if m > self.max_index:
            raise HorizonError(
                f"{self.name}: index {m} beyond max_index {self.max_index}",
                needed=m,
            )
        with self._lock:
            while self._count <= m:
                self._append_one()

    def ensure_sum_exceeds(self, threshold: float) -> int:
        """Grow until the last partial sum strictly exceeds ``threshold``.

        Returns the first index whose partial sum exceeds it.  Raises
        HorizonError if max_index is reached first.
        """
        if not math.isfinite(threshold):
            raise ValueError(f"{self.name}: threshold must be finite, got {threshold}")
        with self._lock:
            if self._count == 0:
                self._append_one()
            while self._sums[self._count - 1] <= threshold:
                if self._count > self.max_index:
                    raise HorizonError(
                        f"{self.name}: partial sums reached index {self.max_index} "
                        f"without exceeding {threshold}",
                        needed=threshold,
                    )
                self._append_one()
            sums = self._sums[: self._count]
        return int(np.searchsorted(sums, threshold, side="right"))

    def _append_one(self) -> None:
        # Caller holds the lock.
        k = self._count
        if k > self.max_index:
            raise HorizonError(
                f"{self.name}: index {k} beyond max_index {self.max_index}", needed=k
            )
        pk = float(self._weight(k))
        if not math.isfinite(pk) or pk <= 0.0:
            raise WeightDomainError(f"{self.name}: weight p_{k} = {pk} is not positive and finite")
        s, c = self._acc, self._comp
        t = s + pk
        if abs(s) >= abs(pk):
            c += (s - t) + pk
        else:
            c += (pk - t) + s
        published = t + c
        if not math.isfinite(published):
            raise PrefixOverflowError(
                f"{self.name}: partial sum overflowed at index {k}"
            )
        if k > 0 and published <= self._sums[k - 1]:
            raise MonotonicityError(
                f"{self.name}: partial sum failed to increase at index {k} "
                f"(P_{k - 1} = {self._sums[k - 1]!r}, P_{k} = {published!r})"
            )
        if k == len(self._weights):
            self._grow()
        self._weights[k] = pk
        self._sums[k] = published
        self._acc, self._comp = t, c
        # Publish last: readers snapshot count before buffers.
        self._count = k + 1

    def _grow(self) -> None:
        new_w = np.empty(2 * len(self._weights), dtype=np.float64)
        new_s = np.empty_like(new_w)
        new_w[: self._count] = self._weights[: self._count]
        new_s[: self._count] = self._sums[: self._count]
        self._weights = new_w
        self._sums = new_s

    # -- readers ---------------------------------------------------------

    @property
    def evaluated_count(self) -> int:
        return self._count

    def weight_at(self, m: int) -> float:
        if m < 0:
            raise ValueError(f"{self.name}: weight index must be >= 0, got {m}")
        self.ensure(m)
        return float(self._weights[m])

    def prefix(self, m: int) -> float:
        """Partial sum p_0 + ... + p_m; prefix(-1) is 0 by convention."""
        if m == -1:
            return 0.0
        if m < -1:
            raise ValueError(f"{self.name}: prefix index must be >= -1, got {m}")
        self.ensure(m)
        return float(self._sums[m])

    def prefix_snapshot(self) -> np.ndarray:
        """Read-only view of all published partial sums (no extension)."""
        count = self._count
        view = self._sums[:count]
        view.flags.writeable = False
        return view

    def weights_snapshot(self) -> np.ndarray:
        count = self._count
        view = self._weights[:count]
        view.flags.writeable = False
        return view

    def prefix_array(self, m: int) -> np.ndarray:
        """Partial sums P_0..P_m as a fresh array, extending as needed."""
        self.ensure(m)
        return self._sums[: m + 1].copy()

    def weights_array(self, m: int) -> np.ndarray:
        self.ensure(m)
        return self._weights[: m + 1].copy()


# ---------------------------------------------------------------------------
# Named corpus
# ---------------------------------------------------------------------------


def constant(c: float = 1.0) -> DoubleSequence:
    """u(m, n) = c everywhere."""
    cv = float(c)
    return DoubleSequence(
        name=f"constant(c={cv:g})",
        rule=lambda M, N: np.full(np.broadcast_shapes(M.shape, N.shape), cv),
        declared_limit=cv,
    )


def paper_unbounded() -> DoubleSequence:
    """Bounded off two exceptional lines, with 7-power growth along them.

    Row m = 1 carries 7^n, column n = 3 carries 7^(m+2) (the overlap cell
    (1, 3) takes the row value 343), everything else is 2.  Converges to 2
    in the rectangular sense while being unbounded, which is exactly the
    separation the averaging theory needs a witness for.
    """

    def rule(M, N):
        row = np.power(7.0, N.astype(np.float64))
        col = np.power(7.0, (M + 2).astype(np.float64))
        return np.where(M == 1, row, np.where(N == 3, col, 2.0))

    return DoubleSequence(
        name="paper_unbounded",
        rule=rule,
        declared_limit=2.0,
        declared_bounded=False,
    )


def alternating() -> DoubleSequence:
    """u(m, n) = (-1)^(m+n); bounded, nowhere convergent."""
    return DoubleSequence(
        name="alternating",
        rule=lambda M, N: np.where((M + N) % 2 == 0, 1.0, -1.0),
        declared_limit=None,
    )


def additive_convergent(limit: float = 1.0) -> DoubleSequence:
    """u(m, n) = limit + 1/log(m+2) + 1/log(n+2); slow one-sided decay."""
    lv = float(limit)
    return DoubleSequence(
        name=f"additive_convergent(limit={lv:g})",
        rule=lambda M, N: lv + 1.0 / np.log(M + 2.0) + 1.0 / np.log(N + 2.0),
        declared_limit=lv,
    )


def separable_convergent() -> DoubleSequence:
    """u(m, n) = (2 - 1/(m+1)) + (1 + 1/(n+1)); product-type structure, limit 3."""
    return DoubleSequence(
        name="separable_convergent",
        rule=lambda M, N: (2.0 - 1.0 / (M + 1.0)) + (1.0 + 1.0 / (N + 1.0)),
        declared_limit=3.0,
    )


def complex_convergent() -> DoubleSequence:
    """Complex spiral decaying onto 1 + 0.5j; exercises the modulus-based ops."""
    return DoubleSequence(
        name="complex_convergent",
        rule=lambda M, N: (1.0 + 0.5j) + np.exp(1j * (M + N)) / (M + N + 2.0),
        kind=ScalarKind.COMPLEX,
        declared_limit=1.0 + 0.5j,
    )


def array_sequence(values: np.ndarray, name: str = "array") -> DoubleSequence:
    """Wrap a fixed 2-D array as a sequence; indices outside it raise."""
    arr = np.array(values, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"array sequence needs a 2-D array, got shape {arr.shape}")
    kind = ScalarKind.COMPLEX if np.iscomplexobj(arr) else ScalarKind.REAL
    arr = arr.astype(np.complex128 if kind is ScalarKind.COMPLEX else np.float64)

    def rule(M, N):
        if M.max() >= arr.shape[0] or N.max() >= arr.shape[1]:
            raise IndexError(
                f"{name}: index ({int(M.max())}, {int(N.max())}) outside "
                f"stored shape {arr.shape}"
            )
        return arr[M, N]

    return DoubleSequence(name=name, rule=rule, kind=kind)


def ones() -> WeightSequence:
    """p_m = 1; partial sums m + 1."""
    return WeightSequence(lambda m: 1.0, name="ones")


def harmonic() -> WeightSequence:
    """p_m = 1/(m+1); partial sums grow like log m (slowly varying)."""
    return WeightSequence(lambda m: 1.0 / (m + 1.0), name="harmonic")


def power(beta: float = 1.0) -> WeightSequence:
    """p_m = (m+1)^beta for beta > -1; partial sums vary regularly with index beta+1."""
    bv = float(beta)
    if bv <= -1.0:
        raise WeightDomainError(f"power weights need beta > -1, got {bv}")
    return WeightSequence(lambda m: (m + 1.0) ** bv, name=f"power(beta={bv:g})")


def geometric(r: float = 2.0) -> WeightSequence:
    """p_m = r^m for r > 1; partial sums vary rapidly."""
    rv = float(r)
    if rv <= 1.0:
        raise WeightDomainError(f"geometric weights need r > 1, got {rv}")
    return WeightSequence(lambda m: rv**m, name=f"geometric(r={rv:g})")


def wobble() -> WeightSequence:
    """p_m = (m+1)^(1 + sin(log(m+1))); log-periodic exponent, defeats a single index."""
    return WeightSequence(
        lambda m: (m + 1.0) ** (1.0 + math.sin(math.log(m + 1.0))),
        name="wobble",
    )


_SEQUENCE_FACTORIES: dict[str, Callable[..., DoubleSequence]] = {
    "constant": constant,
    "paper_unbounded": paper_unbounded,
    "alternating": alternating,
    "additive_convergent": additive_convergent,
    "separable_convergent": separable_convergent,
    "complex_convergent": complex_convergent,
}

_WEIGHT_FACTORIES: dict[str, Callable[..., WeightSequence]] = {
    "ones": ones,
    "harmonic": harmonic,
    "power": power,
    "geometric": geometric,
    "wobble": wobble,
}


def sequence_names() -> list[str]:
    return sorted(_SEQUENCE_FACTORIES)


def weight_names() -> list[str]:
    return sorted(_WEIGHT_FACTORIES)


def corpus_sequence(name: str, **params) -> DoubleSequence:
    try:
        factory = _SEQUENCE_FACTORIES[name]
    except KeyError:
        raise KeyError(
            f"unknown sequence {name!r}; known: {', '.join(sequence_names())}"
        ) from None
    return factory(**params)


def corpus_weight(name: str, **params) -> WeightSequence:
    try:
        factory = _WEIGHT_FACTORIES[name]
    except KeyError:
        raise KeyError(
            f"unknown weight family {name!r}; known: {', '.join(weight_names())}"
        ) from None
    return factory(**params)
