"""Inequality-constrained least squares sizing with variable switch blocks.

The sorted series is partitioned into an optional all-off dwell (the
``offset`` smallest samples, where no load runs) followed by 2^n - 1
contiguous blocks, one per switch combination in ascending binary order;
block k spans ``m_k`` samples and the final block absorbs the remainder.
The incremental transform ``x = T_upper @ x_bar`` turns the size-ordering
constraint into ``x_bar >= 0``, and keeping demand under the curve
collapses to one cap per block (the block's first, smallest sample). The
resulting small strictly convex QP is solved by a primal active-set
method; an outer integer search over the offset and block lengths
maximizes dispatch utilization. Without the dwell, the cap on the
smallest combination would be pinned to the smallest nonzero sample of
the whole series, which cripples the sizing on real dawn/dusk data.
"""

from __future__ import annotations

import functools
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dispatch import capture_best
from .ecls import build_switch_matrix
from .errors import DataError, NumericError
from .timeseries import SortedSeries

logger = logging.getLogger(__name__)

_EXHAUSTIVE_LIMIT = 4500  # enumerate the (offset, m) lattice when this small
_KKT_TOL = 1e-10


@dataclass(frozen=True)
class SwitchTimes:
    """Block lengths for all 2^n - 1 switch combinations; they sum to T."""

    lengths: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(int(m) < 1 for m in self.lengths):
            raise DataError(f"every block length must be >= 1, got {self.lengths}")
        object.__setattr__(self, "lengths", tuple(int(m) for m in self.lengths))

    @property
    def total(self) -> int:
        return sum(self.lengths)

    @property
    def free(self) -> tuple[int, ...]:
        """The independently chosen lengths (the last block is the remainder)."""
        return self.lengths[:-1]

    @classmethod
    def from_free(cls, free, total: int, n: int) -> "SwitchTimes":
        free = tuple(int(v) for v in free)
        blocks = 2**n - 1
        if len(free) != blocks - 1:
            raise DataError(f"expected {blocks - 1} free lengths for n={n}, got {len(free)}")
        rest = total - sum(free)
        if rest < 1:
            raise DataError(f"free lengths {free} leave no room in T={total}")
        return cls(lengths=free + (rest,))

    @classmethod
    def equidistant(cls, total: int, n: int) -> "SwitchTimes":
        blocks = 2**n - 1
        if total < blocks:
            raise DataError(f"need at least {blocks} samples, got {total}")
        base = total // blocks
        return cls.from_free((base,) * (blocks - 1), total, n)


def build_um(m: SwitchTimes, n: int) -> np.ndarray:
    """Dense switch-state matrix with block k repeated ``m_k`` times."""
    rows = build_switch_matrix(n, block_length=1).distinct_rows
    if len(m.lengths) != rows.shape[0]:
        raise DataError(f"{len(m.lengths)} blocks do not match n={n}")
    return np.repeat(rows, m.lengths, axis=0)


@functools.lru_cache(maxsize=32)
def upper_ones(n: int) -> np.ndarray:
    """Upper-triangular all-ones transform from incremental to total sizes."""
    out = np.triu(np.ones((n, n)))
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class IclsResult:
    x_bar: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)  # total sizes, non-increasing
    m: SwitchTimes
    residual_norm: float
    solar_utilization: float
    offset: int = 0  # leading sorted samples left all-off (below the first switch)
    restarts_used: int = 1
    working_set: tuple[int, ...] = ()
    multipliers: tuple[float, ...] = ()
    iterations: int = 0


def _solve_working_set(H, g, C, b, working):
    """Equality-constrained QP on the working set; returns (x, multipliers)."""
    n = H.shape[0]
    k = len(working)
    if k == 0:
        return np.linalg.solve(H, g), np.array([])
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = H
    cw = C[list(working)]
    kkt[:n, n:] = cw.T
    kkt[n:, :n] = cw
    rhs = np.concatenate([g, b[list(working)]])
    sol = np.linalg.solve(kkt, rhs)
    return sol[:n], sol[n:]


def _active_set_qp(H, g, C, b, max_iter):
    """Minimize 0.5 x'Hx - g'x subject to Cx <= b (H strictly convex).

    Classic primal active-set iteration: solve the equality-constrained
    subproblem on the working set, step to the first blocking constraint
    when the subproblem solution is infeasible, and drop the constraint
    with the most negative multiplier when it is stationary.
    """
    n = H.shape[0]
    x = np.zeros(n)
    working = list(range(n))  # the nonnegativity rows are tight at x = 0
    for iteration in range(1, max_iter + 1):
        try:
            x_eq, mult = _solve_working_set(H, g, C, b, working)
        except np.linalg.LinAlgError as exc:
            raise NumericError(
                f"singular working-set system {sorted(working)}: {exc}"
            ) from exc
        if np.abs(x_eq - x).max() <= 1e-13:
            if mult.size == 0 or mult.min() >= -_KKT_TOL:
                return x_eq, working, mult, iteration
            working.pop(int(np.argmin(mult)))
            continue
        d = x_eq - x
        rates = C @ d
        slack = b - C @ x
        blocking = -1
        alpha = 1.0
        for i in range(C.shape[0]):
            if i in working or rates[i] <= 1e-14:
                continue
            ratio = slack[i] / rates[i]
            if ratio < alpha - 1e-15:
                alpha = max(ratio, 0.0)
                blocking = i
        x = x + alpha * d
        if blocking >= 0:
            working.append(blocking)
        # alpha == 1 with no blocking constraint loops back to the
        # stationarity test on the same working set
    raise NumericError(f"active set did not terminate; working set {sorted(working)}")


class _FitContext:
    """Shared per-series geometry so an outer m search can solve cheaply."""

    def __init__(self, values: np.ndarray, n: int):
        self.values = values
        self.n = n
        rows = build_switch_matrix(n, block_length=1).distinct_rows
        self.w = rows @ upper_ones(n)
        self.prefix = np.concatenate([[0.0], np.cumsum(values)])
        self.total_power = float(values.sum())
        self.ident = np.eye(n)
        self._su_cache: dict[bytes, float] = {}

    def utilization(self, x: np.ndarray) -> float:
        positive = x[x > 1e-12]
        if positive.size == 0:
            return 0.0
        # exact bytes: solutions sit on capture discontinuities (caps equal
        # sample values), so rounding would glue distinct capture sets
        key = positive.tobytes()
        su = self._su_cache.get(key)
        if su is None:
            captured, _ = capture_best(self.values, positive)
            su = float(captured.sum()) / self.total_power
            self._su_cache[key] = su
        return su

    def solve(self, m: SwitchTimes, offset: int) -> IclsResult:
        full = self.values
        if offset < 0 or offset >= full.size:
            raise DataError(f"offset must lie in [0, {full.size}), got {offset}")
        width = full.size - offset
        if m.total != width:
            raise DataError(
                f"block lengths sum to {m.total}, series has {width} after offset {offset}"
            )
        n = self.n
        w = self.w
        lengths = np.asarray(m.lengths, dtype=float)
        starts = offset + np.concatenate([[0], np.cumsum(m.lengths)[:-1]]).astype(int)
        ends = starts + np.asarray(m.lengths)
        block_sums = self.prefix[ends] - self.prefix[starts]
        caps = full[starts]
        H = (w * lengths[:, None]).T @ w
        g = w.T @ block_sums
        C = np.vstack([-self.ident, w])
        b = np.concatenate([np.zeros(n), caps])
        max_iter = 50 * (n + len(m.lengths))
        x_bar, working, mult, iterations = _active_set_qp(H, g, C, b, max_iter)
        x_bar = np.where(np.abs(x_bar) < 1e-14, 0.0, x_bar)
        x = upper_ones(n) @ x_bar
        levels = w @ x_bar
        residual = full[offset:] - np.repeat(levels, m.lengths)
        order = np.argsort(working) if working else []
        return IclsResult(
            x_bar=x_bar,
            x=x,
            m=m,
            residual_norm=float(np.linalg.norm(residual)),
            solar_utilization=self.utilization(x),
            offset=offset,
            working_set=tuple(int(working[j]) for j in order),
            multipliers=tuple(float(mult[j]) for j in order),
            iterations=iterations,
        )


def solve_icls_fixed_m(
    sorted_series: SortedSeries, m: SwitchTimes, n: int, offset: int = 0
) -> IclsResult:
    """Best incremental sizes for fixed block lengths.

    Minimizes ``||S - U(m) T x_bar||_2`` over the samples above ``offset``
    subject to ``x_bar >= 0`` and the per-block under-the-curve caps;
    utilization is then scored by dispatching the resulting sizes over the
    whole series. ``offset`` counts leading (smallest) sorted samples during
    which every load stays off; without it the cap on the smallest
    combination would be pinned to the very smallest nonzero sample.
    """
    return _FitContext(sorted_series.values, n).solve(m, offset)


def _lattice(total: int, blocks: int):
    """All (offset, free lengths) with offset >= 0, lengths >= 1, room left."""
    if blocks == 1:
        for k0 in range(total):
            yield k0, ()
        return
    k = blocks - 1
    for k0 in range(0, total - blocks + 1):
        width = total - k0
        for cuts in itertools.combinations(range(1, width), k):
            free = []
            prev = 0
            for c in cuts:
                free.append(c - prev)
                prev = c
            yield k0, tuple(free)


def _lattice_size(total: int, blocks: int) -> int:
    # sum over offsets of comb(width - 1, blocks - 1) telescopes
    return math.comb(total, blocks)


def _result_key(result: IclsResult):
    """Maximize utilization, break ties by residual then deterministically."""
    return (
        -result.solar_utilization,
        result.residual_norm,
        result.offset,
        result.m.lengths,
    )


def _random_point(rng: np.random.Generator, total: int, blocks: int):
    k0 = int(rng.integers(0, total - blocks + 1))
    width = total - k0
    if blocks == 1:
        return k0, ()
    cuts = np.sort(rng.choice(np.arange(1, width), size=blocks - 1, replace=False))
    free = np.diff(np.concatenate([[0], cuts]))
    return k0, tuple(int(v) for v in free)


def optimize_m(
    sorted_series: SortedSeries,
    n: int,
    restarts: int = 4,
    max_iter: int = 400,
    seed: int = 42,
) -> IclsResult:
    """Integer search over the all-off dwell and switch blocks, maximizing
    dispatch utilization.

    Small lattices are enumerated exhaustively; otherwise a deterministic
    pattern search (all single-coordinate moves on the offset and the free
    block lengths, step halving from T/16 down to 1) runs from equidistant
    starts plus seeded random restarts. Only strict improvements are
    accepted, so the utilization sequence is non-decreasing.
    """
    values = sorted_series.values
    total = values.size
    blocks = 2**n - 1
    if total < blocks:
        raise DataError(f"need at least {blocks} samples for n={n}, got {total}")
    context = _FitContext(values, n)
    cache: dict[tuple, IclsResult] = {}

    def evaluate(k0: int, free: tuple[int, ...]) -> IclsResult:
        key = (k0, free)
        if key not in cache:
            m = SwitchTimes.from_free(free, total - k0, n)
            cache[key] = context.solve(m, k0)
        return cache[key]

    if _lattice_size(total, blocks) <= _EXHAUSTIVE_LIMIT:
        best = min((evaluate(k0, f) for k0, f in _lattice(total, blocks)), key=_result_key)
        return _with_restarts(best, 1)

    rng = np.random.default_rng(seed)
    starts = [(0, SwitchTimes.equidistant(total, n).free)]
    k0_mid = total // (blocks + 1)
    if total - k0_mid >= blocks:
        starts.append((k0_mid, SwitchTimes.equidistant(total - k0_mid, n).free))
    while len(starts) < max(restarts, 1) + 1:
        starts.append(_random_point(rng, total, blocks))

    best: IclsResult | None = None
    for k0, free in starts:
        current = evaluate(k0, free)
        step = max(total // 16, 1)
        sweeps = 0
        while step >= 1 and sweeps < max_iter:
            improved = None
            for coord in range(blocks):  # coord 0 is the offset
                for delta in (step, -step):
                    ck0 = current.offset + (delta if coord == 0 else 0)
                    cand = list(current.m.free)
                    if coord > 0:
                        cand[coord - 1] += delta
                    if ck0 < 0 or any(v < 1 for v in cand):
                        continue
                    if ck0 + sum(cand) > total - 1:
                        continue
                    trial = evaluate(ck0, tuple(cand))
                    if _result_key(trial) < _result_key(improved or current):
                        improved = trial
            sweeps += 1
            if improved is None:
                step //= 2
            else:
                current = improved
        if best is None or _result_key(current) < _result_key(best):
            best = current
    return _with_restarts(best, len(starts))


def _with_restarts(result: IclsResult, restarts: int) -> IclsResult:
    return IclsResult(
        x_bar=result.x_bar,
        x=result.x,
        m=result.m,
        residual_norm=result.residual_norm,
        solar_utilization=result.solar_utilization,
        offset=result.offset,
        restarts_used=restarts,
        working_set=result.working_set,
        multipliers=result.multipliers,
        iterations=result.iterations,
    )
