"""Equality-constrained least squares sizing on sorted power data.

The switch-state matrix stacks all nonzero on/off combinations in
ascending binary order, each repeated in blocks of length L, so that the
ordering constraint on the sizes is implied by the sorted data. The sum
constraint ``sum(x) = C`` enters through a Lagrange multiplier in the
bordered KKT system; the best capacity fraction C is found by a line
search ranked on full-series dispatch utilization.
"""

from __future__ import annotations

import csv
import functools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dispatch import capture_best
from .errors import DataError, NumericError
from .results import format_float
from .timeseries import SortedSeries

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_LENGTH = 20
DEFAULT_C_STEPS = 100


def binary_order(u) -> int:
    """Signed-integer value of a switch vector: load 1 is the most
    significant bit, ``d = sum_i u_i * 2^(n-i)``."""
    u = np.asarray(u)
    if not np.isin(u, (0, 1)).all():
        raise DataError(f"switch vector entries must be 0/1, got {u.tolist()}")
    n = u.size
    return int(sum(int(u[i]) << (n - 1 - i) for i in range(n)))


@dataclass(frozen=True)
class SwitchMatrix:
    """Block matrix of all nonzero switch combinations, ascending by
    binary order, each combination repeated ``block_length`` times."""

    n: int
    block_length: int
    distinct_rows: np.ndarray = field(repr=False)  # (2^n - 1, n)

    @property
    def rows_used(self) -> int:
        return self.block_length * (2**self.n - 1)

    def dense(self) -> np.ndarray:
        return np.repeat(self.distinct_rows, self.block_length, axis=0)


@functools.lru_cache(maxsize=256)
def build_switch_matrix(n: int, block_length: int = DEFAULT_BLOCK_LENGTH) -> SwitchMatrix:
    if not 1 <= n <= 12:
        raise DataError(f"n must be in 1..12, got {n}")
    if block_length < 1:
        raise DataError("block_length must be >= 1")
    d = np.arange(1, 2**n)
    shifts = n - 1 - np.arange(n)
    rows = ((d[:, None] >> shifts[None, :]) & 1).astype(float)
    rows.flags.writeable = False
    return SwitchMatrix(n=n, block_length=block_length, distinct_rows=rows)


def select_points(sorted_series: SortedSeries, count: int) -> np.ndarray:
    """``count`` values at uniform quantile positions of the sorted vector."""
    length = len(sorted_series)
    if count < 1:
        raise DataError("count must be >= 1")
    if count > length:
        raise DataError(f"count {count} exceeds series length {length}")
    j = np.arange(1, count + 1)
    idx = np.ceil(j * length / count).astype(int) - 1
    return sorted_series.values[idx]


@dataclass(frozen=True)
class EclsResult:
    x: np.ndarray  # non-increasing presentation order
    lam: float
    C: float
    residual_norm: float
    solar_utilization: float
    n: int
    block_length: int
    negative_components: int = 0

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "x", x)
        total = x.sum()
        if abs(total - self.C) > 1e-10:
            raise DataError(f"sum(x) = {total} must equal C = {self.C} within 1e-10")


def solve_ecls(points, matrix: SwitchMatrix, C: float, warn_negative: bool = True) -> EclsResult:
    """Solve the bordered KKT system of the sum-constrained least squares.

    ``[[U^T U, 1], [1^T, 0]] [x; lambda] = [U^T S; C]`` with S the selected
    sorted points. Negative components are possible for pathological data;
    they are reported, not clamped.
    """
    if not 0.5 <= C <= 1.0:
        raise DataError(f"C must lie in [0.5, 1], got {C}")
    s = np.asarray(points, dtype=float).ravel()
    n = matrix.n
    L = matrix.block_length
    N = 2**n - 1
    if s.size != L * N:
        raise DataError(f"expected {L * N} points for n={n}, L={L}, got {s.size}")
    rows = matrix.distinct_rows
    block_sums = s.reshape(N, L).sum(axis=1)
    utu = L * rows.T @ rows
    uts = rows.T @ block_sums
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = utu
    kkt[:n, n] = 1.0
    kkt[n, :n] = 1.0
    rhs = np.concatenate([uts, [C]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular KKT system for n={n}, L={L}: {exc}") from exc
    x = sol[:n]
    lam = float(sol[n])
    resid = s - np.repeat(rows @ x, L)
    negative = int((x <= 0).sum())
    if negative and warn_negative:
        logger.warning("ECLS solution at C=%.4f has %d non-positive size(s): %s", C, negative, x)
    x_sorted = np.sort(x)[::-1]
    return EclsResult(
        x=x_sorted,
        lam=lam,
        C=float(C),
        residual_norm=float(np.linalg.norm(resid)),
        solar_utilization=math.nan,
        n=n,
        block_length=L,
        negative_components=negative,
    )


def _with_su(result: EclsResult, su: float) -> EclsResult:
    return EclsResult(
        x=result.x,
        lam=result.lam,
        C=result.C,
        residual_norm=result.residual_norm,
        solar_utilization=su,
        n=result.n,
        block_length=result.block_length,
        negative_components=result.negative_components,
    )


def dispatch_su(values: np.ndarray, x: np.ndarray) -> float:
    """Utilization of sizes ``x`` dispatched over ``values`` (order-free)."""
    total = float(values.sum())
    if total <= 0:
        raise DataError("total energy is zero")
    captured, _ = capture_best(values, x)
    return float(captured.sum()) / total


def _sweep(
    sorted_series: SortedSeries,
    n: int,
    c_steps: int,
    block_length: int,
) -> list[EclsResult]:
    if c_steps < 2:
        raise DataError("c_steps must be >= 2")
    matrix = build_switch_matrix(n, block_length)
    points = select_points(sorted_series, matrix.rows_used)
    out = []
    skipped = 0
    for C in np.linspace(0.5, 1.0, c_steps):
        result = solve_ecls(points, matrix, float(C), warn_negative=False)
        if result.negative_components:
            skipped += 1
            out.append(result)  # utilization stays NaN; never ranked best
            continue
        su = dispatch_su(sorted_series.values, result.x)
        out.append(_with_su(result, su))
    if skipped:
        logger.warning(
            "C sweep (n=%d): %d of %d grid values gave a non-positive size and were "
            "excluded from the ranking",
            n,
            skipped,
            c_steps,
        )
    return out


def line_search_C(
    sorted_series: SortedSeries,
    n: int,
    c_steps: int = DEFAULT_C_STEPS,
    block_length: int = DEFAULT_BLOCK_LENGTH,
) -> EclsResult:
    """Best-utilization ECLS solution over a uniform C grid on [0.5, 1].

    Ties break toward the smaller C; C values whose solution has a
    non-positive component are excluded from the ranking.
    """
    table = _sweep(sorted_series, n, c_steps, block_length)
    best: EclsResult | None = None
    for result in table:
        if math.isnan(result.solar_utilization):
            continue
        if best is None or result.solar_utilization > best.solar_utilization:
            best = result
    if best is None:
        raise NumericError("no C value produced an all-positive sizing")
    return best


def sensitivity_table(
    sorted_series: SortedSeries,
    n: int,
    c_steps: int = DEFAULT_C_STEPS,
    block_length: int = DEFAULT_BLOCK_LENGTH,
) -> list[EclsResult]:
    """Full C sweep, one row per grid value (NaN utilization where invalid)."""
    return _sweep(sorted_series, n, c_steps, block_length)


def write_sensitivity_csv(table: list[EclsResult], path: str | Path) -> Path:
    path = Path(path)
    n = table[0].n
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["C"] + [f"x{i + 1}" for i in range(n)] + ["SU"])
        for row in table:
            su = "nan" if math.isnan(row.solar_utilization) else format_float(row.solar_utilization)
            writer.writerow(
                [format_float(row.C)] + [format_float(v) for v in row.x] + [su]
            )
    return path
