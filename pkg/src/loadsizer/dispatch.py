"""Schedule fixed-size loads over a power series and score utilization.

Each timestep independently switches on the subset of loads with the
largest total draw that still fits under the available power. Subsets are
indexed by the binary order ``d = sum_i u_i * 2^(n-i)`` (load 1 is the most
significant bit), so ``combo_index`` 0 means all off.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .results import format_float
from .timeseries import PowerSeries

_ENUM_LIMIT = 12  # exhaustive subset table up to here, branch and bound beyond
_MAX_LOADS = 20

_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class SwitchSchedule:
    """Per-timestep on/off matrix aligned to a series."""

    u: np.ndarray = field(repr=False)  # (n, T) of {0, 1}
    combo_index: np.ndarray = field(repr=False)  # (T,)

    def __post_init__(self) -> None:
        u = np.asarray(self.u)
        if u.ndim != 2:
            raise DataError("u must be an (n, T) matrix")
        object.__setattr__(self, "u", u.astype(np.uint8))
        object.__setattr__(self, "combo_index", np.asarray(self.combo_index, dtype=np.int64))

    @property
    def n(self) -> int:
        return self.u.shape[0]

    def __len__(self) -> int:
        return self.u.shape[1]


@dataclass(frozen=True)
class UtilizationReport:
    captured_energy: float
    total_energy: float
    solar_utilization: float
    mismatch: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ComboHistogram:
    """Occurrence counts of each combination per time-of-day bin.

    ``bins[b, d]`` counts daytime samples in bin ``b`` running combination
    ``d`` (including d = 0, all off, so each row sums to the bin's daytime
    sample count).
    """

    bins: np.ndarray = field(repr=False)  # (bins_per_day, 2^n)
    bins_per_day: int
    n: int


def subset_table(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All 2^n subset draws with the best representative per distinct draw.

    Returns ``(sums, masks)`` sorted by ascending draw; among subsets with
    an identical draw the one with fewest loads on, then lowest combo
    index, is kept.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    masks = np.arange(2**n, dtype=np.int64)
    shifts = n - 1 - np.arange(n)
    bits = (masks[:, None] >> shifts[None, :]) & 1
    sums = bits.astype(float) @ x
    pops = bits.sum(axis=1)
    order = np.lexsort((masks, pops, sums))
    sums_sorted = sums[order]
    uniq, first = np.unique(sums_sorted, return_index=True)
    return uniq, masks[order][first]


def capture_best(values: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized per-step best feasible draw for every value in ``values``.

    Returns ``(captured, mask)`` arrays; uses the exhaustive subset table,
    so only valid for n <= _ENUM_LIMIT.
    """
    sums, masks = subset_table(x)
    idx = np.searchsorted(sums, np.asarray(values, dtype=float), side="right") - 1
    idx = np.maximum(idx, 0)  # sums[0] == 0.0 is always feasible
    return sums[idx], masks[idx]


def _best_subset_bnb(s: float, x: np.ndarray) -> tuple[float, int]:
    """Depth-first branch and bound max subset draw <= s, same tie rules."""
    n = x.size
    order = np.argsort(-x)  # big items first tightens the suffix bound
    xs = x[order]
    suffix = np.concatenate([np.cumsum(xs[::-1])[::-1], [0.0]])
    best = [0.0, 0, 0]  # draw, popcount, mask (original bit convention)

    def mask_bit(j: int) -> int:
        return 1 << (n - 1 - order[j])

    def dfs(j: int, total: float, pops: int, mask: int) -> None:
        if total > s + _FEAS_TOL:
            return
        cand = (total, pops, mask)
        if total > best[0] or (
            total == best[0] and (pops, mask) < (best[1], best[2])
        ):
            best[0], best[1], best[2] = cand
        if j == n:
            return
        if total + suffix[j] < best[0]:
            return  # cannot strictly beat the incumbent
        dfs(j + 1, total + xs[j], pops + 1, mask | mask_bit(j))
        dfs(j + 1, total, pops, mask)

    dfs(0, 0.0, 0, 0)
    return best[0], best[2]


def dispatch_greedy(series: PowerSeries, x) -> SwitchSchedule:
    """Per-timestep maximal feasible subset of loads under the series."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 1 or n > _MAX_LOADS:
        raise DataError(f"need 1..{_MAX_LOADS} loads, got {n}")
    if (x <= 0).any():
        raise DataError(f"load sizes must be positive, got {x.tolist()}")
    values = series.values
    if n <= _ENUM_LIMIT:
        _, chosen = capture_best(values, x)
    else:
        chosen = np.fromiter(
            (_best_subset_bnb(float(s), x)[1] for s in values),
            dtype=np.int64,
            count=values.size,
        )
    shifts = n - 1 - np.arange(n)
    u = ((chosen[None, :] >> shifts[:, None]) & 1).astype(np.uint8)
    return SwitchSchedule(u=u, combo_index=chosen)


def utilization(series: PowerSeries, schedule: SwitchSchedule, x) -> UtilizationReport:
    """Captured over total energy plus the per-step mismatch vector."""
    x = np.asarray(x, dtype=float).ravel()
    if schedule.u.shape != (x.size, len(series)):
        raise DataError(
            f"schedule shape {schedule.u.shape} does not match "
            f"{x.size} loads x {len(series)} steps"
        )
    total = float(series.values.sum())
    if total <= 0:
        raise DataError("total energy is zero")
    draw = x @ schedule.u
    mismatch = series.values - draw
    if (mismatch < -_FEAS_TOL).any():
        raise DataError("schedule draws more than the available power")
    captured = float(draw.sum())
    return UtilizationReport(
        captured_energy=captured,
        total_energy=total,
        solar_utilization=captured / total,
        mismatch=mismatch,
    )


def combo_histogram(
    series: PowerSeries, schedule: SwitchSchedule, bins_per_day: int = 24
) -> ComboHistogram:
    """Count combination occurrences per time-of-day bin, daytime samples only."""
    if bins_per_day < 1:
        raise DataError("bins_per_day must be >= 1")
    if len(series) * series.interval_seconds < 86400:
        raise DataError("series must span at least one day")
    n = schedule.n
    seconds_of_day = (
        np.arange(len(series), dtype=np.int64) * series.interval_seconds
        + series.start.hour * 3600
        + series.start.minute * 60
        + series.start.second
    ) % 86400
    bin_idx = (seconds_of_day * bins_per_day) // 86400
    daytime = series.values > 0
    counts = np.zeros((bins_per_day, 2**n), dtype=np.int64)
    np.add.at(counts, (bin_idx[daytime], schedule.combo_index[daytime]), 1)
    return ComboHistogram(bins=counts, bins_per_day=bins_per_day, n=n)


def write_schedule_csv(
    series: PowerSeries, schedule: SwitchSchedule, x, path: str | Path
) -> Path:
    """Emit ``timestamp, S, u_1..u_n, captured, mismatch`` rows."""
    x = np.asarray(x, dtype=float).ravel()
    path = Path(path)
    draw = x @ schedule.u
    stamps = series.timestamps()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["timestamp", "S"] + [f"u_{i + 1}" for i in range(x.size)] + ["captured", "mismatch"]
        )
        for k, stamp in enumerate(stamps):
            row = [stamp.isoformat(), format_float(series.values[k])]
            row += [str(int(schedule.u[i, k])) for i in range(x.size)]
            row += [format_float(draw[k]), format_float(series.values[k] - draw[k])]
            writer.writerow(row)
    return path


def write_histogram_csv(hist: ComboHistogram, path: str | Path) -> Path:
    """Emit ``bin, combo_index, count`` rows for the nonzero combinations."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "combo_index", "count"])
        for b in range(hist.bins_per_day):
            if hist.bins[b].sum() == 0:
                continue  # all-dark bins are excluded
            for d in range(1, 2**hist.n):
                writer.writerow([str(b), str(d), str(int(hist.bins[b, d]))])
    return path
