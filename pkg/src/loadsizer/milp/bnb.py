"""Best-first branch and bound on the LP relaxation bounds.

Nodes branch on the most fractional binary of their relaxation solution;
every explored node also feeds a rounding-plus-repair heuristic (alternate
best schedule given sizes with best sizes given schedule) that supplies
incumbents long before the bounds close. Among equal-mismatch incumbents
the smaller total size wins, and the returned sizes are polished by a
final minimum-total-size solve at fixed capture, so ties never oversize.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from ..dispatch import capture_best
from ..errors import DataError, NumericError
from .instance import MilpInstance
from .relaxation import solve_lp_relaxation
from .simplex import solve_lp

_OBJ_TOL = 1e-9
_EQ_TOL = 1e-12


@dataclass
class MilpSolution:
    x: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)  # (n, T) binary
    y: np.ndarray = field(repr=False)
    objective: float = np.nan  # total mismatch sum(s) - sum(y)
    gap: float = np.nan
    nodes_explored: int = 0
    status: str = "optimal"  # optimal | gap_limit | node_limit

    @property
    def capture(self) -> float:
        return float(self.y.sum())

    def to_json(self) -> str:
        return json.dumps(
            {
                "x": [float(v) for v in self.x],
                "u": self.u.astype(int).tolist(),
                "y": [[float(v) for v in row] for row in self.y],
                "objective": float(self.objective),
                "gap": float(self.gap),
                "nodes_explored": self.nodes_explored,
                "status": self.status,
            },
            indent=2,
            sort_keys=True,
        )


def best_sizes_for_schedule(instance: MilpInstance, u: np.ndarray) -> tuple[np.ndarray, float]:
    """LP over sizes only: maximize capture for a fixed binary schedule.

    Among capture-optimal size vectors the one with the smallest total is
    returned (lexicographic second solve), which keeps never-used loads at
    zero size.
    """
    n, T = instance.n, instance.horizon
    s = instance.s
    counts = u.sum(axis=1).astype(float)
    budgets: dict[tuple[int, ...], float] = {}
    for t in range(T):
        pattern = tuple(np.flatnonzero(u[:, t]))
        if not pattern:
            continue
        budgets[pattern] = min(budgets.get(pattern, np.inf), float(s[t]))
    if not budgets:
        return np.zeros(n), 0.0
    rows = []
    rhs = []
    for pattern, budget in budgets.items():
        row = np.zeros(n)
        row[list(pattern)] = 1.0
        rows.append(row)
        rhs.append(budget)
    first = solve_lp(-counts, a_ub=np.vstack(rows), b_ub=np.array(rhs))
    if not first.ok:
        raise NumericError(f"size LP came back {first.status}")
    capture = -first.fun
    # second pass: minimal total size at the optimal capture
    second = solve_lp(
        np.ones(n),
        a_ub=np.vstack(rows),
        b_ub=np.array(rhs),
        a_eq=counts[None, :],
        b_eq=[capture],
    )
    x = second.x if second.ok else first.x
    return np.maximum(x, 0.0), float(capture)


def _repair(instance: MilpInstance, x_start: np.ndarray, rounds: int = 4):
    """Alternate dispatch (best u given x) and sizing (best x given u)."""
    s = instance.s
    x = np.asarray(x_start, dtype=float).copy()
    best = None
    for _ in range(rounds):
        positive = x > 1e-12
        if not positive.any():
            break
        _, masks = capture_best(s, x[positive])
        u = np.zeros((instance.n, instance.horizon), dtype=np.uint8)
        rows = np.flatnonzero(positive)
        k = rows.size
        for j, i in enumerate(rows):
            u[i] = (masks >> (k - 1 - j)) & 1
        x_new, capture = best_sizes_for_schedule(instance, u)
        if best is None or capture > best[2] + _EQ_TOL:
            best = (x_new, u, capture)
        if np.abs(x_new - x).max() < 1e-12:
            break
        x = x_new
    if best is None:
        return None
    x, u, capture = best
    # re-dispatch the polished sizes so u is the best schedule for them
    positive = x > 1e-12
    if positive.any():
        draws, masks = capture_best(s, x[positive])
        u = np.zeros((instance.n, instance.horizon), dtype=np.uint8)
        rows = np.flatnonzero(positive)
        k = rows.size
        for j, i in enumerate(rows):
            u[i] = (masks >> (k - 1 - j)) & 1
        capture = float(draws.sum())
    y = u * x[:, None]
    return x, u, y, instance.total_power - capture


def _dispatch_capture(instance: MilpInstance, x: np.ndarray) -> float:
    positive = x[x > 1e-12]
    if positive.size == 0:
        return 0.0
    draws, _ = capture_best(instance.s, positive)
    return float(draws.sum())


def _coordinate_polish(instance: MilpInstance, x_start: np.ndarray) -> np.ndarray:
    """Deterministic coordinate search on the sizes, scored by dispatch."""
    x = np.asarray(x_start, dtype=float).copy()
    best = _dispatch_capture(instance, x)
    peak = float(instance.s.max())
    step = peak / 8.0
    while step > peak / 1024.0:
        improved = False
        for i in range(x.size):
            for delta in (step, -step):
                trial = x.copy()
                trial[i] = min(max(trial[i] + delta, 0.0), peak)
                cap = _dispatch_capture(instance, trial)
                if cap > best + 1e-12:
                    x, best = trial, cap
                    improved = True
        if not improved:
            step /= 2.0
    return x


def _root_candidates(instance: MilpInstance, x_lp: np.ndarray) -> list[np.ndarray]:
    s_pos = np.sort(instance.s[instance.s > 0])
    n = instance.n
    candidates = [np.asarray(x_lp, dtype=float)]
    if s_pos.size == 0:
        return candidates
    quantiles = np.quantile(s_pos, [0.3, 0.5, 0.7, 0.85, 0.95])
    for q in quantiles:
        geo = q * (0.5 ** np.arange(n))
        candidates.append(geo)
        candidates.append(np.full(n, q / n))
    return candidates


class _Incumbent:
    def __init__(self) -> None:
        self.objective = np.inf
        self.sum_x = np.inf
        self.x: np.ndarray | None = None
        self.u: np.ndarray | None = None
        self.y: np.ndarray | None = None

    def offer(self, x, u, y, objective) -> bool:
        better = objective < self.objective - _EQ_TOL
        tie_smaller = (
            abs(objective - self.objective) <= _EQ_TOL and x.sum() < self.sum_x - _EQ_TOL
        )
        if better or tie_smaller:
            self.objective = float(objective)
            self.sum_x = float(x.sum())
            self.x = np.asarray(x, dtype=float).copy()
            self.u = np.asarray(u, dtype=np.uint8).copy()
            self.y = np.asarray(y, dtype=float).copy()
            return True
        return False


def branch_and_bound(
    instance: MilpInstance,
    gap_tol: float = 1e-6,
    node_limit: int = 100_000,
) -> MilpSolution:
    """Best-first search with LP bounds, most-fractional branching and
    rounding-plus-repair incumbents.

    Terminates when the relative gap ``(incumbent - bound) / max(1e-9,
    incumbent)`` reaches ``gap_tol``, when the node limit is hit, or when
    the tree is exhausted (exact optimum).
    """
    if gap_tol < 0:
        raise DataError("gap_tol must be >= 0")
    if node_limit < 1:
        raise DataError("node_limit must be >= 1")
    n, T = instance.n, instance.horizon
    incumbent = _Incumbent()

    root = solve_lp_relaxation(instance)
    nodes_explored = 1
    for candidate in _root_candidates(instance, root.x):
        repaired = _repair(instance, candidate)
        if repaired is not None:
            incumbent.offer(*repaired)
    if incumbent.x is not None:
        polished = _repair(instance, _coordinate_polish(instance, incumbent.x), rounds=1)
        if polished is not None:
            incumbent.offer(*polished)

    counter = itertools.count()
    heap: list[tuple[float, int, dict, object]] = []
    heapq.heappush(heap, (root.objective_lb, next(counter), {}, root))
    status = "node_limit"

    def relative_gap(bound: float) -> float:
        if incumbent.objective is np.inf:
            return np.inf
        return (incumbent.objective - bound) / max(1e-9, incumbent.objective)

    best_bound = root.objective_lb
    while heap:
        bound, _, fixes, relax = heapq.heappop(heap)
        best_bound = bound
        if incumbent.x is not None and bound >= incumbent.objective - _OBJ_TOL:
            status = "optimal"
            break
        if incumbent.x is not None and relative_gap(bound) <= gap_tol:
            status = "optimal" if gap_tol <= _EQ_TOL else "gap_limit"
            break
        if nodes_explored >= node_limit:
            status = "node_limit"
            break

        frac = np.minimum(relax.u, 1.0 - relax.u)
        for (i, t) in fixes:
            frac[i, t] = 0.0
        pick = int(np.argmax(frac.T))  # time-major: lowest (t, i) wins ties
        t_pick, i_pick = divmod(pick, n)
        if frac[i_pick, t_pick] <= 1e-9:
            # integral relaxation: the node is solved by its own LP
            candidate_u = np.rint(relax.u).astype(np.uint8)
            x_best, capture = best_sizes_for_schedule(instance, candidate_u)
            y = candidate_u * x_best[:, None]
            incumbent.offer(x_best, candidate_u, y, instance.total_power - capture)
            continue

        for value in (1, 0):
            child_fixes = dict(fixes)
            child_fixes[(i_pick, t_pick)] = value
            child = solve_lp_relaxation(
                instance,
                bounds={k: (v, v) for k, v in child_fixes.items()},
            )
            nodes_explored += 1
            repaired = _repair(instance, child.x, rounds=2)
            if repaired is not None:
                incumbent.offer(*repaired)
            if relax_is_integral(child, child_fixes):
                candidate_u = np.rint(child.u).astype(np.uint8)
                x_best, capture = best_sizes_for_schedule(instance, candidate_u)
                y = candidate_u * x_best[:, None]
                incumbent.offer(x_best, candidate_u, y, instance.total_power - capture)
            if incumbent.x is None or child.objective_lb < incumbent.objective - _OBJ_TOL:
                heapq.heappush(heap, (child.objective_lb, next(counter), child_fixes, child))
    else:
        status = "optimal"
        best_bound = incumbent.objective if incumbent.x is not None else best_bound

    if incumbent.x is None:
        # no feasible incumbent ever produced: fall back to everything off
        incumbent.offer(
            np.zeros(n), np.zeros((n, T), dtype=np.uint8), np.zeros((n, T)), instance.total_power
        )
    gap = max(0.0, (incumbent.objective - best_bound) / max(1e-9, incumbent.objective))
    if status == "optimal":
        gap = 0.0
    return MilpSolution(
        x=incumbent.x,
        u=incumbent.u,
        y=incumbent.y,
        objective=incumbent.objective,
        gap=gap,
        nodes_explored=nodes_explored,
        status=status,
    )


def relax_is_integral(relax, fixes) -> bool:
    frac = np.minimum(relax.u, 1.0 - relax.u)
    for (i, t) in fixes:
        frac[i, t] = 0.0
    return bool((frac <= 1e-9).all())
