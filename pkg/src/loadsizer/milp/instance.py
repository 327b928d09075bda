"""Big-M instance of the sizing problem.

Variables: sizes ``x_i``, binaries ``u_i(t)`` and committed demands
``y_i(t)``. Constraints per timestep: ``sum_i y_i(t) <= s_t`` plus, per
load and timestep, ``y <= u*M``, ``y >= 0``, ``y <= x`` and
``y >= x + (u - 1)*M``; the objective minimizes the total mismatch
``sum_t (s_t - sum_i y_i(t))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

DEFAULT_BIG_M = 1e6


@dataclass(frozen=True)
class MilpInstance:
    s: np.ndarray = field(repr=False)  # profile values, any order
    n: int
    big_m: float
    m_effective: float  # tightened constant actually used in constraints

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=float).ravel()
        object.__setattr__(self, "s", s)

    @property
    def horizon(self) -> int:
        return self.s.size

    @property
    def num_binaries(self) -> int:
        return self.n * self.horizon

    @property
    def num_continuous(self) -> int:
        return self.n + self.n * self.horizon

    @property
    def num_constraints(self) -> int:
        return self.horizon + 4 * self.num_binaries

    @property
    def total_power(self) -> float:
        return float(self.s.sum())

    def to_json(self) -> str:
        return json.dumps(
            {
                "s": [float(v) for v in self.s],
                "n": self.n,
                "big_m": self.big_m,
                "m_effective": self.m_effective,
                "num_binaries": self.num_binaries,
                "num_continuous": self.num_continuous,
                "num_constraints": self.num_constraints,
            },
            indent=2,
            sort_keys=True,
        )


def build_instance(values, n: int, big_m: float = DEFAULT_BIG_M, tighten: bool = True) -> MilpInstance:
    """Validate the profile and pick the big-M constant.

    ``big_m`` below the profile peak would cut feasible schedules off and
    is rejected. With ``tighten`` (default) the constraints use
    ``max(values)`` instead of the nominal constant, which is valid because
    some optimum always has ``y <= x <= max(s)``.
    """
    s = np.asarray(values, dtype=float).ravel()
    if s.size < 1:
        raise DataError("instance needs at least one sample")
    if not np.isfinite(s).all() or (s < 0).any():
        raise DataError("profile values must be finite and >= 0")
    if n < 1:
        raise DataError("n must be >= 1")
    peak = float(s.max())
    if big_m < peak:
        raise DataError(f"big_m {big_m} is below the profile peak {peak}")
    m_eff = peak if tighten and peak > 0 else float(big_m)
    return MilpInstance(s=s, n=n, big_m=float(big_m), m_effective=m_eff)
