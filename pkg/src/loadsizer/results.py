"""Shared result containers and JSON helpers for the sizing methods."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DataError


def as_load_sizing(x) -> np.ndarray:
    """Validate and return a static load size vector: positive, non-increasing."""
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 0:
        raise DataError("load sizing must have at least one unit")
    if (arr <= 0).any():
        raise DataError(f"load sizes must be positive, got {arr.tolist()}")
    if (np.diff(arr) > 1e-12).any():
        raise DataError(f"load sizes must be non-increasing, got {arr.tolist()}")
    return arr


@dataclass
class SizingResult:
    """Uniform record of one sizing run, whichever method produced it."""

    method: str
    n: int
    x: list[float]
    objective: float
    solar_utilization: float
    diagnostics: dict[str, Any] = field(default_factory=dict)
    runtime_seconds: float = 0.0

    def to_json(self) -> str:
        payload = {
            "method": self.method,
            "n": self.n,
            "x": [float(v) for v in self.x],
            "objective": float(self.objective),
            "solar_utilization": float(self.solar_utilization),
            "diagnostics": _jsonable(self.diagnostics),
            "runtime_seconds": float(self.runtime_seconds),
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def format_float(v: float) -> str:
    """Deterministic float formatting used by all CSV emitters."""
    return format(float(v), ".12g")
