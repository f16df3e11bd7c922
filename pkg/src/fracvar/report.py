"""Plain result records shared by the check and study routines."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

#: Minimum error reduction per grid doubling for a refinement trend to pass.
TREND_FACTOR = 1.3


@dataclass
class CheckReport:
    """Outcome of one numerical certification."""

    name: str
    grid_sizes: list[int]
    norms: dict[str, Any]
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return _jsonable(asdict(self))


def trend(errors: Sequence[float], factor: float = TREND_FACTOR,
          floor: float = 0.0) -> dict[str, Any]:
    """Classify a sequence of errors over successive grid doublings.

    Errors at or below ``floor`` count as exact; a trend made only of exact
    values passes. Fewer than two levels is reported as insufficient.
    """
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        return {"status": "insufficient levels", "ratios": [], "passed": False}
    if all(e <= floor for e in errors):
        return {"status": "exact", "ratios": [], "passed": True}

    ratios = []
    for coarse, fine in zip(errors[:-1], errors[1:]):
        if fine <= floor:
            ratios.append(float("inf"))
        elif coarse <= floor:
            ratios.append(0.0)
        else:
            ratios.append(coarse / fine)
    passed = all(r >= factor for r in ratios)
    return {"status": "ok" if passed else "stalled", "ratios": ratios,
            "passed": passed}


def observed_orders(errors: Sequence[float], sizes: Sequence[float]) -> list[float]:
    """Log-ratio convergence orders between consecutive levels."""
    out = []
    for (e0, e1), (h0, h1) in zip(zip(errors[:-1], errors[1:]),
                                  zip(sizes[:-1], sizes[1:])):
        if e0 <= 0.0 or e1 <= 0.0:
            out.append(float("nan"))
        else:
            out.append(float(np.log(e0 / e1) / np.log(h0 / h1)))
    return out


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if np.isnan(value):
            return "nan"
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj
