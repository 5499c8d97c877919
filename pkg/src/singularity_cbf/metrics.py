"""Summary numbers for a run, optionally against a baseline run without the filter."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np

from .errors import ContractViolation
from .trajectory import TrajectoryLog, wrap_angle

INPUT_PREFIXES = ("u", "I")
BARRIER_COLUMNS = ("h", "h_min")


@dataclass
class MetricsReport:
    rms_position_error: float
    rms_orientation_error: Optional[float]      # None when the log has no heading
    max_abs_input: Dict[str, float]
    spike_ratio: Optional[Dict[str, float]]      # only when a baseline run is given
    min_barrier_value: Optional[float]
    qp_infeasible_count: int
    wall_time: Optional[float]
    position_unit: str = "m"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d) -> "MetricsReport":
        return cls(**d)


def input_columns(log: TrajectoryLog):
    for prefix in INPUT_PREFIXES:
        cols = log.columns_like(prefix)
        if cols:
            return cols
    return []


def infeasible_count(log: TrajectoryLog) -> int:
    return sum("infeasible" in e for e in log.events)


def check_aligned(a: TrajectoryLog, b: TrajectoryLog):
    if len(a) != len(b) or not np.array_equal(a.t, b.t):
        raise ContractViolation("logs are not aligned in time (different sample times)")
    if input_columns(a) != input_columns(b):
        raise ContractViolation("logs have different input channels")


def spike_ratio(log: TrajectoryLog, baseline: TrajectoryLog) -> Dict[str, float]:
    """max |u| without the filter over max |u| with it, per channel."""
    check_aligned(log, baseline)
    out = {}
    for c in input_columns(log):
        num = float(np.max(np.abs(baseline[c])))
        den = float(np.max(np.abs(log[c])))
        if den == 0.0:
            out[c] = 1.0 if num == 0.0 else float("inf")
        else:
            out[c] = num / den
    return out


def compute_metrics(log: TrajectoryLog, baseline: Optional[TrajectoryLog] = None) -> MetricsReport:
    """RMS tracking errors over all steps, input peaks, and the smallest barrier value.

    The heading error is wrapped to (-pi, pi] before squaring.  Position units
    are those of the log (``meta["position_unit"]``).
    """
    if len(log) == 0:
        raise ContractViolation("empty log")
    ex, ey = log["ex"], log["ey"]
    rms_pos = float(np.sqrt(np.mean(ex * ex + ey * ey)))
    rms_theta = None
    if "etheta" in log.columns:
        eth = wrap_angle(log["etheta"])
        rms_theta = float(np.sqrt(np.mean(eth * eth)))
    peaks = {c: float(np.max(np.abs(log[c]))) for c in input_columns(log)}
    h_min = None
    for c in BARRIER_COLUMNS:
        if c in log.columns and np.any(np.isfinite(log[c])):
            h_min = float(np.nanmin(log[c]))
            break
    ratio = spike_ratio(log, baseline) if baseline is not None else None
    wall = log.meta.get("wall_time")
    return MetricsReport(
        rms_position_error=rms_pos,
        rms_orientation_error=rms_theta,
        max_abs_input=peaks,
        spike_ratio=ratio,
        min_barrier_value=h_min,
        qp_infeasible_count=infeasible_count(log),
        wall_time=None if wall is None else float(wall),
        position_unit=str(log.meta.get("position_unit", "m")),
    )
