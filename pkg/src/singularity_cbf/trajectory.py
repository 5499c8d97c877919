"""Column-oriented time series written by every scenario run."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from ._io import atomic_write_text, csv_text
from .errors import ContractViolation


@dataclass
class TrajectoryLog:
    columns: List[str]
    data: np.ndarray
    meta: Dict[str, object] = field(default_factory=dict)
    events: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(self.columns))
        t = self.data[:, 0] if len(self.data) else np.zeros(0)
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ContractViolation("log time column must be strictly increasing")

    def __len__(self):
        return len(self.data)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.column(name)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def columns_like(self, prefix: str) -> List[str]:
        return [c for c in self.columns if c.startswith(prefix) and c[len(prefix):].isdigit()]

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def to_csv(self, path) -> Path:
        int_cols = {c for c in self.columns if c.startswith("active")}
        rows = ([int(v) if c in int_cols else v for c, v in zip(self.columns, row)] for row in self.data)
        return atomic_write_text(path, csv_text(self.columns, rows, digits=9))

    @classmethod
    def from_csv(cls, path) -> "TrajectoryLog":
        path = Path(path)
        with path.open() as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(header, data)


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)
