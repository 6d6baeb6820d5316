"""Convergence traces and their CSV form."""

from __future__ import annotations

import csv
import numbers
from dataclasses import dataclass, field
from pathlib import Path

TRACE_HEADER = ("pass", "grad_l1", "dist_ref_l2", "objective", "wallclock_ms")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, numbers.Integral):
        return str(int(x))
    return repr(float(x))


@dataclass(frozen=True)
class Checkpoint:
    pass_count: float
    grad_l1: float
    dist_ref_l2: float | None
    objective: float
    wallclock_ms: float


@dataclass
class ConvergenceTrace:
    """Ordered checkpoints; ``pass_count`` must be strictly increasing."""

    label: str = ""
    checkpoints: list[Checkpoint] = field(default_factory=list)

    def add(self, pass_count, grad_l1, dist_ref_l2, objective, wallclock_ms=0.0):
        if self.checkpoints and pass_count <= self.checkpoints[-1].pass_count:
            raise ValueError("pass_count must be strictly increasing")
        self.checkpoints.append(
            Checkpoint(pass_count, float(grad_l1),
                       None if dist_ref_l2 is None else float(dist_ref_l2),
                       float(objective), float(wallclock_ms))
        )

    def __len__(self):
        return len(self.checkpoints)

    def column(self, name: str) -> list:
        attr = "pass_count" if name == "pass" else name
        return [getattr(cp, attr) for cp in self.checkpoints]

    @property
    def last(self) -> Checkpoint:
        return self.checkpoints[-1]

    def first_below(self, tol: float, column: str = "grad_l1"):
        """Pass count of the first checkpoint with ``column <= tol``, else ``None``."""
        for cp in self.checkpoints:
            val = getattr(cp, column)
            if val is not None and val <= tol:
                return cp.pass_count
        return None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for cp in self.checkpoints:
                writer.writerow([_fmt(cp.pass_count), _fmt(cp.grad_l1), _fmt(cp.dist_ref_l2),
                                 _fmt(cp.objective), _fmt(cp.wallclock_ms)])

    @classmethod
    def from_csv(cls, path, label: str | None = None) -> ConvergenceTrace:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != TRACE_HEADER:
                raise ValueError(f"{path}: unexpected header {header}")
            trace = cls(label if label is not None else Path(path).stem)
            for row in reader:
                p = float(row[0])
                trace.add(int(p) if p.is_integer() else p, float(row[1]),
                          float(row[2]) if row[2] else None, float(row[3]), float(row[4]))
        return trace
