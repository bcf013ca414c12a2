"""Raw ink data model: points, traces, expressions.

All types are immutable after construction, so they can be shared freely
across threads. Trace coordinates are stored as read-only float arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Point:
    """A single pen sample. Only (x, y) are kept; extra channels are dropped."""

    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")


def _as_point_array(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError(f"trace points must be (n, 2) with n >= 1, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("trace contains non-finite coordinates")
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Trace:
    """One pen-down-to-pen-up trajectory."""

    id: int
    points: np.ndarray = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "points", _as_point_array(self.points))

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.id, self.points.tobytes()))

    @property
    def max_x(self) -> float:
        return float(self.points[:, 0].max())

    def bbox(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax)"""
        return (
            float(self.points[:, 0].min()),
            float(self.points[:, 1].min()),
            float(self.points[:, 0].max()),
            float(self.points[:, 1].max()),
        )


@dataclass(frozen=True)
class Expression:
    """A handwritten sample: traces in temporal writing order."""

    traces: tuple[Trace, ...]
    source_id: str = ""
    latex_label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        ids = [t.id for t in self.traces]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate trace ids in expression {self.source_id!r}")

    def __len__(self) -> int:
        return len(self.traces)

    def trace_ids(self) -> list[int]:
        return [t.id for t in self.traces]

    def trace_by_id(self, trace_id: int) -> Trace:
        for t in self.traces:
            if t.id == trace_id:
                return t
        raise KeyError(f"no trace with id {trace_id}")

    def bbox(self) -> tuple[float, float, float, float]:
        boxes = np.array([t.bbox() for t in self.traces])
        return (
            float(boxes[:, 0].min()),
            float(boxes[:, 1].min()),
            float(boxes[:, 2].max()),
            float(boxes[:, 3].max()),
        )


def bbox_of(traces) -> tuple[float, float, float, float]:
    """Joint bounding box of an iterable of traces."""
    traces = list(traces)
    if not traces:
        raise ValueError("bbox of empty trace set")
    boxes = np.array([t.bbox() for t in traces])
    return (
        float(boxes[:, 0].min()),
        float(boxes[:, 1].min()),
        float(boxes[:, 2].max()),
        float(boxes[:, 3].max()),
    )
