"""Plain data records shared between the node emulator and the station side."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

COUNT_LIMIT = 127


@dataclass(frozen=True)
class RawSample:
    """One 3-axis reading in signed sensor counts; ``t`` in milliseconds."""

    t: int
    x: int
    y: int
    z: int

    def axes(self) -> tuple[int, int, int]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class SamplePacket:
    """A batch of averaged samples as sent over the radio."""

    sensor_id: int
    position: int
    seq: int
    samples: tuple[RawSample, ...]
    flush: bool = False

    def __post_init__(self):
        if not self.samples:
            raise ValueError("packet must carry at least one sample")
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample timestamps within a packet must be strictly increasing")


@dataclass
class ClimbSession:
    """Ordered stream of received samples from one sensor during one climb.

    ``labels`` holds one activity name per sample when ground truth is known.
    """

    climb_id: str
    sensor_position: int
    samples: list[RawSample]
    labels: Optional[list[str]] = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != len(self.samples):
            raise ValueError(
                f"session {self.climb_id}: {len(self.labels)} labels for {len(self.samples)} samples"
            )
