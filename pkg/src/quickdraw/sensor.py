"""Emulation of the duty-cycled quickdraw accelerometer node.

The node samples slowly while asleep and wakes on a per-axis change of at
least ``wake_threshold_counts``. Awake, it samples at the fast rate, averages
groups of ``avg_group`` readings, suppresses averages that did not move far
enough from the last transmitted one, and ships the rest in batches of
``batch_size``. After a confirmed quiet period followed by ``sleep_after_s``
of inactivity it flushes whatever is held back and goes back to sleep.

All times are integer milliseconds; all readings are signed counts.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .records import RawSample, SamplePacket


class ContractError(ValueError):
    """Raised when a caller violates an input contract of the emulator."""


@dataclass(frozen=True)
class SensorConfig:
    full_scale_g: float = 2.0
    output_bits: int = 8
    sleep_rate_hz: float = 10.0
    active_rate_hz: float = 50.0
    wake_threshold_counts: int = 15
    avg_group: int = 8
    batch_size: int = 2
    inactive_confirm_s: float = 0.8
    sleep_after_s: float = 20.0

    def __post_init__(self):
        if self.full_scale_g <= 0:
            raise ValueError("full_scale_g must be positive")
        if self.output_bits < 2:
            raise ValueError("output_bits must be at least 2")
        if self.sleep_rate_hz <= 0 or self.active_rate_hz <= 0:
            raise ValueError("sampling rates must be positive")
        if self.sleep_rate_hz >= self.active_rate_hz:
            raise ValueError("sleep_rate_hz must be below active_rate_hz")
        if not 1 <= self.wake_threshold_counts <= self.max_count:
            raise ValueError(f"wake_threshold_counts must lie in [1, {self.max_count}]")
        if self.avg_group < 1 or self.batch_size < 1:
            raise ValueError("avg_group and batch_size must be >= 1")
        if self.inactive_confirm_s < 0 or self.sleep_after_s < 0:
            raise ValueError("timers must be non-negative")

    @property
    def max_count(self) -> int:
        return 2 ** (self.output_bits - 1) - 1

    @property
    def count_g(self) -> float:
        """Acceleration represented by one count."""
        return self.full_scale_g / self.max_count

    @property
    def sleep_period_ms(self) -> int:
        return int(round(1000.0 / self.sleep_rate_hz))

    @property
    def active_period_ms(self) -> int:
        return int(round(1000.0 / self.active_rate_hz))

    @property
    def inactive_confirm_ms(self) -> int:
        return int(round(self.inactive_confirm_s * 1000))

    @property
    def sleep_after_ms(self) -> int:
        return int(round(self.sleep_after_s * 1000))


def round_half_away(v: float) -> int:
    if v >= 0:
        return int(np.floor(v + 0.5))
    return -int(np.floor(-v + 0.5))


def quantize(a: float, cfg: SensorConfig = SensorConfig()) -> int:
    """Acceleration in g to signed counts, saturating at full scale."""
    c = round_half_away(a / cfg.full_scale_g * cfg.max_count)
    return max(-cfg.max_count, min(cfg.max_count, c))


def dequantize(c: int, cfg: SensorConfig = SensorConfig()) -> float:
    if not -cfg.max_count <= c <= cfg.max_count:
        raise ValueError(f"count {c} outside [-{cfg.max_count}, {cfg.max_count}]")
    return c * cfg.full_scale_g / cfg.max_count


def exceeds_threshold(prev: RawSample, curr: RawSample, cfg: SensorConfig = SensorConfig()) -> bool:
    th = cfg.wake_threshold_counts
    return (
        abs(curr.x - prev.x) >= th
        or abs(curr.y - prev.y) >= th
        or abs(curr.z - prev.z) >= th
    )


def _mean_half_away(total: int, n: int) -> int:
    # exact integer arithmetic: round(total / n) with halves away from zero
    q = (2 * abs(total) + n) // (2 * n)
    return q if total >= 0 else -q


def average_group(samples: Sequence[RawSample], cfg: Optional[SensorConfig] = None) -> RawSample:
    """Per-axis mean of one averaging group, stamped with the last sample's time."""
    n = len(samples)
    if n == 0 or (cfg is not None and n != cfg.avg_group):
        expected = cfg.avg_group if cfg is not None else ">= 1"
        raise ContractError(f"average_group needs {expected} samples, got {n}")
    return RawSample(
        t=samples[-1].t,
        x=_mean_half_away(sum(s.x for s in samples), n),
        y=_mean_half_away(sum(s.y for s in samples), n),
        z=_mean_half_away(sum(s.z for s in samples), n),
    )


class Mode(enum.Enum):
    SLEEP = "sleep"
    ACTIVE = "active"


@dataclass
class SensorState:
    """Mutable-by-copy state of one node.

    ``reference`` is the sample new readings are compared against: the most
    recently transmitted average while active, the last observed reading
    while asleep (``None`` before the first reading after power-on).
    """

    mode: Mode = Mode.SLEEP
    reference: Optional[RawSample] = None
    avg_buffer: list[RawSample] = field(default_factory=list)
    batch_buffer: list[RawSample] = field(default_factory=list)
    below_threshold_since: Optional[int] = None
    inactive_since: Optional[int] = None
    last_average: Optional[RawSample] = None
    last_t: Optional[int] = None
    next_seq: int = 0
    sensor_id: int = 0
    position: int = 1

    def period_ms(self, cfg: SensorConfig) -> int:
        return cfg.sleep_period_ms if self.mode is Mode.SLEEP else cfg.active_period_ms


def _packet(s: SensorState, samples: list[RawSample], flush: bool) -> SamplePacket:
    p = SamplePacket(
        sensor_id=s.sensor_id, position=s.position, seq=s.next_seq,
        samples=tuple(samples), flush=flush,
    )
    s.next_seq += 1
    return p


def step(
    state: SensorState,
    analog: Sequence[float],
    t: int,
    cfg: SensorConfig = SensorConfig(),
) -> tuple[SensorState, list[SamplePacket]]:
    """Advance the node by one sampling tick.

    The input state is left untouched. Callers must tick at
    ``state.period_ms(cfg)`` intervals; the emulator itself only checks that
    time moves forward.
    """
    if state.last_t is not None and t <= state.last_t:
        raise ContractError(f"timestamp {t} does not advance past {state.last_t}")
    s = copy.copy(state)
    s.avg_buffer = list(state.avg_buffer)
    s.batch_buffer = list(state.batch_buffer)
    s.last_t = t

    q = RawSample(t, quantize(analog[0], cfg), quantize(analog[1], cfg), quantize(analog[2], cfg))
    out: list[SamplePacket] = []

    if s.mode is Mode.SLEEP:
        if s.reference is not None and exceeds_threshold(s.reference, q, cfg):
            s.mode = Mode.ACTIVE
            s.below_threshold_since = None
            s.inactive_since = None
        # sub-threshold readings are not read out but still track slow drift
        s.reference = q
        return s, out

    s.avg_buffer.append(q)
    if len(s.avg_buffer) < cfg.avg_group:
        return s, out

    avg = average_group(s.avg_buffer, cfg)
    s.avg_buffer = []
    s.last_average = avg

    if exceeds_threshold(s.reference, avg, cfg):
        s.reference = avg
        s.below_threshold_since = None
        s.inactive_since = None
        s.batch_buffer.append(avg)
        if len(s.batch_buffer) == cfg.batch_size:
            out.append(_packet(s, s.batch_buffer, flush=False))
            s.batch_buffer = []
        return s, out

    if s.below_threshold_since is None:
        s.below_threshold_since = avg.t
    if s.inactive_since is None and avg.t - s.below_threshold_since >= cfg.inactive_confirm_ms:
        s.inactive_since = avg.t
    if s.inactive_since is not None and avg.t - s.inactive_since >= cfg.sleep_after_ms:
        # nothing held back: the final pose reading goes out instead
        held = s.batch_buffer or [avg]
        out.append(_packet(s, held, flush=True))
        s.batch_buffer = []
        s.mode = Mode.SLEEP
        s.reference = q
        s.below_threshold_since = None
        s.inactive_since = None
    return s, out


@dataclass(frozen=True)
class TickRecord:
    """What the node saw at one tick; used to audit the state machine."""

    t: int
    mode_before: Mode
    mode_after: Mode
    counts: tuple[int, int, int]


def run_trace(
    t_ms: Sequence[int],
    acc_g: np.ndarray,
    cfg: SensorConfig = SensorConfig(),
    sensor_id: int = 0,
    position: int = 1,
    tick_log: Optional[list[TickRecord]] = None,
) -> list[SamplePacket]:
    """Drive the node over an analog trace.

    The trace is linearly interpolated at the node's own tick times, which
    start at the first trace timestamp and advance by the period of the
    current mode until the end of the trace.
    """
    t_ms = np.asarray(t_ms, dtype=np.int64)
    if len(t_ms) == 0:
        return []
    acc_g = np.asarray(acc_g, dtype=float)
    if acc_g.shape != (len(t_ms), 3):
        raise ContractError(f"acceleration array must be ({len(t_ms)}, 3), got {acc_g.shape}")
    if np.any(np.diff(t_ms) <= 0):
        raise ContractError("trace timestamps must be strictly increasing")

    # every tick lands on the fast grid when the slow period is a multiple of it
    fast = cfg.active_period_ms
    slow = cfg.sleep_period_ms
    t0, t_end = int(t_ms[0]), int(t_ms[-1])
    if slow % fast == 0:
        grid = np.arange(t0, t_end + 1, fast, dtype=np.int64)
        table = np.column_stack([np.interp(grid, t_ms, acc_g[:, k]) for k in range(3)])

        def sample_at(t):
            return table[(t - t0) // fast]
    else:
        def sample_at(t):
            return [float(np.interp(t, t_ms, acc_g[:, k])) for k in range(3)]

    state = SensorState(sensor_id=sensor_id, position=position)
    packets: list[SamplePacket] = []
    t = t0
    while t <= t_end:
        before = state.mode
        state, out = step(state, sample_at(t), t, cfg)
        packets.extend(out)
        if tick_log is not None:
            tick_log.append(TickRecord(t, before, state.mode, tuple(quantize(v, cfg) for v in sample_at(t))))
        t += state.period_ms(cfg)
    return packets
