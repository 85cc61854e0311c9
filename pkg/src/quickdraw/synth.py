"""Synthetic labeled acceleration traces of the lowest clipped quickdraw.

The generator reproduces only the structure a lowering detector relies on:
transient jolts while the climber ascends and clips, a quasi-static hanging
pose while idle, and a sustained upward, wall-orthogonal pose while the
climber is lowered. Amplitudes are free parameters, not measurements.

Scenario files are plain text, one ``key = value`` per line::

    # comments and blank lines are ignored
    seed = 7
    noise_std_g = 0.03
    sample_rate_hz = 100
    sensor_position = 1
    phase = Idle 5
    phase = Clip 2 1.0
    phase = Lowering 15 1.0

``phase`` lines take an activity name, a duration in seconds and an optional
intensity (default 1.0); phases run in file order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np


class Activity(str, enum.Enum):
    IDLE = "Idle"
    CLIP = "Clip"
    ASCEND = "Ascend"
    REST = "Rest"
    LOWERING = "Lowering"
    ROPE_PULL = "RopePull"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Phase:
    activity: Activity
    duration_s: float
    intensity: float = 1.0


@dataclass(frozen=True)
class ScenarioScript:
    phases: tuple[Phase, ...]
    seed: int = 0
    noise_std_g: float = 0.03
    sample_rate_hz: float = 100.0
    sensor_position: int = 1

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ScenarioError("scenario has no phases")
        for i, p in enumerate(self.phases):
            if not isinstance(p.activity, Activity):
                raise ScenarioError(f"phase {i}: unknown activity {p.activity!r}")
            if not p.duration_s > 0:
                raise ScenarioError(f"phase {i}: duration must be positive")
            if not p.intensity >= 0:
                raise ScenarioError(f"phase {i}: intensity must be >= 0")
        if sum(p.activity is Activity.LOWERING for p in self.phases) > 1:
            raise ScenarioError("a climb has at most one Lowering phase")
        if not self.noise_std_g >= 0:
            raise ScenarioError("noise_std_g must be >= 0")
        if not self.sample_rate_hz > 0 or (1000.0 / self.sample_rate_hz) % 1:
            raise ScenarioError("sample_rate_hz must divide 1000 Hz into whole milliseconds")

    @property
    def duration_s(self) -> float:
        return sum(p.duration_s for p in self.phases)


@dataclass
class LabeledTrace:
    """Analog trace in the sensor frame (g) with one activity label per sample.

    ``clean`` is the same trace before sensor noise is added.
    """

    t_ms: np.ndarray
    acc: np.ndarray
    labels: list[Activity]
    sensor_position: int = 1
    clean: Optional[np.ndarray] = None
    script: Optional[ScenarioScript] = field(default=None, repr=False)

    def label_at(self, t_ms) -> list[Activity]:
        """Ground-truth label at arbitrary times (most recent trace sample)."""
        idx = np.searchsorted(self.t_ms, np.asarray(t_ms), side="right") - 1
        idx = np.clip(idx, 0, len(self.t_ms) - 1)
        return [self.labels[i] for i in np.atleast_1d(idx)]

    def span(self, activity: Activity) -> Optional[tuple[int, int]]:
        """First and last timestamp labeled ``activity``, if any."""
        hits = [i for i, a in enumerate(self.labels) if a is activity]
        if not hits:
            return None
        return int(self.t_ms[hits[0]]), int(self.t_ms[hits[-1]])


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


# quickdraw hanging from its bolt with the rope running down through it
HANG = _unit([0.05, 0.92, 0.38])
# rope dragged down and out by the belayer
ROPE = _unit([0.0, 0.75, 0.66])
LOWER_TILT_DEG = 45.0
REST_TILT_DEG = 50.0
LOWER_SWING_MAX_DEG = 14.0


def lowering_pose(tilt_deg, sway_deg):
    """Upward pose: gravity reaction in the -y/+z quadrant, sway along x."""
    b = np.radians(tilt_deg)
    s = np.radians(sway_deg)
    return np.stack([np.sin(s), -np.sin(b) * np.cos(s), np.cos(b) * np.cos(s)], axis=-1)


def _tilted(base, max_deg, rng):
    """Random unit vector within ``max_deg`` of ``base``."""
    axis = _unit(np.cross(base, rng.normal(size=3)))
    ang = np.radians(rng.uniform(0, max_deg))
    # Rodrigues rotation of base about axis
    return base * math.cos(ang) + np.cross(axis, base) * math.sin(ang) + axis * np.dot(axis, base) * (1 - math.cos(ang))


def _add_jolts(sig, tt, rate_hz, amp_lo, amp_hi, rng):
    dt = tt[1] - tt[0] if len(tt) > 1 else 0.0
    n_jolts = rng.poisson(rate_hz * (tt[-1] - tt[0] + dt))
    for _ in range(n_jolts):
        t0 = rng.uniform(tt[0], tt[-1])
        width = rng.uniform(0.08, 0.25)
        direction = _unit(rng.normal(size=3))
        amp = rng.uniform(amp_lo, amp_hi)
        m = (tt >= t0) & (tt < t0 + width)
        sig[m] += amp * np.sin(np.pi * (tt[m] - t0) / width)[:, None] * direction
    return sig


def _wander(tt, base, max_deg, hold_lo, hold_hi, rng, tug_rate=0.0):
    """Piecewise-held poses near ``base``, with occasional short upward tugs."""
    sig = np.empty((len(tt), 3))
    i = 0
    while i < len(tt):
        hold = rng.uniform(hold_lo, hold_hi)
        m = (tt >= tt[i]) & (tt < tt[i] + hold)
        if tug_rate and rng.random() < tug_rate * hold:
            pose = lowering_pose(LOWER_TILT_DEG + rng.uniform(-15, 15), rng.uniform(-10, 10))
            m = (tt >= tt[i]) & (tt < tt[i] + rng.uniform(0.4, 1.2))
        else:
            pose = _tilted(base, max_deg, rng)
        sig[m] = pose
        i = int(np.flatnonzero(m)[-1]) + 1
    return sig


def _phase_signal(phase: Phase, tt: np.ndarray, rng) -> np.ndarray:
    k = phase.intensity
    a = phase.activity
    if a is Activity.IDLE:
        return np.tile(HANG, (len(tt), 1))
    if a is Activity.CLIP:
        sig = _wander(tt, HANG, 40.0 * min(k, 1.5), 0.2, 0.6, rng)
        return _add_jolts(sig, tt, 3.0, 0.4 * k, 1.2 * k, rng)
    if a is Activity.ASCEND:
        sig = _wander(tt, HANG, 35.0 * min(k, 1.5), 0.6, 2.0, rng, tug_rate=0.08)
        return _add_jolts(sig, tt, 1.5, 0.2 * k, 0.8 * k, rng)
    if a is Activity.REST:
        # hanging on the rope loads the quickdraw upward much like lowering,
        # but the rope does not run, so the pose barely moves
        f = rng.uniform(0.2, 0.4)
        sway = 5.0 * k * np.sin(2 * np.pi * f * tt + rng.uniform(0, 2 * np.pi))
        return lowering_pose(REST_TILT_DEG + 0.5 * sway, sway)
    if a is Activity.LOWERING:
        swing = min(10.0 * k, LOWER_SWING_MAX_DEG)
        f_tilt, f_sway, f_feed = rng.uniform(0.25, 0.45), rng.uniform(0.3, 0.6), rng.uniform(0.9, 1.4)
        ph = rng.uniform(0, 2 * np.pi, size=3)
        tilt = LOWER_TILT_DEG + swing * np.sin(2 * np.pi * f_tilt * tt + ph[0])
        sway = swing * np.sin(2 * np.pi * f_sway * tt + ph[1])
        # stop-and-go rope feed changes the load, not the direction
        load = 1.0 + min(0.3 * k, 0.45) * np.sin(2 * np.pi * f_feed * tt + ph[2])
        return lowering_pose(tilt, sway) * load[:, None]
    if a is Activity.ROPE_PULL:
        sig = np.tile(ROPE, (len(tt), 1))
        f = rng.uniform(0.7, 1.2)
        pull = np.clip(np.sin(2 * np.pi * f * tt), 0, None) ** 2
        sig[:, 1] += 0.6 * k * pull
        return _add_jolts(sig, tt, 1.0, 0.2 * k, 0.5 * k, rng)
    raise ScenarioError(f"unknown activity {a!r}")


def generate(script: ScenarioScript) -> LabeledTrace:
    """Deterministic labeled trace for one scripted climb."""
    rng = np.random.default_rng(script.seed)
    dt_ms = int(round(1000.0 / script.sample_rate_hz))
    parts, labels = [], []
    start = 0
    for phase in script.phases:
        n = max(1, int(round(phase.duration_s * 1000.0 / dt_ms)))
        tt = (start + np.arange(n)) * dt_ms / 1000.0
        parts.append(_phase_signal(phase, tt, rng))
        labels.extend([phase.activity] * n)
        start += n
    clean = np.vstack(parts)
    noisy = clean + rng.normal(0.0, script.noise_std_g, size=clean.shape)
    t_ms = np.arange(start, dtype=np.int64) * dt_ms
    return LabeledTrace(t_ms, noisy, labels, script.sensor_position, clean, script)


SEED_STRIDE = 7919


def corpus_scripts(n_climbs: int, base: ScenarioScript, jitter: float = 0.2) -> list[ScenarioScript]:
    """Per-climb scripts with durations and intensities jittered by up to ``jitter``."""
    if n_climbs < 1:
        raise ScenarioError("n_climbs must be >= 1")
    if not 0 <= jitter < 1:
        raise ScenarioError("jitter must lie in [0, 1)")
    out = []
    for i in range(n_climbs):
        rng = np.random.default_rng([base.seed, i])
        phases = tuple(
            Phase(
                p.activity,
                p.duration_s * rng.uniform(1 - jitter, 1 + jitter),
                p.intensity * rng.uniform(1 - jitter, 1 + jitter),
            )
            if jitter
            else p
            for p in base.phases
        )
        out.append(replace(base, phases=phases, seed=base.seed + i * SEED_STRIDE))
    return out


def generate_corpus(n_climbs: int, base: ScenarioScript, jitter: float = 0.2) -> list[LabeledTrace]:
    return [generate(s) for s in corpus_scripts(n_climbs, base, jitter)]


DEFAULT_SCENARIO = """\
# one lead climb seen from the lowest clipped quickdraw
seed = 2024
noise_std_g = 0.03
sample_rate_hz = 100
sensor_position = 1
phase = Idle 5
phase = Clip 2 1.0
phase = Ascend 18 1.0
phase = Rest 4 1.0
phase = Ascend 12 1.0
phase = Lowering 15 1.0
phase = RopePull 6 1.0
phase = Idle 30
"""

_ACTIVITY_BY_NAME = {a.value.lower(): a for a in Activity}


def parse_scenario(text: str) -> ScenarioScript:
    opts: dict = {}
    phases = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "phase":
                parts = value.split()
                if len(parts) not in (2, 3):
                    raise ScenarioError(f"line {lineno}: phase needs '<activity> <duration_s> [intensity]'")
                act = _ACTIVITY_BY_NAME.get(parts[0].lower())
                if act is None:
                    raise ScenarioError(f"line {lineno}: unknown activity {parts[0]!r}")
                phases.append(Phase(act, float(parts[1]), float(parts[2]) if len(parts) == 3 else 1.0))
            elif key in ("seed", "sensor_position"):
                opts[key] = int(value)
            elif key in ("noise_std_g", "sample_rate_hz"):
                opts[key] = float(value)
            else:
                raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        except ValueError as e:
            if isinstance(e, ScenarioError):
                raise
            raise ScenarioError(f"line {lineno}: {e}") from None
    return ScenarioScript(phases=tuple(phases), **opts)


def format_scenario(script: ScenarioScript) -> str:
    lines = [
        f"seed = {script.seed}",
        f"noise_std_g = {script.noise_std_g!r}",
        f"sample_rate_hz = {script.sample_rate_hz!r}",
        f"sensor_position = {script.sensor_position}",
    ]
    lines += [f"phase = {p.activity.value} {p.duration_s!r} {p.intensity!r}" for p in script.phases]
    return "\n".join(lines) + "\n"


def load_scenario(path) -> ScenarioScript:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def default_scenario() -> ScenarioScript:
    return parse_scenario(DEFAULT_SCENARIO)
