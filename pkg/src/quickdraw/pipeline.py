"""End-to-end glue: scripted climbs -> node packets -> labeled sessions -> resampled climbs."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .features import ResampleConfig, ResampledClimb, resample_session
from .records import ClimbSession, RawSample, SamplePacket
from .sensor import SensorConfig, run_trace
from .station import DEFAULT_GAP_S, assemble_sessions
from .synth import Activity, LabeledTrace, ScenarioScript, corpus_scripts, generate

log = logging.getLogger(__name__)

# silence between consecutive simulated climbs, well above the session gap
INTER_CLIMB_GAP_MS = 300_000


@dataclass
class SimulatedCorpus:
    sessions: list[ClimbSession]
    packets: list[SamplePacket]
    traces: list[LabeledTrace]
    scripts: list[ScenarioScript]


def _shift(p: SamplePacket, dt: int, dseq: int) -> SamplePacket:
    return SamplePacket(
        p.sensor_id, p.position, p.seq + dseq,
        tuple(RawSample(s.t + dt, s.x, s.y, s.z) for s in p.samples), p.flush,
    )


def simulate_corpus(
    base: ScenarioScript,
    n_climbs: int,
    jitter: float = 0.2,
    sensor_cfg: SensorConfig = SensorConfig(),
    sensor_id: int = 0,
    gap_s: float = DEFAULT_GAP_S,
) -> SimulatedCorpus:
    """Simulate ``n_climbs`` climbs seen by one sensor, back to back.

    Climbs are laid on a single timeline separated by long silences, the
    resulting packet log is split into sessions by the station's gap rule,
    and every session gets ground-truth labels from the climb it fell in.
    A climb that never woke the sensor still yields one empty session.
    """
    scripts = corpus_scripts(n_climbs, base, jitter)
    traces, packets, windows = [], [], []
    offset, seq = 0, 0
    for script in scripts:
        tr = generate(script)
        pk = run_trace(tr.t_ms, tr.acc, sensor_cfg, sensor_id=sensor_id, position=script.sensor_position)
        packets += [_shift(p, offset, seq) for p in pk]
        seq += len(pk)
        traces.append(tr)
        windows.append((offset, offset + int(tr.t_ms[-1])))
        last = offset + int(tr.t_ms[-1])
        if pk:
            last = max(last, packets[-1].samples[-1].t)
        offset = last + INTER_CLIMB_GAP_MS

    assembled = assemble_sessions(packets, gap_s)
    sessions = []
    for i, (tr, script, (start, end)) in enumerate(zip(traces, scripts, windows)):
        mine = [s for s in assembled if start <= s.samples[0].t <= end]
        meta = {"seed": script.seed, "sensor_id": sensor_id, "t0_ms": start}
        span = tr.span(Activity.LOWERING)
        if span is not None:
            meta["lowering_ms"] = [span[0] + start, span[1] + start]
        if not mine:
            sessions.append(ClimbSession(f"climb{i:03d}", script.sensor_position, [], [], dict(meta)))
        for k, s in enumerate(mine):
            ts = np.array([r.t - start for r in s.samples])
            labels = [a.value for a in tr.label_at(ts)]
            cid = f"climb{i:03d}" if len(mine) == 1 else f"climb{i:03d}-{k}"
            sessions.append(ClimbSession(cid, s.sensor_position, s.samples, labels, dict(meta)))
    return SimulatedCorpus(sessions, packets, traces, scripts)


def resample_corpus(
    sessions: Sequence[ClimbSession],
    cfg: ResampleConfig = ResampleConfig(),
    sensor_cfg: SensorConfig = SensorConfig(),
    min_samples: int = 2,
) -> list[ResampledClimb]:
    out = []
    for s in sessions:
        if len(s.samples) < min_samples:
            log.warning("skipping session %s: %d samples", s.climb_id, len(s.samples))
            continue
        out.append(resample_session(s, cfg, sensor_cfg))
    return out


def lowering_count(labels: Optional[Sequence[str]]) -> int:
    return 0 if labels is None else sum(1 for lab in labels if lab == Activity.LOWERING.value)
