"""File-based stand-in for the base station: packet log codec, sessions, corpora.

Packet log record (one per line, comma-separated, no quoting)::

    sensor_id,position,seq,flush,t_ms,x,y,z[,t_ms,x,y,z ...]

``flush`` is 0 or 1. Each packet carries 1..batch_size sample groups.

Corpus file::

    #quickdraw-corpus v1
    #config {"...": ...}
    session <climb_id> <position> <n_samples> <has_labels 0|1> <meta json>
    t_ms,x,y,z[,label]
    ...
    end <climb_id>

Session ids and labels may not contain whitespace or commas.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Optional

from .records import COUNT_LIMIT, ClimbSession, RawSample, SamplePacket

log = logging.getLogger(__name__)

CORPUS_MAGIC = "#quickdraw-corpus"
CORPUS_VERSION = 1
DEFAULT_GAP_S = 120.0

_HEAD_FIELDS = ("sensor_id", "position", "seq", "flush")
_AXES = ("t_ms", "x", "y", "z")


class PacketParseError(ValueError):
    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(message)


class PacketRangeError(PacketParseError):
    pass


class OrderingError(ValueError):
    pass


class CorpusFormatError(ValueError):
    pass


class CorpusVersionError(CorpusFormatError):
    pass


def encode_packet(p: SamplePacket) -> str:
    parts = [str(p.sensor_id), str(p.position), str(p.seq), "1" if p.flush else "0"]
    for s in p.samples:
        parts += [str(s.t), str(s.x), str(s.y), str(s.z)]
    return ",".join(parts) + "\n"


def _int_field(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise PacketParseError(f"field {name!r}: not an integer: {text!r}", name) from None


def decode_packet(line: str, batch_size: int = 2) -> SamplePacket:
    line = line.rstrip("\r\n")
    if not line.strip():
        raise PacketParseError("empty record")
    fields = line.split(",")
    if len(fields) < 4:
        raise PacketParseError(f"record has {len(fields)} fields, header needs 4", _HEAD_FIELDS[len(fields)])
    sensor_id, position, seq = (_int_field(fields[i], _HEAD_FIELDS[i]) for i in range(3))
    if fields[3] not in ("0", "1"):
        raise PacketParseError(f"field 'flush': expected 0 or 1, got {fields[3]!r}", "flush")
    body = fields[4:]
    if not body or len(body) % 4:
        raise PacketParseError(f"sample groups need 4 fields each, got {len(body)} trailing fields", "samples")
    n = len(body) // 4
    if n > batch_size:
        raise PacketParseError(f"{n} samples exceed batch size {batch_size}", "samples")
    samples = []
    for g in range(n):
        vals = []
        for k, name in enumerate(_AXES):
            label = f"sample[{g}].{name}"
            v = _int_field(body[4 * g + k], label)
            if k and not -COUNT_LIMIT <= v <= COUNT_LIMIT:
                raise PacketRangeError(f"field {label!r}: {v} outside [-{COUNT_LIMIT}, {COUNT_LIMIT}]", label)
            vals.append(v)
        samples.append(RawSample(*vals))
    try:
        return SamplePacket(sensor_id, position, seq, tuple(samples), fields[3] == "1")
    except ValueError as e:
        raise PacketParseError(str(e), "samples") from None


def write_packet_log(packets: Iterable[SamplePacket], path) -> None:
    atomic_write(path, "".join(encode_packet(p) for p in packets))


def read_packet_log(path, batch_size: int = 2) -> list[SamplePacket]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            try:
                out.append(decode_packet(line, batch_size))
            except PacketParseError as e:
                raise PacketParseError(f"{path}:{lineno}: {e}", e.field) from None
    return out


class SessionAssembler:
    """Incremental assembly of per-sensor packet streams into sessions.

    Packets of one sensor must arrive in seq order; sensors may interleave.
    Re-sent packets (same sensor and seq) are dropped and counted.
    """

    def __init__(self, gap_s: float = DEFAULT_GAP_S):
        self.gap_ms = gap_s * 1000.0
        self.duplicates = 0
        self._seen: dict[int, set] = defaultdict(set)
        self._last_seq: dict[int, int] = {}
        self._position: dict[int, int] = {}
        self._runs: dict[int, list[list[RawSample]]] = defaultdict(list)

    def feed(self, p: SamplePacket) -> None:
        sid = p.sensor_id
        if p.seq in self._seen[sid]:
            self.duplicates += 1
            log.warning("sensor %d: dropping duplicate packet seq %d", sid, p.seq)
            return
        if sid in self._last_seq and p.seq < self._last_seq[sid]:
            raise OrderingError(f"sensor {sid}: seq {p.seq} after {self._last_seq[sid]}")
        self._seen[sid].add(p.seq)
        self._last_seq[sid] = p.seq
        self._position[sid] = p.position
        runs = self._runs[sid]
        for s in p.samples:
            if runs and runs[-1]:
                prev = runs[-1][-1].t
                if s.t <= prev:
                    raise OrderingError(f"sensor {sid}: sample time {s.t} not after {prev}")
                if s.t - prev > self.gap_ms:
                    runs.append([])
            elif not runs:
                runs.append([])
            runs[-1].append(s)

    def sessions(self) -> list[ClimbSession]:
        out = []
        for sid in sorted(self._runs):
            for k, run in enumerate(self._runs[sid]):
                out.append(ClimbSession(
                    climb_id=f"s{sid}-{k:03d}",
                    sensor_position=self._position[sid],
                    samples=list(run),
                    meta={"sensor_id": sid},
                ))
        return out


def assemble_sessions(packets: Iterable[SamplePacket], gap_s: float = DEFAULT_GAP_S) -> list[ClimbSession]:
    asm = SessionAssembler(gap_s)
    for p in packets:
        asm.feed(p)
    return asm.sessions()


def atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_token(value: str, what: str) -> str:
    if not value or any(c.isspace() or c == "," for c in value):
        raise CorpusFormatError(f"{what} {value!r} must be non-empty without whitespace or commas")
    return value


def dumps_corpus(sessions: Iterable[ClimbSession], config: Optional[dict] = None) -> str:
    lines = [f"{CORPUS_MAGIC} v{CORPUS_VERSION}", "#config " + json.dumps(config or {}, sort_keys=True)]
    for s in sessions:
        cid = _check_token(s.climb_id, "climb_id")
        has_labels = s.labels is not None
        lines.append(
            f"session {cid} {s.sensor_position} {len(s.samples)} {int(has_labels)} "
            + json.dumps(s.meta, sort_keys=True, separators=(",", ":"))
        )
        for i, r in enumerate(s.samples):
            row = f"{r.t},{r.x},{r.y},{r.z}"
            if has_labels:
                row += "," + _check_token(str(s.labels[i]), "label")
            lines.append(row)
        lines.append(f"end {cid}")
    return "\n".join(lines) + "\n"


def loads_corpus(text: str) -> tuple[list[ClimbSession], dict]:
    """Parse a corpus; returns the sessions and the echoed config."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith(CORPUS_MAGIC + " "):
        raise CorpusFormatError("missing corpus header")
    version = lines[0][len(CORPUS_MAGIC) + 1:].strip()
    if version != f"v{CORPUS_VERSION}":
        raise CorpusVersionError(f"unsupported corpus format version {version!r} (expected v{CORPUS_VERSION})")
    if len(lines) < 2 or not lines[1].startswith("#config "):
        raise CorpusFormatError("missing config line")
    try:
        config = json.loads(lines[1][len("#config "):])
    except json.JSONDecodeError as e:
        raise CorpusFormatError(f"line 2: bad config json: {e}") from None

    sessions = []
    i = 2
    while i < len(lines):
        head = lines[i].split(" ", 5)
        if len(head) != 6 or head[0] != "session":
            raise CorpusFormatError(f"line {i + 1}: expected a session header")
        cid = head[1]
        try:
            position, n, has_labels = int(head[2]), int(head[3]), head[4] == "1"
            meta = json.loads(head[5])
        except (ValueError, json.JSONDecodeError) as e:
            raise CorpusFormatError(f"line {i + 1}: bad session header: {e}") from None
        body = lines[i + 1:i + 1 + n]
        if len(body) != n:
            raise CorpusFormatError(f"session {cid}: truncated")
        samples, labels = [], ([] if has_labels else None)
        width = 5 if has_labels else 4
        for k, row in enumerate(body):
            f = row.split(",")
            if len(f) != width:
                raise CorpusFormatError(f"line {i + 2 + k}: expected {width} fields")
            try:
                samples.append(RawSample(int(f[0]), int(f[1]), int(f[2]), int(f[3])))
            except ValueError:
                raise CorpusFormatError(f"line {i + 2 + k}: malformed sample") from None
            if has_labels:
                labels.append(f[4])
        end = i + 1 + n
        if end >= len(lines) or lines[end] != f"end {cid}":
            raise CorpusFormatError(f"session {cid}: missing end line")
        sessions.append(ClimbSession(cid, position, samples, labels, meta))
        i = end + 1
    return sessions, config


def save_corpus(sessions: Iterable[ClimbSession], path, config: Optional[dict] = None) -> None:
    atomic_write(path, dumps_corpus(sessions, config))


def load_corpus(path) -> list[ClimbSession]:
    return load_corpus_with_config(path)[0]


def load_corpus_with_config(path) -> tuple[list[ClimbSession], dict]:
    return loads_corpus(Path(path).read_text(encoding="utf-8"))
