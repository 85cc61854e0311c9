"""Resampling, sliding windows and per-window orientation statistics."""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .orientation import PLANES, orientation_array, wrap360
from .records import ClimbSession
from .sensor import SensorConfig

log = logging.getLogger(__name__)

LOWERING = "Lowering"
STATS = ("mean", "std", "min", "max", "range", "median")
FEATURE_NAMES = tuple(f"{plane}_{stat}" for plane in PLANES for stat in STATS)


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class ResampleConfig:
    target_duration_s: float = 60.0
    target_len: int = 360

    def __post_init__(self):
        if self.target_len < 2:
            raise ValueError("target_len must be >= 2")
        if not self.target_duration_s > 0:
            raise ValueError("target_duration_s must be positive")


@dataclass(frozen=True)
class WindowConfig:
    window_len: int = 45
    overlap: int = 2
    lowering_fraction: float = 0.9

    def __post_init__(self):
        if not 0 < self.overlap < self.window_len:
            raise ValueError(f"overlap must lie in (0, window_len={self.window_len})")
        if not 0 < self.lowering_fraction <= 1:
            raise ValueError("lowering_fraction must lie in (0, 1]")

    @property
    def stride(self) -> int:
        return self.window_len - self.overlap


@dataclass
class ResampledClimb:
    """One climb on the common grid: angle columns are yx, yz, xz in degrees."""

    climb_id: str
    t: np.ndarray
    angles: np.ndarray
    labels: Optional[list[str]] = None

    def __len__(self):
        return len(self.t)


def resample(t, angles, cfg: ResampleConfig = ResampleConfig(), labels: Optional[Sequence] = None):
    """Put an angle series on ``cfg.target_len`` evenly spaced instants.

    Each channel is interpolated linearly along the shorter arc between
    neighbours, so a 350 -> 10 degree step passes through 0 rather than 180.
    Labels, if given, go to the nearest original sample.

    Returns ``(t_new, angles_new, labels_new)``.
    """
    t = np.asarray(t, dtype=float)
    a = np.asarray(angles, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if len(t) < 2:
        raise InsufficientDataError(f"need at least 2 samples to resample, got {len(t)}")
    if np.any(np.diff(t) <= 0):
        raise ValueError("timestamps must be strictly increasing")

    t_new = np.linspace(t[0], t[-1], cfg.target_len)
    seg = np.clip(np.searchsorted(t, t_new, side="right") - 1, 0, len(t) - 2)
    w = (t_new - t[seg]) / (t[seg + 1] - t[seg])
    step = np.mod(np.diff(a, axis=0) + 180.0, 360.0) - 180.0
    out = a[seg] + w[:, None] * step[seg]
    out = np.where((w == 1.0)[:, None], a[seg + 1], out)
    out = wrap360(out)
    out[0], out[-1] = a[0], a[-1]

    new_labels = None
    if labels is not None:
        labels = list(labels)
        if len(labels) != len(t):
            raise ValueError("labels must align with samples")
        nearest = np.where(w <= 0.5, seg, seg + 1)
        new_labels = [labels[i] for i in nearest]
    if np.ndim(angles) == 1:
        out = out[:, 0]
    return t_new, out, new_labels


def window_offsets(n: int, cfg: WindowConfig) -> list[int]:
    if n < cfg.window_len:
        return []
    return list(range(0, n - cfg.window_len + 1, cfg.stride))


def make_windows(series: Sequence, cfg: WindowConfig) -> list:
    """Consecutive windows overlapping by ``cfg.overlap``; a trailing partial window is dropped."""
    n = len(series)
    if n < cfg.window_len:
        warnings.warn(f"series of length {n} is shorter than one window ({cfg.window_len})")
        return []
    return [series[o:o + cfg.window_len] for o in window_offsets(n, cfg)]


def is_lowering(label) -> bool:
    return label is True or str(getattr(label, "value", label)) == LOWERING


def label_window(labels: Sequence, cfg: WindowConfig) -> int:
    """1 (lowering) when enough of the window is lowering, else 0."""
    if len(labels) != cfg.window_len:
        raise ValueError(f"window has {len(labels)} labels, expected {cfg.window_len}")
    hits = sum(1 for lab in labels if is_lowering(lab))
    return int(hits / cfg.window_len >= cfg.lowering_fraction)


def extract_features(window) -> np.ndarray:
    """The 18 per-plane statistics of one (n, 3) window, ordered as FEATURE_NAMES."""
    w = np.asarray(window, dtype=float)
    if w.ndim != 2 or w.shape[1] != 3 or len(w) == 0:
        raise ValueError(f"window must be a non-empty (n, 3) array, got shape {w.shape}")
    if np.isnan(w).any():
        raise ValueError("window contains degenerate (NaN) orientation samples")
    lo, hi = w.min(axis=0), w.max(axis=0)
    stats = np.stack([w.mean(axis=0), w.std(axis=0), lo, hi, hi - lo, np.median(w, axis=0)], axis=1)
    return stats.reshape(-1)


def session_orientation(session: ClimbSession, sensor_cfg: SensorConfig = SensorConfig()):
    """Orientation angles of a received session, degenerate samples dropped.

    Returns ``(t_ms, angles, labels)``.
    """
    if not session.samples:
        return np.zeros(0), np.zeros((0, 3)), ([] if session.labels is not None else None)
    counts = np.array([s.axes() for s in session.samples], dtype=float)
    t = np.array([s.t for s in session.samples], dtype=float)
    angles, valid = orientation_array(counts * sensor_cfg.count_g)
    if not valid.all():
        log.debug("%s: dropped %d degenerate samples", session.climb_id, int((~valid).sum()))
    labels = None
    if session.labels is not None:
        labels = [lab for lab, ok in zip(session.labels, valid) if ok]
    return t[valid], angles[valid], labels


def resample_session(
    session: ClimbSession,
    cfg: ResampleConfig = ResampleConfig(),
    sensor_cfg: SensorConfig = SensorConfig(),
) -> ResampledClimb:
    t, ang, labels = session_orientation(session, sensor_cfg)
    t_new, ang_new, lab_new = resample(t, ang, cfg, labels)
    return ResampledClimb(session.climb_id, t_new, ang_new, lab_new)


@dataclass
class FeatureTable:
    X: np.ndarray
    y: np.ndarray
    climb_id: list[str]
    offset: np.ndarray
    window_len: Optional[int] = None

    def __len__(self):
        return len(self.y)

    def groups(self) -> np.ndarray:
        _, codes = np.unique(np.asarray(self.climb_id, dtype=object).astype(str), return_inverse=True)
        return codes

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow([*FEATURE_NAMES, "label", "climb_id", "offset"])
            for row, lab, cid, off in zip(self.X, self.y, self.climb_id, self.offset):
                wr.writerow([*(repr(float(v)) for v in row), "lowering" if lab else "not_lowering", cid, int(off)])

    @classmethod
    def from_csv(cls, path) -> "FeatureTable":
        with open(path, newline="", encoding="utf-8") as fh:
            rd = csv.reader(fh)
            header = next(rd, None)
            expected = [*FEATURE_NAMES, "label", "climb_id", "offset"]
            if header != expected:
                raise ValueError(f"{path}: not a feature table (unexpected header)")
            X, y, cid, off = [], [], [], []
            for lineno, row in enumerate(rd, 2):
                if len(row) != len(expected):
                    raise ValueError(f"{path}:{lineno}: expected {len(expected)} fields")
                X.append([float(v) for v in row[:18]])
                if row[18] not in ("lowering", "not_lowering"):
                    raise ValueError(f"{path}:{lineno}: bad label {row[18]!r}")
                y.append(int(row[18] == "lowering"))
                cid.append(row[19])
                off.append(int(row[20]))
        return cls(np.array(X, dtype=float).reshape(-1, 18), np.array(y, dtype=int), cid, np.array(off, dtype=int))


def build_feature_table(climbs: Sequence[ResampledClimb], cfg: WindowConfig) -> FeatureTable:
    """Windows, labels and features of every climb, ordered by (climb, offset)."""
    X, y, cid, off = [], [], [], []
    for c in climbs:
        if c.labels is None:
            raise ValueError(f"climb {c.climb_id} has no labels")
        for o in window_offsets(len(c), cfg):
            X.append(extract_features(c.angles[o:o + cfg.window_len]))
            y.append(label_window(c.labels[o:o + cfg.window_len], cfg))
            cid.append(c.climb_id)
            off.append(o)
    return FeatureTable(
        np.array(X, dtype=float).reshape(-1, len(FEATURE_NAMES)),
        np.array(y, dtype=int),
        cid,
        np.array(off, dtype=int),
        cfg.window_len,
    )


def write_resampled_csv(climbs: Sequence[ResampledClimb], path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["climb_id", "index", "t_ms", "theta_yx", "theta_yz", "theta_xz", "label"])
        for c in climbs:
            for i, (tt, a) in enumerate(zip(c.t, c.angles)):
                lab = c.labels[i] if c.labels is not None else ""
                wr.writerow([c.climb_id, i, repr(float(tt)), *(repr(float(v)) for v in a), lab])
