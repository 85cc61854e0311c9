"""Batch command line: simulate, extract, evaluate, report.

Exit codes: 0 success, 1 internal error, 2 user or configuration error.
Every option can also come from a JSON file given with ``--config``
(keys are the long option names with dashes or underscores); flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from collections import Counter
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .features import FeatureTable, ResampleConfig, WindowConfig, build_feature_table, session_orientation, write_resampled_csv
from .learner import (
    CrossValConfig, MetricsReport, TreeConfig, evaluate, format_table, window_sweep, write_sweep_csv,
)
from .pipeline import lowering_count, resample_corpus, simulate_corpus
from .station import atomic_write, load_corpus_with_config, save_corpus, write_packet_log
from .synth import default_scenario, format_scenario, load_scenario

log = logging.getLogger("quickdraw")


class UsageError(Exception):
    """Bad input from the user; exit code 2."""


DEFAULTS = {
    "simulate": dict(scenario=None, n=48, seed=None, jitter=0.2),
    "extract": dict(corpus=None, target_len=360, target_duration=60.0, window_len=45, overlap=2, lowering_fraction=0.9),
    "evaluate": dict(
        input=None, lengths="5:60:5", target_len=360, target_duration=60.0, overlap=2, lowering_fraction=0.9,
        max_depth=8, min_samples_split=4, min_impurity_decrease=1e-7, folds=10, repetitions=3, seed=0,
        group_by_climb=False,
    ),
    "report": dict(input=None),
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quickdraw", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, name):
        d = DEFAULTS[name]
        sp.add_argument("--config", help="JSON file of option values (flags override it)")
        sp.add_argument("--out", help="output directory (created if missing)")
        if "seed" in d:
            sp.add_argument("--seed", type=int, help=f"random seed (default: {d['seed']})")
        return d

    sp = sub.add_parser("simulate", help="generate a labeled synthetic corpus through the node emulator")
    d = common(sp, "simulate")
    sp.add_argument("--scenario", help="scenario script file (default: built-in scenario)")
    sp.add_argument("--n", type=int, help=f"number of climbs (default: {d['n']})")
    sp.add_argument("--jitter", type=float, help=f"relative per-climb jitter of durations and intensities (default: {d['jitter']})")

    sp = sub.add_parser("extract", help="orientation traces, resampling histograms and window features")
    d = common(sp, "extract")
    sp.add_argument("--corpus", help="corpus file written by 'simulate'")
    sp.add_argument("--target-len", type=int, help=f"samples per resampled climb (default: {d['target_len']})")
    sp.add_argument("--target-duration", type=float, help=f"nominal resampled climb duration in s (default: {d['target_duration']})")
    sp.add_argument("--window-len", type=int, help=f"window length for features.csv (default: {d['window_len']})")
    sp.add_argument("--overlap", type=int, help=f"window overlap in samples (default: {d['overlap']})")
    sp.add_argument("--lowering-fraction", type=float, help=f"share of lowering samples for a lowering window (default: {d['lowering_fraction']})")

    sp = sub.add_parser("evaluate", help="cross-validated window-length sweep of the decision tree")
    d = common(sp, "evaluate")
    sp.add_argument("--input", help="corpus file, or a features.csv for a single-table evaluation")
    sp.add_argument("--lengths", help=f"window lengths as 'start:stop:step' (inclusive) or a comma list (default: {d['lengths']})")
    sp.add_argument("--target-len", type=int, help=f"samples per resampled climb (default: {d['target_len']})")
    sp.add_argument("--target-duration", type=float, help=f"nominal resampled climb duration in s (default: {d['target_duration']})")
    sp.add_argument("--overlap", type=int, help=f"window overlap in samples (default: {d['overlap']})")
    sp.add_argument("--lowering-fraction", type=float, help=f"(default: {d['lowering_fraction']})")
    sp.add_argument("--max-depth", type=int, help=f"(default: {d['max_depth']})")
    sp.add_argument("--min-samples-split", type=int, help=f"(default: {d['min_samples_split']})")
    sp.add_argument("--min-impurity-decrease", type=float, help=f"(default: {d['min_impurity_decrease']})")
    sp.add_argument("--folds", type=int, help=f"(default: {d['folds']})")
    sp.add_argument("--repetitions", type=int, help=f"(default: {d['repetitions']})")
    sp.add_argument("--group-by-climb", action="store_true", default=None,
                    help="keep all windows of a climb in the same fold (default: off)")

    sp = sub.add_parser("report", help="print the metrics table of an 'evaluate' run")
    common(sp, "report")
    sp.add_argument("--input", help="metrics.csv, or the directory holding it")
    return p


def _effective(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        for k, v in loaded.items():
            key = k.replace("-", "_")
            if key not in cfg and key != "out":
                raise UsageError(f"unknown config key {k!r} for '{args.command}'")
            cfg[key] = v
    for k, v in vars(args).items():
        if k in cfg and v is not None:
            cfg[k] = v
    if args.out is not None:
        cfg["out"] = args.out
    return cfg


def _out_dir(cfg: dict) -> Path:
    if not cfg.get("out"):
        raise UsageError("--out is required")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, cfg: dict, seeds: dict, inputs: list, outputs: list, t0: float) -> None:
    manifest = {
        "subcommand": command,
        "config": cfg,
        "seeds": seeds,
        "inputs": [str(p) for p in inputs],
        "outputs": sorted(str(p) for p in outputs),
        "tool_version": __version__,
        "wall_clock_s": round(time.perf_counter() - t0, 3),
    }
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _require(cfg: dict, key: str) -> str:
    if not cfg.get(key):
        raise UsageError(f"--{key.replace('_', '-')} is required")
    return cfg[key]


def _plot_backend():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "quickdraw"
    return plt


def _savefig(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def cmd_simulate(cfg: dict, t0: float) -> None:
    out = _out_dir(cfg)
    script = load_scenario(cfg["scenario"]) if cfg["scenario"] else default_scenario()
    if cfg["seed"] is not None:
        script = replace(script, seed=int(cfg["seed"]))
    n = int(cfg["n"])
    if n < 1:
        raise UsageError("--n must be >= 1")
    sim = simulate_corpus(script, n, float(cfg["jitter"]))
    echo = {"n": n, "jitter": float(cfg["jitter"]), "scenario": format_scenario(script)}
    save_corpus(sim.sessions, out / "corpus.txt", echo)
    write_packet_log(sim.packets, out / "packets.log")
    print(f"{len(sim.sessions)} sessions, {len(sim.packets)} packets -> {out / 'corpus.txt'}")
    _write_manifest(out, "simulate", cfg, {"scenario_seed": script.seed}, [cfg["scenario"] or "<built-in>"],
                    [out / "corpus.txt", out / "packets.log"], t0)


def _hist_plot(plt, values, title, xlabel, path):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    if values:
        ax.hist(values, bins=max(1, min(20, len(set(values)))), color="0.35")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("climbs")
    fig.tight_layout()
    _savefig(fig, path)
    plt.close(fig)


def cmd_extract(cfg: dict, t0: float) -> None:
    out = _out_dir(cfg)
    corpus = _require(cfg, "corpus")
    sessions, _ = load_corpus_with_config(corpus)
    rcfg = ResampleConfig(float(cfg["target_duration"]), int(cfg["target_len"]))
    wcfg = WindowConfig(int(cfg["window_len"]), int(cfg["overlap"]), float(cfg["lowering_fraction"]))
    if not sessions:
        log.warning("corpus %s holds no sessions", corpus)
    climbs = resample_corpus(sessions, rcfg)
    written = []

    path = out / "orientation.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["climb_id", "t_ms", "theta_yx", "theta_yz", "theta_xz", "label"])
        for s in sessions:
            t, ang, labels = session_orientation(s)
            for i in range(len(t)):
                wr.writerow([s.climb_id, int(t[i]), *(f"{v:.6f}" for v in ang[i]), labels[i] if labels else ""])
    written.append(path)

    write_resampled_csv(climbs, out / "resampled.csv")
    written.append(out / "resampled.csv")

    path = out / "durations.csv"
    by_id = {c.climb_id: c for c in climbs}
    raw_low, res_low, raw_len, res_len = [], [], [], []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["climb_id", "raw_samples", "raw_lowering_samples", "resampled_samples", "resampled_lowering_samples"])
        for s in sessions:
            c = by_id.get(s.climb_id)
            row = [s.climb_id, len(s.samples), lowering_count(s.labels),
                   len(c) if c else 0, lowering_count(c.labels) if c else 0]
            wr.writerow(row)
            raw_len.append(row[1])
            raw_low.append(row[2])
            if c:
                res_len.append(row[3])
                res_low.append(row[4])
    written.append(path)

    path = out / "length_histogram.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["stage", "n_samples", "climbs"])
        for stage, vals in (("raw", raw_len), ("resampled", res_len)):
            for k, v in sorted(Counter(vals).items()):
                wr.writerow([stage, k, v])
    written.append(path)

    if climbs:
        table = build_feature_table(climbs, wcfg)
        table.to_csv(out / "features.csv")
        written.append(out / "features.csv")

    plt = _plot_backend()
    _hist_plot(plt, raw_low, "Lowering before resampling", "lowering samples received", out / "lowering_hist_raw.svg")
    _hist_plot(plt, res_low, f"Lowering after resampling to {rcfg.target_len}", "lowering samples",
               out / "lowering_hist_resampled.svg")
    written += [out / "lowering_hist_raw.svg", out / "lowering_hist_resampled.svg"]
    if climbs:
        c = climbs[0]
        fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
        low = [lab == "Lowering" for lab in c.labels]
        for k, (ax, name) in enumerate(zip(axes, ("theta_yx", "theta_yz", "theta_xz"))):
            ax.plot((c.t - c.t[0]) / 1000.0, c.angles[:, k], lw=0.8, color="k")
            ax.fill_between((c.t - c.t[0]) / 1000.0, 0, 360, where=low, color="0.85", step="mid")
            ax.set_ylim(0, 360)
            ax.set_ylabel(name)
        axes[-1].set_xlabel("time since first sample [s]")
        axes[0].set_title(f"{c.climb_id}: orientation (lowering shaded)")
        fig.tight_layout()
        _savefig(fig, out / "orientation_example.svg")
        plt.close(fig)
        written.append(out / "orientation_example.svg")

    print(f"{len(climbs)} climbs resampled to {rcfg.target_len} samples -> {out}")
    _write_manifest(out, "extract", cfg, {}, [corpus], written, t0)


def parse_lengths(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        vals = [int(v) for v in text]
    else:
        text = str(text).strip()
        try:
            if ":" in text:
                parts = [int(v) for v in text.split(":")]
                if len(parts) != 3 or parts[2] <= 0:
                    raise ValueError
                vals = list(range(parts[0], parts[1] + 1, parts[2]))
            else:
                vals = [int(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"bad --lengths {text!r}; use 'start:stop:step' or a comma list") from None
    if not vals or any(v < 3 for v in vals):
        raise UsageError("window lengths must be >= 3")
    return vals


def _is_feature_csv(path: str) -> bool:
    with open(path, encoding="utf-8") as fh:
        return fh.readline().startswith("yx_mean,")


def cmd_evaluate(cfg: dict, t0: float) -> None:
    out = _out_dir(cfg)
    src = _require(cfg, "input")
    try:
        tree_cfg = TreeConfig(int(cfg["max_depth"]), int(cfg["min_samples_split"]),
                              float(cfg["min_impurity_decrease"]), int(cfg["seed"]))
        cv_cfg = CrossValConfig(int(cfg["folds"]), int(cfg["repetitions"]), int(cfg["seed"]),
                                bool(cfg["group_by_climb"]))
    except ValueError as e:
        raise UsageError(str(e)) from None

    if _is_feature_csv(src):
        table = FeatureTable.from_csv(src)
        rep = evaluate(table.X, table.y, tree_cfg, cv_cfg, groups=table.groups())
        reports: list[MetricsReport] = [rep]
    else:
        lengths = parse_lengths(cfg["lengths"])
        sessions, _ = load_corpus_with_config(src)
        climbs = resample_corpus(sessions, ResampleConfig(float(cfg["target_duration"]), int(cfg["target_len"])))
        if not climbs:
            raise UsageError(f"{src}: no session has enough samples to evaluate")
        shortest = min(len(c) for c in climbs)
        bad = [w for w in lengths if w > shortest]
        if bad:
            raise UsageError(f"window length {bad[0]} exceeds the climb length ({shortest} samples)")
        reports = window_sweep(climbs, lengths, tree_cfg, cv_cfg, int(cfg["overlap"]), float(cfg["lowering_fraction"]))

    write_sweep_csv(reports, out / "metrics.csv")
    text = format_table(reports)
    atomic_write(out / "metrics.txt", text + "\n")
    print(text)
    written = [out / "metrics.csv", out / "metrics.txt"]

    plt = _plot_backend()
    xs = [r.window_len if r.window_len is not None else 0 for r in reports]
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for name, style in (("precision", "o-"), ("recall", "s--"), ("f1", "^-.")):
        ax.plot(xs, [getattr(r, name) for r in reports], style, label=name, ms=4)
    ax.set_xlabel("window length [samples]")
    ax.set_ylabel("score (lowering class)")
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _savefig(fig, out / "sweep.svg")
    plt.close(fig)
    written.append(out / "sweep.svg")
    _write_manifest(out, "evaluate", cfg, {"tree": tree_cfg.seed, "cv": cv_cfg.seed}, [src], written, t0)


def cmd_report(cfg: dict, t0: float) -> None:
    src = Path(_require(cfg, "input"))
    if src.is_dir():
        src = src / "metrics.csv"
    with open(src, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    pooled = [r for r in rows if r.get("repetition") == "pooled"]
    if not pooled:
        raise UsageError(f"{src}: no pooled rows; not a metrics file")
    lines = [f"{'window':>6}  {'P':>6}  {'R':>6}  {'F1':>6}"]
    for r in pooled:
        lines.append(f"{r['window_len'] or '-':>6}  {float(r['precision']):6.3f}  {float(r['recall']):6.3f}  {float(r['f1']):6.3f}")
    best = max(pooled, key=lambda r: float(r["f1"]))
    lines.append(f"best window length: {best['window_len'] or '-'} (F1 {float(best['f1']):.3f})")
    text = "\n".join(lines)
    print(text)
    if cfg.get("out"):
        out = _out_dir(cfg)
        atomic_write(out / "report.txt", text + "\n")
        _write_manifest(out, "report", cfg, {}, [src], [out / "report.txt"], t0)


COMMANDS = {"simulate": cmd_simulate, "extract": cmd_extract, "evaluate": cmd_evaluate, "report": cmd_report}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        cfg = _effective(args)
        COMMANDS[args.command](cfg, t0)
    except (UsageError, ValueError, OSError) as e:
        print(f"quickdraw {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        log.exception("internal error")
        print(f"quickdraw {args.command}: internal error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
