"""Window-length sweep on a simulated corpus.

Simulates the default scenario, resamples every climb, and cross-validates
the tree for each window length. Prints the pooled table and writes
metrics.csv plus sweep.svg to --out. With --both, the sweep is repeated with
folds drawn per climb, which keeps windows of one climb out of its own
training set.

    python3 scripts/run_window_sweep.py --out runs/sweep --climbs 48 --both
"""

import argparse
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from quickdraw.features import ResampleConfig  # noqa: E402
from quickdraw.learner import CrossValConfig, TreeConfig, format_table, window_sweep, write_sweep_csv  # noqa: E402
from quickdraw.pipeline import resample_corpus, simulate_corpus  # noqa: E402
from quickdraw.synth import default_scenario, load_scenario  # noqa: E402


@dataclass
class SweepExperiment:
    climbs: int = 48
    jitter: float = 0.2
    lengths: tuple = tuple(range(5, 61, 5))
    folds: int = 10
    repetitions: int = 3
    seed: int = 0
    max_depth: int = 8


def run(exp: SweepExperiment, scenario, group_by_climb: bool):
    sim = simulate_corpus(scenario, exp.climbs, exp.jitter)
    climbs = resample_corpus(sim.sessions, ResampleConfig())
    cv = CrossValConfig(exp.folds, exp.repetitions, exp.seed, group_by_climb)
    return window_sweep(climbs, exp.lengths, TreeConfig(max_depth=exp.max_depth, seed=exp.seed), cv)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/sweep")
    ap.add_argument("--climbs", type=int, default=48)
    ap.add_argument("--scenario", help="scenario file (default: built-in)")
    ap.add_argument("--both", action="store_true", help="also run with per-climb folds")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    exp = SweepExperiment(climbs=args.climbs)
    scenario = load_scenario(args.scenario) if args.scenario else default_scenario()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(6, 3.6))
    for mode in ([False, True] if args.both else [False]):
        t0 = time.perf_counter()
        reports = run(exp, scenario, mode)
        tag = "climb_folds" if mode else "window_folds"
        print(f"\n{tag} ({time.perf_counter() - t0:.1f} s)\n{format_table(reports)}")
        write_sweep_csv(reports, out / f"metrics_{tag}.csv")
        ax.plot([r.window_len for r in reports], [r.f1 for r in reports], "o-", ms=4, label=f"F1, {tag}")
    ax.set_xlabel("window length [samples]")
    ax.set_ylabel("pooled F1 (lowering)")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(out / "sweep.svg", metadata={"Date": None})
    print(f"\nconfig: {asdict(exp)}\nwrote {out}")


if __name__ == "__main__":
    main()
