"""How well the lowering pose separates from the other activities.

For each activity of the default scenario, reports the share of received
samples whose orientation matches the lowering signature, and plots the
three plane angles of one climb with the lowering span shaded.

    python3 scripts/lowering_orientation.py --out runs/orientation
"""

import argparse
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from quickdraw.features import session_orientation  # noqa: E402
from quickdraw.orientation import OrientationSample, lowering_signature  # noqa: E402
from quickdraw.pipeline import simulate_corpus  # noqa: E402
from quickdraw.synth import default_scenario  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/orientation")
    ap.add_argument("--climbs", type=int, default=12)
    ap.add_argument("--tol", type=float, default=25.0, help="signature tolerance in degrees")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    sim = simulate_corpus(default_scenario(), args.climbs)
    hits = defaultdict(list)
    for s in sim.sessions:
        _, ang, labels = session_orientation(s)
        for a, lab in zip(ang, labels):
            hits[lab].append(lowering_signature(OrientationSample(*a), args.tol))
    print(f"{'activity':<10} {'samples':>8} {'signature':>10}")
    for lab in sorted(hits):
        print(f"{lab:<10} {len(hits[lab]):>8} {np.mean(hits[lab]):>10.3f}")

    s = next(s for s in sim.sessions if s.samples)
    t, ang, labels = session_orientation(s)
    t = (t - t[0]) / 1000.0
    low = np.array([lab == "Lowering" for lab in labels])
    fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
    for k, (ax, name) in enumerate(zip(axes, ("theta_yx", "theta_yz", "theta_xz"))):
        ax.plot(t, ang[:, k], ".", ms=3, color="k")
        ax.fill_between(t, 0, 360, where=low, color="0.85", step="mid")
        ax.set_ylim(0, 360)
        ax.set_ylabel(name)
    axes[-1].set_xlabel("time since first received sample [s]")
    axes[0].set_title(f"{s.climb_id}: received orientation, lowering shaded")
    fig.tight_layout()
    fig.savefig(out / "orientation.svg", metadata={"Date": None})
    print(f"wrote {out / 'orientation.svg'}")


if __name__ == "__main__":
    main()
