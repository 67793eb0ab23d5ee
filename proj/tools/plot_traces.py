#!/usr/bin/env python3
"""Plot tracking errors and the PG-GRU feedforward split from an evaluate run.

usage: plot_traces.py <out dir> [reference ...]     (default: R1 R2 R3)
Writes <out dir>/eval/traces/<reference>.png.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

CONTROLLERS = ["none", "zpetc", "gru", "preview-gru", "pg-gru"]


def plot_reference(traces: Path, ref: str) -> Path:
    fig, (ax_e, ax_u) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    for name in CONTROLLERS:
        f = traces / f"{name}_{ref}.csv"
        if f.exists():
            t = pd.read_csv(f)
            ax_e.plot(t["t"], t["e"], label=name, lw=0.8)
    pg = traces / f"pg-gru_{ref}.csv"
    if pg.exists():
        t = pd.read_csv(pg)
        ax_u.plot(t["t"], t["u_phy"], label="u_phy", lw=0.8)
        ax_u.plot(t["t"], t["u_gru"], label="u_gru", lw=0.8)
        ax_u.plot(t["t"], t["uff"], label="u_ff", lw=0.8, ls="--")
    ax_e.set_ylabel("tracking error [rad]")
    ax_u.set_ylabel("pg-gru feedforward [N m]")
    ax_u.set_xlabel("time [s]")
    ax_e.legend(fontsize=8)
    ax_u.legend(fontsize=8)
    ax_e.set_title(ref)
    out = traces / f"{ref}.png"
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__, file=sys.stderr)
        return 1
    traces = Path(sys.argv[1]) / "eval" / "traces"
    if not traces.is_dir():
        print(f"no traces under {traces}; run `pgff evaluate` first", file=sys.stderr)
        return 1
    for ref in sys.argv[2:] or ["R1", "R2", "R3"]:
        print(plot_reference(traces, ref))
    return 0


if __name__ == "__main__":
    sys.exit(main())
