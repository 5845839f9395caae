#!/usr/bin/env python3
"""Coarse (g_h, g_c) phase diagram at Fock cutoff 200 on a 15x15 log grid.

Too slow for CI: 225 cells, each a sparse LU on a 360 000-dim superoperator
(about 5 minutes with 4 workers). Runs through `ionlaser phase`, so an
interrupted run resumes from the checkpoint in the output directory. At the
end it prints the region map with g_h increasing to the right and g_c
increasing upwards, plus a check of the expected topology: thermal (A) on the
left, laser (B) to the right and above, non-converged (C) at the bottom.

    python scripts/coarse_phase_diagram.py --out coarse-200 --threads 8
"""
import argparse
import sys
from collections import defaultdict
from pathlib import Path

from ionlaser.cli import main as cli_main
from ionlaser.output import read_table

CUTOFF = 200
POINTS = 15


def region_map(rows):
    grid = defaultdict(dict)
    for r in rows:
        grid[float(r["g_c"])][float(r["g_h"])] = r["region"]
    return [(g_c, [grid[g_c][g_h] for g_h in sorted(grid[g_c])]) for g_c in sorted(grid)]


def topology_ok(rows_by_gc) -> bool:
    """A appears left of B in the upper rows, and C only in lower rows than any all-converged row."""
    labels = [row for _, row in rows_by_gc]
    top = labels[-1]
    left_a = top[0] == "A" and "B" in top and top.index("B") > top.index("A")
    c_rows = [i for i, row in enumerate(labels) if "C" in row]
    clean_rows = [i for i, row in enumerate(labels) if "C" not in row]
    c_below = bool(c_rows) and bool(clean_rows) and max(c_rows) < max(clean_rows)
    return left_a and c_below


def parse(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("coarse-phase-diagram"))
    p.add_argument("--threads", type=int, default=4)
    p.add_argument("--cutoff", type=int, default=CUTOFF)
    p.add_argument("--points", type=int, default=POINTS)
    p.add_argument("--g-h-range", type=float, nargs=2, default=(0.05, 4.0))
    p.add_argument("--g-c-range", type=float, nargs=2, default=(0.3, 4.0))
    return p.parse_args(argv)


def run(argv=None) -> int:
    args = parse(argv)
    code = cli_main([
        "phase", "--out", str(args.out), "--threads", str(args.threads),
        "--cutoff", str(args.cutoff),
        "--g-h-min", str(args.g_h_range[0]), "--g-h-max", str(args.g_h_range[1]),
        "--g-h-points", str(args.points),
        "--g-c-min", str(args.g_c_range[0]), "--g-c-max", str(args.g_c_range[1]),
        "--g-c-points", str(args.points),
    ])
    if code != 0:
        return code
    rows = region_map(read_table(args.out / "points.csv"))
    print("g_c \\ g_h ->")
    for g_c, labels in reversed(rows):
        print(f"{g_c:8.3f}  {' '.join(labels)}")
    ok = topology_ok(rows)
    print(f"topology A-left / B-right-above / C-below: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(run())
