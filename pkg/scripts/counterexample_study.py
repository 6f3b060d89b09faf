#!/usr/bin/env python3
"""Level study of the pair sigma(x) = 1/(x(1-ln x)^2), w(x) = x^2 at p = q = 2.

The pair is two-weight bounded, but sigma fails L log L near 0, so the
entropy bump blows up under refinement while the direct-comparison bump
stabilizes.  Prints the per-level table and the observed trends.

Usage: python scripts/counterexample_study.py [delta] [levels...]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sparsebump.lab import run_counterexample


def main() -> int:
    delta = float(sys.argv[1]) if len(sys.argv) > 1 else 0.5
    levels = [int(x) for x in sys.argv[2:]] or [8, 12, 16, 20]
    report = run_counterexample(levels, delta)
    print(f"{'N':>4} {'llogl':>12} {'A':>12} {'E':>12} {'D':>12}")
    for row in report.rows:
        print(f"{row['N']:>4} {row['llogl']:>12.6f} {row['A']:>12.6f} "
              f"{row['E']:>12.6f} {row['D']:>12.6f}")
    for key, value in report.aggregates.items():
        print(f"{key}: {value}")
    return 1 if report.violations else 0


if __name__ == "__main__":
    raise SystemExit(main())
