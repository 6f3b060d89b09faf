#!/usr/bin/env python3
"""Run the default randomized certification suite and write CSV/JSON reports.

Usage: python scripts/run_default_suite.py [out_dir] [master_seed]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sparsebump.lab import ExperimentConfig, run_verify_bounds


def main() -> int:
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "reports"
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 42
    cfg = ExperimentConfig(master_seed=seed, out_dir=out_dir)
    report = run_verify_bounds(cfg)
    csv_path, json_path = report.write(out_dir, "verify_bounds")
    print(f"instances: {len(report.rows)}  violations: {report.violations}")
    print(f"max T/(C_E*E) ratio: {report.aggregates['max_certified_CE_ratio']:.6f}")
    print(f"max T/(C_D*D) ratio: {report.aggregates['max_certified_CD_ratio']:.6f}")
    print(f"wrote {csv_path} and {json_path}")
    return 1 if report.violations else 0


if __name__ == "__main__":
    raise SystemExit(main())
