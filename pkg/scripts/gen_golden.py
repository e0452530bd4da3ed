#!/usr/bin/env python3
"""Regenerate tests/data/golden_sweep.csv.

The golden file pins the benchmark's observable output for the default
configuration (identity, ring 256, one output, step 100, 2000-frame trace,
64-byte frames, seed 0). Regenerate only when the measurement pipeline
changes on purpose, and review the diff before committing.
"""

import io
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from tinyring import run_sweep, write_csv

OUT = pathlib.Path(__file__).resolve().parents[1] / "tests" / "data" / "golden_sweep.csv"


def main() -> None:
    results = run_sweep("identity", 256, 1, 100, trace_length=2000, seed=0)
    sink = io.StringIO()
    write_csv(results, sink)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(sink.getvalue(), encoding="utf-8")
    print(f"wrote {OUT} ({len(results)} load points)")
    for r in results:
        print(f"  load {r.offered_load:4d}  delivered {r.delivered:4d}  "
              f"lost {r.lost:3d}  loss {r.loss_fraction:.6f}  "
              f"p50 {r.latency_p50}  p99 {r.latency_p99}")


if __name__ == "__main__":
    main()
