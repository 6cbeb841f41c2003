#!/usr/bin/env python3
"""Reproduce the headline convergence studies and print a summary table.

Runs the two-speed Dirac, uniform-datum (W1 and L1), and concentrating-front
studies on the default resolution ladder, then the semi-Lagrangian Dirac
study on triangulated meshes.  Writes CSV/JSON reports next to --out.
"""

import argparse
import sys

from mtlab.harness import (
    StudyConfig,
    TriStudyConfig,
    emit_report,
    run_study,
    run_tri_study,
)

STUDIES = [
    ("example1-w1", dict(example="example1", distance="w1")),
    ("example2-w1", dict(example="example2", distance="w1")),
    ("example2-l1", dict(example="example2", distance="l1")),
    ("example3-w1", dict(example="example3", distance="w1")),
    ("example1-rusanov", dict(example="example1", scheme="rusanov")),
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=None, help="report path prefix")
    ap.add_argument("--ladder", default=None,
                    help="comma-separated node counts")
    args = ap.parse_args()

    kwargs = {}
    if args.ladder:
        kwargs["ladder"] = tuple(int(v) for v in args.ladder.split(","))

    print(f"{'study':<20} {'slope':>7} {'residual':>9} {'finest error':>13}")
    for name, params in STUDIES:
        rep = run_study(StudyConfig(**params, **kwargs))
        print(f"{name:<20} {rep.slope:>7.3f} {rep.residual:>9.4f} "
              f"{rep.rows[-1].error:>13.5e}")
        if args.out:
            emit_report(rep, f"{args.out}-{name}")

    tri = run_tri_study(TriStudyConfig())
    print(f"{'triangulated-dirac':<20} {tri.slope:>7.3f} "
          f"{tri.residual:>9.4f} {tri.rows[-1].error:>13.5e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
