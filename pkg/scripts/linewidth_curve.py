"""Linewidth versus collision strength, with and without feedback.

Writes linewidth_curve.csv/.json: analytic and resolvent linewidths on a
log grid of chi (plus the deep-revival plateau point), for plotting the
four-regime curve against the feedback straight line.

    python scripts/linewidth_curve.py --mu 60 --out results
"""
import argparse
import math
from pathlib import Path

import numpy as np

from atomlaser import analytic
from atomlaser.coherence import linewidth
from atomlaser.errors import ConvergenceError, SolverError
from atomlaser.io import provenance, write_csv, write_json
from atomlaser.liouvillian import FeedbackParams, LaserParams

HEADER = ["chi", "feedback", "linewidth_analytic", "linewidth_numeric", "omega_bar", "error"]


def rows(mu: int, chis):
    for on in (False, True):
        for chi in chis:
            p = LaserParams(mu=mu, chi=chi)
            f = FeedbackParams.optimal(p.C) if on and p.C else None
            ref = analytic.linewidth_feedback(p) if on else analytic.linewidth_regimes(p).linewidth
            try:
                res = linewidth(p, f)
                yield [chi, on, ref, res.linewidth, res.omega_bar, None]
            except (ConvergenceError, SolverError) as exc:
                yield [chi, on, ref, None, None, str(exc)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--mu", type=int, default=60)
    ap.add_argument("--points", type=int, default=25)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    chis = list(np.geomspace(0.1, 1e5, args.points)) + [400 * math.pi * args.mu ** 2]
    table = list(rows(args.mu, chis))
    meta = provenance("linewidth_curve", mu=args.mu, chi=chis)
    write_csv(args.out / "linewidth_curve.csv", HEADER, table, meta)
    write_json(args.out / "linewidth_curve.json",
               {"provenance": meta, "rows": [dict(zip(HEADER, r)) for r in table]})
    print(f"{len(table)} points -> {args.out}")


if __name__ == "__main__":
    main()
