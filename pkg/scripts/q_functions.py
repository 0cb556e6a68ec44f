"""Q functions of an initially coherent condensate after a short evolution,
with collisions, without them, and with optimal feedback.

    python scripts/q_functions.py --time 0.8 --out results
"""
import argparse
import math
from pathlib import Path

import numpy as np

from atomlaser.fock import DensityMatrix
from atomlaser.io import provenance, write_csv, write_json
from atomlaser.liouvillian import FeedbackParams, LaserParams, build_model
from atomlaser.phase_space import AmplitudeGrid, mean_phase, phase_number_covariance, q_function
from atomlaser.propagate import evolve_density


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--mu", type=int, default=15)
    ap.add_argument("--time", type=float, default=0.8)
    ap.add_argument("--points", type=int, default=201)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    C = 1 / math.sqrt(2 * math.pi * args.mu)
    cases = {
        "collisions": (LaserParams(mu=args.mu, C=C), None),
        "diffusion": (LaserParams(mu=args.mu), None),
        "feedback": (LaserParams(mu=args.mu, C=C), FeedbackParams.optimal(C)),
    }
    for name, (p, f) in cases.items():
        m = build_model(p, f)
        rho0 = DensityMatrix.coherent(m.space, math.sqrt(p.mu)).rho
        states, report = evolve_density(m.L, rho0, np.linspace(0, args.time, 9))
        qf = q_function(DensityMatrix(m.space, states[-1]),
                        AmplitudeGrid.for_space(m.space, args.points))
        meta = provenance("qfunc", laser=p.as_dict(), time=args.time,
                          feedback=None if f is None else f.as_dict())
        write_csv(args.out / f"qfunc_{name}.csv", ["re_alpha", "im_alpha", "q"], qf.rows(), meta)
        write_json(args.out / f"qfunc_{name}.json", {
            "provenance": meta,
            "mean_phase": mean_phase(qf),
            "phase_number_covariance": phase_number_covariance(qf),
            "evolution_failures": report.failures(),
        })
        print(f"{name}: mean phase {mean_phase(qf):+.3f}, "
              f"n-phi covariance {phase_number_covariance(qf):+.3f}")


if __name__ == "__main__":
    main()
