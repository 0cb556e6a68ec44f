"""Output spectra for the collision, feedback and revival regimes.

    python scripts/spectra.py --out results
"""
import argparse
import math
from pathlib import Path

from atomlaser.coherence import compute_g1, linewidth
from atomlaser.io import provenance, write_csv, write_json
from atomlaser.liouvillian import FeedbackParams, LaserParams, build_model
from atomlaser.spectrum import fit_gaussian, fit_lorentzian, power_spectrum

CASES = {
    "feedback_off": (LaserParams(mu=15, chi=15 ** 1.5), False),
    "feedback_on": (LaserParams(mu=15, chi=15 ** 1.5), True),
    "revival": (LaserParams(mu=15, C=100 * math.pi * 15), False),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    for name, (p, on) in CASES.items():
        f = FeedbackParams.optimal(p.C) if on else None
        res = linewidth(p, f)
        spec = power_spectrum(compute_g1(build_model(p, f)), p, omega_bar=res.omega_bar)
        meta = provenance("spectrum", laser=p.as_dict(), feedback=None if f is None else f.as_dict())
        write_csv(args.out / f"spectrum_{name}.csv", ["omega_over_kappa", "P"],
                  zip(spec.frequencies, spec.values), meta)
        write_json(args.out / f"spectrum_{name}.json", {
            "provenance": meta,
            "peak": spec.value_at(res.omega_bar),
            "linewidth": res.linewidth,
            "total_flux": spec.total_flux,
            "lorentzian_residual": fit_lorentzian(spec).residual,
            "gaussian_residual": fit_gaussian(spec).residual,
        })
        print(f"{name}: peak {spec.value_at(res.omega_bar):.4g}, linewidth {res.linewidth:.4g}")


if __name__ == "__main__":
    main()
