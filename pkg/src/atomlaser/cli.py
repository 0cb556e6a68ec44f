"""Command-line driver: ``atomlaser {sweep,g1,spectrum,qfunc,design,check}``.

Rates are multiples of kappa except in ``design``, which works in SI units.
Settings come from built-in defaults, then ``--config`` (TOML or JSON), then
explicit flags, each overriding the previous.

Exit codes: 0 success, 1 invariant failure, 2 usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, analytic
from .checks import run_checks
from .coherence import (
    Method,
    classify_coherence,
    compute_g1,
    coherence_time_quadrature,
    linewidth,
    require_integer_mu,
    uses_revival_treatment,
)
from .errors import (
    AliasingError,
    ConvergenceError,
    CoverageError,
    ParameterError,
    SolverError,
    TruncationError,
)
from .fock import DensityMatrix
from .io import load_config, provenance, write_csv, write_json
from .liouvillian import FeedbackParams, LaserParams, TruncationPolicy, build_model
from .phase_space import AmplitudeGrid, mean_phase, phase_number_covariance, q_function
from .propagate import evolve_density
from .qnd import ProbeParams, design_report
from .spectrum import centroid, peak_intensity, power_spectrum

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

DEFAULTS = {
    "mu": 60.0,
    "chi": 0.0,
    "C": None,
    "chi_grid": "log:0.1:1e5:19",
    "feedback": "off",
    "eta": 1.0,
    "method": "resolvent",
    "dim_pad": 10.0,
    "out": "atomlaser-out",
    "jobs": None,
    "omega_range": None,
    "t_max": None,
    "samples": None,
    "propagator": "expm",
    "time": 0.8,
    "points": 201,
    "initial": "coherent",
    "probe": None,
    "only": None,
}


class UsageError(Exception):
    pass


def parse_chi_grid(spec) -> list[float]:
    """``"0.1,1,10"``, ``"log:START:STOP:COUNT"`` or a list of numbers."""
    if isinstance(spec, (list, tuple)):
        values = [float(x) for x in spec]
    elif isinstance(spec, str) and spec.startswith("log:"):
        try:
            _, lo, hi, count = spec.split(":")
            values = list(np.geomspace(float(lo), float(hi), int(count)))
        except ValueError as exc:
            raise UsageError(f"bad log grid {spec!r}; expected log:START:STOP:COUNT") from exc
    else:
        try:
            values = [float(x) for x in str(spec).split(",") if x.strip()]
        except ValueError as exc:
            raise UsageError(f"bad chi grid {spec!r}") from exc
    if not values:
        raise UsageError("chi grid is empty")
    if any(v < 0 or not math.isfinite(v) for v in values):
        raise UsageError("chi values must be finite and >= 0")
    return values


def _feedback_variants(mode: str) -> list[bool]:
    try:
        return {"off": [False], "on": [True], "both": [False, True]}[mode]
    except KeyError:
        raise UsageError(f"--feedback must be on, off or both, got {mode!r}") from None


def _laser(cfg: dict, chi: float | None = None) -> LaserParams:
    if chi is None and cfg.get("C") is not None:
        return LaserParams(mu=float(cfg["mu"]), C=float(cfg["C"]))
    return LaserParams(mu=float(cfg["mu"]), chi=float(cfg["chi"] if chi is None else chi))


def _feedback(p: LaserParams, on: bool, eta: float) -> FeedbackParams | None:
    if not on or p.C == 0:
        return None
    return FeedbackParams.optimal(p.C, eta)


def _policy(cfg: dict) -> TruncationPolicy:
    return TruncationPolicy(pad_coefficient=float(cfg["dim_pad"]))


def _tag(on: bool) -> str:
    return "feedback_on" if on else "feedback_off"


# ---------------------------------------------------------------- sweep

SWEEP_HEADER = [
    "mu", "chi", "feedback", "eta", "regime", "linewidth_analytic",
    "linewidth_resolvent", "linewidth_quadrature", "omega_bar", "iterations",
    "revival", "degenerate", "linewidth_over_flux", "error",
]


def sweep_point(mu: float, chi: float, on: bool, eta: float, method: str, pad: float) -> dict:
    """One row of the linewidth sweep; numerical failures are recorded, not raised."""
    p = LaserParams(mu=mu, chi=chi)
    f = _feedback(p, on, eta)
    policy = TruncationPolicy(pad_coefficient=pad)
    row = dict.fromkeys(SWEEP_HEADER)
    row.update(mu=mu, chi=chi, feedback=on, eta=eta if on else None,
               revival=uses_revival_treatment(p, f))
    if f is not None:
        row["regime"] = "feedback"
        row["linewidth_analytic"] = analytic.linewidth_feedback(p, eta)
    elif p.mu > 1:
        report = analytic.linewidth_regimes(p)
        row["regime"] = report.regime.value
        row["linewidth_analytic"] = report.linewidth
    best = row["linewidth_analytic"]
    try:
        if method in ("resolvent", "both"):
            res = linewidth(p, f, Method.RESOLVENT, policy)
            row.update(linewidth_resolvent=res.linewidth, omega_bar=res.omega_bar,
                       iterations=res.iterations)
            best = res.linewidth
        if method in ("quadrature", "both"):
            quad = linewidth(p, f, Method.QUADRATURE, policy)
            row["linewidth_quadrature"] = quad.linewidth
            if row["omega_bar"] is None:
                row["omega_bar"] = quad.omega_bar
            if method == "quadrature":
                best = quad.linewidth
    except (SolverError, ConvergenceError, TruncationError, CoverageError, ParameterError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    if best:
        cls = classify_coherence(best, p)
        row.update(degenerate=cls.degenerate, linewidth_over_flux=cls.ratio)
    return row


def cmd_sweep(cfg: dict) -> int:
    chis = parse_chi_grid(cfg["chi_grid"])
    method = cfg["method"]
    if method not in ("resolvent", "quadrature", "both", "analytic"):
        raise UsageError(f"unknown method {method!r}")
    mu = float(cfg["mu"])
    variants = _feedback_variants(cfg["feedback"])
    for chi in chis:
        for on in variants:
            p = LaserParams(mu=mu, chi=chi)
            try:
                require_integer_mu(p, _feedback(p, on, cfg["eta"]))
            except ParameterError as exc:
                raise UsageError(str(exc)) from exc
    tasks = [(mu, chi, on, float(cfg["eta"]), method, float(cfg["dim_pad"]))
             for on in variants for chi in chis]
    jobs = cfg["jobs"] or os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
            rows = list(pool.map(sweep_point, *zip(*tasks)))
    else:
        rows = [sweep_point(*t) for t in tasks]
    out = Path(cfg["out"])
    meta = provenance("sweep", mu=mu, chi_grid=chis, feedback=cfg["feedback"],
                      eta=cfg["eta"], method=method, dim_pad=cfg["dim_pad"])
    write_csv(out / "sweep.csv", SWEEP_HEADER, ([r[k] for k in SWEEP_HEADER] for r in rows), meta)
    write_json(out / "sweep.json", {"provenance": meta, "rows": rows})
    failed = sum(r["error"] is not None for r in rows)
    print(f"sweep: {len(rows)} points, {failed} failed -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------- g1

def _grid(cfg: dict):
    if cfg["t_max"] is None:
        return None
    samples = int(cfg["samples"] or 2048)
    return np.linspace(0.0, float(cfg["t_max"]), samples)


def cmd_g1(cfg: dict) -> int:
    out = Path(cfg["out"])
    bad = []
    for on in _feedback_variants(cfg["feedback"]):
        p = _laser(cfg)
        f = _feedback(p, on, cfg["eta"])
        trace = compute_g1(build_model(p, f, _policy(cfg)), _grid(cfg), method=cfg["propagator"])
        bad += trace.violations()
        meta = provenance("g1", laser=p.as_dict(), feedback=None if f is None else f.as_dict(),
                          dim_pad=cfg["dim_pad"], propagator=cfg["propagator"])
        rows = ((t, g.real, g.imag, abs(g)) for t, g in zip(trace.times, trace.values))
        write_csv(out / f"g1_{_tag(on)}.csv", ["t_kappa", "re_g1", "im_g1", "abs_g1"], rows, meta)
        write_json(out / f"g1_{_tag(on)}.json", {
            "provenance": meta, "samples": len(trace.times), "t_end": trace.times[-1],
            "omega0": trace.omega_bar, "revival": trace.revival,
            "tail_weight": trace.tail_weight, "violations": trace.violations(),
        })
    print(f"g1 -> {out}")
    return EXIT_INVARIANT if bad else EXIT_OK


# ---------------------------------------------------------------- spectrum

def cmd_spectrum(cfg: dict) -> int:
    out = Path(cfg["out"])
    summary, bad = {}, []
    for on in _feedback_variants(cfg["feedback"]):
        p = _laser(cfg)
        f = _feedback(p, on, cfg["eta"])
        res = linewidth(p, f, Method.RESOLVENT, _policy(cfg))
        trace = compute_g1(build_model(p, f, _policy(cfg)))
        spec = power_spectrum(trace, p, omega_bar=res.omega_bar)
        if cfg["omega_range"] is not None:
            lo, hi = (float(x) for x in cfg["omega_range"])
            shown = spec.crop(lo, hi)
        else:
            shown = spec
        bad += spec.violations()
        meta = provenance("spectrum", laser=p.as_dict(),
                          feedback=None if f is None else f.as_dict(), dim_pad=cfg["dim_pad"],
                          omega_range=cfg["omega_range"])
        write_csv(out / f"spectrum_{_tag(on)}.csv", ["omega_over_kappa", "P"],
                  zip(shown.frequencies, shown.values), meta)
        info = {
            "provenance": meta,
            "resolution": spec.resolution,
            "total_flux": spec.total_flux,
            "normalization_residual": spec.normalization_residual,
            "omega_bar": spec.omega_bar,
            "peak_at_omega_bar": spec.value_at(res.omega_bar),
            "peak_from_tau": peak_intensity(res.tau_coh, p),
            "tau_quadrature": coherence_time_quadrature(trace),
            "coherence": res.as_dict(),
            "centroid": centroid(spec),
            "violations": spec.violations(),
        }
        write_json(out / f"spectrum_{_tag(on)}.json", info)
        summary[_tag(on)] = info["peak_at_omega_bar"]
    print("spectrum peaks: " + ", ".join(f"{k} {v:.6g}" for k, v in summary.items()) + f" -> {out}")
    return EXIT_INVARIANT if bad else EXIT_OK


# ---------------------------------------------------------------- qfunc

def cmd_qfunc(cfg: dict) -> int:
    out = Path(cfg["out"])
    t_end = float(cfg["time"])
    if t_end < 0:
        raise UsageError("--time must be >= 0")
    bad = []
    for on in _feedback_variants(cfg["feedback"]):
        p = _laser(cfg)
        f = _feedback(p, on, cfg["eta"])
        m = build_model(p, f, _policy(cfg))
        if cfg["initial"] == "coherent":
            rho0 = DensityMatrix.coherent(m.space, math.sqrt(p.mu))
        elif cfg["initial"] == "steady":
            rho0 = m.rho_ss
        else:
            raise UsageError("--initial must be coherent or steady")
        report = None
        rho = rho0
        if t_end > 0:
            states, report = evolve_density(m.L, rho0.rho, np.linspace(0.0, t_end, 9))
            bad += report.failures()
            rho = DensityMatrix(m.space, states[-1])
        qf = q_function(rho, AmplitudeGrid.for_space(m.space, int(cfg["points"])))
        meta = provenance("qfunc", laser=p.as_dict(),
                          feedback=None if f is None else f.as_dict(), time=t_end,
                          initial=cfg["initial"], points=cfg["points"], dim_pad=cfg["dim_pad"])
        write_csv(out / f"qfunc_{_tag(on)}.csv", ["re_alpha", "im_alpha", "q"], qf.rows(), meta)
        write_json(out / f"qfunc_{_tag(on)}.json", {
            "provenance": meta,
            "grid": {"re_min": qf.grid.re[0], "re_max": qf.grid.re[-1], "im_min": qf.grid.im[0],
                     "im_max": qf.grid.im[-1], "points": [len(qf.grid.re), len(qf.grid.im)]},
            "normalization": qf.normalization,
            "clipped": qf.meta["clipped"],
            "mean_phase": mean_phase(qf),
            "phase_number_covariance": phase_number_covariance(qf),
            "evolution": None if report is None else report.__dict__,
        })
    print(f"qfunc -> {out}")
    return EXIT_INVARIANT if bad else EXIT_OK


# ---------------------------------------------------------------- design

def cmd_design(cfg: dict) -> int:
    probe = cfg["probe"]
    if probe is None:
        raise UsageError("design needs --probe FILE or a [probe] table in --config")
    if isinstance(probe, (str, Path)):
        data = load_config(probe)
        probe = data.get("probe", data)
        laser = dict(data.get("laser", {}))
    else:
        laser = dict(cfg.get("laser") or {})
    for key in ("mu", "chi", "C", "kappa"):
        if key in cfg.get("_explicit", ()):
            laser[key] = cfg[key]
    if "mu" not in laser:
        raise UsageError("design needs the mean atom number mu")
    kappa = float(laser.get("kappa", 1.0))
    if laser.get("C") is not None:
        p = LaserParams(mu=float(laser["mu"]), C=float(laser["C"]), kappa=kappa)
    else:
        p = LaserParams(mu=float(laser["mu"]), chi=float(laser.get("chi", 0.0)), kappa=kappa)
    report = design_report(ProbeParams.from_mapping(probe), p, float(cfg["eta"]))
    report["provenance"] = provenance("design", probe=probe, laser=p.as_dict(), eta=cfg["eta"])
    path = write_json(Path(cfg["out"]) / "design.json", report)
    print(f"theta {report['theta']:.3e}, M/I {report['M_per_intensity']:.3e} -> {path}")
    return EXIT_OK


# ---------------------------------------------------------------- check

def cmd_check(cfg: dict) -> int:
    only = cfg["only"]
    names = [n.strip() for n in only.split(",")] if isinstance(only, str) else only
    results = run_checks(names)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:26s} {r.detail}  ({r.seconds:.2f}s)")
    meta = provenance("check", only=names)
    write_json(Path(cfg["out"]) / "check.json", {
        "provenance": meta,
        "results": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results],
    })
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


COMMANDS = {
    "sweep": cmd_sweep,
    "g1": cmd_g1,
    "spectrum": cmd_spectrum,
    "qfunc": cmd_qfunc,
    "design": cmd_design,
    "check": cmd_check,
}


def _range(text: str) -> list[float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO,HI") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError("LO must be below HI")
    return [lo, hi]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="TOML or JSON file; flags override its values")
    common.add_argument("--mu", type=float, help="mean atom number")
    common.add_argument("--chi", type=float, help="collision strength 4 mu C / kappa")
    common.add_argument("--feedback", choices=["on", "off", "both"],
                        help="optimal QND feedback F = sqrt(eta) M = C")
    common.add_argument("--eta", type=float, help="detection efficiency")
    common.add_argument("--dim-pad", dest="dim_pad", type=float,
                        help="Fock cutoff is mu + DIM_PAD sqrt(mu)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="worker processes for sweeps")

    parser = argparse.ArgumentParser(prog="atomlaser", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"atomlaser {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", parents=[common], help="linewidth versus chi",
                           argument_default=argparse.SUPPRESS)
    sweep.add_argument("--chi-grid", dest="chi_grid",
                       help="comma list or log:START:STOP:COUNT")
    sweep.add_argument("--method", choices=["resolvent", "quadrature", "both", "analytic"])

    g1 = sub.add_parser("g1", parents=[common], help="first-order coherence trace",
                        argument_default=argparse.SUPPRESS)
    g1.add_argument("--t-max", dest="t_max", type=float, help="uniform grid end (1/kappa)")
    g1.add_argument("--samples", type=int)
    g1.add_argument("--method", dest="propagator", choices=["expm", "ode"],
                    help="propagation scheme")

    spec = sub.add_parser("spectrum", parents=[common], help="output power spectrum",
                          argument_default=argparse.SUPPRESS)
    spec.add_argument("--omega-range", dest="omega_range", type=_range,
                      help="LO,HI frequency window written to CSV (units of kappa); "
                           "write --omega-range=-20,20 when LO is negative")

    qf = sub.add_parser("qfunc", parents=[common], help="Q function after evolution",
                        argument_default=argparse.SUPPRESS)
    qf.add_argument("--time", type=float, help="evolution time (1/kappa)")
    qf.add_argument("--points", type=int, help="grid points per axis")
    qf.add_argument("--initial", choices=["coherent", "steady"])

    design = sub.add_parser("design", parents=[common], help="QND probe and feedback design",
                            argument_default=argparse.SUPPRESS)
    design.add_argument("--probe", help="JSON/TOML file with probe (and laser) parameters")

    check = sub.add_parser("check", parents=[common], help="run the invariant suite",
                           argument_default=argparse.SUPPRESS)
    check.add_argument("--only", help="comma-separated check names")
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    cfg = dict(DEFAULTS)
    path = getattr(args, "config", None)
    if path:
        try:
            data = load_config(path)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        data = {k.replace("-", "_"): v for k, v in data.items()}
        if args.command == "design":
            for key in ("probe", "laser"):
                if key in data:
                    cfg[key] = data[key]
        unknown = set(data) - set(DEFAULTS) - {"laser"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    cfg.update(flags)
    cfg["_explicit"] = set(flags)
    if "chi" in flags:
        cfg["C"] = None
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](resolve_settings(args))
    except (UsageError, ParameterError) as exc:
        print(f"atomlaser: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, ConvergenceError, TruncationError, AliasingError, CoverageError) as exc:
        print(f"atomlaser: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
