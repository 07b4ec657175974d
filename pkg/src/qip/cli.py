"""Command line front end: ``qip fit``, ``qip demo anscombe|freq`` and ``qip check``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import anscombe
from .errors import InfeasiblePoint, InfeasibleStart, InvalidModel, QipError, SchemaError
from .inclusion import (
    cone_width_inclusion,
    containment_falsify,
    containment_necessary,
    inclusion_from_ssdd,
)
from .io import FitReport, dumps, load_model, read_measurements, save_model, write_json
from .noise import chi2_threshold
from .solver import Status, assemble, solve

log = logging.getLogger("qip")

EXIT_OK = 0
EXIT_NOT_CONTAINED = 1
EXIT_UNBOUNDED = 2
EXIT_INFEASIBLE = 3
EXIT_ITERATION_LIMIT = 4
EXIT_SCHEMA = 64

STATUS_EXIT = {
    Status.OPTIMAL: EXIT_OK,
    Status.UNBOUNDED: EXIT_UNBOUNDED,
    Status.INFEASIBLE: EXIT_INFEASIBLE,
    Status.ITERATION_LIMIT: EXIT_ITERATION_LIMIT,
}


def _setup_logging(verbose: bool) -> None:
    level = os.environ.get("QIP_LOG", "INFO" if verbose else "WARNING").upper()
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("qip").setLevel(getattr(logging, level, logging.WARNING))


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# -- fit ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    meas = read_measurements(args.data)
    out = _outdir(args.out)
    summaries = meas.summaries()
    points = meas.averaged()
    mode = args.mode
    if mode is None:
        mode = "noisy" if any(len(g) > 1 for g in meas.samples) else "degenerate"
    if mode == "noisy":
        alpha = args.alpha if args.alpha is not None else chi2_threshold(meas.n_y, args.delta)
        noise = summaries
    else:
        alpha, noise = 0.0, None

    report_path = out / "report.json"
    try:
        prob = assemble(points, noise, alpha)
        res = solve(prob)
    except (InfeasiblePoint, InfeasibleStart) as e:
        print(f"infeasible: {e}", file=sys.stderr)
        write_json(report_path, {"format_version": 1, "status": Status.INFEASIBLE.value,
                                 "width": None, "reason": str(e)})
        print(f"status {Status.INFEASIBLE.value}")
        return EXIT_INFEASIBLE

    report = FitReport.from_result(res, meas.point_ids, alpha=alpha)
    if res.status is Status.OPTIMAL:
        model = inclusion_from_ssdd(res.ssdd, strict=False)
        model_path = out / "model.json"
        save_model(model_path, model, res.ssdd)
        report.model_path = model_path.name
    write_json(report_path, report.to_dict())
    print(f"status {report.status}")
    if res.status is Status.OPTIMAL:
        print(f"width {report.width:.10g}")
        print("active points: " + ", ".join(str(i) for i in report.active_set))
    return STATUS_EXIT[res.status]


# -- demos ------------------------------------------------------------------------

def cmd_demo_anscombe(args) -> int:
    from .plotting import anscombe_figure

    out = _outdir(args.out)
    fits = anscombe.fit_quartet(args.alpha_sigma)
    rows = []
    for f in fits:
        slope, intercept = anscombe.ols_line(f.x, f.y)
        rows.append({
            "dataset": f.name,
            "status": f.result.status.value,
            "slope": f.slope,
            "asymptote": f.asymptote,
            "width": f.result.width,
            "active_set": f.active,
            "active_set_size": len(f.active),
            "ols_slope": slope,
            "ols_intercept": intercept,
        })
        print(f"({f.name}) slope {f.slope:.6f}  half-opening {f.asymptote:.6f}  "
              f"active {f.active}  OLS {slope:.4f} x + {intercept:.4f}")
    write_json(out / "anscombe_report.json",
               {"format_version": 1, "alpha_sigma": args.alpha_sigma, "datasets": rows})
    anscombe_figure(fits, out / "anscombe.svg")
    return EXIT_OK


def _freq_report(res) -> dict:
    sc = res.scenario
    rep = res.qip_report
    d = {
        "format_version": 1,
        "scenario": sc.to_dict(),
        "status": rep.status,
        "qip_width": rep.width if rep.status == Status.OPTIMAL.value else None,
        "ls_width": res.ls_width,
        "gamma_min": res.gamma_min,
        "iterations": rep.iterations,
        "alpha": rep.alpha,
        "active_frequencies": [
            {"index": int(i), "omega": res.samples[i].omega,
             "condition": res.samples[i].condition}
            for i in rep.active_set
        ],
        "containment": res.containment,
        "kkt": rep.kkt,
    }
    if rep.result is not None and rep.status == Status.OPTIMAL.value:
        s = rep.result.ssdd
        d["ssdd"] = {"X_B": s.X_B, "X_A": s.X_A, "X_AA": s.X_AA, "X_C": s.X_C}
    env = []
    for k, w in enumerate(sc.omegas):
        row = {"omega": w}
        for tag, e in (("qip", res.qip_envelope), ("ls", res.ls_envelope)):
            if e is not None:
                row.update({f"{tag}_nominal": e.nominal[k], f"{tag}_lower": e.lower[k],
                            f"{tag}_upper": e.upper[k]})
        env.append(row)
    d["envelope"] = env
    return d


def _write_freq_csv(res, path) -> None:
    from .freqid import true_response

    sc = res.scenario
    w = sc.omegas
    cols = {"omega": w}
    for c in range(sc.plant.n_conditions):
        G = true_response(sc.plant, c, w)
        cols[f"true{c}_mag"] = np.abs(G)
        cols[f"true{c}_phase"] = np.angle(G)
    for tag, e in (("qip", res.qip_envelope), ("ls", res.ls_envelope)):
        if e is not None:
            cols[f"{tag}_nominal"] = e.nominal
            cols[f"{tag}_lower"] = e.lower
            cols[f"{tag}_upper"] = e.upper
            cols[f"{tag}_phase"] = e.phase
    names = list(cols)
    with open(path, "w", newline="") as fh:
        fh.write("# format_version=1\n")
        wr = csv.writer(fh)
        wr.writerow(names)
        for k in range(w.size):
            wr.writerow([f"{float(cols[n][k]):.17g}" for n in names])


def cmd_demo_freq(args) -> int:
    from .freqid import Scenario, run_scenario
    from .plotting import bode_figure

    out = _outdir(args.out)
    sc = Scenario.load(args.config) if args.config else Scenario()
    if args.seed is not None:
        sc = dataclasses.replace(sc, plant=dataclasses.replace(sc.plant, seed=args.seed))
    if args.delta is not None:
        sc = dataclasses.replace(sc, delta=args.delta)
    res = run_scenario(sc)
    rep = res.qip_report
    write_json(out / "freq_report.json", _freq_report(res))
    _write_freq_csv(res, out / "bode.csv")
    bode_figure(res, out / "bode.svg")
    print(f"status {rep.status}")
    if rep.status == Status.OPTIMAL.value:
        print(f"QIP width {rep.width:.6g}  scaled-LS width {res.ls_width:.6g}  "
              f"gamma_min {res.gamma_min:.6g}")
        print("containment per condition: " + ", ".join(f"{c:.2f}" for c in res.containment))
    return STATUS_EXIT[Status(rep.status)]


# -- check -------------------------------------------------------------------------

def cmd_check(args) -> int:
    inner, _ = load_model(args.model_a, strict=False)
    outer, _ = load_model(args.model_b, strict=False)
    w_in, w_out = cone_width_inclusion(inner), cone_width_inclusion(outer)
    print(f"width inner {w_in:.10g}")
    print(f"width outer {w_out:.10g}")
    print(f"width ordering: {'inner <= outer' if w_in <= w_out else 'inner > outer'}")
    try:
        necessary = containment_necessary(inner, outer)
        delta = containment_falsify(inner, outer, n_samples=args.samples, seed=args.seed)
    except InvalidModel as e:
        print(f"containment check unavailable: {e} "
              "(the outer model must have invertible B and C)")
        return EXIT_SCHEMA
    print(f"necessary condition sigma_max(B~) sigma_max(C~) <= 1: "
          f"{'passes' if necessary else 'fails'}")
    if delta is None:
        print(f"sampling: no counterexample in {args.samples} contractions")
    else:
        print("sampling: counterexample Delta " + dumps(
            [[[float(v.real), float(v.imag)] for v in row] for row in delta], indent=0
        ).replace("\n", ""))
    if necessary and delta is None:
        print("verdict: consistent with containment")
        return EXIT_OK
    print("verdict: non-containment certified")
    return EXIT_NOT_CONTAINED


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="log solver progress")
    ap = argparse.ArgumentParser(prog="qip", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", parents=[common], help="fit an inclusion to a measurement CSV")
    f.add_argument("data")
    f.add_argument("--delta", type=float, default=0.01, help="chi-square tail probability")
    f.add_argument("--alpha", type=float, default=None, help="override the noise threshold")
    f.add_argument("--mode", choices=["degenerate", "noisy"], default=None,
                   help="default: noisy when points are repeated")
    f.add_argument("--out", default=".")
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("demo", help="run a built-in demonstration")
    dsub = d.add_subparsers(dest="demo", required=True)
    a = dsub.add_parser("anscombe", parents=[common])
    a.add_argument("--alpha-sigma", type=float, default=2.0)
    a.add_argument("--out", default=".")
    a.set_defaults(func=cmd_demo_anscombe)
    q = dsub.add_parser("freq", parents=[common])
    q.add_argument("config", nargs="?", default=None, help="scenario JSON")
    q.add_argument("--delta", type=float, default=None)
    q.add_argument("--seed", type=int, default=None, help="overrides the scenario seed")
    q.add_argument("--out", default=".")
    q.set_defaults(func=cmd_demo_freq)

    c = sub.add_parser("check", parents=[common],
                       help="test whether model A is contained in model B")
    c.add_argument("model_a")
    c.add_argument("model_b")
    c.add_argument("--samples", type=int, default=10_000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except QipError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
