"""Command line interface: ``ldprates <command> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import checks
from .channels import DiscreteChannel, DiscreteDist, PrivacyLevel, audit_privacy, make_binary_channel
from .harness import (
    ConfigError,
    append_cell,
    csv_path,
    load_config,
    load_results,
    run_experiment,
    write_csv,
)
from .moduli import PROBLEM_TAGS, EmptySupremum, FiniteFamily, brute_force_modulus, table_curve
from .representers import Representer


def parse_channel(desc: str, alpha: float) -> DiscreteChannel:
    """Channel descriptors.

    ``binary:v1,v2,...``   binary channel at ``alpha`` over inputs whose
                           representer values are v1, v2, ... (sup = max |v|)
    ``matrix:a,b;c,d``     explicit row-stochastic matrix, rows split by ';'
    ``path.json``          {"matrix": [[...], ...]} with optional
                           "inputs"/"outputs"
    """
    if desc.startswith("binary:"):
        vals = np.array([float(v) for v in desc[7:].split(",")])
        sup = float(np.max(np.abs(vals)))
        rep = Representer(lambda x: np.asarray(x, dtype=float), sup, ((-sup, sup),))
        return make_binary_channel(rep, PrivacyLevel(alpha)).to_discrete(vals)
    if desc.startswith("matrix:"):
        rows = [[float(v) for v in r.split(",")] for r in desc[7:].split(";")]
        return DiscreteChannel(range(len(rows)), range(len(rows[0])), rows)
    with open(desc, encoding="utf-8") as fh:
        spec = json.load(fh)
    mat = spec["matrix"]
    return DiscreteChannel(spec.get("inputs", range(len(mat))), spec.get("outputs", range(len(mat[0]))), mat)


def parse_grid(text: str) -> np.ndarray:
    try:
        a, b, steps = text.split(":")
        return np.linspace(float(a), float(b), int(steps))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must look like start:stop:steps") from None


def load_family(path: str) -> FiniteFamily:
    """{"members": [{"atoms": [...], "weights": [...], "theta": x}, ...]}"""
    with open(path, encoding="utf-8") as fh:
        spec = json.load(fh)
    return FiniteFamily([(DiscreteDist(m["atoms"], m["weights"]), m["theta"]) for m in spec["members"]])


def cmd_audit(args) -> int:
    level = PrivacyLevel(args.alpha)
    ch = parse_channel(args.channel, args.alpha)
    rep = audit_privacy(ch, level)
    print(f"max_log_ratio={rep.max_log_ratio!r} alpha={level.alpha!r} {'PASS' if rep.passed else 'FAIL'}")
    return 0 if rep.passed else 1


def cmd_simulate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = args.output or cfg.output
    open(out, "w").close()
    cells = []

    def record(cell):
        cells.append(cell)
        append_cell(cell, out)
        print(f"alpha={cell.alpha:.6g} n={cell.n} risk={cell.risk:.6g} se={cell.se:.3g} {cell.flag}", flush=True)

    run_experiment(cfg, threads=args.threads, on_cell=record)
    write_csv(cells, csv_path(out))
    return 0


def cmd_rates(args) -> int:
    report = load_results(args.results)
    for a in report.alphas():
        fit = report.fits.get(a)
        if fit is None:
            print(f"alpha={a:.6g}: not enough unflagged cells for a fit")
            continue
        print(f"alpha={a:.6g} slope={fit.slope:.4f} +- {fit.slope_se:.4f} "
              f"theory={report.theory_slope:.4f} cells={fit.cells}")
    return 0


def cmd_moduli(args) -> int:
    params = {}
    for kv in args.param or []:
        k, v = kv.split("=", 1)
        params[k] = [float(x) for x in v.split(",")] if "," in v else float(v)
    A = params.pop("A", 1.0)
    tv = table_curve(args.problem, "tv", A=A, **params)
    hel = table_curve(args.problem, "hellinger", A=A, **params)
    eps = args.eps_grid
    cols = ["eps", "omega_tv", "omega_h"]
    rows = [eps, tv(eps), hel(eps)]
    if args.brute_force:
        fam = load_family(args.brute_force)
        for metric in ("tv", "hellinger"):
            vals = brute_force_modulus(fam, eps, metric)
            rows.append(np.array([math.nan if isinstance(v, EmptySupremum) else v for v in vals], dtype=float))
            cols.append(f"brute_{metric}")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(cols)
    for r in zip(*rows):
        w.writerow([repr(float(v)) for v in r])
    return 0


def cmd_check(args) -> int:
    results = checks.run_all(seed=args.seed, trials=args.trials)
    ok = True
    for name, (passed, total) in results.items():
        print(f"{name}: {passed}/{total}")
        ok &= passed == total
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ldprates", description="Locally private functional estimation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("audit", help="audit a channel for alpha-privacy")
    a.add_argument("--alpha", type=float, required=True)
    a.add_argument("--channel", required=True)
    a.set_defaults(func=cmd_audit)

    s = sub.add_parser("simulate", help="run a Monte Carlo risk experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--output", default=None, help="override the output path of the config")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("rates", help="fit convergence rates to stored results")
    r.add_argument("--results", required=True)
    r.set_defaults(func=cmd_rates)

    m = sub.add_parser("moduli", help="tabulate moduli of continuity")
    m.add_argument("--problem", required=True, choices=PROBLEM_TAGS)
    m.add_argument("--eps-grid", type=parse_grid, required=True)
    m.add_argument("--param", action="append", help="curve parameter, e.g. kappa=2 or beta=0.5,1")
    m.add_argument("--brute-force", default=None)
    m.set_defaults(func=cmd_moduli)

    c = sub.add_parser("check", help="run the randomized inequality suite")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--trials", type=int, default=200)
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
