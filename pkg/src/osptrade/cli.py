"""Command-line front end.

Every run writes its report(s) and a ``manifest.json`` into ``--out``. Exit
status is 0 on success, 2 for invalid input and 3 when a solver fails.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bic import choice_value_report, table_csv, type_grid
from .choice import HypothesisError, build_bilateral, choice_report, find_bilateral, verify_bilateral
from .core import ScenarioError, load_scenario
from .large_market import (DualConfig, PoolError, SearchConfig, canonical_menus, recover_primal,
                           replica_sweep, solve_dual)
from .lp import NumericalFailure
from .mechanisms import (ProtocolError, canonical_protocol, corner_grids, load_protocol, simulate_mechanism,
                         tabulate, verify_osp_bruteforce, verify_osp_structural)

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, scenario: bool = True) -> None:
    if scenario:
        p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--out", default="reports")
    p.add_argument("--csv-only", action="store_true", help="write CSV reports only")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="osptrade", description="OSP trading mechanisms: checks, simulation and design")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="choice conditions, bilateral improvement, constant-mechanism slack")
    _common(p)

    p = sub.add_parser("bilateral", help="construct and price an improving bilateral trade")
    _common(p)
    p.add_argument("--pair", type=int, nargs=2, metavar=("J1", "J2"))

    p = sub.add_parser("verify-osp", help="structural and brute-force OSP verification of a protocol")
    p.add_argument("protocol", help="protocol JSON file")
    p.add_argument("--scenario", help="scenario JSON (enables the brute-force check)")
    p.add_argument("--grid", choices=("corners", "corners+center"), default="corners")
    _common(p, scenario=False)

    p = sub.add_parser("simulate", help="Monte-Carlo social cost of a protocol")
    _common(p)
    p.add_argument("--protocol", help="protocol JSON (default: two-ray menus, two-task scenarios)")

    p = sub.add_parser("bic", help="exact BIC benchmark on a finite type grid")
    _common(p)
    p.add_argument("--grid", choices=("corners", "corners+center"), default="corners+center")

    p = sub.add_parser("lm-solve", help="large-market dual ascent and primal recovery")
    _common(p)
    p.add_argument("--restarts", type=int, default=64)
    p.add_argument("--iterations", type=int, default=500)

    p = sub.add_parser("replica", help="replica-economy convergence sweep")
    _common(p)
    p.add_argument("--protocol", help="protocol JSON whose menus are replicated")
    p.add_argument("--N-list", dest="n_list", default="1,2,5,10,25,50")
    p.add_argument("--seeds", type=int, default=20, help="number of seeds starting at --seed")
    return parser


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _flatten(obj, prefix: str = "") -> list[list]:
    if isinstance(obj, dict):
        return [r for k, v in obj.items() for r in _flatten(v, f"{prefix}{k}.")]
    if isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        return [r for i, v in enumerate(obj) for r in _flatten(v, f"{prefix}{i}.")]
    return [[prefix.rstrip("."), json.dumps(obj)]]


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def _run(args) -> tuple[dict, dict[str, str], bytes]:
    """Execute a subcommand; returns (report, extra CSV files, input bytes)."""
    if args.command == "verify-osp":
        raw = _read(args.protocol)
        proto = load_protocol(raw.decode())
        structural = verify_osp_structural(proto)
        report = {"structural": structural.to_dict(), "verdict": structural.verdict}
        if args.scenario:
            sraw = _read(args.scenario)
            raw += sraw
            s = load_scenario(sraw.decode())
            proto.validate(s.supply)
            table = tabulate(proto, s)
            grids = corner_grids(s) if args.grid == "corners" else [
                np.vstack([g, 0.5 * (s.pref_lo[j] + s.pref_hi[j])]) for j, g in enumerate(corner_grids(s))]
            bf = verify_osp_bruteforce(table, grids, tol=args.tol)
            report["bruteforce"] = bf.to_dict()
        return report, {}, raw

    raw = _read(args.scenario)
    s = load_scenario(raw.decode())

    if args.command == "check":
        return choice_report(s, seed=args.seed).to_dict(), {}, raw

    if args.command == "bilateral":
        m = build_bilateral(s, *args.pair, seed=args.seed) if args.pair else find_bilateral(s, args.seed)
        if m is None:
            return {"bilateral": None}, {}, raw
        rep = verify_bilateral(m, s, args.samples, args.seed)
        return {"bilateral": {"j1": m.j1, "j2": m.j2, "gamma": m.gamma.tolist()},
                "verification": rep.to_dict()}, {}, raw

    if args.command == "simulate":
        if args.protocol:
            praw = _read(args.protocol)
            raw += praw
            proto = load_protocol(praw.decode()).validate(s.supply)
        else:
            proto = canonical_protocol(s)
        rep = simulate_mechanism(s, proto, args.samples, args.seed, args.workers)
        head = ["seed", "samples", "mean_cost", "stderr", "sq_cost"] + [f"trade_freq_{j}" for j in range(s.J)]
        row = [rep.seed, rep.samples, repr(rep.mean_cost), repr(rep.stderr), repr(rep.sq_cost)] + \
            [repr(float(f)) for f in rep.trade_freq]
        return rep.to_dict(), {"simulate.csv": _csv([head, row])}, raw

    if args.command == "bic":
        rep = choice_value_report(s, type_grid(s, args.grid), tol=args.tol)
        out = rep.to_dict()
        out["table_path"] = "bic_table.csv"
        return out, {"bic_table.csv": table_csv(rep.solution)}, raw

    if args.command == "lm-solve":
        cfg = DualConfig(iterations=args.iterations, workers=args.workers,
                         search=SearchConfig(restarts=args.restarts, seed=args.seed))
        d = solve_dual(s, cfg)
        rec = recover_primal(d, s)
        return {"lambda": d.lam.tolist(), "dual_value": d.value, "primal_value": rec.objective,
                "gap": rec.gap, "clearing_residual": rec.clearing_residual,
                "allocation": rec.x.tolist(), "iterations": d.iterations,
                "per_agent_menus": [m.to_dict() for m in d.menus]}, {}, raw

    if args.command == "replica":
        if args.protocol:
            praw = _read(args.protocol)
            raw += praw
            menus = list(load_protocol(praw.decode()).validate(s.supply).menus)
        else:
            menus = canonical_menus(s)
        try:
            n_list = [int(v) for v in args.n_list.split(",") if v.strip()]
        except ValueError:
            raise ScenarioError(f"--N-list must be comma-separated integers, got {args.n_list!r}") from None
        tab = replica_sweep(s, menus, n_list, range(args.seed, args.seed + args.seeds), args.workers)
        rows = [["N", "seed", "v_full", "v_restricted", "rho_dev"]] + [
            [r.N, r.seed, repr(r.v_full), repr(r.v_restricted), repr(r.rho_dev)] for r in tab.runs]
        return tab.to_dict(), {"replica.csv": _csv(rows)}, raw

    raise AssertionError(args.command)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        report, extras, raw = _run(args)
    except (ScenarioError, ProtocolError, HypothesisError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalFailure, PoolError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = args.command.replace("-", "_")
    if args.csv_only:
        if not extras:
            extras = {f"{name}.csv": _csv([["key", "value"]] + _flatten(report))}
        for fname, text in extras.items():
            sys.stdout.write(text)
    else:
        (out / f"{name}.json").write_text(_json(report))
    for fname, text in extras.items():
        (out / fname).write_text(text)
    config = {k: v for k, v in vars(args).items() if k not in ("out",)}
    manifest = {
        "subcommand": args.command,
        "scenario_sha256": hashlib.sha256(raw).hexdigest(),
        "seed": args.seed,
        "workers": args.workers,
        "config": config,
        "version": __version__,
        "wall_clock_seconds": round(time.time() - started, 3),
    }
    (out / "manifest.json").write_text(_json(manifest))
    if not args.csv_only:
        print(out / f"{name}.json")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
