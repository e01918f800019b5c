"""Command-line interface: ``dsqft <command> [options]``.

Exit status: 0 success, 2 an invariant check failed, 3 budget exceeded,
64 bad configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import (BudgetExceeded, ContractError, DomainError, MissingEntry,
                     PreconditionViolation, ResidualExceeded)
from .geometry import GridSpec, ModelParams
from .reports import (COMMANDS, EXIT_BUDGET, EXIT_CONFIG, EXIT_VERIFY, RunConfig,
                      report_bundle, run)

ALIASES = {("stationary", "check"): "stationary-check", ("dispersion", "scan"): "dispersion-scan"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _model_args(p):
    g = p.add_argument_group("model")
    g.add_argument("--d", type=int)
    g.add_argument("--frak-m", type=float)
    g.add_argument("--frak-m2", type=float)
    g.add_argument("--r", type=float, default=1.0)
    g.add_argument("--b", type=float, default=None, help="interaction constant (default: m)")
    q = p.add_argument_group("grid and output")
    q.add_argument("--sphere-points", type=int)
    q.add_argument("--tau-panels", type=int)
    q.add_argument("--tau-order", type=int)
    q.add_argument("--epsilon-cut", type=float)
    q.add_argument("--seed", type=int)
    q.add_argument("--fixture", action="append", default=[])
    q.add_argument("--output-dir")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dsqft", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    specs = {
        "modes-validate": [("--s-max", int, 30)],
        "kernel-eval": [("--kind", str, "Dplus"), ("--tau", float, 0.0), ("--angle", float, 0.0),
                        ("--tau-lo", float, -0.3), ("--tau-hi", float, 0.3), ("--degree", int, 0),
                        ("--s-max", int, 160)],
        "npoint": [("--n", int, None), ("--tags", str, None)],
        "smatrix": [("--n", int, None), ("--n-in", int, 0)],
        "out-npoint": [("--n", int, None)],
        "gns-gram": [("--basis", str, "j-phiphi"), ("--tol", float, None)],
        "dispersion-scan": [("--n", int, 3), ("--eps-min", float, 1e-8), ("--eps-count", int, 8),
                            ("--tau-lo", float, -0.4), ("--tau-hi", float, 0.3), ("--degree", int, 0)],
        "stationary-check": [("--n", int, 3), ("--epsilon", str, "0.1")],
        "contrast": [],
    }
    for name in COMMANDS:
        p = sub.add_parser(name)
        _model_args(p)
        for flag, typ, default in specs[name]:
            p.add_argument(flag, type=typ, default=default)
    p = sub.add_parser("run", help="execute a stored RunConfig JSON")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p = sub.add_parser("report", help="collate run directories into a markdown/CSV bundle")
    p.add_argument("runs", nargs="*")
    p.add_argument("--output-dir")
    return ap


def _normalise(argv: list) -> list:
    if len(argv) >= 2 and (argv[0], argv[1]) in ALIASES:
        return [ALIASES[(argv[0], argv[1])]] + argv[2:]
    return argv


def config_from_args(ns) -> RunConfig:
    params = None
    if ns.d is not None:
        if (ns.frak_m is None) == (ns.frak_m2 is None):
            raise UsageError("give exactly one of --frak-m / --frak-m2 with --d")
        kw = {"r": ns.r}
        if ns.b is not None:
            kw["b"] = ns.b
        params = ModelParams.from_frak_m(ns.d, frak_m=ns.frak_m, frak_m2=ns.frak_m2, **kw)
    grid_kw = {k: getattr(ns, k) for k in ("sphere_points", "tau_panels", "tau_order", "epsilon_cut")
               if getattr(ns, k) is not None}
    if ns.seed is not None:
        grid_kw["seed"] = ns.seed
    grid = GridSpec(**grid_kw) if grid_kw else None
    skip = {"command", "d", "frak_m", "frak_m2", "r", "b", "sphere_points", "tau_panels", "tau_order",
            "epsilon_cut", "seed", "fixture", "output_dir"}
    options = {k: v for k, v in vars(ns).items() if k not in skip and v is not None}
    if "tags" in options:
        options["tags"] = [t.strip() for t in options["tags"].split(",")]
    return RunConfig(ns.command, params, grid, tuple(ns.fixture), ns.seed, ns.output_dir, options)


def main(argv=None) -> int:
    argv = _normalise(list(sys.argv[1:] if argv is None else argv))
    try:
        ns = build_parser().parse_args(argv)
        if ns.command == "report":
            files = report_bundle(ns.runs, ns.output_dir)
            sys.stdout.write(files["report.md"])
            return 0
        if ns.command == "run":
            with open(ns.config) as fh:
                cfg = RunConfig.from_json(fh.read())
            if ns.output_dir:
                cfg.output_dir = ns.output_dir
        else:
            cfg = config_from_args(ns)
        status, _, files = run(cfg)
    except (UsageError, ContractError, DomainError, MissingEntry, json.JSONDecodeError,
            FileNotFoundError, TypeError) as exc:
        print(f"dsqft: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"dsqft: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ResidualExceeded, PreconditionViolation) as exc:
        print(f"dsqft: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    sys.stdout.write(files["summary.json"])
    return status


if __name__ == "__main__":
    sys.exit(main())
