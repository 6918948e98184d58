"""Command-line front end.

    tewm simulate --dgp quadrant-ar --n 1000 --seed 42 --out path.csv
    tewm fit-propensity --in path.csv --propensity logit --pcols y_lag,z1_lag
    tewm learn --in path.csv --class quadrant --cols y_lag,z1_lag --propensity constant:0.5
    tewm evaluate --in path.csv --rule rule.json --propensity constant:0.5
    tewm montecarlo --config mc.cfg --out table.json

Every command prints a JSON report (schema 1) carrying the resolved config
and library version; ``--out``/``--report`` also write it to disk. Config
files are flat ``key=value`` lines named like the long flags; flags win.
Exit status: 0 success, 1 invalid input, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .data import ColumnSpec, build_lagged, load_csv, write_csv
from .errors import OverlapViolation, TewmError, UsageError
from .kernels import KernelSpec
from .montecarlo import McConfig, rate_diagnostic, run_table
from .multiperiod import learn_two_period
from .propensity import Constant, Logit, PropensityModel, check_overlap, fit_local_logit, fit_logit
from .rules import Quadrant, rule_from_dict
from .search import SearchConfig
from .simulate import DgpSpec, MarkovSwitch, QuadrantAr, simulate
from .welfare import DiscreteConditional, KernelConditional, Unconditional, welfare

SCHEMA = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ----------------------------------------------------------------------------
# spec-string parsing


def _kv(text: str) -> dict:
    out = {}
    for part in filter(None, text.split(",")):
        if "=" not in part:
            raise UsageError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_propensity(text: str):
    """``constant:E``, ``logit`` or ``local-logit[:h=H,kernel=K,degree=D]``."""
    kind, _, rest = text.partition(":")
    if kind == "constant":
        try:
            return ("constant", {"e": float(rest)})
        except ValueError:
            raise UsageError(f"bad constant propensity {text!r}") from None
    if kind == "logit":
        return ("logit", {})
    if kind == "local-logit":
        opts = _kv(rest)
        unknown = set(opts) - {"h", "kernel", "degree"}
        if unknown:
            raise UsageError(f"unknown local-logit options {sorted(unknown)}")
        return ("local-logit", opts)
    raise UsageError(f"unknown propensity spec {text!r}")


def build_propensity(text: str, rows, pcols) -> PropensityModel:
    kind, opts = parse_propensity(text)
    if kind == "constant":
        return Constant(opts["e"])
    if kind == "logit":
        return fit_logit(rows, pcols)
    cols = ColumnSpec.parse(pcols) if pcols else rows.spec
    if len(cols) != 1:
        raise UsageError("local-logit needs exactly one propensity column (--pcols)")
    h = float(opts["h"]) if "h" in opts else None
    return fit_local_logit(rows, cols.columns[0], h, KernelSpec(opts.get("kernel", "epanechnikov")),
                           int(opts.get("degree", 1)))


def parse_objective(text: str):
    """``unconditional``, ``discrete:w=W`` or ``kernel:x=X1/X2,h=H,kernel=K,w=W,scale=C``."""
    kind, _, rest = text.partition(":")
    if kind == "unconditional":
        return Unconditional()
    if kind == "discrete":
        opts = _kv(rest) if "=" in rest else {"w": rest}
        return DiscreteConditional(int(opts["w"]))
    if kind == "kernel":
        opts = _kv(rest)
        if "x" not in opts:
            raise UsageError("kernel objective needs x=...")
        return KernelConditional(
            tuple(float(v) for v in opts["x"].split("/")),
            float(opts["h"]) if "h" in opts else None,
            KernelSpec(opts.get("kernel", "epanechnikov")),
            float(opts["scale"]) if "scale" in opts else None,
            int(opts["w"]) if "w" in opts else None,
        )
    raise UsageError(f"unknown objective {text!r}")


def _dgp_spec(args, T: int) -> DgpSpec:
    if args.dgp == "quadrant-ar":
        model = QuadrantAr(args.phi, args.b1, args.b2, args.e, args.sigma_eps, args.sigma_z)
    elif args.dgp == "markov-switch":
        model = MarkovSwitch(args.p, args.q, args.beta0, args.beta1, args.beta2, args.sigma_eps)
    else:
        raise UsageError(f"unknown dgp {args.dgp!r}")
    return DgpSpec(model, T, args.seed, args.stream)


# ----------------------------------------------------------------------------
# parser


def _add_dgp(p):
    p.add_argument("--dgp", default="quadrant-ar", choices=["quadrant-ar", "markov-switch"])
    p.add_argument("--phi", type=float, default=0.5)
    p.add_argument("--b1", type=float, default=2.5)
    p.add_argument("--b2", type=float, default=0.52)
    p.add_argument("--e", type=float, default=0.5)
    p.add_argument("--sigma-eps", type=float, default=1.0)
    p.add_argument("--sigma-z", type=float, default=1.0)
    p.add_argument("--p", type=float, default=0.7)
    p.add_argument("--q", type=float, default=0.6)
    p.add_argument("--beta0", type=float, default=0.0)
    p.add_argument("--beta1", type=float, default=1.0)
    p.add_argument("--beta2", type=float, default=-0.5)
    p.add_argument("--stream", type=int, default=0)


def _add_input(p):
    p.add_argument("--in", dest="input")
    p.add_argument("--propensity", default="constant:0.5")
    p.add_argument("--pcols", default=None, help="propensity columns (default: --cols)")
    p.add_argument("--kappa", type=float, default=0.05)
    p.add_argument("--allow-overlap-violations", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tewm", description="Time-series empirical welfare maximization")
    parser.add_argument("--version", action="version", version=f"tewm {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--config", default=None, help="key=value file (or a previous JSON report)")
        p.add_argument("--report", default=None, help="also write the JSON report here")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("simulate", help="draw a path from a DGP and write it as CSV")
    common(p)
    _add_dgp(p)
    p.add_argument("--n", type=int, default=1000, help="number of lagged rows; the path has n+1 periods")
    p.add_argument("--out", default=None)

    p = sub.add_parser("fit-propensity", help="fit and report a propensity model")
    common(p)
    _add_input(p)
    p.set_defaults(propensity="logit")
    p.add_argument("--out", default=None)

    p = sub.add_parser("learn", help="learn a policy rule")
    common(p)
    _add_input(p)
    p.add_argument("--class", dest="class_kind", default="quadrant", choices=["quadrant", "discrete", "two-period"])
    p.add_argument("--cols", default="y_lag,z1_lag")
    p.add_argument("--objective", default="unconditional")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--state", type=int, default=None, help="starting state w for --class two-period")
    p.add_argument("--out", default=None)

    p = sub.add_parser("evaluate", help="empirical welfare of a given rule")
    common(p)
    _add_input(p)
    p.add_argument("--rule", default=None, help="JSON file with a rule (a learn report works too)")
    p.add_argument("--signs", default=None)
    p.add_argument("--thresholds", default=None)
    p.add_argument("--cols", default="y_lag,z1_lag")
    p.add_argument("--objective", default="unconditional")
    p.add_argument("--out", default=None)

    p = sub.add_parser("montecarlo", help="threshold-recovery table over replications")
    common(p)
    _add_dgp(p)
    p.add_argument("--sizes", default="100,500,1000,2000")
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--cols", default="y_lag,z1_lag")
    p.add_argument("--out", default=None)
    p.add_argument("--table", default=None, help="write the plain-text table here (default: stderr)")
    return parser


def read_config(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return {k: v for k, v in json.loads(text)["config"].items() if v is not None}
    out = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a command is required: simulate, fit-propensity, learn, evaluate, montecarlo")
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        defaults = read_config(args.config)
        defaults.pop("command", None)
        defaults.pop("config", None)
        # keys may be flag names ("in", "sigma-eps") or destinations ("input")
        names = {}
        for a in sub._actions:
            names[a.dest] = a.dest
            for opt in a.option_strings:
                names[opt.lstrip("-").replace("-", "_")] = a.dest
        unknown = set(defaults) - set(names)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        defaults = {names[k]: v for k, v in defaults.items()}
        for a in sub._actions:
            if a.dest in defaults and isinstance(defaults[a.dest], str) and a.type is not None:
                defaults[a.dest] = a.type(defaults[a.dest])
            if a.dest in defaults and a.const is True and isinstance(defaults[a.dest], str):
                defaults[a.dest] = defaults[a.dest].lower() in ("1", "true", "yes")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# ----------------------------------------------------------------------------
# commands


def _rows_and_propensity(args, cols):
    if not args.input:
        raise UsageError("--in is required")
    series = load_csv(args.input)
    pcols = ColumnSpec.parse(args.pcols) if args.pcols else cols
    rows = build_lagged(series, cols)
    prop = build_propensity(args.propensity, rows, pcols)
    overlap = check_overlap(prop, rows, args.kappa)
    if overlap.violating_indices and not args.allow_overlap_violations:
        t = overlap.violating_indices[0]
        raise OverlapViolation(t, message=(
            f"propensity outside [{args.kappa:g}, {1 - args.kappa:g}] at t={t} "
            f"({len(overlap.violating_indices)} rows; min={overlap.min_e:.3g}, max={overlap.max_e:.3g})"))
    return series, rows, prop, overlap


def cmd_simulate(args):
    if args.seed is None:
        raise UsageError("--seed is required for simulate")
    if not args.out:
        raise UsageError("--out is required for simulate")
    spec = _dgp_spec(args, args.n + 1)
    series = simulate(spec)
    write_csv(series, args.out)
    return {"dgp": spec.to_dict(), "path": str(args.out), "T": series.T, "k": series.k}


def cmd_fit_propensity(args):
    cols = ColumnSpec.parse(args.pcols or "y_lag")
    series, rows, prop, overlap = _rows_and_propensity(args, cols)
    return {"model": prop.to_dict(), "overlap": overlap.to_dict()}


def cmd_learn(args):
    if args.class_kind == "two-period":
        cols = ColumnSpec.parse("w_lag")
        series, rows, prop, overlap = _rows_and_propensity(args, cols)
        if args.state is None:
            raise UsageError("--state is required for --class two-period")
        report = learn_two_period(rows, prop, args.state)
        return {"result": report.to_dict(), "propensity": prop.to_dict(), "overlap": overlap.to_dict()}
    cols = ColumnSpec.parse(args.cols)
    series, rows, prop, overlap = _rows_and_propensity(args, cols)
    cfg = SearchConfig(args.class_kind, cols, parse_objective(args.objective), args.restarts,
                       args.seed if args.seed is not None else 0)
    result = cfg.run(rows, prop)
    return {"result": result.to_dict(), "propensity": prop.to_dict(), "overlap": overlap.to_dict()}


def cmd_evaluate(args):
    if args.rule:
        d = json.loads(Path(args.rule).read_text(encoding="utf-8"))
        d = d.get("result", d)
        rule = rule_from_dict(d.get("rule", d))
    elif args.signs and args.thresholds:
        rule = Quadrant(tuple(int(s) for s in args.signs.split(",")),
                        tuple(float(b) for b in args.thresholds.split(",")), ColumnSpec.parse(args.cols))
    else:
        raise UsageError("give --rule FILE or --signs/--thresholds/--cols")
    cols = ColumnSpec.parse(args.cols)
    series, rows, prop, overlap = _rows_and_propensity(args, cols)
    report = welfare(rows, rule, prop, parse_objective(args.objective))
    return {"result": report.to_dict(), "propensity": prop.to_dict(), "overlap": overlap.to_dict()}


def cmd_montecarlo(args):
    if args.seed is None:
        raise UsageError("--seed is required for montecarlo")
    spec = _dgp_spec(args, 2)
    sizes = tuple(int(v) for v in args.sizes.split(","))
    cfg = McConfig(spec, sizes, args.reps, SearchConfig("quadrant", ColumnSpec.parse(args.cols)), args.workers)
    summary = run_table(cfg)
    out = {"result": summary.to_dict(), "mc_config": cfg.to_dict()}
    if len(sizes) >= 3:
        out["rate"] = rate_diagnostic(summary).to_dict()
    table = summary.format_table()
    if args.table:
        Path(args.table).write_text(table + "\n", encoding="utf-8")
    else:
        print(table, file=sys.stderr)
    return out


COMMANDS = {
    "simulate": cmd_simulate,
    "fit-propensity": cmd_fit_propensity,
    "learn": cmd_learn,
    "evaluate": cmd_evaluate,
    "montecarlo": cmd_montecarlo,
}


def resolved_config(args) -> dict:
    return {k: v for k, v in vars(args).items()}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        payload = COMMANDS[args.command](args)
        report = {"schema": SCHEMA, "version": __version__, "command": args.command,
                  "seed": args.seed, "config": resolved_config(args)}
        report.update(payload)
        text = json.dumps(report, indent=2)
        targets = [args.report]
        if args.command != "simulate":
            targets.append(args.out)
        for target in filter(None, targets):
            Path(target).write_text(text + "\n", encoding="utf-8")
        print(text)
        return 0
    except TewmError as exc:
        print(json.dumps({"error": exc.code, "detail": str(exc)}), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(json.dumps({"error": "IOError", "detail": str(exc)}), file=sys.stderr)
        return 1


def main():
    sys.exit(run())
