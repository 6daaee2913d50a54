"""Command-line front end: ``asep-lab <subcommand> [flags]``.

Settings may also come from an INI file (``--config``) whose ``[common]``
section and per-subcommand sections (``[simulate]``, ``[cdf]`` ...) hold
``flag = value`` pairs using the long flag names with dashes or
underscores.  Flags given on the command line win.

Exit codes: 0 success, 1 precondition violation, 2 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import bethe, fredholm, harness, identities, painleve, simulation
from .errors import ConvergenceError, PreconditionError
from .rates import Finite, HoppingRates, Step, StepBernoulli

SCHEMA_LINE = "# schema-version: 1"
EXIT_OK, EXIT_PRECONDITION, EXIT_CONVERGENCE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # bad flags are caller misuse, not non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        raise PreconditionError(message)


def _int_list(text: str) -> List[int]:
    return [int(v) for v in str(text).replace(";", ",").replace(" ", ",").split(",") if v != ""]


def _float_list(text: str) -> List[float]:
    return [float(v) for v in str(text).split(",") if v.strip() != ""]


def _common() -> argparse.ArgumentParser:
    c = _Parser(add_help=False)
    c.add_argument("--config", help="INI file with [common] and per-command sections")
    c.add_argument("--p", type=float, default=0.3, help="right-jump rate (q = 1 - p)")
    c.add_argument("--rho", type=float, default=1.0, help="step-Bernoulli density")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--trials", type=int, default=1000)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--out", help="output path (default: stdout)")
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = _Parser(prog="asep-lab", description="ASEP exact formulas, Tracy-Widom laws and Monte Carlo")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="sample x_m(t) by Monte Carlo")
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--init", choices=("auto", "step", "bernoulli", "finite"), default="auto")
    s.add_argument("--positions", type=_int_list, help="Y for --init finite, e.g. 0,2,5")
    s.add_argument("--safety", type=float, default=3.0)

    e = sub.add_parser("exact", parents=[common], help="Bethe-ansatz transition probability")
    e.add_argument("--y", type=_int_list, required=True)
    e.add_argument("--x", type=_int_list)
    e.add_argument("--batch", help="CSV file with one X per row")
    e.add_argument("--t", type=float, required=True)
    e.add_argument("--nodes", type=int, help="fixed node count (default: adaptive)")

    i = sub.add_parser("identities", parents=[common], help="residuals of the algebraic identities")
    i.add_argument("--n-min", type=int, default=1)
    i.add_argument("--n-max", type=int, default=6)
    i.add_argument("--k-max", type=int, default=8, help="largest size for the determinant identity")
    i.add_argument("--points", type=int, default=100)

    w = sub.add_parser("tw", parents=[common], help="Tracy-Widom F1, F2 table")
    w.add_argument("--s-min", type=float, default=-8.0)
    w.add_argument("--s-max", type=float, default=4.0)
    w.add_argument("--step", type=float, default=0.1)
    w.add_argument("--moments", action="store_true", help="print mean/variance/skewness/excess kurtosis")

    c = sub.add_parser("cdf", parents=[common], help="finite-time P(x_m(t) <= x)")
    c.add_argument("--m", type=int, default=1)
    c.add_argument("--t", type=float, required=True)
    c.add_argument("--x-min", type=int, default=-5)
    c.add_argument("--x-max", type=int, default=5)

    for name, flag, helptext in (
        ("converge-particle", "--sigma", "sigma = m / t"),
        ("converge-current", "--v", "v = x / t"),
    ):
        g = sub.add_parser(name, parents=[common], help=f"KS ladder against the limit law ({helptext})")
        g.add_argument(flag, type=float, required=True, help=helptext)
        g.add_argument("--ladder", type=_float_list, default=[50.0, 100.0, 200.0])
        g.add_argument("--safety", type=float, default=3.0)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    """Install INI values as defaults on the chosen subparser."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = configparser.ConfigParser()
    if not cfg.read(known.config):
        raise PreconditionError(f"cannot read config file {known.config}")
    command = next((a for a in rest if not a.startswith("-")), None)
    subparsers = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction))
    target = subparsers.choices.get(command)
    if target is None:
        return
    values: Dict[str, str] = {}
    for section in ("common", command):
        if cfg.has_section(section):
            values.update({k.replace("-", "_"): v for k, v in cfg.items(section)})
    actions = {a.dest: a for a in target._actions}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None:
            raise PreconditionError(f"unknown config key '{key}' for {command}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = cfg.BOOLEAN_STATES.get(raw.lower(), False)
        else:
            # string defaults pass through the action's type on parse
            defaults[key] = raw
            action.required = False
    target.set_defaults(**defaults)


# --------------------------------------------------------------------------
# output


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _emit(args, header, rows, meta: Optional[dict] = None) -> None:
    rows = [[_fmt(v) for v in r] for r in rows]
    if args.format == "json":
        text = json.dumps({"schema_version": 1, "meta": meta or {}, "rows": [dict(zip(header, r)) for r in rows]}, indent=1) + "\n"
    else:
        text = _csv_text(header, rows)
    _write(args.out, text)


def _write(path: Optional[str], text: str) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# commands


def _initial(args):
    kind = args.init
    if kind == "auto":
        kind = "step" if args.rho == 1.0 else "bernoulli"
    if kind == "step":
        return Step()
    if kind == "bernoulli":
        return StepBernoulli(args.rho)
    if not args.positions:
        raise PreconditionError("--init finite needs --positions")
    return Finite(tuple(args.positions))


def cmd_simulate(args) -> None:
    rates = HoppingRates(args.p)
    init = _initial(args)
    obs = simulation.sample_observables(
        init, rates, args.t, args.trials, args.seed, (args.m,), (), args.safety, args.workers
    )
    meta = dict(
        obs.meta, seed=args.seed, trials=args.trials, m=args.m, q=rates.q,
        init=type(init).__name__, rho=args.rho, safety=args.safety,
    )
    rows = [(k, int(v)) for k, v in enumerate(obs.positions[:, 0])]
    _emit(args, ("trial", "x_m"), rows, meta)
    sidecar = json.dumps(meta, indent=1) + "\n"
    if args.out:
        with open(args.out + ".meta.json", "w") as fh:
            fh.write(sidecar)
    elif args.format == "csv":
        sys.stderr.write(sidecar)


def _read_batch(path: str) -> List[List[int]]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            cells = [c.strip() for c in row if c.strip() != ""]
            if not cells or cells[0].startswith("#"):
                continue
            try:
                out.append([int(c) for c in cells])
            except ValueError:
                continue  # header
    return out


def cmd_exact(args) -> None:
    rates = HoppingRates(args.p)
    quad = None
    if args.nodes:
        quad = bethe.ContourQuadrature(bethe.default_radius(rates), args.nodes)
    if args.batch:
        rows = []
        for X in _read_batch(args.batch):
            prob = bethe.transition_probability(args.y, X, args.t, rates, quad)
            rows.append((" ".join(str(v) for v in X), prob))
        _emit(args, ("X", "probability"), rows, dict(Y=args.y, t=args.t, p=args.p))
        return
    if not args.x:
        raise PreconditionError("exact needs --x or --batch")
    res = bethe.transition_probability(args.y, args.x, args.t, rates, quad, full_output=True)
    info = dict(
        Y=args.y, X=args.x, t=args.t, p=rates.p, q=rates.q,
        probability=res.probability, imag_residue=abs(res.imag), nodes=res.nodes,
        radius=res.radius, last_change=res.change,
    )
    if args.format == "json":
        _write(args.out, json.dumps(info, indent=1) + "\n")
    else:
        _write(args.out, "".join(f"{k} = {_fmt(v)}\n" for k, v in info.items()))


def cmd_identities(args) -> None:
    rates = HoppingRates(args.p)
    rows = identities.run_suite(
        rates, range(args.n_min, args.n_max + 1), range(1, args.k_max + 1), args.points, args.seed
    )
    out = [(r.identity, r.n, "" if r.m < 0 else r.m, r.max_residual, r.points) for r in rows]
    _emit(args, ("identity", "N", "m", "max_residual", "points"), out, dict(p=args.p, seed=args.seed))


def cmd_tw(args) -> None:
    if args.moments:
        rows = []
        for beta in (1, 2):
            rows.append((beta, *painleve.moments(painleve.tw_distribution(beta))))
        _emit(args, ("beta", "mean", "variance", "skewness", "excess_kurtosis"), rows)
        return
    if args.step <= 0 or args.s_max < args.s_min:
        raise PreconditionError("need s_min <= s_max and step > 0")
    n = int(round((args.s_max - args.s_min) / args.step)) + 1
    s = np.linspace(args.s_min, args.s_min + (n - 1) * args.step, n)
    rows = zip(s, painleve.f1_cdf(s), painleve.f2_cdf(s), painleve.f1_density(s), painleve.f2_density(s))
    _emit(args, ("s", "F1", "F2", "f1_density", "f2_density"), list(rows))


def cmd_cdf(args) -> None:
    rates = HoppingRates(args.p)
    rows = []
    for x in range(args.x_min, args.x_max + 1):
        r = fredholm.marginal_cdf(args.m, x, args.t, rates, args.rho, full_output=True)
        rows.append((x, r.value, r.raw, r.imag_residue, r.n_xi, r.n_lambda))
    _emit(args, ("x", "cdf", "raw", "imag_residue", "n_xi", "n_lambda"), rows,
          dict(m=args.m, t=args.t, p=args.p, rho=args.rho))


def _report_rows(rep: harness.ConvergenceReport):
    return [
        (rep.regime, t, ks, lks, rung["mean"], rung["process_time"], rep.trials, rep.seed)
        for t, ks, lks, rung in zip(rep.t_ladder, rep.ks, rep.lattice_ks, rep.rungs)
    ]


_REPORT_HEADER = ("regime", "t", "ks", "lattice_ks", "mean_scaled", "process_time", "trials", "seed")


def cmd_converge_particle(args) -> None:
    rep = harness.particle_limit_study(
        HoppingRates(args.p), args.rho, args.sigma, args.ladder, args.trials, args.seed,
        args.safety, args.workers,
    )
    _emit(args, _REPORT_HEADER, _report_rows(rep), dict(rep.params, rungs=rep.rungs))


def cmd_converge_current(args) -> None:
    rep = harness.current_limit_study(
        HoppingRates(args.p), args.rho, args.v, args.ladder, args.trials, args.seed,
        args.safety, args.workers,
    )
    _emit(args, _REPORT_HEADER, _report_rows(rep), dict(rep.params, rungs=rep.rungs))


COMMANDS = {
    "simulate": cmd_simulate,
    "exact": cmd_exact,
    "identities": cmd_identities,
    "tw": cmd_tw,
    "cdf": cmd_cdf,
    "converge-particle": cmd_converge_particle,
    "converge-current": cmd_converge_current,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ap = build_parser()
        _apply_config(ap, argv)
        args = ap.parse_args(argv)
        if args.trials < 1 or args.workers < 1:
            raise PreconditionError("--trials and --workers must be >= 1")
        COMMANDS[args.command](args)
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
