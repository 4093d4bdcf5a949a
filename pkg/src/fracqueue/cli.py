"""Command-line entry point: ``fracqueue <subcommand> [options]``.

Every subcommand accepts ``--seed``, ``--out``, ``--format {csv,json}`` and
``--config FILE``. The config file is INI; keys in ``[fracqueue]`` apply to
all subcommands and keys in a section named after the subcommand override
them. Command-line flags override both.

Exit status is 0 on success, 1 on a computation or data error and 2 on a
usage error; errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import DataFormatError, FracQueueError
from .estimate import LINEAR, MM1, rate_fit_test
from .experiments import ExperimentConfig, fit, run_bias_cv_experiment, run_coverage_experiment
from .finance import ingest_series, series_to_sojourns
from .io import read_config, read_sojourns, render
from .rng import RngStream
from .sim import (PATH_COLUMNS, ModelParams, StopRule, extract_sojourns, path_from_csv,
                  simulate_linear_bd, simulate_mm1)
from .transient import TransientQuery, state_probability


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise DataFormatError(f"not a boolean: {text!r}")


def _common(p):
    p.add_argument("--seed", type=int, default=42, help="master seed (default 42)")
    p.add_argument("--out", default="-", help="output file, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--config", help="INI file with default option values")


def _model_args(p, default_init=0):
    p.add_argument("--alpha", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--init", type=int, default=default_init, help="initial state")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracqueue", description="Fractional queue and birth-death toolkit")
    parser.add_argument("--version", action="version", version=f"fracqueue {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate one path")
    _common(p)
    _model_args(p)
    p.add_argument("--model", choices=(LINEAR, MM1), default=MM1)
    p.add_argument("--n-events", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--stream", type=int, default=0, help="substream id")
    p.add_argument("--what", choices=("path", "sojourns"), default="path")

    p = sub.add_parser("transient", help="transient state probabilities of the queue")
    _common(p)
    _model_args(p)
    p.add_argument("--t", type=_floats, help="time or comma-separated times")
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("estimate", help="estimate parameters from a path or sojourn file")
    _common(p)
    p.add_argument("--input")
    p.add_argument("--model", choices=(LINEAR, MM1), default=MM1)
    p.add_argument("--init", type=int, default=0, help="initial state of a path file")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--include-zero-state", action="store_true")
    p.add_argument("--sigma-theta", choices=("effective", "regression"), default="effective")
    p.add_argument("--ratefit", type=int, default=0, help="KS rate-fit replicates (0 = skip)")

    for name, helptext in (("mc-bias", "bias and CV table"), ("mc-coverage", "interval coverage table")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--model", choices=(LINEAR, MM1), default=MM1)
        p.add_argument("--grid", action="append", type=_floats, help="'alpha,lambda,mu'; repeatable")
        p.add_argument("--n", type=_ints, default=[100, 1000, 10000], help="comma-separated sample sizes")
        p.add_argument("--reps", type=int, default=1000)
        p.add_argument("--level", type=float, default=0.95)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--init", type=int, default=None)
        p.add_argument("--include-zero-state", action="store_true")
        p.add_argument("--sigma-theta", choices=("effective", "regression"), default="effective")

    p = sub.add_parser("fit", help="fit a model to a date,value index series")
    _common(p)
    p.add_argument("--input")
    p.add_argument("--model", choices=(LINEAR, MM1), default=MM1)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--time-unit", default="1 period", help="label for one sampling interval")
    p.add_argument("--ratefit", type=int, default=0)
    return parser


def _apply_config(parser, sub_parser, command, argv):
    """Re-parse ``argv`` with defaults taken from the config file."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    values = read_config(args.config, command)
    actions = {a.dest: a for a in sub_parser._actions}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if key == "lambda":
            action = actions.get("lam")
        if action is None or key in ("config", "help"):
            raise DataFormatError(f"unknown config key {key!r} for {command}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = _bool(raw)
        elif isinstance(action, argparse._AppendAction):
            defaults[action.dest] = [action.type(v) for v in raw.split("|")]
        else:
            defaults[action.dest] = action.type(raw) if action.type else raw
    sub_parser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + ("lambda" if n == "lam" else n.replace("_", "-")) for n in missing)
        raise UsageError(f"missing required option(s): {flags}")


def _params(args):
    _need(args, "alpha", "lam", "mu")
    return ModelParams(args.alpha, args.lam, args.mu, args.init)


def _estimate_row(est, data):
    d = est.to_dict()
    row = {"model": d["model"], "n": d["n"], "n_births": d["n_births"], "n_deaths": d["n"] - d["n_births"]}
    for key in ("alpha", "theta", "lambda", "mu"):
        row[f"{key}_hat"] = d[f"{key}_hat"]
    row["p_hat"] = d["p_hat"]
    for key in ("alpha", "lambda", "mu"):
        row[f"se_{key}"] = d[f"se_{key}"]
        row[f"ci_{key}_low"], row[f"ci_{key}_high"] = d[f"ci_{key}"]
    row["level"] = d["level"]
    row["sigma2_theta"] = d["sigma2_theta"]
    row["exclude_zero_state"] = d["exclude_zero_state"]
    return row


def _cmd_simulate(args):
    params = _params(args)
    if args.n_events is None and args.horizon is None:
        raise UsageError("give --n-events and/or --horizon")
    stop = StopRule(max_events=args.n_events, time_horizon=args.horizon)
    stream = RngStream(args.seed, args.stream)
    sim = simulate_linear_bd if args.model == LINEAR else simulate_mm1
    path = sim(params, stream, stop)
    meta = {"model": args.model, "alpha": params.alpha, "lambda": params.lam, "mu": params.mu,
            "initial_state": params.initial_state, "seed": args.seed, "stream": args.stream,
            "terminal_reason": path.terminal_reason}
    if args.what == "sojourns":
        data = extract_sojourns(path)
        rows = [{"state_before": k, "duration": s, "event_type": t} for k, s, t in data.records]
        return render(rows, args.format, "sojourns", meta, ["state_before", "duration", "event_type"])
    rows = [{"event_index": j, "event_time": t, "event_type": typ, "state_after": s}
            for j, (t, typ, s) in enumerate(path.events)]
    return render(rows, args.format, "path", meta, list(PATH_COLUMNS))


def _cmd_transient(args):
    params = _params(args)
    _need(args, "t")
    rows = []
    for t in args.t:
        for k in range(args.kmax + 1):
            res = state_probability(TransientQuery(params, k, t, args.tol))
            rows.append({"k": k, "t": t, "probability": res.probability, "terms_used": res.terms_used})
    meta = {"alpha": params.alpha, "lambda": params.lam, "mu": params.mu,
            "initial_state": params.initial_state, "tol": args.tol,
            "unstable_regime": params.lam > params.mu}
    return render(rows, args.format, "transient", meta, ["k", "t", "probability", "terms_used"])


def _read_data(path, init):
    with open(path, newline="", encoding="utf-8") as fh:
        head = fh.readline().strip()
        fh.seek(0)
        if head.split(",") == list(PATH_COLUMNS):
            # params only carry the initial state here; rates are placeholders
            return extract_sojourns(path_from_csv(fh, ModelParams(1.0, 1.0, 2.0, init)))
        return read_sojourns(fh)


def _with_ratefit(row, data, est, args):
    if args.ratefit:
        row["ratefit_m"] = args.ratefit
        row["ratefit_acceptance"] = rate_fit_test(data, est, args.ratefit, 0.95, args.seed)
    return row


def _cmd_estimate(args):
    _need(args, "input")
    data = _read_data(args.input, args.init)
    est = fit(args.model, data, args.level, not args.include_zero_state, args.sigma_theta)
    row = _with_ratefit(_estimate_row(est, data), data, est, args)
    return render([row], args.format, "estimate", {"input": args.input})


def _experiment(args, kind):
    _need(args, "grid")
    cfg = ExperimentConfig(args.model, args.grid, args.n, args.reps, args.level, args.seed,
                           args.out if args.out != "-" else None, not args.include_zero_state,
                           args.init, args.sigma_theta, args.workers)
    rows = run_bias_cv_experiment(cfg) if kind == "bias" else run_coverage_experiment(cfg)
    return render(rows, args.format, f"mc-{kind}", cfg.meta())


def _cmd_fit(args):
    _need(args, "input")
    series = ingest_series(args.input, args.time_unit)
    data = series_to_sojourns(series)
    est = fit(args.model, data, args.level)
    n_pos, n_neg, n_zero = series.counts()
    row = {"observations": len(series), "positive_changes": n_pos, "negative_changes": n_neg,
           "zero_changes": n_zero}
    row.update(_estimate_row(est, data))
    row = _with_ratefit(row, data, est, args)
    meta = dict(data.meta)
    meta["input"] = args.input
    return render([row], args.format, "fit", meta)


_COMMANDS = {
    "simulate": _cmd_simulate,
    "transient": _cmd_transient,
    "estimate": _cmd_estimate,
    "mc-bias": lambda a: _experiment(a, "bias"),
    "mc-coverage": lambda a: _experiment(a, "coverage"),
    "fit": _cmd_fit,
}


def _fail(code, message, status):
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return status


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(_COMMANDS))
        sub_parser = parser._subparsers._group_actions[0].choices[args.command]
        args = _apply_config(parser, sub_parser, args.command, argv)
        text = _COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    except FracQueueError as exc:
        return _fail(exc.code, str(exc), 1)
    except OSError as exc:
        return _fail("io_error", str(exc), 1)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            return _fail("io_error", str(exc), 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
