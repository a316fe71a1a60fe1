"""Command-line entry point.

Six subcommands: simulate, calibrate, table, monitor, rho, approx.  Every
subcommand accepts --config FILE (flat key = value lines whose keys match
the flag names; command-line flags override the file) and writes
machine-readable output to --out while printing a human summary.  Exit
status: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import math
import sys

from . import approx
from .charts import CHART_IDS, ChartConfig
from .families import MODELS, get_model
from .mcsim import (
    Scenario,
    calibrate_threshold,
    reproduce_table,
    run_scenario,
    TABLE_IDS,
)
from .pipeline import SeriesSpec, ingest, monitor, sample_acf

__all__ = ["main", "serialize_config"]

_FORMULAS = {
    "fdp_ma": approx.fdp_ma,
    "fdp_gma": approx.fdp_gma,
    "fdp_rstar": approx.fdp_rstar,
    "fdp_cusum": approx.fdp_cusum,
    "fdp_sr": approx.fdp_sr,
    "fdp_scale_multiparam": approx.fdp_scale_multiparam,
    "fdp_bartlett": approx.fdp_bartlett,
    "pod_ma": approx.pod_ma,
    "pod_rstar": approx.pod_rstar,
}


class UsageError(Exception):
    """Bad flag combination or config content; exits with status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _fmt(value, precise=False):
    if precise:
        return repr(float(value))
    return f"{float(value):.6g}"


def _add_common(sp):
    sp.add_argument("--config", help="flat key=value file; flags override it")
    sp.add_argument("--out", help="write machine-readable output here")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--precise", action="store_true",
                    help="print full-precision values instead of 6 significant digits")


def _require(args, *dests):
    """Post-parse required-flag check, so a config file can supply them."""
    for dest in dests:
        if getattr(args, dest, None) is None:
            raise UsageError(f"missing --{dest.replace('_', '-')}")


def _add_chart_flags(sp, with_threshold=True):
    sp.add_argument("--model", choices=sorted(MODELS), default="normal_mean")
    sp.add_argument("--chart", choices=CHART_IDS)
    sp.add_argument("--w", type=int)
    if with_threshold:
        sp.add_argument("--b", type=float, help="alarm threshold on the chart's own scale")
    sp.add_argument("--delta", type=float, help="reference signal for CUSUM/S-R/profile-mean")
    sp.add_argument("--w0", type=int, help="smallest grouped-MA window")
    sp.add_argument("--w1", type=int, help="largest grouped-MA window")
    sp.add_argument("--kind", choices=("variance", "mean"), help="profile chart kind")
    sp.add_argument("--sigma1-sq", type=float, help="reference variance for profile charts")
    sp.add_argument("--per-suffix", action="store_true")
    sp.add_argument("--two-sided", action="store_true")


def _build_parser():
    parser = _Parser(prog="transig", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="cmd", required=True)
    by_name = {}

    sp = subs.add_parser("simulate", parents=[], help="estimate one alarm probability")
    _add_chart_flags(sp)
    sp.add_argument("--L", type=int)
    sp.add_argument("--reps", type=int, default=100_000)
    sp.add_argument("--signal", type=float, help="changed canonical parameter (one-parameter models)")
    sp.add_argument("--mu", type=float, help="changed mean (two-parameter normal)")
    sp.add_argument("--sigma2", type=float, help="changed variance (two-parameter normal)")
    sp.add_argument("--burn-in", type=int, default=None)
    _add_common(sp)
    by_name["simulate"] = sp

    sp = subs.add_parser("calibrate", help="find the threshold for a target FDP")
    _add_chart_flags(sp, with_threshold=False)
    sp.add_argument("--L", type=int)
    sp.add_argument("--target-fdp", type=float)
    sp.add_argument("--tol", type=float, default=0.001)
    sp.add_argument("--reps", type=int, default=100_000)
    _add_common(sp)
    by_name["calibrate"] = sp

    sp = subs.add_parser("table", help="reproduce a published comparison grid")
    sp.add_argument("--id", type=int, choices=TABLE_IDS)
    sp.add_argument("--reps", type=int, default=100_000)
    sp.add_argument("--no-plot", action="store_true", help="skip the figure next to --out")
    _add_common(sp)
    by_name["table"] = sp

    sp = subs.add_parser("monitor", help="preprocess a series file and run charts on it")
    sp.add_argument("--data", help="delimiter-separated input file")
    sp.add_argument("--column", default="0", help="value column index or header name")
    sp.add_argument("--transform", choices=("none", "log_return"), default="none")
    sp.add_argument("--trim-sigma", type=float, default=3.0)
    sp.add_argument("--no-trim", action="store_true")
    sp.add_argument("--standardize-first-n", type=int, default=None)
    sp.add_argument("--acf-lags", type=int, default=0,
                    help="also print this many sample autocorrelations")
    sp.add_argument("--no-plot", action="store_true")
    _add_chart_flags(sp)
    _add_common(sp)
    by_name["monitor"] = sp

    sp = subs.add_parser("rho", help="estimate a ladder-overshoot constant")
    sp.add_argument("--model", choices=sorted(MODELS))
    sp.add_argument("--reps", type=int, default=1_000_000)
    _add_common(sp)
    by_name["rho"] = sp

    sp = subs.add_parser("approx", help="evaluate an analytic FDP/POD formula")
    sp.add_argument("--formula", choices=sorted(_FORMULAS))
    sp.add_argument("--model", choices=sorted(MODELS), default="normal_mean")
    sp.add_argument("--w", type=int, default=20)
    sp.add_argument("--L", type=int, default=20)
    sp.add_argument("--b", type=float,
                    help="threshold on the formula's own scale (b, d, c, or b^2)")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--w0", type=int)
    sp.add_argument("--w1", type=int)
    sp.add_argument("--rho-plus", type=float)
    sp.add_argument("--attenuation", choices=("exp_rho", "none"), default="exp_rho")
    sp.add_argument("--kappa", type=float, help="grouped-MA attenuation scale override")
    _add_common(sp)
    by_name["approx"] = sp

    return parser, by_name


def _load_config(path):
    opts = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key = value")
                k, v = line.split("=", 1)
                opts[k.strip()] = v.strip()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}") from e
    return opts


_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


def _apply_config(parser, sub, argv, args):
    conf = _load_config(args.config)
    defaults = {}
    for key, text in conf.items():
        dest = key.replace("-", "_")
        action = next((a for a in sub._actions if a.dest == dest), None)
        if action is None or dest in ("config", "help"):
            raise UsageError(f"config key {key!r} does not match any flag")
        if isinstance(action, argparse._StoreTrueAction):
            low = text.lower()
            if low not in _TRUE + _FALSE:
                raise UsageError(f"config key {key!r} must be a boolean, got {text!r}")
            defaults[dest] = low in _TRUE
        elif action.type is not None:
            try:
                defaults[dest] = action.type(text)
            except ValueError:
                raise UsageError(f"config key {key!r}: bad value {text!r}") from None
        else:
            defaults[dest] = text
        if action.choices and defaults[dest] not in action.choices:
            raise UsageError(
                f"config key {key!r}: {text!r} not in {sorted(action.choices)}"
            )
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def serialize_config(args, sub):
    """Write a namespace back to config-file text (round-trips flags)."""
    skip = {"cmd", "config", "help"}
    lines = []
    for action in sub._actions:
        dest = action.dest
        if dest in skip:
            continue
        value = getattr(args, dest, None)
        if value is None:
            continue
        key = dest.replace("_", "-")
        if isinstance(value, bool):
            lines.append(f"{key} = {'true' if value else 'false'}")
        else:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _chart_config(args):
    kwargs = dict(
        chart_id=args.chart,
        w=args.w,
        model_id=args.model,
        delta=args.delta,
        w0=args.w0,
        w1=args.w1,
        kind=args.kind,
        sigma1_sq=args.sigma1_sq,
        per_suffix=args.per_suffix,
        two_sided=args.two_sided,
    )
    b = getattr(args, "b", None)
    if b is not None:
        kwargs["threshold"] = b
    if args.chart not in ("rstar_1p", "r_1p", "cusum_w", "sr_w"):
        kwargs["model_id"] = None
    try:
        return ChartConfig(**kwargs)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _signal_from(args):
    two_param = args.mu is not None or args.sigma2 is not None
    if args.signal is not None and two_param:
        raise UsageError("give either --signal or --mu/--sigma2, not both")
    if two_param:
        return (args.mu or 0.0, 1.0 if args.sigma2 is None else args.sigma2)
    return args.signal


def _write_rows(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")


def _png_path(out):
    stem = out.rsplit(".", 1)[0] if "." in out.rsplit("/", 1)[-1] else out
    return stem + ".png"


def _cmd_simulate(args):
    _require(args, "chart", "w", "L")
    cfg = _chart_config(args)
    if not math.isfinite(cfg.threshold):
        raise UsageError("simulate requires --b")
    model = args.model
    signal = _signal_from(args)
    dim = get_model(model).dim
    if signal is not None and isinstance(signal, tuple) and dim == 1:
        raise UsageError("--mu/--sigma2 need --model normal_two_param")
    if signal is not None and not isinstance(signal, tuple) and dim == 2:
        raise UsageError("normal_two_param takes --mu/--sigma2, not --signal")
    s = Scenario(
        model_id=model,
        chart=cfg,
        L=args.L,
        replications=args.reps,
        seed=args.seed,
        signal=signal,
        burn_in=args.burn_in,
    )
    est = run_scenario(s, workers=args.workers)
    kind = "FDP" if signal is None else "POD"
    print(
        f"{kind} = {_fmt(est.p_hat, args.precise)} "
        f"(se {_fmt(est.std_error, args.precise)}, {est.replications} replications)"
    )
    if signal is None:
        sig_text = ""
    elif isinstance(signal, tuple):
        sig_text = f"{signal[0]:g};{signal[1]:g}"
    else:
        sig_text = f"{signal:g}"
    if args.out:
        _write_rows(
            args.out,
            ["model", "chart", "w", "L", "threshold", "signal", "p_hat", "std_error", "replications"],
            [[model, args.chart, args.w, args.L, _fmt(cfg.threshold, args.precise),
              sig_text, _fmt(est.p_hat, args.precise),
              _fmt(est.std_error, args.precise), est.replications]],
        )
    return 0


def _cmd_calibrate(args):
    _require(args, "chart", "w", "L", "target_fdp")
    cfg = _chart_config(args)
    s = Scenario(
        model_id=args.model, chart=cfg, L=args.L, replications=args.reps, seed=args.seed
    )
    res = calibrate_threshold(s, args.target_fdp, tol=args.tol, workers=args.workers)
    print(
        f"threshold b = {_fmt(res.threshold, args.precise)} "
        f"(achieved FDP {_fmt(res.achieved_fdp.p_hat, args.precise)}, "
        f"{res.iterations} iterations)"
    )
    if args.out:
        _write_rows(
            args.out,
            ["model", "chart", "w", "L", "target_fdp", "threshold", "achieved_fdp", "iterations"],
            [[args.model, args.chart, args.w, args.L, args.target_fdp,
              _fmt(res.threshold, args.precise),
              _fmt(res.achieved_fdp.p_hat, args.precise), res.iterations]],
        )
    return 0


def _cmd_table(args):
    _require(args, "id")
    art = reproduce_table(args.id, replications=args.reps, seed=args.seed, workers=args.workers)
    print(f"table {args.id}: {len(art.rows)} rows, "
          f"max |estimate - published| = {_fmt(art.max_abs_deviation(), args.precise)}")
    if args.out:
        art.to_csv(args.out)
        print(f"wrote {args.out}")
        if not args.no_plot:
            from .plotting import save_table_figure

            png = save_table_figure(_png_path(args.out), art)
            print(f"wrote {png}")
    else:
        print(art.to_text())
    return 0


def _cmd_monitor(args):
    _require(args, "data", "chart", "w")
    column = int(args.column) if str(args.column).lstrip("-").isdigit() else args.column
    spec = SeriesSpec(
        path=args.data,
        column=column,
        transform=args.transform,
        trim_sigma=None if args.no_trim else args.trim_sigma,
        first_n=args.standardize_first_n,
    )
    processed = ingest(spec)
    cfg = _chart_config(args)
    if not math.isfinite(cfg.threshold):
        raise UsageError("monitor requires --b")
    report = monitor(processed.values, [cfg], two_sided=args.two_sided)
    prov = processed.provenance
    print(
        f"{prov.n_raw} raw values -> {processed.values.size} monitored "
        f"({len(prov.dropped_indices)} trimmed"
        + (f", scale sd {_fmt(prov.scale_sd, args.precise)}" if prov.first_n else "")
        + ")"
    )
    if prov.dropped_indices:
        print("dropped indices: " + ", ".join(str(i) for i in prov.dropped_indices))
    if args.acf_lags > 0:
        acf = sample_acf(processed.values, args.acf_lags)
        print("sample acf: " + " ".join(_fmt(v, args.precise) for v in acf))
    if report.episodes:
        for ep in report.episodes:
            print(
                f"alarm episode [{ep.start}, {ep.end}] on {ep.chart}: "
                f"extremal statistic {_fmt(ep.extremal, args.precise)}"
            )
    else:
        print("no alarm episodes")
    if args.out:
        _write_rows(
            args.out,
            ["t", "chart", "statistic", "alarm"],
            [
                (t, chart, _fmt(stat, args.precise), alarm)
                for t, chart, stat, alarm in report.long_rows()
            ],
        )
        print(f"wrote {args.out}")
        if not args.no_plot:
            from .plotting import save_monitor_figure

            png = save_monitor_figure(
                _png_path(args.out),
                processed.values,
                report,
                thresholds={cfg.chart_id: cfg.threshold},
            )
            print(f"wrote {png}")
    return 0


def _cmd_rho(args):
    _require(args, "model")
    est = approx.estimate_rho_plus(args.model, replications=args.reps, seed=args.seed)
    print(
        f"rho_plus({args.model}) = {_fmt(est.rho_plus, args.precise)} "
        f"(se {_fmt(est.std_error, args.precise)}, {est.replications} ladder walks)"
    )
    if args.out:
        _write_rows(
            args.out,
            ["model", "rho_plus", "std_error", "replications", "capped"],
            [[args.model, _fmt(est.rho_plus, args.precise),
              _fmt(est.std_error, args.precise), est.replications, est.capped]],
        )
    return 0


def _cmd_approx(args):
    _require(args, "formula", "b")
    inputs = approx.ApproxInputs(
        model_id=args.model,
        w=args.w,
        L=args.L,
        threshold=args.b,
        delta=args.delta,
        w0=args.w0,
        w1=args.w1,
        rho_plus=args.rho_plus,
    )
    fn = _FORMULAS[args.formula]
    kwargs = {}
    if args.formula in ("fdp_ma", "fdp_rstar", "fdp_scale_multiparam", "fdp_bartlett", "pod_ma"):
        kwargs["attenuation"] = args.attenuation
    if args.formula == "fdp_gma":
        kwargs["attenuation"] = args.attenuation
        if args.kappa is not None:
            kwargs["kappa"] = args.kappa
    try:
        value = fn(inputs, **kwargs)
    except (ValueError, approx.WeakSignalError) as e:
        raise UsageError(str(e)) from e
    if isinstance(value, approx.ApproxValue):
        print(
            f"{args.formula}: full = {_fmt(value.full, args.precise)}, "
            f"simplified = {_fmt(value.simplified, args.precise)}"
        )
        full, simplified = value.full, value.simplified
    else:
        print(f"{args.formula} = {_fmt(value, args.precise)}")
        full = simplified = value
    if args.out:
        _write_rows(
            args.out,
            ["formula", "model", "w", "L", "threshold", "full", "simplified"],
            [[args.formula, args.model, args.w, args.L, args.b,
              _fmt(full, args.precise), _fmt(simplified, args.precise)]],
        )
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "calibrate": _cmd_calibrate,
    "table": _cmd_table,
    "monitor": _cmd_monitor,
    "rho": _cmd_rho,
    "approx": _cmd_approx,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, by_name = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            args = _apply_config(parser, by_name[args.cmd], argv, args)
    except UsageError as e:
        print(f"transig: error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _HANDLERS[args.cmd](args)
    except UsageError as e:
        print(f"transig: error: {e}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, RuntimeError, OSError) as e:
        print(f"transig: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
