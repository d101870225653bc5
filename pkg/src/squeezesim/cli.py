"""Command-line interface.

    squeezesim <subcommand> --config <file> [--out <file>]
               [--seed N] [--seeds K] [--grid xmin:xmax:n[,log]]

Subcommands: predict, sweep, simulate, fit, map, allan.  Exit codes:
0 success, 2 configuration/validation error, 3 numerical failure.
Outputs go to --out when given, stdout otherwise; a .npz extension on
--out selects binary trace export for `simulate`.
"""

from __future__ import annotations

import argparse
import copy
import sys

from .config import ExperimentConfig, config_from_dict, load_config, parse_grid
from .errors import ConfigError, SqueezesimError
from .pipelines import (
    format_fit_report,
    format_report,
    predict_report,
    run_allan,
    run_fit,
    run_map,
    run_simulation,
    run_sweep,
    save_trace_npz,
    sweep_rows,
    trace_rows,
    write_rows,
)
from .version import VERSION

COMMANDS = ("predict", "sweep", "simulate", "fit", "map", "allan")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="squeezesim",
        description="Parametric-squeezing experiment toolkit: closed-form "
        "predictions, stochastic simulation, spectral estimation, and "
        "electrode design maps.",
    )
    parser.add_argument("--version", action="version",
                        version=f"squeezesim {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "predict": "closed-form variances, purity, SNR for one operating point",
        "sweep": "simulate/fit a pump sweep and extract the threshold",
        "simulate": "run one stochastic trace and export it",
        "fit": "Lorentzian-fit a stored spectrum CSV (JSON report)",
        "map": "purity / SNR / capacitive-squeezing maps over a grid",
        "allan": "Allan deviation of a stored frequency record",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", required=True, metavar="FILE",
                        help="TOML or JSON experiment config")
        sp.add_argument("--out", metavar="FILE",
                        help="output file (default stdout); .npz selects "
                        "binary trace export for `simulate`")
        sp.add_argument("--seed", type=int, metavar="N",
                        help="base RNG seed (overrides [run] seeds)")
        sp.add_argument("--seeds", type=int, metavar="K",
                        help="number of seeds N..N+K-1 (with --seed)")
        sp.add_argument("--grid", action="append", metavar="SPEC",
                        help="map axis as start:stop:n[,log]; give twice "
                        "for x then y")
    return parser


def apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    """Fold --seed/--seeds/--grid into the config and re-validate, so the
    recorded config hash covers what actually ran."""
    data = copy.deepcopy(config.data)
    changed = False
    if args.seed is not None or args.seeds is not None:
        if "run" not in data:
            raise ConfigError(
                "run", "--seed/--seeds override a [run] section, which is absent"
            )
        base = args.seed if args.seed is not None else 0
        count = args.seeds if args.seeds is not None else 1
        if count < 1:
            raise ConfigError("--seeds", f"must be >= 1, got {count}")
        if base < 0:
            raise ConfigError("--seed", f"must be >= 0, got {base}")
        data["run"]["seeds"] = list(range(base, base + count))
        changed = True
    if args.grid:
        if len(args.grid) > 2:
            raise ConfigError("--grid", "give at most two grids (x then y)")
        if "map" not in data:
            raise ConfigError(
                "map", "--grid overrides a [map] section, which is absent"
            )
        for text in args.grid:
            parse_grid(text, "--grid")  # validate before storing
        data["map"]["x"] = args.grid[0]
        if len(args.grid) == 2:
            data["map"]["y"] = args.grid[1]
        changed = True
    if not changed:
        return config
    return config_from_dict(data)


def _out_target(args):
    return args.out if args.out else sys.stdout


def _cmd_predict(config, args):
    report = predict_report(config)
    if args.out:
        rows = [(k, v) for k, v in report.items()]
        write_rows(args.out, ("key", "value"), rows,
                   meta=[("config_hash", config.config_hash)])
    else:
        sys.stdout.write(format_report(report))


def _cmd_sweep(config, args):
    result = run_sweep(config)
    cols, rows, footer = sweep_rows(result)
    meta = [
        ("config_hash", config.config_hash),
        ("seeds", ",".join(str(s) for s in result.seeds)),
        ("variable", result.variable),
        ("model", result.model),
        ("sigma0_sq_m2", result.sigma0_sq),
    ]
    write_rows(_out_target(args), cols, rows, meta=meta, footer=footer)


def _cmd_simulate(config, args):
    if config.run is None:
        raise ConfigError("run", "missing section")
    seed = config.run.seeds[0]
    trace = run_simulation(config, seed)
    if args.out and args.out.endswith(".npz"):
        save_trace_npz(trace, args.out)
        return
    cols, rows = trace_rows(trace)
    meta = [
        ("config_hash", config.config_hash),
        ("seed", seed),
        ("mode", config.run.mode),
        ("dt_s", trace.dt),
        ("divergent", trace.divergent),
    ]
    if getattr(trace, "lock_lost", False):
        meta.append(("lock_lost", True))
    write_rows(_out_target(args), cols, rows, meta=meta)


def _cmd_fit(config, args):
    report = run_fit(config)
    text = format_fit_report(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_map(config, args):
    result = run_map(config)
    meta = [("config_hash", config.config_hash)] + list(result.meta)
    write_rows(_out_target(args), result.columns, result.rows, meta=meta)


def _cmd_allan(config, args):
    cols, rows, meta_out = run_allan(config)
    meta = [("config_hash", config.config_hash)] + list(meta_out)
    write_rows(_out_target(args), cols, rows, meta=meta)


_DISPATCH = {
    "predict": _cmd_predict,
    "sweep": _cmd_sweep,
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "map": _cmd_map,
    "allan": _cmd_allan,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        config = apply_overrides(config, args)
        _DISPATCH[args.command](config, args)
    except ConfigError as exc:
        print(f"squeezesim: config error: {exc}", file=sys.stderr)
        return 2
    except SqueezesimError as exc:
        print(f"squeezesim: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
