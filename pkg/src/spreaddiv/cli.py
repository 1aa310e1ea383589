"""Command line entry point: ``spreaddiv <subcommand> [flags]``.

Every subcommand takes the parameters of its config section as flags
(underscores become dashes), plus ``--seed`` and ``--out``.  Without
``--out`` nothing is written to disk: ``check-kernel``, ``divergence``
and ``toy2d`` print their key=value report, the others print the results
CSV.  With ``--out``, ``results.csv``, ``meta.txt`` and any extra tables
(fitted matrices, parameters) land in that directory.  ``experiment``
runs a canned experiment by name, or any spec given with ``--config``.
"""

import argparse
import sys

from . import __version__
from .errors import SpreadDivError
from .harness import (REPORT_SUBCOMMANDS, SCHEMAS, SEED_ENV, ExperimentSpec, csv_text,
                      default_seed, execute, parse_config, write_result)

SUBCOMMAND_HELP = {
    "check-kernel": "tabulate a stationary kernel's Fourier transform and validity",
    "divergence": "discrete divergence before and after uniform spread noise",
    "subspace-noise": "learn the noise direction for two shifted subspaces",
    "ica": "spread EM versus standard EM for deterministic ICA",
    "pca": "spread maximum likelihood PCA versus classical PCA",
    "dvae": "train a delta-VAE on a small dataset",
    "toy2d": "2-D toy with a degenerate axis",
    "experiment": "run a canned experiment or a config file",
}


def _flag(name):
    return "--" + name.replace("_", "-")


def _arg_type(param):
    def convert(text):
        try:
            return param.parse(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"{text!r}: {exc}") from None
    convert.__name__ = param.kind
    return convert


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spreaddiv",
        description=f"Spread divergence experiments. The default seed is read from ${SEED_ENV}.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True, metavar="subcommand")
    for name, params in SCHEMAS.items():
        sp = subs.add_parser(name, help=SUBCOMMAND_HELP[name], description=SUBCOMMAND_HELP[name])
        if name == "experiment":
            sp.add_argument("which", nargs="?", choices=params[0].choices,
                            help="canned experiment name")
            sp.add_argument("--config", help="run the spec in this config file")
            params = params[1:]
        for p in params:
            default = ",".join(map(str, p.default)) if isinstance(p.default, tuple) else p.default
            extra = dict(nargs="?", const=True) if p.kind == "bool" else {}
            sp.add_argument(_flag(p.name), *p.aliases, dest=p.name, type=_arg_type(p), default=None,
                            choices=p.choices, metavar=None if p.choices else p.kind.upper(),
                            help=f"{p.help} (default: {default})", **extra)
        sp.add_argument("--seed", type=int, default=None, help=f"random seed (default: ${SEED_ENV} or 0)")
        sp.add_argument("--out", default=None, help="output directory for results.csv and meta.txt")
        sp.add_argument("--name", default="", help="experiment name recorded in meta.txt")
    return parser


def spec_from_args(args):
    if args.subcommand == "experiment" and args.config:
        with open(args.config) as fh:
            spec = parse_config(fh.read())
        if args.seed is not None:
            spec.seed = args.seed
        if args.out:
            spec.output = args.out
        return spec
    params = {p.name: getattr(args, p.name) for p in SCHEMAS[args.subcommand]
              if getattr(args, p.name, None) is not None}
    seed = default_seed() if args.seed is None else args.seed
    return ExperimentSpec(args.subcommand, params, seed, args.name, args.out or "")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "experiment" and not args.config and not args.which:
        parser.error("experiment needs a canned experiment name or --config")
    try:
        spec = spec_from_args(args)
        result = execute(spec)
        if args.out or (args.subcommand == "experiment" and args.config):
            out = write_result(spec, result)
            print(f"wrote {out / 'results.csv'}")
            for line in result.summary:
                print(line)
        elif spec.subcommand in REPORT_SUBCOMMANDS:
            for line in result.summary:
                print(line)
        else:
            sys.stdout.write(csv_text(result.header, result.rows))
            for line in result.summary:
                print(line, file=sys.stderr)
    except OSError as exc:
        print(f"spreaddiv: error: {exc}", file=sys.stderr)
        return 1
    except SpreadDivError as exc:
        print(f"spreaddiv: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
