"""Command-line entry point ``dmnls``.

Global flags (``--config``, ``--output``, ``--seed``, ``--threads``,
``--preset``, ``--set key=value``) may come before or after the subcommand.
Exit status: 0 for completed runs (recorded non-convergence included),
2 for invalid configuration, 1 for runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments
from .config import ConfigError, RunConfig, apply_overrides, load_config, preset

SUBCOMMANDS = {
    "simulate": "evolve the averaged or original equation and store snapshots",
    "scatter": "scattering profile, residual table and amplitude sweep",
    "average-check": "original vs averaged equation along an eps ladder",
    "bilinear-scan": "bilinear ratio scan over dyadic separations",
    "strichartz-scan": "Strichartz ratio scan over dyadic blocks",
    "picard": "Picard iteration of the Duhamel map over an amplitude ladder",
    "vpnorm": "p-variation norms of stored snapshots",
}


def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="flat key = value config file")
    parser.add_argument("--preset", default=d(None), help="start from a named desk preset")
    parser.add_argument("--output", default=d(None), help="run directory")
    parser.add_argument("--seed", type=int, default=d(None), help="base seed (u64)")
    parser.add_argument("--threads", type=int, default=d(None), help="worker threads")
    parser.add_argument("--set", action="append", default=d([]), metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser():
    parser = argparse.ArgumentParser(prog="dmnls", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    for name, help_text in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_text, parents=[common])
        if name == "vpnorm":
            p.add_argument("path", help="run directory, snapshots directory or .dmnls file")
            p.add_argument("-p", type=float, default=None, help="variation exponent (>= 1)")
            p.add_argument("--d-av", type=float, default=None, help="average dispersion")
    return parser


def build_config(args):
    cfg = preset(args.preset) if args.preset else RunConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    cfg = apply_overrides(cfg, args.set)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.threads is not None:
        cfg = cfg.replace(threads=args.threads)
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        out = args.output or experiments.default_outdir(args.command)
        if args.command == "vpnorm":
            c = cfg.validate("vpnorm")
            p = c.vp_p if args.p is None else args.p
            d_av = c.d_av if args.d_av is None else args.d_av
            if p < 1:
                raise ConfigError("p", f"p must be >= 1, got {p}")
            summary = experiments.run_vpnorm(args.path, p, d_av, args.output, c)
        else:
            runner = {
                "simulate": experiments.run_simulate,
                "scatter": experiments.run_scatter,
                "average-check": experiments.run_average_check,
                "bilinear-scan": experiments.run_bilinear_scan,
                "strichartz-scan": experiments.run_strichartz_scan,
                "picard": experiments.run_picard,
            }[args.command]
            summary = runner(cfg, out)
            if isinstance(summary, tuple):
                summary = summary[0]
    except (ConfigError, FileNotFoundError) as exc:
        print(f"dmnls: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"dmnls: invalid input: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2, sort_keys=True, default=experiments._json_default))
    if not summary.ok:
        print(f"dmnls: run failed: {summary.get('error')}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
