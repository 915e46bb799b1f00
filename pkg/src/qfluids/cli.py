"""Command line front end: one subcommand per run kind.

Every subcommand takes the same four flags and nothing else; no
environment variables are consulted.  Exit status 0 means the run
completed and all artifacts are in place, 2 means the config was
rejected before any numerics ran, 3 means a numerical guard stopped a
run that had started (an ``error.json`` marks the aborted directory).
"""

from __future__ import annotations

import argparse
import sys

from . import experiments as ex
from . import grid as gr
from .errors import ConfigError, GuardError

_SUMMARY_LINE = {
    "hartree-run": lambda r: (f"hartree-run {r['run_id']}: sup_G "
                              f"{r['sup_G']:.6g}, margin "
                              f"{r['min_gronwall_margin']:.6g}, "
                              f"{r['rows']} rows"),
    "sweep": lambda r: (f"sweep {r['run_id']}: {r['points']} points, "
                        f"c_d {r['gronwall']['c_d']:.6g}"
                        + (", INCOMPLETE" if r["incomplete"] else "")),
    "bench": lambda r: (f"bench {r['run_id']}: {r['lines']} lines, "
                        f"spread {r['fitted_spread']:.4g}"),
    "euler-test": lambda r: (f"euler-test {r['run_id']}: stationarity "
                             f"{r['stationarity_drift']:.3e}"),
    "fn-mc": lambda r: (f"fn-mc {r['run_id']}: dev/se "
                        f"{r['dev_over_se']:.3f}"),
}


def _nonnegative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfluids",
        description="config-driven runs of the quantum-to-fluids laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in ex.KINDS:
        cmd = sub.add_parser(kind, help=f"run a config of kind {kind}")
        cmd.add_argument("--config", required=True,
                         help="TOML run configuration")
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--seed", type=_nonnegative, default=None,
                         help="override the config seed")
        cmd.add_argument("--threads", type=_positive, default=1,
                         help="FFT worker count (results do not depend on it)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    gr.set_fft_workers(args.threads)
    try:
        cfg = ex.load_config(args.config)
        if cfg.kind != args.command:
            raise ConfigError(f"config has kind {cfg.kind!r} but the "
                              f"{args.command} command was invoked")
        if args.seed is not None:
            cfg = ex.with_seed(cfg, args.seed)
        result = ex.RUNNERS[cfg.kind](cfg, args.out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except GuardError as err:
        print(f"guard tripped: {err}", file=sys.stderr)
        return 3
    print(_SUMMARY_LINE[args.command](result))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
