"""Command-line front end: run an SNR sweep from a YAML config to CSV."""

import argparse
import sys

from .errors import ConfigError
from .harness import SimConfig, apply_overrides, load_config, run_sweep


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psmimo-sim",
        description="Monte-Carlo BLER/throughput sweep for shaped-QAM MIMO")
    parser.add_argument("--config", help="YAML config file (SimConfig fields)")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override a config field (repeatable)")
    parser.add_argument("--out", default="sweep.csv", help="output CSV path")
    parser.add_argument("--seed", type=int, help="override the base seed")
    parser.add_argument("--threads", type=int, help="worker processes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else SimConfig()
        overrides = list(args.override)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if args.threads is not None:
            overrides.append(f"threads={args.threads}")
        cfg = apply_overrides(cfg, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    def progress(point):
        print(f"snr {point.snr_db:6.2f} dB  bler {point.bler:.4g} "
              f"(+-{point.bler_ci:.2g})  throughput {point.throughput_bps:.4g} bps  "
              f"trials {point.trials}")

    run_sweep(cfg, out_path=args.out, progress=progress)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
