"""Command line entry point: ``spatialcrlb {fig1,fig2,crlb-validate,bounds}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from .config import ExperimentConfig, full_scale, load_config
from .errors import ConfigError, InvalidArgumentError, NumericError
from .report import emit, plot_fig1, plot_fig2

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("spatialcrlb")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML experiment config")
    common.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output directory (overrides the config)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--trials", type=_positive, help="Monte-Carlo trials per grid point")
    common.add_argument("--full-scale", action="store_true", help="longer N_t sweep and more trials")
    common.add_argument("--workers", type=_positive, help="worker processes")
    common.add_argument("--plot", action="store_true", help="also render a PNG figure next to the table")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="spatialcrlb",
                                description="Spatial correlation estimation bounds and Monte-Carlo sweeps.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("fig1", parents=[common], help="noiseless AvgMSE vs N_t sweep")
    sub.add_parser("fig2", parents=[common], help="finite-SNR AvgMSE sweep over SNR, Doppler and N_t")
    sub.add_parser("crlb-validate", parents=[common], help="generic vs closed-form CRLB on small configs")
    b = sub.add_parser("bounds", parents=[common], help="print the bounds for a config, no simulation")
    b.add_argument("--profile", help="profile name (default: first in the sweep)")
    b.add_argument("--crlb", action="store_true", help="include the CRLB matrix")
    return p


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.full_scale:
        cfg = full_scale(cfg)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.out is not None:
        cfg = replace(cfg, output_dir=str(args.out))
    return cfg.validate()


def _write(rows, columns, cfg, name, fmt) -> Path:
    path = Path(cfg.output_dir) / f"{name}.{fmt}"
    emit(rows, fmt, path, columns=columns)
    log.info("wrote %s (%d rows)", path, len(rows))
    print(path)
    return path


def run(args) -> int:
    cfg = _resolve_config(args)
    if args.command == "fig1":
        rows = ex.run_fig1(cfg)
        _write(rows, ex.RESULT_COLUMNS, cfg, "fig1", args.format)
        if args.plot:
            print(plot_fig1(rows, Path(cfg.output_dir) / "fig1.png"))
    elif args.command == "fig2":
        rows = ex.run_fig2(cfg)
        _write(rows, ex.RESULT_COLUMNS, cfg, "fig2", args.format)
        if args.plot:
            print(plot_fig2(rows, Path(cfg.output_dir) / "fig2.png"))
    elif args.command == "crlb-validate":
        rows = ex.run_crlb_validation()
        _write(rows, ex.CRLB_COLUMNS, cfg, "crlb_validation", args.format)
    elif args.command == "bounds":
        rep = ex.bounds_for_config(cfg, args.profile, with_crlb=args.crlb)
        text = json.dumps(rep.to_dict(include_crlb=args.crlb), indent=1)
        print(text)
        if args.out is not None:
            path = Path(cfg.output_dir) / "bounds.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return run(args)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
