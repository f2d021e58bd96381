"""Command-line interface.

Exit codes: 0 ok, 2 usage, 3 io, 4 shape/state, 5 selftest failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from . import selftest
from .errors import (
    ConfigError,
    CorruptWeights,
    IoError,
    MissingWeightError,
    ShapeError,
    StateError,
)
from .hdcfm import PUBLISHED_PARAMS, HdcfmConfig, count_params
from .io import read_png, write_png
from .metrics import delta_e_itp, hist_distance, histogram72, psnr, ssim
from .pdcg import PdcgConfig
from .pipeline import STAGES, PipelineConfig, convert
from .weights import load_weights, save_weights, seeded_weights

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SHAPE, EXIT_SELFTEST = 0, 2, 3, 4, 5
METRICS = ("psnr", "ssim", "deitp", "hist")

log = logging.getLogger("hdrtv")


def _load_config(path) -> HdcfmConfig:
    if path is None:
        return HdcfmConfig()
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoError(path, exc.strerror or exc) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return HdcfmConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def cmd_convert(args) -> int:
    cfg = PipelineConfig(stage=args.stage, mask_tau=args.mask_tau, mask_ramp=args.mask_ramp)
    weights = load_weights(args.weights, known=PipelineConfig(stage="full").weight_shapes())
    sdr = read_png(args.input)
    hdr = convert(sdr, weights, cfg)
    write_png(hdr, args.output, bits=args.bits)
    log.info("wrote %s (%dx%d, %d-bit)", args.output, hdr.width, hdr.height, args.bits)
    return EXIT_OK


def _metric_report(ref, test, wanted) -> dict[str, float]:
    report = {}
    for name in wanted:
        if name == "psnr":
            report[name] = psnr(ref, test)
        elif name == "ssim":
            report[name] = ssim(ref, test)
        elif name == "deitp":
            report[name] = delta_e_itp(ref, test)
        elif name == "hist":
            report[name] = hist_distance(histogram72(ref), histogram72(test))
    return report


def cmd_metrics(args) -> int:
    wanted = [m.strip() for m in args.set.split(",") if m.strip()]
    unknown = sorted(set(wanted) - set(METRICS))
    if unknown:
        raise ConfigError(f"unknown metrics: {', '.join(unknown)}")
    report = _metric_report(read_png(args.ref), read_png(args.test), wanted)
    if args.json:
        doc = {k: ("inf" if math.isinf(v) else v) for k, v in report.items()}
        print(json.dumps(doc, indent=2))
    else:
        for k, v in report.items():
            print(f"{k}={v:.6f}" if math.isfinite(v) else f"{k}=inf")
    return EXIT_OK


def cmd_census(args) -> int:
    cfg = _load_config(args.config)
    table, total = count_params(cfg)
    shapes = cfg.weight_shapes()
    if args.stage == "full":
        pdcg = PdcgConfig(channels=cfg.channels, kernel=cfg.kernel)
        pdcg_table, pdcg_total = count_params(pdcg)
        table.update(pdcg_table)
        shapes.update(pdcg.weight_shapes())
    width = max(len(n) for n in table)
    for name, count in table.items():
        shape = "x".join(str(d) for d in shapes[name])
        print(f"{name:<{width}}  {shape:>12}  {count:>8}")
    print(f"hdcfm_total={total}")
    if args.stage == "full":
        print(f"pdcg_total={pdcg_total}")
    print(f"published_hdcfm={PUBLISHED_PARAMS} ratio={total / PUBLISHED_PARAMS:.4f}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    failed = 0
    for name, ok, value in selftest.run(args.seed):
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({value})")
    return EXIT_SELFTEST if failed else EXIT_OK


def cmd_gen_weights(args) -> int:
    save_weights(seeded_weights(args.seed, PipelineConfig(stage=args.stage)), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdrtv", description="SDR to HDR10 frame conversion toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert an 8-bit SDR PNG to an HDR PNG")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--stage", choices=STAGES, default="full")
    p.add_argument("--mask-tau", type=float, default=0.95)
    p.add_argument("--mask-ramp", type=float, default=0.05)
    p.add_argument("--bits", type=int, choices=(8, 16), default=16)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("metrics", help="compare two PNG frames")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--set", default=",".join(METRICS))
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("census", help="print the per-tensor parameter table")
    p.add_argument("--config", help="JSON file with channels/dyct_blocks/kernel")
    p.add_argument("--stage", choices=STAGES, default="hdcfm")
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("selftest", help="run oracle and invariant checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("gen-weights", help="write a seeded HDCW weights file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stage", choices=STAGES, default="full")
    p.set_defaults(func=cmd_gen_weights)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IoError, CorruptWeights, MissingWeightError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ShapeError, StateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE


if __name__ == "__main__":
    sys.exit(main())
