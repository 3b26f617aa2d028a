"""Command-line interface.

Subcommands: synth, register, fuse, eval, sweep, selftest. Operational
failures exit 1 with a one-line diagnostic on stderr; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import fileio
from .fuse import fuse as run_fuse
from .harness import (
    MisalignmentSpec,
    RunConfig,
    load_config,
    save_fused,
    save_registration,
    save_report,
    sweep,
    synth_misalign,
)
from .image import warp
from .metrics import evaluate_pair
from .register import register_pair
from .selftest import run_selftest


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "iters", None) is not None:
        over["max_iterations"] = args.iters
    if getattr(args, "mode", None):
        over["fuse_mode"] = args.mode
    if getattr(args, "ablate", None):
        over["ablate"] = args.ablate
    return replace(cfg, **over) if over else cfg


def _cmd_synth(args) -> int:
    img = fileio.load_image(args.input)
    spec = MisalignmentSpec(args.kind, args.level)
    fileio.save_image(synth_misalign(img, spec), args.output)
    return 0


def _cmd_register(args) -> int:
    cfg = _load_run_config(args)
    ir = fileio.load_image(args.infrared)
    vis = fileio.load_image(args.visible)
    result = register_pair(ir, vis, cfg.register_config(), seed=cfg.seed)
    pid = args.pair_id or Path(args.infrared).stem
    d = save_registration(args.out, pid, result)
    print(d)
    return 0


def _cmd_fuse(args) -> int:
    cfg = _load_run_config(args)
    d = Path(args.pair_dir)
    vis = fileio.load_image(args.visible)
    if args.infrared:
        flow = fileio.load_field(d / "phi_p.bsrf")
        ir_warped = warp(fileio.load_image(args.infrared), flow)
    else:
        ir_warped = fileio.load_image(d / "T_hat.pgm")
    fused = run_fuse(ir_warped, vis, cfg.fuse_config())
    print(save_fused(d.parent, d.name, fused))
    return 0


def _cmd_eval(args) -> int:
    d = Path(args.pair_dir)
    ir_warped = fileio.load_image(d / "T_hat.pgm")
    vis = fileio.load_image(args.visible)
    fused = fileio.load_image(d / "fused.pgm")
    report = evaluate_pair(ir_warped, vis, fused, pair_id=d.name, method=args.method)
    save_report(d.parent, d.name, report)
    print(report.to_json())
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_run_config(args)
    csv_path = sweep(cfg, args.out)
    print(csv_path)
    return 0


def _cmd_selftest(args) -> int:
    return run_selftest()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="regfuse",
        description="Register and fuse misaligned infrared-visible image pairs.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="apply a synthetic misalignment to an image")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--kind", choices=["shift", "dilate"], required=True)
    sp.add_argument("--level", type=int, required=True)
    sp.set_defaults(fn=_cmd_synth)

    sp = sub.add_parser("register", help="optimize deformation fields for one pair")
    sp.add_argument("infrared")
    sp.add_argument("visible")
    sp.add_argument("--out", required=True)
    sp.add_argument("--pair-id", default="")
    sp.add_argument("--config", default="")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--iters", type=int)
    sp.add_argument("--ablate", choices=["exp1", "exp2", "exp3", "exp4", "exp5"])
    sp.set_defaults(fn=_cmd_register)

    sp = sub.add_parser("fuse", help="fuse stored registration artifacts")
    sp.add_argument("pair_dir")
    sp.add_argument("--visible", required=True)
    sp.add_argument("--infrared", default="", help="re-warp this image with the stored field")
    sp.add_argument("--config", default="")
    sp.add_argument("--mode", choices=["max", "optimize"])
    sp.set_defaults(fn=_cmd_fuse)

    sp = sub.add_parser("eval", help="compute fusion metrics for stored artifacts")
    sp.add_argument("pair_dir")
    sp.add_argument("--visible", required=True)
    sp.add_argument("--method", default="registered")
    sp.set_defaults(fn=_cmd_eval)

    sp = sub.add_parser("sweep", help="misalignment robustness sweep over the corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--config", default="")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--iters", type=int)
    sp.add_argument("--mode", choices=["max", "optimize"])
    sp.add_argument("--ablate", choices=["exp1", "exp2", "exp3", "exp4", "exp5"])
    sp.set_defaults(fn=_cmd_sweep)

    sp = sub.add_parser("selftest", help="run built-in analytic checks")
    sp.set_defaults(fn=_cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - single-line operational diagnostics
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
