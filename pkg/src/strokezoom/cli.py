"""Command-line interface.

Exit codes: 0 success, 1 usage or invalid arguments, 2 file/format I/O
problems, 3 remote completion protocol failures. Diagnostics go to
standard error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import painter
from .complete import (
    IdentityCompleter,
    RemoteCompleter,
    RemoteError,
    UnsharpCompleter,
)
from .imageops import (
    PSNR_DISPLAY_CAP,
    PngFormatError,
    load_png,
    psnr,
    save_png,
    ssim,
)
from .pipeline import DEFAULT_S_MAX, PipelineConfig, plan_scales, run_cycles
from .strokes import Stroke, StrokeColor, StrokeShape, composite_stroke, rasterize_silhouette

__all__ = ["cli_main", "main"]


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="strokezoom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    up = sub.add_parser("upscale", help="cyclically upscale a PNG by stroke repainting")
    up.add_argument("--in", dest="in_path", required=True, help="input PNG")
    up.add_argument("--out", dest="out_path", required=True, help="output PNG")
    up.add_argument("--scale", type=float, required=True, help="total upsampling factor")
    up.add_argument("--factors", help="comma-separated per-cycle factors, e.g. 4,3,1.5")
    up.add_argument("--smax", type=float, default=DEFAULT_S_MAX,
                    help="largest allowed per-cycle factor")
    up.add_argument("--renderer", choices=["analytic", "implicit"], default="analytic")
    up.add_argument("--model", help="painter model file (renderer=implicit)")
    up.add_argument("--completer", choices=["identity", "unsharp", "remote"],
                    default="identity")
    up.add_argument("--endpoint", help="remote completion service base URL")
    up.add_argument("--timeout", type=float, default=30.0,
                    help="remote completion timeout in seconds")
    up.add_argument("--unsharp-radius", type=float, default=2.0)
    up.add_argument("--unsharp-amount", type=float, default=1.0)
    up.add_argument("--context", default="", help="context text sent with completions")
    up.add_argument("--strokes-per-patch", type=int, default=20)
    up.add_argument("--seed", type=int, default=0)
    up.add_argument("--report", help="write the cycle report JSON here")
    up.add_argument("--blank-canvas", action="store_true",
                    help="start patch canvases black instead of the patch mean color")
    up.add_argument("--completer-fallback", action="store_true",
                    help="fall back to identity when remote completion fails")

    tr = sub.add_parser("train-assp", help="train the arbitrary-scale stroke painter")
    tr.add_argument("--out", dest="out_path", required=True, help="model file to write")
    tr.add_argument("--steps", type=int, default=painter.PainterConfig.steps)
    tr.add_argument("--seed", type=int, default=0)

    ev = sub.add_parser("eval", help="print PSNR and SSIM between two PNGs")
    ev.add_argument("--a", dest="a_path", required=True)
    ev.add_argument("--b", dest="b_path", required=True)

    rs = sub.add_parser("render-stroke", help="rasterize one stroke to a PNG")
    rs.add_argument("--params", required=True,
                    help="11 comma-separated values: x0,y0,x1,y1,x2,y2,w0,w1,r,g,b")
    rs.add_argument("--out", dest="out_path", required=True)
    rs.add_argument("--height", type=int, default=64)
    rs.add_argument("--width", type=int, default=64)
    rs.add_argument("--renderer", choices=["analytic", "implicit"], default="analytic")
    rs.add_argument("--model", help="painter model file (renderer=implicit)")
    return parser


def _parse_factors(text: str):
    try:
        factors = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"cannot parse --factors {text!r}")
    if not factors:
        raise ValueError("--factors is empty")
    return factors


def _make_completer(args):
    if args.completer == "identity":
        return IdentityCompleter()
    if args.completer == "unsharp":
        return UnsharpCompleter(radius=args.unsharp_radius, amount=args.unsharp_amount)
    if not args.endpoint:
        raise ValueError("--completer remote requires --endpoint")
    return RemoteCompleter(endpoint=args.endpoint, timeout=args.timeout)


def _cmd_upscale(args) -> int:
    factors = _parse_factors(args.factors) if args.factors else None
    plan = plan_scales(args.scale, s_max=args.smax, explicit=factors)
    model = None
    if args.renderer == "implicit":
        if not args.model:
            raise ValueError("--renderer implicit requires --model")
        model = painter.load_painter(args.model)
    cfg = PipelineConfig(
        strokes_per_patch=args.strokes_per_patch,
        renderer=args.renderer,
        painter_model=model,
        completer=_make_completer(args),
        seed=args.seed,
        blank_canvas=args.blank_canvas,
        completer_fallback=args.completer_fallback,
        context_text=args.context,
    )
    image = load_png(args.in_path)
    result, report = run_cycles(image, plan, cfg)
    save_png(result, args.out_path)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2)
    print(
        f"upscaled {image.shape[1]}x{image.shape[0]} -> "
        f"{result.shape[1]}x{result.shape[0]} via "
        + " x ".join(f"{f:g}" for f in plan.factors)
    )
    return 0


def _cmd_train(args) -> int:
    cfg = painter.PainterConfig(steps=args.steps, seed=args.seed)

    def report(step, loss):
        print(f"step {step:6d}  loss {loss:.4f}", file=sys.stderr)

    model, history = painter.train_painter(cfg, progress=report)
    painter.save_painter(model, args.out_path)
    print(f"trained {args.steps} steps, final loss {history[-1]:.4f}, "
          f"model written to {args.out_path}")
    return 0


def _cmd_eval(args) -> int:
    a = load_png(args.a_path)
    b = load_png(args.b_path)
    p = psnr(a, b)
    s = ssim(a, b)
    print(f"PSNR={min(p, PSNR_DISPLAY_CAP):.4f} SSIM={s:.6f}")
    return 0


def _cmd_render_stroke(args) -> int:
    values = [float(tok) for tok in args.params.split(",")]
    if len(values) != 11:
        raise ValueError(f"--params needs 11 values, got {len(values)}")
    stroke = Stroke(shape=StrokeShape(*values[:8]), color=StrokeColor(*values[8:11]))
    if args.renderer == "implicit":
        if not args.model:
            raise ValueError("--renderer implicit requires --model")
        model = painter.load_painter(args.model)
        sil, _ = painter.render_stroke(model, stroke, args.height, args.width)
    else:
        sil = rasterize_silhouette(stroke.shape, args.height, args.width)
    canvas = np.zeros((args.height, args.width, 3))
    save_png(composite_stroke(canvas, sil, stroke.color), args.out_path)
    print(f"stroke rendered to {args.out_path}")
    return 0


_COMMANDS = {
    "upscale": _cmd_upscale,
    "train-assp": _cmd_train,
    "eval": _cmd_eval,
    "render-stroke": _cmd_render_stroke,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except RemoteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, PngFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
