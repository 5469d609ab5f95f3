"""Scale-plan construction and cycle orchestration.

An arbitrary upsampling factor is reached by chaining small per-cycle
factors, each at most `s_max`. Every cycle vectorizes the current image
patch by patch into strokes, repaints them at the enlarged size, runs the
configured completion pass, and feeds the result to the next cycle.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import painter
from .complete import CompletionRequest, IdentityCompleter, RemoteError, complete
from .decompose import CemConfig, decompose_patch, initial_canvas
from .imageops import (
    PatchGrid,
    as_image,
    mse,
    round_half_up,
    split_patches,
    stitch_patches,
)
from .strokes import composite_stroke, rasterize_silhouette

__all__ = [
    "DEFAULT_S_MAX",
    "ScalePlan",
    "PipelineConfig",
    "plan_scales",
    "amplify_once",
    "run_cycles",
]

logger = logging.getLogger("strokezoom")

DEFAULT_S_MAX = 4.0

_FACTOR_TOL = 1e-12
_PRODUCT_RTOL = 1e-9

# a trailing greedy remainder below this is folded into the previous factor
# when the merged factor still fits under s_max
_MERGE_BELOW = 1.2


@dataclass(frozen=True)
class ScalePlan:
    total: float
    factors: tuple
    s_max: float = DEFAULT_S_MAX

    def __post_init__(self):
        if self.total <= 1.0:
            raise ValueError(f"total scale must exceed 1, got {self.total}")
        if not self.factors:
            raise ValueError("a scale plan needs at least one factor")
        for f in self.factors:
            if not 1.0 < f <= self.s_max + _FACTOR_TOL:
                raise ValueError(
                    f"factor {f} outside (1, {self.s_max}]"
                )
        prod = float(np.prod(self.factors))
        if abs(prod - self.total) > _PRODUCT_RTOL * self.total:
            raise ValueError(
                f"factors multiply to {prod}, not the requested {self.total}"
            )


def plan_scales(s: float, s_max: float = DEFAULT_S_MAX, explicit=None) -> ScalePlan:
    """Decompose a total factor into per-cycle factors bounded by s_max.

    With `explicit`, the given factors are validated and used as-is.
    Otherwise the plan is greedy: emit s_max while more than s_max
    remains, then the remainder; a near-unity trailing remainder
    (< 1.2) is merged into the previous factor when that stays within
    s_max, so no cycle does almost nothing.
    """
    if s <= 1.0:
        raise ValueError(f"total scale must exceed 1, got {s}")
    if explicit is not None:
        return ScalePlan(total=s, factors=tuple(float(f) for f in explicit), s_max=s_max)
    factors = []
    remaining = float(s)
    while remaining > s_max + _FACTOR_TOL:
        factors.append(float(s_max))
        remaining /= s_max
    if remaining > 1.0 + _FACTOR_TOL or not factors:
        factors.append(remaining)
    if (
        len(factors) >= 2
        and factors[-1] < _MERGE_BELOW
        and factors[-2] * factors[-1] <= s_max + _FACTOR_TOL
    ):
        factors[-2:] = [factors[-2] * factors[-1]]
    return ScalePlan(total=s, factors=tuple(factors), s_max=s_max)


@dataclass
class PipelineConfig:
    strokes_per_patch: int = 20
    patch_size: int = 16
    renderer: str = "analytic"  # "analytic" or "implicit"
    painter_model: object = None
    completer: object = field(default_factory=IdentityCompleter)
    score_fn: object = None  # None selects negative MSE
    seed: int = 0
    cem: CemConfig = field(default_factory=CemConfig)
    blank_canvas: bool = False
    completer_fallback: bool = False
    context_text: str = ""

    def __post_init__(self):
        if self.strokes_per_patch < 1:
            raise ValueError("strokes_per_patch must be >= 1")
        if self.patch_size < 4:
            raise ValueError("patch_size must be >= 4")
        if self.renderer not in ("analytic", "implicit"):
            raise ValueError(f"unknown renderer {self.renderer!r}")


def _render_silhouette(cfg: PipelineConfig, shape, h: int, w: int) -> np.ndarray:
    if cfg.renderer == "analytic":
        return rasterize_silhouette(shape, h, w)
    grid = painter.make_query_grid(h, w)
    return painter.query_silhouette(cfg.painter_model, shape, grid).reshape(h, w)


def _fit_dims(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Crop to the requested dims, edge-padding the last pixel row/column
    when patch-size rounding left the stitched canvas short."""
    img = image[:out_h, :out_w]
    pad_h = out_h - img.shape[0]
    pad_w = out_w - img.shape[1]
    if pad_h or pad_w:
        img = np.pad(img, ((0, pad_h), (0, pad_w), (0, 0)), mode="edge")
    return img


def amplify_once(image: np.ndarray, factor: float, cfg: PipelineConfig,
                 out_dims=None, cycle_index: int = 1):
    """One stroke-vectorize-and-repaint pass.

    Splits the image into patches, fits strokes to each patch at its own
    resolution, repaints every accepted stroke at round(patch_size*factor)
    with the configured renderer, stitches, and crops to `out_dims`
    (default: round of the input dims times the factor).

    Returns (painted image, stats dict with accepted_strokes,
    mse_before, mse_after at fit resolution).
    """
    if factor <= 1.0:
        raise ValueError(f"amplification factor must exceed 1, got {factor}")
    if cfg.renderer == "implicit" and cfg.painter_model is None:
        raise ValueError("renderer 'implicit' needs a painter model")
    img = as_image(image)
    h, w = img.shape[:2]
    if out_dims is None:
        out_dims = (round_half_up(h * factor), round_half_up(w * factor))

    grid = split_patches(img, cfg.patch_size)
    size_hi = round_half_up(cfg.patch_size * factor)

    painted_patches = []
    accepted = 0
    mse_before = []
    mse_after = []
    for r in range(grid.rows):
        for c in range(grid.cols):
            patch = grid.patches[r * grid.cols + c]
            seed = np.random.SeedSequence(cfg.seed, spawn_key=(cycle_index, r, c))
            seq = decompose_patch(
                patch,
                budget=cfg.strokes_per_patch,
                fn=cfg.score_fn,
                seed=seed,
                cem=cfg.cem,
                blank_canvas=cfg.blank_canvas,
            )
            accepted += len(seq)

            fit_canvas = initial_canvas(patch, blank=cfg.blank_canvas)
            mse_before.append(mse(fit_canvas, patch))
            hi_canvas = np.broadcast_to(
                fit_canvas[0, 0], (size_hi, size_hi, 3)
            ).copy()
            for stroke in seq.strokes:
                sil16 = rasterize_silhouette(stroke.shape, *patch.shape[:2])
                fit_canvas = composite_stroke(fit_canvas, sil16, stroke.color)
                sil_hi = _render_silhouette(cfg, stroke.shape, size_hi, size_hi)
                hi_canvas = composite_stroke(hi_canvas, sil_hi, stroke.color)
            mse_after.append(mse(fit_canvas, patch))
            painted_patches.append(np.clip(hi_canvas, 0.0, 1.0))

    hi_grid = PatchGrid(
        patch_size=cfg.patch_size,
        rows=grid.rows,
        cols=grid.cols,
        patches=painted_patches,
        pad_top=grid.pad_top,
        pad_left=grid.pad_left,
        pad_bottom=grid.pad_bottom,
        pad_right=grid.pad_right,
    )
    stitched = stitch_patches(hi_grid, scale=factor)
    out = _fit_dims(stitched, *out_dims)
    stats = {
        "accepted_strokes": accepted,
        "mse_before": float(np.mean(mse_before)),
        "mse_after": float(np.mean(mse_after)),
    }
    return out, stats


def run_cycles(image: np.ndarray, plan: ScalePlan, cfg: PipelineConfig):
    """Run every cycle of the plan; returns (final image, report dict).

    Per-cycle output dims are the rounded product of the current dims and
    the cycle factor, except the last cycle, which targets
    round(original dims * total) exactly so rounding drift cannot
    accumulate. Each cycle's completion output feeds the next cycle.
    """
    img = as_image(image)
    h0, w0 = img.shape[:2]
    final_dims = (round_half_up(h0 * plan.total), round_half_up(w0 * plan.total))
    cycles = []
    cur = img
    for k, f in enumerate(plan.factors, start=1):
        t_start = time.perf_counter()
        ch, cw = cur.shape[:2]
        if k == len(plan.factors):
            out_dims = final_dims
        else:
            out_dims = (round_half_up(ch * f), round_half_up(cw * f))
        painted, stats = amplify_once(cur, f, cfg, out_dims=out_dims, cycle_index=k)
        request = CompletionRequest(
            painted=painted,
            context_text=cfg.context_text,
            cycle_index=k,
            scale=f,
        )
        try:
            completed = complete(request, cfg.completer)
        except RemoteError:
            if not cfg.completer_fallback:
                raise
            logger.warning(
                "cycle %d: remote completion failed, falling back to identity", k
            )
            completed = painted
        cycles.append(
            {
                "k": k,
                "in": [ch, cw],
                "out": [completed.shape[0], completed.shape[1]],
                "accepted_strokes": stats["accepted_strokes"],
                "mse_before": stats["mse_before"],
                "mse_after": stats["mse_after"],
                "seconds": time.perf_counter() - t_start,
            }
        )
        cur = completed
    report = {
        "scale": plan.total,
        "factors": [float(f) for f in plan.factors],
        "cycles": cycles,
    }
    return cur, report
