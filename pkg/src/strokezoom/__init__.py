"""strokezoom: arbitrary-scale image upscaling by cyclic stroke repainting.

The library decomposes an image into parametric Bezier strokes patch by
patch, repaints the strokes at an enlarged resolution (analytically or
through a trained implicit painter), optionally runs a detail-completion
pass, and cycles until the requested total factor is reached.
"""

from .complete import (
    CompletionRequest,
    IdentityCompleter,
    RemoteCompleter,
    UnsharpCompleter,
    complete,
)
from .decompose import CemConfig, StrokeSequence, decompose_patch, propose_stroke
from .imageops import (
    bicubic_resample,
    box_downsample,
    edge_sharpness,
    load_png,
    psnr,
    save_png,
    split_patches,
    ssim,
    stitch_patches,
)
from .painter import (
    PainterConfig,
    load_painter,
    query_silhouette,
    render_stroke,
    save_painter,
    train_painter,
)
from .pipeline import PipelineConfig, ScalePlan, amplify_once, plan_scales, run_cycles
from .strokes import (
    Stroke,
    StrokeColor,
    StrokeShape,
    composite_stroke,
    expand_color,
    random_stroke,
    rasterize_silhouette,
)

__version__ = "0.1.0"
