"""Implicit stroke painter: a coordinate-query renderer usable at any
output resolution.

A small MLP maps [shape params | query coordinate | positional encoding
of the coordinate | pixel cell size] to the coverage value the analytic
engine would produce at that pixel center. Because queries are individual
coordinates, one trained model renders a stroke at 16x16 or 640x480 alike;
the cell size input tells it how wide a pixel (and hence the anti-alias
band) currently is.

Training regresses against the analytic engine under an L1 objective on
randomly generated strokes at random canvas sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mlp
from .strokes import StrokeBounds, Stroke, StrokeShape, coverage_at, expand_color

__all__ = [
    "QueryGrid",
    "PainterConfig",
    "TrainingDivergedError",
    "make_query_grid",
    "query_silhouette",
    "render_stroke",
    "train_painter",
    "held_out_l1",
    "save_painter",
    "load_painter",
]


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during painter training."""


@dataclass(frozen=True)
class QueryGrid:
    """Pixel-center query coordinates plus the current pixel cell size.

    coords is (P, 2) of normalized (x', y') with x' = (j + 0.5) / w,
    y' = (i + 0.5) / h in row-major order; cell is (1/h, 1/w).
    """

    coords: np.ndarray
    cell: tuple
    height: int
    width: int


@dataclass
class PainterConfig:
    hidden_dims: list = field(default_factory=lambda: [64, 64, 64, 64])
    pe_freqs: int = 6              # L sin/cos octaves on each coordinate
    size_min: int = 16
    size_max: int = 64             # 16 * s_max
    batch_strokes: int = 64
    query_samples: int = 512       # pixels sampled per stroke per step
    steps: int = 4000
    lr: float = 2e-3
    seed: int = 0
    # training strokes may spill past the unit square so the model stays
    # calibrated for spines near or beyond the canvas edge
    coord_low: float = -0.3
    coord_high: float = 1.3

    @property
    def input_dim(self) -> int:
        return 8 + 2 + 4 * self.pe_freqs + 2

    def layer_dims(self) -> list:
        return [self.input_dim, *self.hidden_dims, 1]

    def bounds(self) -> StrokeBounds:
        return StrokeBounds(coord_min=self.coord_low, coord_max=self.coord_high)


def make_query_grid(h: int, w: int) -> QueryGrid:
    if h < 1 or w < 1:
        raise ValueError(f"grid must be at least 1x1, got {h}x{w}")
    jj, ii = np.meshgrid(np.arange(w), np.arange(h))
    coords = np.stack(
        [(jj.ravel() + 0.5) / w, (ii.ravel() + 0.5) / h], axis=1
    )
    return QueryGrid(coords=coords, cell=(1.0 / h, 1.0 / w), height=h, width=w)


def _pe_count(in_dim: int) -> int:
    """Positional-encoding octave count implied by a model's input width."""
    freqs, rem = divmod(in_dim - 12, 4)
    if rem or freqs < 0:
        raise ValueError(f"model input dim {in_dim} does not match the painter layout")
    return freqs


def encode_queries(shape_params: np.ndarray, coords: np.ndarray, cell,
                   pe_freqs: int, dtype=np.float32) -> np.ndarray:
    """Feature rows [shape | x', y' | sin/cos octaves | c_h, c_w].

    shape_params is (8,) applied to every coordinate or (P, 8) per row.
    """
    coords = np.asarray(coords, dtype=np.float64)
    p = coords.shape[0]
    shape_params = np.asarray(shape_params, dtype=np.float64)
    if shape_params.ndim == 1:
        shape_params = np.broadcast_to(shape_params, (p, 8))
    parts = [shape_params, coords]
    for k in range(pe_freqs):
        ang = coords * (math.pi * (2.0**k))
        parts.append(np.sin(ang))
        parts.append(np.cos(ang))
    parts.append(np.broadcast_to(np.asarray(cell, dtype=np.float64), (p, 2)))
    return np.concatenate(parts, axis=1).astype(dtype)


def query_silhouette(model: mlp.MlpModel, shape: StrokeShape, grid: QueryGrid) -> np.ndarray:
    """Predicted coverage, one value in (0, 1) per query coordinate."""
    freqs = _pe_count(model.in_dim)
    feats = encode_queries(shape.as_array(), grid.coords, grid.cell, freqs,
                           dtype=model.dtype)
    return mlp.forward(model, feats)[:, 0].astype(np.float64)


def render_stroke(model: mlp.MlpModel, stroke: Stroke, h: int, w: int):
    """Full-grid silhouette plus the broadcast color layer."""
    grid = make_query_grid(h, w)
    sil = query_silhouette(model, stroke.shape, grid).reshape(h, w)
    return sil, expand_color(stroke.color, h, w)


def _sample_shapes(rng: np.random.Generator, n: int, bounds: StrokeBounds) -> np.ndarray:
    coords = rng.uniform(bounds.coord_min, bounds.coord_max, size=(n, 6))
    widths = rng.uniform(bounds.width_min, bounds.width_max, size=(n, 2))
    return np.concatenate([coords, widths], axis=1)


def train_painter(config: PainterConfig | None = None, progress=None):
    """Train the implicit painter against the analytic engine.

    Returns (model, loss_history). Each step draws a batch of random
    strokes at one random canvas size, rasterizes them analytically at the
    sampled query pixels, and takes one Adam step on the mean L1 error.
    `progress`, if given, is called as progress(step, loss) every 100 steps.
    """
    cfg = config or PainterConfig()
    rng = np.random.default_rng(cfg.seed)
    model = mlp.init_mlp(cfg.layer_dims(), rng)
    opt = mlp.adam_init(model, lr=cfg.lr)
    bounds = cfg.bounds()
    history = []

    for step in range(cfg.steps):
        size = int(rng.integers(cfg.size_min, cfg.size_max + 1))
        shapes = _sample_shapes(rng, cfg.batch_strokes, bounds)
        idx = rng.integers(0, size * size, size=(cfg.batch_strokes, cfg.query_samples))
        px = (idx % size) + 0.5
        py = (idx // size) + 0.5
        gt = coverage_at(shapes, px, py, size, size)

        coords = np.stack([px / size, py / size], axis=2).reshape(-1, 2)
        shape_rows = np.repeat(shapes, cfg.query_samples, axis=0)
        feats = encode_queries(shape_rows, coords, (1.0 / size, 1.0 / size),
                               cfg.pe_freqs)
        target = gt.reshape(-1, 1)

        pred = mlp.forward(model, feats)
        err = pred.astype(np.float64) - target
        loss = float(np.mean(np.abs(err)))
        if not math.isfinite(loss):
            raise TrainingDivergedError(f"loss became {loss} at step {step}")
        history.append(loss)

        # cosine decay to a tenth of the peak rate
        opt.lr = cfg.lr * (0.55 + 0.45 * math.cos(math.pi * step / cfg.steps))
        grad = (np.sign(err) / err.size).astype(model.dtype)
        mlp.adam_step(model, mlp.backward(model, feats, grad), opt)

        if progress is not None and (step % 100 == 0 or step == cfg.steps - 1):
            progress(step, loss)

    return model, history


def held_out_l1(model: mlp.MlpModel, size: int, n_strokes: int,
                rng: np.random.Generator,
                bounds: StrokeBounds = StrokeBounds()) -> float:
    """Mean full-grid L1 between the painter and the analytic engine."""
    shapes = _sample_shapes(rng, n_strokes, bounds)
    grid = make_query_grid(size, size)
    jj, ii = np.meshgrid(np.arange(size), np.arange(size))
    gt = coverage_at(shapes, jj.ravel() + 0.5, ii.ravel() + 0.5, size, size)
    freqs = _pe_count(model.in_dim)
    total = 0.0
    for i in range(n_strokes):
        feats = encode_queries(shapes[i], grid.coords, grid.cell, freqs,
                               dtype=model.dtype)
        pred = mlp.forward(model, feats)[:, 0].astype(np.float64)
        total += float(np.mean(np.abs(pred - gt[i])))
    return total / n_strokes


def save_painter(model: mlp.MlpModel, path) -> None:
    mlp.save_mlp(model, path)


def load_painter(path) -> mlp.MlpModel:
    model = mlp.load_mlp(path)
    _pe_count(model.in_dim)  # validates the painter input layout
    if model.out_dim != 1:
        raise mlp.ModelFormatError(f"painter model must have one output, got {model.out_dim}")
    return model
