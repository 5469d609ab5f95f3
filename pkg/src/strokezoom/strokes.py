"""Analytic stroke graphics engine.

A stroke is a quadratic Bezier spine with linearly interpolated start/end
radii and a flat RGB color, eleven parameters in all. Control points live
in the unit square of the target region; radii are fractions of the
region's short side, so the same stroke rasterizes consistently at any
resolution. Coverage is computed per pixel center from the distance to
the sampled curve, with a one pixel linear anti-alias ramp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "WIDTH_MIN",
    "WIDTH_MAX",
    "StrokeShape",
    "StrokeColor",
    "Stroke",
    "StrokeBounds",
    "DEFAULT_BOUNDS",
    "bezier_point",
    "width_at",
    "coverage_at",
    "rasterize_silhouette",
    "rasterize_batch",
    "expand_color",
    "composite_stroke",
    "paint_strokes",
    "random_stroke",
]

WIDTH_MIN = 0.01
WIDTH_MAX = 0.5

# one-pixel linear anti-alias band
_AA_PX = 1.0

# target for temporary distance matrices, in float64 elements
_CHUNK_ELEMS = 8_000_000


@dataclass(frozen=True)
class StrokeShape:
    """Spine and width parameters: three control points plus end radii.

    Coordinates are nominally in [0, 1] (the renderer tolerates values
    outside it), radii in [WIDTH_MIN, WIDTH_MAX] as fractions of min(h, w).
    """

    x0: float
    y0: float
    x1: float
    y1: float
    x2: float
    y2: float
    w0: float
    w1: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.x0, self.y0, self.x1, self.y1, self.x2, self.y2, self.w0, self.w1],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class StrokeColor:
    r: float
    g: float
    b: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b], dtype=np.float64)


@dataclass(frozen=True)
class Stroke:
    shape: StrokeShape
    color: StrokeColor

    def as_array(self) -> np.ndarray:
        """The full 11-vector: shape parameters then color."""
        return np.concatenate([self.shape.as_array(), self.color.as_array()])


@dataclass(frozen=True)
class StrokeBounds:
    """Uniform sampling box for random strokes."""

    coord_min: float = 0.0
    coord_max: float = 1.0
    width_min: float = WIDTH_MIN
    width_max: float = WIDTH_MAX


DEFAULT_BOUNDS = StrokeBounds()


def bezier_point(shape: StrokeShape, t: float) -> tuple:
    """Evaluate the quadratic spine B(t) = (1-t)^2 P0 + 2t(1-t) P1 + t^2 P2."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"curve parameter t={t} outside [0, 1]")
    u = 1.0 - t
    x = u * u * shape.x0 + 2.0 * t * u * shape.x1 + t * t * shape.x2
    y = u * u * shape.y0 + 2.0 * t * u * shape.y1 + t * t * shape.y2
    return (x, y)


def width_at(shape: StrokeShape, t: float) -> float:
    """Radius at parameter t, linearly interpolated between the end radii."""
    return (1.0 - t) * shape.w0 + t * shape.w1


def _sample_counts(shapes: np.ndarray, h: int, w: int) -> np.ndarray:
    """Per-stroke sample count S = max(8, ceil(4 * polyline length in px)).

    Length is estimated from a fixed 32-segment polyline in pixel space.
    """
    t = np.linspace(0.0, 1.0, 33)
    u = 1.0 - t
    bx = (
        np.outer(shapes[:, 0], u * u)
        + np.outer(shapes[:, 2], 2.0 * t * u)
        + np.outer(shapes[:, 4], t * t)
    ) * w
    by = (
        np.outer(shapes[:, 1], u * u)
        + np.outer(shapes[:, 3], 2.0 * t * u)
        + np.outer(shapes[:, 5], t * t)
    ) * h
    seg = np.hypot(np.diff(bx, axis=1), np.diff(by, axis=1))
    length = seg.sum(axis=1)
    return np.maximum(8, np.ceil(4.0 * length).astype(np.int64))


def coverage_at(shapes: np.ndarray, px: np.ndarray, py: np.ndarray,
                h: int, w: int) -> np.ndarray:
    """Coverage of N stroke shapes at arbitrary query points, (N, P) in [0, 1].

    px/py are query coordinates in pixel units (pixel center j maps to
    j + 0.5); they may be shared, shape (P,), or per stroke, shape (N, P).
    For each point the distance to the nearest of S curve samples is taken
    (S proportional to curve length, at least 8); coverage ramps linearly
    over a one-pixel band around the local radius.
    """
    if h < 1 or w < 1:
        raise ValueError(f"canvas must be at least 1x1, got {h}x{w}")
    shapes = np.asarray(shapes, dtype=np.float64)
    if shapes.ndim != 2 or shapes.shape[1] != 8:
        raise ValueError(f"expected (N, 8) shape array, got {shapes.shape}")
    n = shapes.shape[0]
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    if px.ndim == 1:
        px = np.broadcast_to(px, (n, px.size))
        py = np.broadcast_to(py, (n, py.size))
    if px.shape != py.shape or px.shape[0] != n:
        raise ValueError("query point arrays must be (P,) or (N, P)")
    n_px = px.shape[1]
    if n == 0 or n_px == 0:
        return np.zeros((n, n_px), dtype=np.float64)

    counts = _sample_counts(shapes, h, w)
    s_max = int(counts.max())
    # per-stroke parameter grid, padded by repeating t=1 (a duplicate sample
    # cannot change the min distance and argmin keeps the first occurrence)
    t = np.ones((n, s_max), dtype=np.float64)
    for i, s in enumerate(counts):
        t[i, :s] = np.linspace(0.0, 1.0, s)
    u = 1.0 - t
    cx = (shapes[:, 0:1] * u * u + shapes[:, 2:3] * 2 * t * u + shapes[:, 4:5] * t * t) * w
    cy = (shapes[:, 1:2] * u * u + shapes[:, 3:4] * 2 * t * u + shapes[:, 5:6] * t * t) * h

    best_d2 = np.empty((n, n_px), dtype=np.float64)
    best_arg = np.empty((n, n_px), dtype=np.int64)
    block = max(1, _CHUNK_ELEMS // (n * s_max))
    for lo in range(0, n_px, block):
        hi = min(lo + block, n_px)
        dx = px[:, lo:hi, None] - cx[:, None, :]
        dy = py[:, lo:hi, None] - cy[:, None, :]
        d2 = dx * dx + dy * dy
        best_arg[:, lo:hi] = np.argmin(d2, axis=2)
        best_d2[:, lo:hi] = np.take_along_axis(
            d2, best_arg[:, lo:hi, None], axis=2
        )[:, :, 0]

    t_star = np.take_along_axis(t, best_arg, axis=1)
    radius = ((1.0 - t_star) * shapes[:, 6:7] + t_star * shapes[:, 7:8]) * min(h, w)
    return np.clip((radius - np.sqrt(best_d2)) / _AA_PX + 0.5, 0.0, 1.0)


def rasterize_batch(shapes: np.ndarray, h: int, w: int) -> np.ndarray:
    """Rasterize N stroke shapes over the full pixel grid, (N, h, w)."""
    if h < 1 or w < 1:
        raise ValueError(f"canvas must be at least 1x1, got {h}x{w}")
    jj, ii = np.meshgrid(np.arange(w), np.arange(h))
    px = (jj + 0.5).ravel()
    py = (ii + 0.5).ravel()
    n = np.asarray(shapes).shape[0]
    return coverage_at(shapes, px, py, h, w).reshape(n, h, w)


def rasterize_silhouette(shape: StrokeShape, h: int, w: int) -> np.ndarray:
    """Coverage map (h, w) of one stroke shape; values in [0, 1]."""
    return rasterize_batch(shape.as_array()[None, :], h, w)[0]


def expand_color(color: StrokeColor, h: int, w: int) -> np.ndarray:
    """Broadcast a stroke color to a constant (h, w, 3) layer."""
    if h < 1 or w < 1:
        raise ValueError(f"layer must be at least 1x1, got {h}x{w}")
    return np.broadcast_to(color.as_array(), (h, w, 3)).copy()


def composite_stroke(
    canvas: np.ndarray, silhouette: np.ndarray, color: StrokeColor
) -> np.ndarray:
    """Alpha-over: out = (1 - phi) * canvas + phi * color, per channel."""
    canvas = np.asarray(canvas, dtype=np.float64)
    sil = np.asarray(silhouette, dtype=np.float64)
    if canvas.shape[:2] != sil.shape:
        raise ValueError(
            f"canvas {canvas.shape[:2]} and silhouette {sil.shape} dims differ"
        )
    return (1.0 - sil[:, :, None]) * canvas + sil[:, :, None] * color.as_array()


def paint_strokes(canvas: np.ndarray, strokes) -> np.ndarray:
    """Composite a stroke sequence in order using the analytic rasterizer."""
    out = np.asarray(canvas, dtype=np.float64).copy()
    h, w = out.shape[:2]
    for stroke in strokes:
        sil = rasterize_silhouette(stroke.shape, h, w)
        out = composite_stroke(out, sil, stroke.color)
    return out


def random_stroke(rng: np.random.Generator, bounds: StrokeBounds = DEFAULT_BOUNDS) -> Stroke:
    """Sample all eleven parameters uniformly within the given bounds."""
    coords = rng.uniform(bounds.coord_min, bounds.coord_max, size=6)
    widths = rng.uniform(bounds.width_min, bounds.width_max, size=2)
    rgb = rng.uniform(0.0, 1.0, size=3)
    return Stroke(
        shape=StrokeShape(*coords, *widths),
        color=StrokeColor(*rgb),
    )
