"""Sequential stroke fitting: pick strokes one at a time so that each
composite strictly improves a score of the working canvas against the
target patch.

The proposer is a cross-entropy-method search over the eleven stroke
parameters: sample a population around the current mean, keep the elite
fraction by reward, refit mean and spread, repeat. The reward of a
candidate is the score difference its composite would produce, so summed
accepted rewards telescope to the total score improvement of the run.
The score function is pluggable; the default is negative mean squared
error, whose maximum is an exact reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .strokes import (
    WIDTH_MAX,
    WIDTH_MIN,
    Stroke,
    StrokeColor,
    StrokeShape,
    composite_stroke,
    rasterize_batch,
    rasterize_silhouette,
)

__all__ = [
    "ACCEPT_EPS",
    "AgentState",
    "CemConfig",
    "StrokeSequence",
    "neg_mse",
    "score",
    "reward",
    "initial_canvas",
    "propose_stroke",
    "decompose_patch",
]

# rewards at or below this are treated as float noise and skipped
ACCEPT_EPS = 1e-9

_PARAM_LO = np.array([0.0] * 6 + [WIDTH_MIN] * 2 + [0.0] * 3)
_PARAM_HI = np.array([1.0] * 6 + [WIDTH_MAX] * 2 + [1.0] * 3)


def neg_mse(canvas: np.ndarray, target: np.ndarray) -> float:
    """Negative mean squared error over all pixels and channels."""
    d = np.asarray(canvas, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return -float(np.mean(d * d))


def score(canvas: np.ndarray, target: np.ndarray, fn=None) -> float:
    """Evaluate a canvas against the target; higher is better."""
    canvas = np.asarray(canvas)
    target = np.asarray(target)
    if canvas.shape != target.shape:
        raise ValueError(f"canvas {canvas.shape} and target {target.shape} dims differ")
    return (fn or neg_mse)(canvas, target)


def reward(prev: np.ndarray, nxt: np.ndarray, target: np.ndarray, fn=None) -> float:
    """Score difference produced by one painting step."""
    return score(nxt, target, fn) - score(prev, target, fn)


@dataclass
class AgentState:
    """What the proposer sees: target patch, working canvas, step, budget.

    The canvas is held at the target's resolution.
    """

    target: np.ndarray = field(repr=False)
    canvas: np.ndarray = field(repr=False)
    step: int = 0
    budget: int = 20

    def __post_init__(self):
        if self.target.shape != self.canvas.shape:
            raise ValueError("target and canvas must share dims")
        if not 0 <= self.step <= self.budget:
            raise ValueError(f"step {self.step} outside [0, {self.budget}]")


@dataclass
class CemConfig:
    population: int = 64
    elite_frac: float = 0.125
    iterations: int = 10
    sigma_min: float = 1e-3
    init_sigma_scale: float = 0.5  # initial std as a fraction of each range

    @property
    def n_elite(self) -> int:
        return max(1, int(round(self.population * self.elite_frac)))


@dataclass
class StrokeSequence:
    """Accepted strokes in painting order with their accepted rewards."""

    strokes: list
    rewards: list

    def __len__(self) -> int:
        return len(self.strokes)


def initial_canvas(target: np.ndarray, blank: bool = False) -> np.ndarray:
    """Starting canvas: the target's mean color, or black when blank."""
    target = np.asarray(target, dtype=np.float64)
    if blank:
        return np.zeros_like(target)
    return np.broadcast_to(target.mean(axis=(0, 1)), target.shape).copy()


def _seed_color(target: np.ndarray, canvas: np.ndarray) -> np.ndarray:
    """Mean target color weighted by the per-pixel residual magnitude."""
    resid = np.abs(target - canvas).mean(axis=2)
    total = resid.sum()
    if total <= 0.0:
        return target.mean(axis=(0, 1))
    return (target * resid[:, :, None]).sum(axis=(0, 1)) / total


def _candidate_rewards(params: np.ndarray, state: AgentState, fn) -> np.ndarray:
    """Reward each (N, 11) candidate would earn if composited now."""
    h, w = state.target.shape[:2]
    sils = rasterize_batch(params[:, :8], h, w)
    colors = params[:, 8:11]
    outs = (1.0 - sils[:, :, :, None]) * state.canvas[None] \
        + sils[:, :, :, None] * colors[:, None, None, :]
    if fn is None or fn is neg_mse:
        d = outs - state.target[None]
        scores = -np.mean(d * d, axis=(1, 2, 3))
        base = neg_mse(state.canvas, state.target)
    else:
        scores = np.array([fn(out, state.target) for out in outs])
        base = fn(state.canvas, state.target)
    return scores - base


def propose_stroke(state: AgentState, cem: CemConfig,
                   rng: np.random.Generator, fn=None):
    """Search for the stroke with the highest one-step reward.

    Returns (stroke, expected_reward). The search mean starts at the
    bounds midpoint with the color seeded from the residual-weighted
    target color; each iteration samples a population, scores it, and
    refits mean/std on the stable-sorted elites. Deterministic for a
    given generator state. The returned stroke may not improve the
    canvas; callers filter on the reward.
    """
    mean = (_PARAM_LO + _PARAM_HI) / 2.0
    mean[8:11] = _seed_color(state.target, state.canvas)
    sigma = (_PARAM_HI - _PARAM_LO) * cem.init_sigma_scale

    best_params = None
    best_reward = -np.inf
    for _ in range(cem.iterations):
        raw = rng.normal(mean, sigma, size=(cem.population, 11))
        cands = np.clip(raw, _PARAM_LO, _PARAM_HI)
        rewards = _candidate_rewards(cands, state, fn)
        order = np.argsort(-rewards, kind="stable")
        if rewards[order[0]] > best_reward:
            best_reward = float(rewards[order[0]])
            best_params = cands[order[0]].copy()
        elites = cands[order[: cem.n_elite]]
        mean = elites.mean(axis=0)
        sigma = np.maximum(elites.std(axis=0), cem.sigma_min)

    stroke = Stroke(
        shape=StrokeShape(*best_params[:8]),
        color=StrokeColor(*best_params[8:11]),
    )
    return stroke, best_reward


def decompose_patch(target: np.ndarray, budget: int = 20, fn=None,
                    seed: int = 0, cem: CemConfig | None = None,
                    blank_canvas: bool = False) -> StrokeSequence:
    """Fit up to `budget` strokes to one patch.

    Each of the `budget` slots runs one proposal; the stroke is accepted
    and composited only when its recomputed reward exceeds ACCEPT_EPS,
    otherwise the slot is consumed without painting. The accepted rewards
    telescope: their sum equals the total score improvement of the run.
    """
    target = np.asarray(target, dtype=np.float64)
    cem = cem or CemConfig()
    rng = np.random.default_rng(seed)  # int seed or a spawned SeedSequence
    canvas = initial_canvas(target, blank=blank_canvas)
    h, w = target.shape[:2]

    strokes, rewards = [], []
    for step in range(1, budget + 1):
        state = AgentState(target=target, canvas=canvas, step=step, budget=budget)
        stroke, _est = propose_stroke(state, cem, rng, fn)
        sil = rasterize_silhouette(stroke.shape, h, w)
        nxt = composite_stroke(canvas, sil, stroke.color)
        r = reward(canvas, nxt, target, fn)
        if r > ACCEPT_EPS:
            strokes.append(stroke)
            rewards.append(r)
            canvas = nxt
    return StrokeSequence(strokes=strokes, rewards=rewards)
