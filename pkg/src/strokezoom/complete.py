"""Post-painting detail completion.

Painting reproduces shape and color but cannot reinvent texture, so each
cycle ends with a completion pass. Three completers are provided: identity
(no-op), a deterministic unsharp-mask enhancer, and a remote HTTP service
client so a heavyweight generative completer can be plugged in behind a
small JSON protocol without being bundled here.
"""

from __future__ import annotations

import base64
import io
import json
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .imageops import as_image

__all__ = [
    "CompletionRequest",
    "IdentityCompleter",
    "UnsharpCompleter",
    "RemoteCompleter",
    "RemoteError",
    "RemoteConnectionError",
    "RemoteTimeoutError",
    "RemoteProtocolError",
    "CompletionDimensionError",
    "complete",
    "extract_context",
    "encode_png_base64",
    "decode_png_base64",
]


class RemoteError(RuntimeError):
    """Base class for remote-completer failures."""


class RemoteConnectionError(RemoteError):
    """The completion endpoint could not be reached."""


class RemoteTimeoutError(RemoteError):
    """The completion request did not finish within the timeout."""


class RemoteProtocolError(RemoteError):
    """The service answered, but not with a valid completion response."""


class CompletionDimensionError(RemoteError):
    """The service returned an image with different dimensions."""


@dataclass(frozen=True)
class CompletionRequest:
    painted: np.ndarray
    context_text: str = ""
    cycle_index: int = 1
    scale: float = 2.0


@dataclass(frozen=True)
class IdentityCompleter:
    pass


@dataclass(frozen=True)
class UnsharpCompleter:
    radius: float = 2.0
    amount: float = 1.0

    def __post_init__(self):
        if self.radius < 1.0:
            raise ValueError(f"unsharp radius must be >= 1 pixel, got {self.radius}")
        if not 0.0 <= self.amount <= 4.0:
            raise ValueError(f"unsharp amount must be in [0, 4], got {self.amount}")


@dataclass(frozen=True)
class RemoteCompleter:
    endpoint: str
    timeout: float = 30.0


def extract_context(image: np.ndarray, configured: str | None = None) -> str:
    """Context text for completion: the configured string, or empty.

    The image argument is accepted for interface symmetry; no tagging
    model runs locally, so the text is purely user-supplied.
    """
    return configured or ""


def encode_png_base64(image: np.ndarray) -> str:
    """8-bit RGB PNG bytes of the image, base64 with standard padding."""
    from PIL import Image as PilImage

    img = as_image(image)
    raw = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    buf = io.BytesIO()
    PilImage.fromarray(raw, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_png_base64(data: str) -> np.ndarray:
    from PIL import Image as PilImage

    try:
        raw = base64.b64decode(data, validate=True)
        with PilImage.open(io.BytesIO(raw)) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except Exception as exc:
        raise RemoteProtocolError(f"response image is not decodable PNG: {exc}") from exc
    return arr


def _complete_remote(request: CompletionRequest, kind: RemoteCompleter) -> np.ndarray:
    body = json.dumps(
        {
            "image_png_b64": encode_png_base64(request.painted),
            "context_text": request.context_text,
            "cycle_index": int(request.cycle_index),
            "scale": float(request.scale),
        }
    ).encode("utf-8")
    url = kind.endpoint.rstrip("/") + "/complete"
    http_req = urllib.request.Request(
        url, data=body, headers={"Content-Type": "application/json"}, method="POST"
    )
    try:
        with urllib.request.urlopen(http_req, timeout=kind.timeout) as resp:
            payload = resp.read()
    except urllib.error.HTTPError as exc:
        raise RemoteProtocolError(f"completion service returned HTTP {exc.code}") from exc
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            raise RemoteTimeoutError(f"completion request timed out: {exc.reason}") from exc
        raise RemoteConnectionError(f"cannot reach completion service: {exc.reason}") from exc
    except (socket.timeout, TimeoutError) as exc:
        raise RemoteTimeoutError("completion request timed out") from exc

    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RemoteProtocolError(f"completion response is not JSON: {exc}") from exc
    if not isinstance(doc, dict) or "image_png_b64" not in doc:
        raise RemoteProtocolError("completion response lacks the image_png_b64 field")
    out = decode_png_base64(doc["image_png_b64"])
    if out.shape != np.asarray(request.painted).shape:
        raise CompletionDimensionError(
            f"service returned {out.shape[:2]}, expected {request.painted.shape[:2]}"
        )
    return out


def complete(request: CompletionRequest, kind) -> np.ndarray:
    """Run one completion pass; output dims always equal input dims."""
    painted = as_image(request.painted)
    if isinstance(kind, IdentityCompleter):
        return painted
    if isinstance(kind, UnsharpCompleter):
        if kind.amount == 0.0:
            return painted
        blurred = np.stack(
            [gaussian_filter(painted[:, :, c], sigma=kind.radius) for c in range(3)],
            axis=2,
        )
        return np.clip(painted + kind.amount * (painted - blurred), 0.0, 1.0)
    if isinstance(kind, RemoteCompleter):
        return _complete_remote(request, kind)
    raise TypeError(f"unknown completer kind: {kind!r}")
