"""Pop-up window identification.

A detection backend proposes candidate boxes; the opacity check then keeps
a candidate only if the area outside it is dominated by the dimmed
background that modal overlays paint behind themselves.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
import tempfile
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol, Sequence, Union

import numpy as np
from scipy import ndimage

from .gui import Rect, ScreenSnapshot


class BackendFailure(RuntimeError):
    """The detection backend could not produce an answer for this image."""


@dataclass(frozen=True)
class HsvInterval:
    h_min: float = 0.0
    h_max: float = 360.0
    s_min: float = 0.0
    s_max: float = 0.35
    v_min: float = 0.0
    v_max: float = 0.45

    def __post_init__(self) -> None:
        if not (self.h_min <= self.h_max and self.s_min <= self.s_max and self.v_min <= self.v_max):
            raise ValueError(f"empty channel range in {self!r}")

    @property
    def constrains_hue(self) -> bool:
        return self.h_min > 0.0 or self.h_max < 360.0

    def contains(self, h: float, s: float, v: float) -> bool:
        return (
            self.h_min <= h <= self.h_max
            and self.s_min <= s <= self.s_max
            and self.v_min <= v <= self.v_max
        )

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict) -> "HsvInterval":
        return cls(**{k: float(v) for k, v in data.items()})


DEFAULT_INTERVAL = HsvInterval()
DEFAULT_TAU = 0.5

IntervalSpec = Union[HsvInterval, Sequence[HsvInterval]]


class ButtonKind(str, Enum):
    CONFIRMATION = "confirmation"
    EXIT = "exit"


@dataclass(frozen=True)
class DetectedButton:
    kind: ButtonKind
    bbox: Rect
    confidence: float = 1.0


@dataclass(frozen=True)
class PowDetection:
    bbox: Rect
    confidence: float
    buttons: tuple[DetectedButton, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence outside [0, 1]")
        for b in self.buttons:
            if not 0.0 <= b.confidence <= 1.0:
                raise ValueError("button confidence outside [0, 1]")
            if not b.bbox.intersects(self.bbox):
                raise ValueError(f"button {b.bbox} does not intersect pop-up {self.bbox}")

    def to_dict(self) -> dict:
        return {
            "bbox": self.bbox.to_list(),
            "confidence": self.confidence,
            "buttons": [
                {"kind": b.kind.value, "bbox": b.bbox.to_list(), "confidence": b.confidence}
                for b in self.buttons
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PowDetection":
        return cls(
            bbox=Rect.from_list(data["bbox"]),
            confidence=float(data["confidence"]),
            buttons=tuple(
                DetectedButton(ButtonKind(b["kind"]), Rect.from_list(b["bbox"]), float(b.get("confidence", 1.0)))
                for b in data.get("buttons", [])
            ),
        )


@dataclass
class ShadowMask:
    mask: np.ndarray
    ratio_overall: float


class DetectorBackend(Protocol):
    def detect(self, image: np.ndarray) -> list[PowDetection]:
        ...


# --------------------------------------------------------------------------
# colour space

def rgb_to_hsv(pixel: Sequence[int]) -> tuple[float, float, float]:
    """Hexcone RGB -> HSV for one 8-bit pixel; h in degrees."""
    r, g, b = (int(c) / 255.0 for c in pixel)
    hi, lo = max(r, g, b), min(r, g, b)
    v = hi
    if hi == 0.0:
        return 0.0, 0.0, 0.0
    delta = hi - lo
    s = delta / hi
    if delta == 0.0:
        return 0.0, s, v
    if hi == r:
        h = 60.0 * (((g - b) / delta) % 6.0)
    elif hi == g:
        h = 60.0 * ((b - r) / delta + 2.0)
    else:
        h = 60.0 * ((r - g) / delta + 4.0)
    return h % 360.0, s, v


def _hue_array(rgb: np.ndarray, hi: np.ndarray, delta: np.ndarray) -> np.ndarray:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    safe = np.where(delta == 0, 1.0, delta)
    h = np.where(
        hi == r,
        np.mod((g - b) / safe, 6.0),
        np.where(hi == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    return np.where(delta == 0, 0.0, np.mod(60.0 * h, 360.0))


def rgb_to_hsv_array(image: np.ndarray) -> np.ndarray:
    """Vectorised :func:`rgb_to_hsv` over an HxWx3 uint8 raster."""
    rgb = image.astype(np.float64) / 255.0
    hi = rgb.max(axis=-1)
    delta = hi - rgb.min(axis=-1)
    s = np.where(hi == 0, 0.0, delta / np.where(hi == 0, 1.0, hi))
    return np.stack([_hue_array(rgb, hi, delta), s, hi], axis=-1)


def _as_intervals(interval: IntervalSpec) -> tuple[HsvInterval, ...]:
    if isinstance(interval, HsvInterval):
        return (interval,)
    return tuple(interval)


def _interval_mask(image: np.ndarray, intervals: tuple[HsvInterval, ...]) -> np.ndarray:
    # channel-plane max/min is much faster than reducing over the last axis
    r, g, b = image[..., 0], image[..., 1], image[..., 2]
    hi = np.maximum(np.maximum(r, g), b)
    lo = np.minimum(np.minimum(r, g), b)
    v = hi / 255.0
    s = (hi - lo) / np.maximum(hi, 1).astype(np.float64)
    out = np.zeros(hi.shape, dtype=bool)
    hue = None
    for iv in intervals:
        m = (s >= iv.s_min) & (s <= iv.s_max) & (v >= iv.v_min) & (v <= iv.v_max)
        if iv.constrains_hue:
            if hue is None:
                rgb = image.astype(np.float64) / 255.0
                hmax = rgb.max(axis=-1)
                hue = _hue_array(rgb, hmax, hmax - rgb.min(axis=-1))
            m &= (hue >= iv.h_min) & (hue <= iv.h_max)
        out |= m
    return out


def shadow_mask(image: np.ndarray, interval: IntervalSpec = DEFAULT_INTERVAL) -> ShadowMask:
    mask = _interval_mask(image, _as_intervals(interval))
    return ShadowMask(mask=mask, ratio_overall=float(mask.mean()))


def outside_shadow_ratio(mask: np.ndarray, bbox: Rect) -> Optional[float]:
    """Shadow fraction over pixels outside ``bbox``; None when nothing is outside."""
    total = mask.size
    inside = mask[bbox.top:bbox.bottom, bbox.left:bbox.right]
    outside = total - inside.size
    if outside <= 0:
        return None
    return float(mask.sum() - inside.sum()) / outside


def opacity_verify(
    image: np.ndarray,
    bbox: Rect,
    interval: IntervalSpec = DEFAULT_INTERVAL,
    tau: float = DEFAULT_TAU,
    mask: Optional[np.ndarray] = None,
) -> bool:
    if mask is None:
        mask = shadow_mask(image, interval).mask
    ratio = outside_shadow_ratio(mask, bbox)
    return ratio is not None and ratio >= tau


# --------------------------------------------------------------------------
# geometric backend

_FOUR = ndimage.generate_binary_structure(2, 1)


def geometric_detect(
    image: np.ndarray,
    interval: IntervalSpec = DEFAULT_INTERVAL,
    min_area_fraction: float = 0.01,
    mask: Optional[np.ndarray] = None,
    min_backdrop_fraction: float = 0.2,
) -> list[PowDetection]:
    """Bright regions fully enclosed by dimmed background.

    Each 4-connected component of non-shadow pixels that covers at least
    ``min_area_fraction`` of the frame is scored by the fraction of its
    one-pixel outer ring that is shadow; off-frame pixels are not part of
    the ring, so edge-flush sheets still qualify. Only fully enclosed
    components leaving at least ``min_backdrop_fraction`` of the frame
    outside their box are emitted; content under a dark toolbar is
    enclosed too but has almost no backdrop. Components lying inside
    another emitted box are widgets of that box and are dropped.
    """
    if mask is None:
        mask = shadow_mask(image, interval).mask
    h, w = mask.shape
    labels, count = ndimage.label(~mask, structure=_FOUR)
    if count == 0:
        return []
    min_area = min_area_fraction * h * w
    candidates = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        ys, xs = sl
        # one-pixel margin so the dilated ring fits
        y0, y1 = ys.start - 1, ys.stop + 1
        x0, x1 = xs.start - 1, xs.stop + 1
        comp = np.zeros((y1 - y0, x1 - x0), dtype=bool)
        comp[1:-1, 1:-1] = labels[sl] == idx
        area = int(comp.sum())
        if area < min_area:
            continue
        in_frame = np.zeros_like(comp)
        cy0, cx0 = max(y0, 0), max(x0, 0)
        cy1, cx1 = min(y1, h), min(x1, w)
        in_frame[cy0 - y0:cy1 - y0, cx0 - x0:cx1 - x0] = True
        ring = ndimage.binary_dilation(comp, structure=_FOUR) & ~comp & in_frame
        shadow = np.zeros_like(comp)
        shadow[cy0 - y0:cy1 - y0, cx0 - x0:cx1 - x0] = mask[cy0:cy1, cx0:cx1]
        ring_total = int(ring.sum())
        confidence = float((ring & shadow).sum()) / ring_total if ring_total else 0.0
        if confidence < 1.0:
            continue
        bbox = Rect(xs.start, ys.start, xs.stop, ys.stop)
        if h * w - bbox.area < min_backdrop_fraction * h * w:
            continue
        candidates.append((confidence, area, bbox))
    candidates.sort(key=lambda c: (-c[0], -c[1], c[2].to_list()))
    kept: list[PowDetection] = []
    for confidence, _area, bbox in candidates:
        if any(k.bbox.contains_rect(bbox) for k in kept):
            continue
        kept.append(PowDetection(bbox=bbox, confidence=confidence))
    return kept


@dataclass
class GeometricBackend:
    interval: IntervalSpec = DEFAULT_INTERVAL
    min_area_fraction: float = 0.01
    min_backdrop_fraction: float = 0.2

    def detect(self, image: np.ndarray) -> list[PowDetection]:
        return geometric_detect(image, self.interval, self.min_area_fraction,
                                min_backdrop_fraction=self.min_backdrop_fraction)


class PipeBackend:
    """Detection served by an external process over newline-delimited JSON.

    Each request is one line ``{"png": <path>, "width": W, "height": H}``;
    the process answers with one line ``{"detections": [...]}`` where each
    entry is a :meth:`PowDetection.to_dict` record.
    """

    def __init__(self, argv: Sequence[str], workdir: Optional[Path] = None, timeout: float = 30.0):
        self.argv = list(argv)
        self.timeout = timeout
        self._workdir = Path(workdir or tempfile.mkdtemp(prefix="popscan-backend-"))
        self._proc: Optional[subprocess.Popen] = None
        self._counter = 0

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def detect(self, image: np.ndarray) -> list[PowDetection]:
        from PIL import Image

        self._counter += 1
        path = self._workdir / f"frame-{self._counter:06d}.png"
        Image.fromarray(image).save(path)
        request = {"png": str(path), "width": int(image.shape[1]), "height": int(image.shape[0])}
        proc = self._ensure()
        try:
            proc.stdin.write(json.dumps(request) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise BackendFailure(f"backend pipe broken: {exc}") from exc
        if not line:
            raise BackendFailure("backend closed its output")
        try:
            payload = json.loads(line)
            dets = [PowDetection.from_dict(d) for d in payload["detections"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendFailure(f"bad backend response: {line.strip()[:200]}") from exc
        return sorted(dets, key=lambda d: -d.confidence)

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=self.timeout)
            self._proc = None


# --------------------------------------------------------------------------
# identification

def identify_pow(
    snapshot: ScreenSnapshot | np.ndarray,
    backend: Optional[DetectorBackend] = None,
    interval: IntervalSpec = DEFAULT_INTERVAL,
    tau: float = DEFAULT_TAU,
) -> Optional[PowDetection]:
    """Highest-confidence backend detection that passes the opacity check."""
    image = snapshot.screenshot if isinstance(snapshot, ScreenSnapshot) else snapshot
    if backend is None:
        mask = shadow_mask(image, interval).mask
        detections = geometric_detect(image, interval, mask=mask)
    else:
        detections = backend.detect(image)
        mask = shadow_mask(image, interval).mask if detections else None
    for det in detections:
        if opacity_verify(image, det.bbox, interval, tau, mask=mask):
            return det
    return None


@dataclass
class DetectorConfig:
    """Detection settings shared by dismissal and exploration."""

    interval: IntervalSpec = DEFAULT_INTERVAL
    tau: float = DEFAULT_TAU
    backend: Optional[DetectorBackend] = None
    cache_size: int = 128
    _cache: OrderedDict = field(default_factory=OrderedDict, init=False, repr=False, compare=False)

    def identify(self, snapshot: ScreenSnapshot) -> Optional[PowDetection]:
        """Memoised on the frame bytes: exploration revisits identical screens constantly."""
        image = snapshot.screenshot if isinstance(snapshot, ScreenSnapshot) else snapshot
        key = hashlib.blake2b(np.ascontiguousarray(image).data, digest_size=16).digest() + repr(image.shape).encode()
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        found = identify_pow(image, self.backend, self.interval, self.tau)
        if self.cache_size > 0:
            self._cache[key] = found
            if len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return found

    def to_dict(self) -> dict:
        intervals = _as_intervals(self.interval)
        return {
            "intervals": [iv.to_dict() for iv in intervals],
            "tau": self.tau,
            "backend": "pipe" if isinstance(self.backend, PipeBackend) else "geometric",
            "backend_argv": list(self.backend.argv) if isinstance(self.backend, PipeBackend) else [],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorConfig":
        intervals = [HsvInterval.from_dict(iv) for iv in data.get("intervals", [])] or [DEFAULT_INTERVAL]
        backend = PipeBackend(data["backend_argv"]) if data.get("backend") == "pipe" else None
        return cls(
            interval=intervals[0] if len(intervals) == 1 else tuple(intervals),
            tau=float(data.get("tau", DEFAULT_TAU)),
            backend=backend,
        )
