"""Observed pop-up records: what was seen, what triggered it, how it went away."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np

from .detector import PowDetection
from .dismissal import ClickTarget, DismissalOutcome, Tier
from .gui import Checked, GuiNode, Rect, ScreenSnapshot, nodes_within

PROMOTIONAL = "promotional"


class OcrEngine(Protocol):
    """Text extraction for image-only captures (no hierarchy text)."""

    def extract(self, image: np.ndarray, region: Rect) -> list[str]:
        ...


@dataclass(frozen=True)
class TriggerContext:
    prev_action_kind: str  # "tap" | "back" | "restart" | "none"
    prev_component_text: str = ""
    spontaneous: bool = False

    def to_dict(self) -> dict:
        return {
            "prev_action_kind": self.prev_action_kind,
            "prev_component_text": self.prev_component_text,
            "spontaneous": self.spontaneous,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TriggerContext":
        return cls(d["prev_action_kind"], d.get("prev_component_text", ""), bool(d.get("spontaneous", False)))


@dataclass(frozen=True)
class PreCheckedToggle:
    context_text: str
    bounds: Rect


@dataclass
class PowRecord:
    id: str
    detection: PowDetection
    texts: list[str]
    trigger: TriggerContext
    dismissal: DismissalOutcome
    source_app_package: str
    dialog_package: str
    pre_checked_toggles: list[PreCheckedToggle] = field(default_factory=list)
    targets: list[ClickTarget] = field(default_factory=list)
    screenshot_ref: str = ""
    screenshot: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    hierarchy: Optional[GuiNode] = field(default=None, repr=False, compare=False)
    state_id: Optional[int] = None
    occurrences: int = 1
    chain_parent: Optional[str] = None
    labels: Optional[dict] = None

    def __post_init__(self) -> None:
        if not self.dialog_package:
            raise ValueError("dialog_package must be non-empty")

    @property
    def in_box_targets(self) -> list[ClickTarget]:
        return [t for t in self.targets if t.tier is Tier.IN_BOX_CLICKABLE]

    def dedup_key(self) -> tuple:
        return (self.dialog_package, self.detection.bbox, tuple(self.texts))

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "id": self.id,
            "screenshot_ref": self.screenshot_ref,
            "detection": self.detection.to_dict(),
            "texts": list(self.texts),
            "trigger": self.trigger.to_dict(),
            "pre_checked_toggles": [
                {"context_text": t.context_text, "bounds": t.bounds.to_list()} for t in self.pre_checked_toggles
            ],
            "targets": [t.to_dict() for t in self.targets],
            "dismissal": self.dismissal.to_dict(),
            "source_app_package": self.source_app_package,
            "dialog_package": self.dialog_package,
            "state_id": self.state_id,
            "occurrences": self.occurrences,
            "chain_parent": self.chain_parent,
            "labels": self.labels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PowRecord":
        return cls(
            id=d["id"],
            detection=PowDetection.from_dict(d["detection"]),
            texts=list(d["texts"]),
            trigger=TriggerContext.from_dict(d["trigger"]),
            dismissal=DismissalOutcome.from_dict(d["dismissal"]),
            source_app_package=d["source_app_package"],
            dialog_package=d["dialog_package"],
            pre_checked_toggles=[
                PreCheckedToggle(t["context_text"], Rect.from_list(t["bounds"])) for t in d.get("pre_checked_toggles", [])
            ],
            targets=[ClickTarget.from_dict(t) for t in d.get("targets", [])],
            screenshot_ref=d.get("screenshot_ref", ""),
            state_id=d.get("state_id"),
            occurrences=d.get("occurrences", 1),
            chain_parent=d.get("chain_parent"),
            labels=d.get("labels"),
        )


# --------------------------------------------------------------------------
# extraction from a snapshot

def pow_texts(root: GuiNode, bbox: Rect) -> list[str]:
    return [n.text for n in nodes_within(root, bbox, lambda n: bool(n.text))]


def dialog_package_of(root: GuiNode, bbox: Rect, fallback: str) -> str:
    """Package of the node that best matches the pop-up box."""
    best, best_iou = None, 0.0
    for node in root.iter_preorder():
        iou = node.bounds.iou(bbox)
        if iou > best_iou:
            best, best_iou = node, iou
    if best is not None and best_iou >= 0.5 and best.package_id:
        return best.package_id
    inside = nodes_within(root, bbox, lambda n: bool(n.package_id))
    if inside:
        return inside[0].package_id
    return fallback or root.package_id or "unknown"


def _center_dist(a: Rect, b: Rect) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


def pre_checked_toggles(root: GuiNode, bbox: Rect) -> list[PreCheckedToggle]:
    """Checked toggles inside the pop-up with the text that labels them.

    A toggle's own text wins; otherwise the nearest text node whose center
    lies within twice the toggle height.
    """
    inside = nodes_within(root, bbox)
    texts = [n for n in inside if n.text]
    out = []
    for node in inside:
        if node.checked is not Checked.CHECKED:
            continue
        context = node.text
        if not context:
            limit = 2 * max(node.bounds.height, 1)
            near = [(t, _center_dist(t.bounds, node.bounds)) for t in texts if t is not node]
            near = [(t, d) for t, d in near if d <= limit]
            if near:
                context = min(near, key=lambda td: td[1])[0].text
        out.append(PreCheckedToggle(context, node.bounds))
    return out


def build_record(
    record_id: str,
    snapshot: ScreenSnapshot,
    detection: PowDetection,
    trigger: TriggerContext,
    dismissal: DismissalOutcome,
    app_package: str,
    targets: Optional[list[ClickTarget]] = None,
    ocr: Optional[OcrEngine] = None,
    state_id: Optional[int] = None,
    chain_parent: Optional[str] = None,
) -> PowRecord:
    texts = pow_texts(snapshot.root, detection.bbox)
    if not texts and ocr is not None:
        texts = list(ocr.extract(snapshot.screenshot, detection.bbox))
    return PowRecord(
        id=record_id,
        detection=detection,
        texts=texts,
        trigger=trigger,
        dismissal=dismissal,
        source_app_package=app_package,
        dialog_package=dialog_package_of(snapshot.root, detection.bbox, app_package),
        pre_checked_toggles=pre_checked_toggles(snapshot.root, detection.bbox),
        targets=list(targets if targets is not None else dismissal.plan),
        screenshot=snapshot.screenshot,
        hierarchy=snapshot.root,
        state_id=state_id,
        chain_parent=chain_parent,
    )
