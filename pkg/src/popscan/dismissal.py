"""Click-plan construction and execution for dismissing a detected pop-up."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

from .detector import ButtonKind, DetectorConfig, PowDetection
from .device import DeviceDriver
from .gui import GuiNode, Rect, ScreenSnapshot, is_actionable, node_at, nodes_within

DEFAULT_BUDGET = 8
DEDUP_RADIUS = 8
CHAIN_IOU = 0.3


class Tier(IntEnum):
    MODEL_EXIT = 0
    MODEL_CONFIRM = 1
    IN_BOX_CLICKABLE = 2


@dataclass(frozen=True)
class ClickTarget:
    point: tuple[int, int]
    tier: Tier
    source_text: str = ""
    bbox: Optional[Rect] = None

    def to_dict(self) -> dict:
        return {
            "point": list(self.point),
            "tier": self.tier.name.lower(),
            "source_text": self.source_text,
            "bbox": self.bbox.to_list() if self.bbox else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClickTarget":
        return cls(
            point=(int(d["point"][0]), int(d["point"][1])),
            tier=Tier[d["tier"].upper()],
            source_text=d.get("source_text", ""),
            bbox=Rect.from_list(d["bbox"]) if d.get("bbox") else None,
        )


@dataclass
class ChainedPow:
    """A different pop-up that replaced the one being dismissed."""

    snapshot: ScreenSnapshot
    detection: PowDetection
    trigger_text: str
    clicks_before: int


@dataclass
class DismissalOutcome:
    dismissed: bool = False
    clicks_used: int = 0
    back_used: bool = False
    forced_action_evidence: bool = False
    observations: list[tuple[ScreenSnapshot, Optional[PowDetection]]] = field(default_factory=list)
    plan: list[ClickTarget] = field(default_factory=list)
    taps: list[ClickTarget] = field(default_factory=list)
    had_model_exit: bool = False
    dismissed_by_back: bool = False
    chain: list[ChainedPow] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "dismissed": self.dismissed,
            "clicks_used": self.clicks_used,
            "back_used": self.back_used,
            "forced_action_evidence": self.forced_action_evidence,
            "had_model_exit": self.had_model_exit,
            "dismissed_by_back": self.dismissed_by_back,
            "plan": [t.to_dict() for t in self.plan],
            "taps": [t.to_dict() for t in self.taps],
            "observations": [
                {"capture_time": s.capture_time, "detection": d.to_dict() if d else None}
                for s, d in self.observations
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DismissalOutcome":
        return cls(
            dismissed=d["dismissed"],
            clicks_used=d["clicks_used"],
            back_used=d["back_used"],
            forced_action_evidence=d["forced_action_evidence"],
            had_model_exit=d.get("had_model_exit", False),
            dismissed_by_back=d.get("dismissed_by_back", False),
            plan=[ClickTarget.from_dict(t) for t in d.get("plan", [])],
            taps=[ClickTarget.from_dict(t) for t in d.get("taps", [])],
        )


def _text_under(root: GuiNode, x: int, y: int) -> str:
    node = node_at(root, x, y, predicate=lambda n: bool(n.text))
    return node.text if node else ""


def _near(a: tuple[int, int], b: tuple[int, int], radius: int = DEDUP_RADIUS) -> bool:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1])) <= radius


def _inside_screen(point: tuple[int, int], dims: tuple[int, int]) -> tuple[int, int]:
    w, h = dims
    return (min(max(point[0], 0), w - 1), min(max(point[1], 0), h - 1))


def build_click_plan(snapshot: ScreenSnapshot, detection: PowDetection) -> list[ClickTarget]:
    """Exit buttons, then confirmation buttons, then in-box clickables.

    Model buttons are ordered by descending confidence within their tier;
    hierarchy clickables keep pre-order. A target within 8 px (Chebyshev)
    of an earlier one is dropped.
    """
    dims = snapshot.dims
    raw: list[ClickTarget] = []
    for kind, tier in ((ButtonKind.EXIT, Tier.MODEL_EXIT), (ButtonKind.CONFIRMATION, Tier.MODEL_CONFIRM)):
        buttons = sorted((b for b in detection.buttons if b.kind == kind), key=lambda b: -b.confidence)
        for b in buttons:
            pt = _inside_screen(b.bbox.center, dims)
            raw.append(ClickTarget(pt, tier, _text_under(snapshot.root, *pt), b.bbox))
    for node in nodes_within(snapshot.root, detection.bbox, is_actionable):
        pt = _inside_screen(node.bounds.center, dims)
        raw.append(ClickTarget(pt, Tier.IN_BOX_CLICKABLE, node.first_text(), node.bounds))
    plan: list[ClickTarget] = []
    for target in raw:
        if any(_near(target.point, kept.point) for kept in plan):
            continue
        plan.append(target)
    return plan


def dismiss(
    device: DeviceDriver,
    initial: tuple[ScreenSnapshot, PowDetection],
    budget: int = DEFAULT_BUDGET,
    detector: Optional[DetectorConfig] = None,
) -> DismissalOutcome:
    """Work through the click plan until the pop-up is gone or the budget runs out.

    A detection overlapping the previous one with IoU below 0.3 is a new
    pop-up; the plan restarts against it within the same budget. When taps
    are exhausted one back press is tried; a pop-up surviving that is
    recorded as forced-action evidence.
    """
    if budget < 1:
        raise ValueError("click budget must be >= 1")
    detector = detector or DetectorConfig()
    snapshot, current = initial
    out = DismissalOutcome(observations=[(snapshot, current)])
    plan = build_click_plan(snapshot, current)
    out.plan = list(plan)
    out.had_model_exit = any(t.tier is Tier.MODEL_EXIT for t in plan)
    tapped: set[tuple[int, int]] = set()
    cursor = 0
    while out.clicks_used < budget:
        while cursor < len(plan) and plan[cursor].point in tapped:
            cursor += 1
        if cursor >= len(plan):
            break
        target = plan[cursor]
        cursor += 1
        device.tap(*target.point)
        tapped.add(target.point)
        out.taps.append(target)
        out.clicks_used += 1
        snapshot = device.capture()
        found = detector.identify(snapshot)
        out.observations.append((snapshot, found))
        if found is None:
            out.dismissed = True
            return out
        if found.bbox.iou(current.bbox) < CHAIN_IOU:
            out.chain.append(ChainedPow(snapshot, found, target.source_text, out.clicks_used))
            plan = build_click_plan(snapshot, found)
            out.plan.extend(plan)
            cursor = 0
        current = found
    device.back()
    out.back_used = True
    snapshot = device.capture()
    found = detector.identify(snapshot)
    out.observations.append((snapshot, found))
    if found is None:
        out.dismissed = True
        out.dismissed_by_back = True
    else:
        out.forced_action_evidence = True
    return out
