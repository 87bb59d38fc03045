"""Typed UI hierarchy model and the UIAutomator dump parser.

Every other module reads screens through the types defined here. The
parser accepts the ``window_dump.xml`` dialect produced by
``uiautomator dump``; the JSON mirror (:func:`node_to_dict` /
:func:`node_from_dict`) is the canonical form written to event logs.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Optional
from xml.sax.saxutils import quoteattr

import numpy as np


class MalformedDocument(ValueError):
    """The hierarchy dump is structurally broken (corrupt capture)."""


@dataclass(frozen=True, order=True)
class Rect:
    left: int
    top: int
    right: int
    bottom: int

    def __post_init__(self) -> None:
        if self.right < self.left or self.bottom < self.top:
            raise ValueError(f"inverted rect {self!r}")
        if min(self.left, self.top) < 0:
            raise ValueError(f"negative coordinate in {self!r}")

    @property
    def width(self) -> int:
        return self.right - self.left

    @property
    def height(self) -> int:
        return self.bottom - self.top

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> tuple[int, int]:
        return ((self.left + self.right) // 2, (self.top + self.bottom) // 2)

    def strictly_contains_point(self, x: float, y: float) -> bool:
        return self.left < x < self.right and self.top < y < self.bottom

    def contains_point(self, x: float, y: float) -> bool:
        return self.left <= x < self.right and self.top <= y < self.bottom

    def contains_rect(self, other: "Rect") -> bool:
        return (
            self.left <= other.left
            and self.top <= other.top
            and other.right <= self.right
            and other.bottom <= self.bottom
        )

    def intersection(self, other: "Rect") -> int:
        w = min(self.right, other.right) - max(self.left, other.left)
        h = min(self.bottom, other.bottom) - max(self.top, other.top)
        return max(w, 0) * max(h, 0)

    def intersects(self, other: "Rect") -> bool:
        return self.intersection(other) > 0

    def iou(self, other: "Rect") -> float:
        inter = self.intersection(other)
        union = self.area + other.area - inter
        return inter / union if union else 0.0

    def clamp(self, width: int, height: int) -> "Rect":
        return Rect(
            min(self.left, width),
            min(self.top, height),
            min(self.right, width),
            min(self.bottom, height),
        )

    def to_list(self) -> list[int]:
        return [self.left, self.top, self.right, self.bottom]

    @classmethod
    def from_list(cls, values) -> "Rect":
        left, top, right, bottom = (int(v) for v in values)
        return cls(left, top, right, bottom)


class Checked(str, Enum):
    CHECKED = "checked"
    UNCHECKED = "unchecked"
    NOT_CHECKABLE = "not_checkable"


# Classes treated as toggles even when the dump omits ``checkable``.
TOGGLE_CLASS_HINTS = ("CheckBox", "Switch", "ToggleButton", "RadioButton", "CheckedTextView")


@dataclass(frozen=True)
class GuiNode:
    class_name: str = ""
    text: str = ""
    package_id: str = ""
    bounds: Rect = Rect(0, 0, 0, 0)
    clickable: bool = False
    enabled: bool = False
    checked: Checked = Checked.NOT_CHECKABLE
    children: tuple["GuiNode", ...] = ()

    def iter_preorder(self) -> Iterator["GuiNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def first_text(self) -> str:
        """Own text, else the first non-empty descendant text in pre-order."""
        for node in self.iter_preorder():
            if node.text:
                return node.text
        return ""


@dataclass(frozen=True, eq=False)
class ScreenSnapshot:
    root: GuiNode
    screenshot: np.ndarray  # H x W x 3, uint8
    activity_name: str = ""
    app_package: str = ""
    capture_time: int = 0  # monotonic ms

    def __post_init__(self) -> None:
        shot = self.screenshot
        if shot.ndim != 3 or shot.shape[2] != 3 or shot.shape[0] == 0 or shot.shape[1] == 0:
            raise ValueError(f"screenshot must be a non-empty HxWx3 raster, got {shot.shape}")

    @property
    def dims(self) -> tuple[int, int]:
        return (self.screenshot.shape[1], self.screenshot.shape[0])


# --------------------------------------------------------------------------
# parsing

_BOUNDS_RE = re.compile(r"^\s*\[(-?\d+),(-?\d+)\]\[(-?\d+),(-?\d+)\]\s*$")


def _parse_bool(value: Optional[str]) -> bool:
    return (value or "").strip().lower() == "true"


def _parse_bounds(raw: Optional[str], width: int, height: int) -> Rect:
    if raw is None or raw == "":
        return Rect(0, 0, 0, 0)
    m = _BOUNDS_RE.match(raw)
    if not m:
        raise MalformedDocument(f"unparseable bounds {raw!r}")
    left, top, right, bottom = (int(g) for g in m.groups())
    if right < left or bottom < top:
        raise MalformedDocument(f"inverted bounds {raw!r}")
    clamp = lambda v, hi: min(max(v, 0), hi)  # noqa: E731
    return Rect(clamp(left, width), clamp(top, height), clamp(right, width), clamp(bottom, height))


def _parse_checked(attrs: dict, class_name: str) -> Checked:
    checkable = attrs.get("checkable")
    if checkable is None:
        is_toggle = any(hint in class_name for hint in TOGGLE_CLASS_HINTS)
    else:
        is_toggle = _parse_bool(checkable)
    if not is_toggle:
        return Checked.NOT_CHECKABLE
    return Checked.CHECKED if _parse_bool(attrs.get("checked")) else Checked.UNCHECKED


def _build(elem: ET.Element, width: int, height: int) -> GuiNode:
    attrs = elem.attrib
    class_name = attrs.get("class", "")
    children = tuple(_build(child, width, height) for child in elem if child.tag == "node")
    return GuiNode(
        class_name=class_name,
        text=attrs.get("text", ""),
        package_id=attrs.get("package", ""),
        bounds=_parse_bounds(attrs.get("bounds"), width, height),
        clickable=_parse_bool(attrs.get("clickable")),
        enabled=_parse_bool(attrs.get("enabled")),
        checked=_parse_checked(attrs, class_name),
        children=children,
    )


def parse_hierarchy(xml_text: str, screen_dims: tuple[int, int]) -> GuiNode:
    """Parse a UIAutomator dump into a :class:`GuiNode` tree.

    A ``<hierarchy>`` wrapper holding a single ``node`` yields that node;
    several top-level nodes are gathered under a synthetic full-screen root.
    Bounds are clamped to ``screen_dims``.
    """
    width, height = screen_dims
    try:
        top = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise MalformedDocument(str(exc)) from exc
    if top.tag == "node":
        return _build(top, width, height)
    if top.tag != "hierarchy":
        raise MalformedDocument(f"unexpected root element <{top.tag}>")
    nodes = [_build(child, width, height) for child in top if child.tag == "node"]
    if len(nodes) == 1:
        return nodes[0]
    return GuiNode(
        class_name="hierarchy",
        package_id=nodes[0].package_id if nodes else "",
        bounds=Rect(0, 0, width, height),
        enabled=True,
        children=tuple(nodes),
    )


def to_xml(root: GuiNode) -> str:
    """Serialize a tree back into the UIAutomator dump dialect."""
    parts = ["<?xml version='1.0' encoding='UTF-8' standalone='yes' ?>", '<hierarchy rotation="0">']

    def emit(node: GuiNode, index: int) -> None:
        b = node.bounds
        checkable = node.checked is not Checked.NOT_CHECKABLE
        attrs = (
            f'index="{index}" text={quoteattr(node.text)} class={quoteattr(node.class_name)} '
            f"package={quoteattr(node.package_id)} "
            f'checkable="{str(checkable).lower()}" '
            f'checked="{str(node.checked is Checked.CHECKED).lower()}" '
            f'clickable="{str(node.clickable).lower()}" enabled="{str(node.enabled).lower()}" '
            f'bounds="[{b.left},{b.top}][{b.right},{b.bottom}]"'
        )
        if not node.children:
            parts.append(f"<node {attrs} />")
            return
        parts.append(f"<node {attrs}>")
        for i, child in enumerate(node.children):
            emit(child, i)
        parts.append("</node>")

    emit(root, 0)
    parts.append("</hierarchy>")
    return "".join(parts)


# --------------------------------------------------------------------------
# JSON mirror

def node_to_dict(node: GuiNode) -> dict:
    return {
        "class_name": node.class_name,
        "text": node.text,
        "package_id": node.package_id,
        "bounds": node.bounds.to_list(),
        "clickable": node.clickable,
        "enabled": node.enabled,
        "checked": node.checked.value,
        "children": [node_to_dict(c) for c in node.children],
    }


def node_from_dict(data: dict) -> GuiNode:
    return GuiNode(
        class_name=data.get("class_name", ""),
        text=data.get("text", ""),
        package_id=data.get("package_id", ""),
        bounds=Rect.from_list(data.get("bounds", [0, 0, 0, 0])),
        clickable=bool(data.get("clickable", False)),
        enabled=bool(data.get("enabled", False)),
        checked=Checked(data.get("checked", Checked.NOT_CHECKABLE.value)),
        children=tuple(node_from_dict(c) for c in data.get("children", [])),
    )


# --------------------------------------------------------------------------
# queries

def is_actionable(node: GuiNode) -> bool:
    return node.clickable and node.enabled


def clickable_components(root: GuiNode) -> list[GuiNode]:
    """Clickable and enabled nodes in pre-order."""
    return [n for n in root.iter_preorder() if is_actionable(n)]


def nodes_within(
    root: GuiNode,
    region: Rect,
    predicate: Optional[Callable[[GuiNode], bool]] = None,
) -> list[GuiNode]:
    """Nodes whose bounds-center lies strictly inside ``region``, pre-order."""
    out = []
    for node in root.iter_preorder():
        if predicate is not None and not predicate(node):
            continue
        cx = (node.bounds.left + node.bounds.right) / 2
        cy = (node.bounds.top + node.bounds.bottom) / 2
        if region.strictly_contains_point(cx, cy):
            out.append(node)
    return out


def node_at(root: GuiNode, x: float, y: float, predicate=None) -> Optional[GuiNode]:
    """Smallest node containing the point, optionally filtered."""
    best = None
    for node in root.iter_preorder():
        if predicate is not None and not predicate(node):
            continue
        if node.bounds.contains_point(x, y) and (best is None or node.bounds.area <= best.bounds.area):
            best = node
    return best
