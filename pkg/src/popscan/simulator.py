"""Deterministic scripted-app simulator with a synthetic screenshot renderer.

An :class:`AppScript` declares screens, transitions, back behaviour and
pop-up triggers. :class:`Simulator` is the state machine; it renders each
state into an RGB raster and a UIAutomator-style dump so the whole visual
and hierarchy pipeline can run against exact ground truth.

Script file format (JSON, ``schema_version`` 1)::

    {
      "schema_version": 1,
      "app_package": "com.example.demo",
      "screen": [360, 640],
      "entry_screen": "home",
      "reset_triggers_on_restart": true,
      "screens": [
        {"id": "home", "activity": ".Main", "one_shot": false,
         "components": [{"id": "shop", "bounds": [l, t, r, b], "text": "Shop",
                         "clickable": true, "checkable": false,
                         "initially_checked": false, "color": [r, g, b]}],
         "transitions": [["shop", "catalog"]]}
      ],
      "back_map": {"catalog": "home"},
      "pow_triggers": [
        {"when": {"on_enter": "catalog"}, "once": true, "pow": { ...PowSpec... }}
      ]
    }

``when`` is one of ``{"on_enter": screen}``, ``{"on_back": screen}``,
``{"after_k_actions": k}`` or ``{"on_component": [screen, component]}``.
A PowSpec holds ``bbox``, ``shadow_alpha``, ``buttons`` (``kind`` in
confirm/exit/neutral, ``action`` of ``"dismiss"``, ``"none"`` or
``{"navigate": screen}``), ``toggles``, ``texts``, ``back_dismisses``,
``package``, ``in_window`` and an optional ``chained_pow``.
"""

from __future__ import annotations

import copy
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .gui import Checked, GuiNode, Rect, ScreenSnapshot, parse_hierarchy, to_xml

SCHEMA_VERSION = 1

WHITE = (255, 255, 255)
BORDER = (50, 50, 50)
TEXT_BAR = (70, 70, 70)
DEFAULT_CLICKABLE = (205, 222, 245)
DEFAULT_STATIC = (240, 240, 240)
DEFAULT_PANEL = (250, 250, 250)
BUTTON_COLORS = {"exit": (232, 232, 232), "confirm": (255, 120, 60), "neutral": (220, 226, 235)}
TOGGLE_ON = (30, 100, 220)


class ScriptError(ValueError):
    """The app script is inconsistent (dangling ids, bad geometry)."""


def _rect(values) -> Rect:
    try:
        return Rect.from_list(values)
    except (TypeError, ValueError) as exc:
        raise ScriptError(f"bad bounds {values!r}: {exc}") from exc


def _color(values, default) -> tuple[int, int, int]:
    if values is None:
        return default
    r, g, b = (int(v) for v in values)
    return (r, g, b)


@dataclass(frozen=True)
class Component:
    id: str
    bounds: Rect
    text: str = ""
    clickable: bool = True
    checkable: bool = False
    initially_checked: bool = False
    color: Optional[tuple[int, int, int]] = None
    class_name: str = ""

    @property
    def fill(self) -> tuple[int, int, int]:
        if self.color is not None:
            return self.color
        return DEFAULT_CLICKABLE if self.clickable else DEFAULT_STATIC

    @property
    def widget_class(self) -> str:
        if self.class_name:
            return self.class_name
        if self.checkable:
            return "android.widget.CheckBox"
        return "android.widget.Button" if self.clickable else "android.widget.TextView"


@dataclass(frozen=True)
class Screen:
    id: str
    components: tuple[Component, ...]
    transitions: dict[str, str]
    activity: str = ""
    one_shot: bool = False

    def component(self, comp_id: str) -> Component:
        for c in self.components:
            if c.id == comp_id:
                return c
        raise KeyError(comp_id)


@dataclass(frozen=True)
class PowButton:
    kind: str  # confirm | exit | neutral
    bounds: Rect
    text: str = ""
    action: Union[str, tuple[str, str]] = "dismiss"  # "dismiss" | "none" | ("navigate", screen)
    color: Optional[tuple[int, int, int]] = None

    @property
    def fill(self) -> tuple[int, int, int]:
        return self.color or BUTTON_COLORS.get(self.kind, BUTTON_COLORS["neutral"])


@dataclass(frozen=True)
class PowToggle:
    bounds: Rect
    text: str = ""
    initially_checked: bool = False


@dataclass(frozen=True)
class PowText:
    bounds: Rect
    text: str


@dataclass(frozen=True)
class PowSpec:
    bbox: Rect
    shadow_alpha: float = 0.4
    buttons: tuple[PowButton, ...] = ()
    toggles: tuple[PowToggle, ...] = ()
    texts: tuple[PowText, ...] = ()
    back_dismisses: bool = True
    chained_pow: Optional["PowSpec"] = None
    package: str = ""
    in_window: bool = False
    panel_color: tuple[int, int, int] = DEFAULT_PANEL
    id: str = ""

    def __post_init__(self) -> None:
        if not 0.0 < self.shadow_alpha < 1.0:
            raise ScriptError("shadow_alpha must lie in (0, 1)")
        for item in (*self.buttons, *self.toggles, *self.texts):
            if not self.bbox.contains_rect(item.bounds):
                raise ScriptError(f"pop-up element {item.bounds} outside bbox {self.bbox}")


@dataclass(frozen=True)
class Trigger:
    kind: str  # on_enter | on_back | after_k_actions | on_component
    arg: Any
    pow: PowSpec
    once: bool = True


@dataclass
class AppScript:
    app_package: str
    screen_size: tuple[int, int]
    entry_screen: str
    screens: dict[str, Screen]
    back_map: dict[str, str] = field(default_factory=dict)
    pow_triggers: list[Trigger] = field(default_factory=list)
    reset_triggers_on_restart: bool = True

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.entry_screen not in self.screens:
            raise ScriptError(f"entry screen {self.entry_screen!r} undefined")
        w, h = self.screen_size
        if w <= 0 or h <= 0:
            raise ScriptError("screen dimensions must be positive")
        full = Rect(0, 0, w, h)
        for screen in self.screens.values():
            ids = {c.id for c in screen.components}
            if len(ids) != len(screen.components):
                raise ScriptError(f"duplicate component id on {screen.id}")
            for c in screen.components:
                if not full.contains_rect(c.bounds):
                    raise ScriptError(f"{screen.id}/{c.id} outside the screen")
            for comp_id, target in screen.transitions.items():
                if comp_id not in ids:
                    raise ScriptError(f"transition from unknown component {screen.id}/{comp_id}")
                if target not in self.screens:
                    raise ScriptError(f"transition to unknown screen {target!r}")
        for src, dst in self.back_map.items():
            if src not in self.screens or dst not in self.screens:
                raise ScriptError(f"back_map entry {src!r} -> {dst!r} references unknown screen")
        for trig in self.pow_triggers:
            if trig.kind in ("on_enter", "on_back") and trig.arg not in self.screens:
                raise ScriptError(f"trigger on unknown screen {trig.arg!r}")
            if trig.kind == "on_component":
                screen_id, comp_id = trig.arg
                if screen_id not in self.screens:
                    raise ScriptError(f"trigger on unknown screen {screen_id!r}")
                try:
                    self.screens[screen_id].component(comp_id)
                except KeyError:
                    raise ScriptError(f"trigger on unknown component {screen_id}/{comp_id}") from None
            spec = trig.pow
            while spec is not None:
                if not full.contains_rect(spec.bbox):
                    raise ScriptError(f"pop-up bbox {spec.bbox} outside the screen")
                for b in spec.buttons:
                    if isinstance(b.action, tuple) and b.action[1] not in self.screens:
                        raise ScriptError(f"pop-up navigates to unknown screen {b.action[1]!r}")
                spec = spec.chained_pow

    # ------------------------------------------------------------------
    # ground truth

    def screen_depths(self) -> dict[str, int]:
        """BFS depth of every screen reachable from the entry over transitions."""
        depths = {self.entry_screen: 0}
        queue = deque([self.entry_screen])
        while queue:
            sid = queue.popleft()
            for target in self.screens[sid].transitions.values():
                if target not in depths:
                    depths[target] = depths[sid] + 1
                    queue.append(target)
        return depths

    def reachable_screens(self, max_depth: Optional[int] = None) -> set[str]:
        return {s for s, d in self.screen_depths().items() if max_depth is None or d <= max_depth}

    def ground_truth_edges(self) -> set[tuple[str, str, str]]:
        return {(s.id, c, t) for s in self.screens.values() for c, t in s.transitions.items()}

    # ------------------------------------------------------------------
    # (de)serialisation

    @classmethod
    def from_dict(cls, data: dict) -> "AppScript":
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ScriptError(f"unsupported script schema_version {version}")
        screens = {}
        for s in data["screens"]:
            comps = tuple(
                Component(
                    id=str(c["id"]),
                    bounds=_rect(c["bounds"]),
                    text=c.get("text", ""),
                    clickable=bool(c.get("clickable", True)),
                    checkable=bool(c.get("checkable", False)),
                    initially_checked=bool(c.get("initially_checked", False)),
                    color=_color(c.get("color"), None) if c.get("color") is not None else None,
                    class_name=c.get("class", ""),
                )
                for c in s.get("components", [])
            )
            trans = s.get("transitions", [])
            trans = dict(trans.items()) if isinstance(trans, dict) else {str(a): str(b) for a, b in trans}
            screens[s["id"]] = Screen(
                id=s["id"],
                components=comps,
                transitions=trans,
                activity=s.get("activity", ""),
                one_shot=bool(s.get("one_shot", False)),
            )
        triggers = []
        for t in data.get("pow_triggers", []):
            (kind, arg), = t["when"].items()
            if kind == "on_component":
                arg = (str(arg[0]), str(arg[1]))
            elif kind == "after_k_actions":
                arg = int(arg)
            elif kind not in ("on_enter", "on_back"):
                raise ScriptError(f"unknown trigger kind {kind!r}")
            triggers.append(Trigger(kind, arg, pow_spec_from_dict(t["pow"]), bool(t.get("once", True))))
        try:
            return cls(
                app_package=data["app_package"],
                screen_size=tuple(data.get("screen", (360, 640))),
                entry_screen=data["entry_screen"],
                screens=screens,
                back_map=dict(data.get("back_map", {})),
                pow_triggers=triggers,
                reset_triggers_on_restart=bool(data.get("reset_triggers_on_restart", True)),
            )
        except KeyError as exc:
            raise ScriptError(f"missing key {exc}") from exc

    @classmethod
    def load(cls, path: Union[str, Path]) -> "AppScript":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        def comp(c: Component) -> dict:
            d = {
                "id": c.id, "bounds": c.bounds.to_list(), "text": c.text, "clickable": c.clickable,
                "checkable": c.checkable, "initially_checked": c.initially_checked,
            }
            if c.color is not None:
                d["color"] = list(c.color)
            if c.class_name:
                d["class"] = c.class_name
            return d

        def trig(t: Trigger) -> dict:
            arg = list(t.arg) if t.kind == "on_component" else t.arg
            return {"when": {t.kind: arg}, "once": t.once, "pow": pow_spec_to_dict(t.pow)}

        return {
            "schema_version": SCHEMA_VERSION,
            "app_package": self.app_package,
            "screen": list(self.screen_size),
            "entry_screen": self.entry_screen,
            "reset_triggers_on_restart": self.reset_triggers_on_restart,
            "screens": [
                {
                    "id": s.id, "activity": s.activity, "one_shot": s.one_shot,
                    "components": [comp(c) for c in s.components],
                    "transitions": [[a, b] for a, b in s.transitions.items()],
                }
                for s in self.screens.values()
            ],
            "back_map": dict(self.back_map),
            "pow_triggers": [trig(t) for t in self.pow_triggers],
        }


def pow_spec_from_dict(d: dict) -> PowSpec:
    buttons = []
    for b in d.get("buttons", []):
        action = b.get("action", "dismiss")
        if isinstance(action, dict):
            action = ("navigate", str(action["navigate"]))
        elif action not in ("dismiss", "none"):
            raise ScriptError(f"unknown pop-up button action {action!r}")
        buttons.append(PowButton(
            kind=b.get("kind", "neutral"),
            bounds=_rect(b["bounds"]),
            text=b.get("text", ""),
            action=action,
            color=_color(b.get("color"), None) if b.get("color") is not None else None,
        ))
    return PowSpec(
        bbox=_rect(d["bbox"]),
        shadow_alpha=float(d.get("shadow_alpha", 0.4)),
        buttons=tuple(buttons),
        toggles=tuple(
            PowToggle(_rect(t["bounds"]), t.get("text", ""), bool(t.get("initially_checked", False)))
            for t in d.get("toggles", [])
        ),
        texts=tuple(PowText(_rect(t["bounds"]), t["text"]) for t in d.get("texts", [])),
        back_dismisses=bool(d.get("back_dismisses", True)),
        chained_pow=pow_spec_from_dict(d["chained_pow"]) if d.get("chained_pow") else None,
        package=d.get("package", ""),
        in_window=bool(d.get("in_window", False)),
        panel_color=_color(d.get("panel_color"), DEFAULT_PANEL),
        id=d.get("id", ""),
    )


def pow_spec_to_dict(p: PowSpec) -> dict:
    def action(a):
        return {"navigate": a[1]} if isinstance(a, tuple) else a

    d = {
        "id": p.id,
        "bbox": p.bbox.to_list(),
        "shadow_alpha": p.shadow_alpha,
        "buttons": [
            {"kind": b.kind, "bounds": b.bounds.to_list(), "text": b.text, "action": action(b.action),
             **({"color": list(b.color)} if b.color else {})}
            for b in p.buttons
        ],
        "toggles": [
            {"bounds": t.bounds.to_list(), "text": t.text, "initially_checked": t.initially_checked}
            for t in p.toggles
        ],
        "texts": [{"bounds": t.bounds.to_list(), "text": t.text} for t in p.texts],
        "back_dismisses": p.back_dismisses,
        "package": p.package,
        "in_window": p.in_window,
        "panel_color": list(p.panel_color),
        "chained_pow": pow_spec_to_dict(p.chained_pow) if p.chained_pow else None,
    }
    return d


# --------------------------------------------------------------------------
# rendering

def _fill(canvas: np.ndarray, r: Rect, color) -> None:
    canvas[r.top:r.bottom, r.left:r.right] = color


def _border(canvas: np.ndarray, r: Rect, color=BORDER) -> None:
    if r.width == 0 or r.height == 0:
        return
    canvas[r.top, r.left:r.right] = color
    canvas[r.bottom - 1, r.left:r.right] = color
    canvas[r.top:r.bottom, r.left] = color
    canvas[r.top:r.bottom, r.right - 1] = color


def _text_bar(canvas: np.ndarray, r: Rect, text: str) -> None:
    if not text or r.width < 8 or r.height < 6:
        return
    bar_h = max(2, min(8, r.height // 4))
    bar_w = min(r.width - 6, max(4, 7 * len(text)))
    cx, cy = r.center
    left = cx - bar_w // 2
    top = cy - bar_h // 2
    canvas[top:top + bar_h, left:left + bar_w] = TEXT_BAR


def _widget(canvas: np.ndarray, r: Rect, color, text: str) -> None:
    _fill(canvas, r, color)
    _border(canvas, r)
    _text_bar(canvas, r, text)


def _toggle_box(r: Rect) -> Rect:
    side = max(4, min(r.height - 4, 24))
    top = r.top + (r.height - side) // 2
    return Rect(r.left + 2, top, r.left + 2 + side, top + side)


def _draw_toggle(canvas: np.ndarray, r: Rect, text: str, checked: bool) -> None:
    box = _toggle_box(r)
    _fill(canvas, box, TOGGLE_ON if checked else WHITE)
    _border(canvas, box)
    label = Rect(min(box.right + 4, r.right), r.top, r.right, r.bottom)
    _text_bar(canvas, label, text)


@dataclass
class ActivePow:
    spec: PowSpec
    toggles: list[bool]


def render(
    script: AppScript,
    screen_id: str,
    pows: list[ActivePow] | None = None,
    checked: Optional[dict[str, bool]] = None,
) -> np.ndarray:
    """Rasterise a screen and its stack of active pop-ups (bottom first)."""
    w, h = script.screen_size
    canvas = np.full((h, w, 3), 255, dtype=np.uint8)
    checked = checked or {}
    for comp in script.screens[screen_id].components:
        _widget(canvas, comp.bounds, comp.fill, comp.text)
        if comp.checkable:
            _draw_toggle(canvas, comp.bounds, "", checked.get(comp.id, comp.initially_checked))
    for active in pows or []:
        spec = active.spec
        b = spec.bbox
        canvas[:] = np.rint(canvas.astype(np.float64) * spec.shadow_alpha).astype(np.uint8)
        _fill(canvas, b, spec.panel_color)
        for t in spec.texts:
            _text_bar(canvas, t.bounds, t.text)
        for btn in spec.buttons:
            _widget(canvas, btn.bounds, btn.fill, btn.text)
        for tog, state in zip(spec.toggles, active.toggles):
            _draw_toggle(canvas, tog.bounds, tog.text, state)
    return canvas


# --------------------------------------------------------------------------
# state machine

class Simulator:
    """Mutable run state of one scripted app."""

    def __init__(self, script: AppScript):
        self.script = script
        self.closed_one_shot: set[str] = set()
        self.visited: set[str] = set()
        self.action_count = 0
        self._fired: set[int] = set()
        self.launch()

    # --- lifecycle -----------------------------------------------------

    def launch(self) -> None:
        self.screen = self.script.entry_screen
        self.nav_stack = [self.screen]
        self.pows: list[ActivePow] = []
        self.checked: dict[tuple[str, str], bool] = {}
        if self.script.reset_triggers_on_restart:
            self._fired = set()
            self.action_count = 0
        self._enter(self.screen)

    def restart(self) -> None:
        self.launch()
        if not self.script.reset_triggers_on_restart:
            self._after_action()

    # --- helpers -------------------------------------------------------

    def _enter(self, screen_id: str) -> None:
        self.screen = screen_id
        self.visited.add(screen_id)
        if self.script.screens[screen_id].one_shot:
            self.closed_one_shot.add(screen_id)
        self._fire(lambda t: t.kind == "on_enter" and t.arg == screen_id)

    def _fire(self, pred) -> bool:
        fired = False
        for idx, trig in enumerate(self.script.pow_triggers):
            if trig.once and idx in self._fired:
                continue
            if pred(trig):
                self._fired.add(idx)
                self._show(trig.pow)
                fired = True
        return fired

    def _show(self, spec: PowSpec) -> None:
        self.pows.append(ActivePow(spec, [t.initially_checked for t in spec.toggles]))

    def _navigate(self, target: str) -> bool:
        if target in self.closed_one_shot:
            return False
        self.nav_stack.append(target)
        self._enter(target)
        return True

    def _after_action(self) -> None:
        self.action_count += 1
        k = self.action_count
        self._fire(lambda t: t.kind == "after_k_actions" and t.arg == k)

    # --- actions -------------------------------------------------------

    def tap(self, x: float, y: float) -> None:
        if self.pows:
            self._tap_pow(x, y)
        else:
            self._tap_screen(x, y)
        self._after_action()

    def _tap_pow(self, x: float, y: float) -> None:
        top = self.pows[-1]
        spec = top.spec
        if not spec.bbox.contains_point(x, y):
            return  # modal: swallowed
        for i in reversed(range(len(spec.toggles))):
            if spec.toggles[i].bounds.contains_point(x, y):
                top.toggles[i] = not top.toggles[i]
                return
        for btn in reversed(spec.buttons):
            if not btn.bounds.contains_point(x, y):
                continue
            if btn.action == "none":
                return
            self.pows.pop()
            if btn.action == "dismiss":
                if spec.chained_pow is not None:
                    self._show(spec.chained_pow)
            else:
                self._navigate(btn.action[1])
            return

    def _tap_screen(self, x: float, y: float) -> None:
        screen = self.script.screens[self.screen]
        for comp in reversed(screen.components):
            if not (comp.clickable and comp.bounds.contains_point(x, y)):
                continue
            if comp.checkable:
                key = (screen.id, comp.id)
                self.checked[key] = not self.checked.get(key, comp.initially_checked)
            source = screen.id
            target = screen.transitions.get(comp.id)
            if target is not None:
                self._navigate(target)
            self._fire(lambda t: t.kind == "on_component" and t.arg == (source, comp.id))
            return

    def back(self) -> None:
        if self.pows:
            if self.pows[-1].spec.back_dismisses:
                self.pows.pop()
        elif not self._fire(lambda t: t.kind == "on_back" and t.arg == self.screen):
            target = self.script.back_map.get(self.screen)
            if target is not None:
                if target in self.nav_stack:
                    del self.nav_stack[self.nav_stack.index(target) + 1:]
                else:
                    self.nav_stack = [target]
                if target != self.screen:
                    self._enter(target)
            elif len(self.nav_stack) > 1:
                self.nav_stack.pop()
                self._enter(self.nav_stack[-1])
        self._after_action()

    # --- observation ---------------------------------------------------

    def render(self) -> np.ndarray:
        checked = {c: v for (s, c), v in self.checked.items() if s == self.screen}
        return render(self.script, self.screen, self.pows, checked)

    def hierarchy(self) -> GuiNode:
        w, h = self.script.screen_size
        pkg = self.script.app_package
        top = self.pows[-1] if self.pows else None
        if top is not None and not top.spec.in_window:
            return _pow_node(top, pkg)
        screen = self.script.screens[self.screen]
        children = []
        for comp in screen.components:
            state = Checked.NOT_CHECKABLE
            if comp.checkable:
                on = self.checked.get((screen.id, comp.id), comp.initially_checked)
                state = Checked.CHECKED if on else Checked.UNCHECKED
            children.append(GuiNode(
                class_name=comp.widget_class, text=comp.text, package_id=pkg, bounds=comp.bounds,
                clickable=comp.clickable, enabled=True, checked=state,
            ))
        content = GuiNode(
            class_name="android.widget.FrameLayout", package_id=pkg, bounds=Rect(0, 0, w, h),
            enabled=True, children=tuple(children),
        )
        layers = [content] + [_pow_node(p, pkg) for p in self.pows]
        return GuiNode(
            class_name="android.widget.FrameLayout", package_id=pkg, bounds=Rect(0, 0, w, h),
            enabled=True, children=tuple(layers),
        )

    def dump_xml(self) -> str:
        return to_xml(self.hierarchy())

    @property
    def activity(self) -> str:
        return self.script.screens[self.screen].activity


def _pow_node(active: ActivePow, app_pkg: str) -> GuiNode:
    spec = active.spec
    pkg = spec.package or app_pkg
    kids = [
        GuiNode(class_name="android.widget.TextView", text=t.text, package_id=pkg, bounds=t.bounds, enabled=True)
        for t in spec.texts
    ]
    kids += [
        GuiNode(class_name="android.widget.Button", text=b.text, package_id=pkg, bounds=b.bounds,
                clickable=True, enabled=True)
        for b in spec.buttons
    ]
    kids += [
        GuiNode(class_name="android.widget.CheckBox", text=t.text, package_id=pkg, bounds=t.bounds,
                clickable=True, enabled=True, checked=Checked.CHECKED if on else Checked.UNCHECKED)
        for t, on in zip(spec.toggles, active.toggles)
    ]
    return GuiNode(
        class_name="android.widget.FrameLayout", package_id=pkg, bounds=spec.bbox,
        enabled=True, children=tuple(kids),
    )


class SimulatedDevice:
    """:class:`~popscan.device.DeviceDriver` over a :class:`Simulator`.

    Time is virtual: every action advances the clock by ``settle_ms`` so
    capture timestamps are reproducible.
    """

    def __init__(self, script: AppScript, settle_ms: int = 800):
        self.script = script
        self.sim = Simulator(script)
        self.settle_ms = settle_ms
        self.clock_ms = 0
        self.actions: list[tuple] = []

    def capture(self) -> ScreenSnapshot:
        xml = self.sim.dump_xml()
        root = parse_hierarchy(xml, self.script.screen_size)
        return ScreenSnapshot(
            root=root,
            screenshot=self.sim.render(),
            activity_name=self.sim.activity,
            app_package=root.package_id,
            capture_time=self.clock_ms,
        )

    def tap(self, x: int, y: int) -> None:
        self.actions.append(("tap", int(x), int(y)))
        self.sim.tap(x, y)
        self.clock_ms += self.settle_ms

    def back(self) -> None:
        self.actions.append(("back",))
        self.sim.back()
        self.clock_ms += self.settle_ms

    def restart_app(self) -> None:
        self.actions.append(("restart",))
        self.sim.restart()
        self.clock_ms += self.settle_ms

    def screen_dims(self) -> tuple[int, int]:
        return self.script.screen_size

    def app_package(self) -> str:
        return self.script.app_package


def clone_script(script: AppScript) -> AppScript:
    return copy.deepcopy(script)
