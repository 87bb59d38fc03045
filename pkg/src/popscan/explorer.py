"""Adaptive depth-first exploration with pop-up handling and path recovery.

The explorer walks untried taps depth-first under a depth cap that grows
whenever the share of actions discovering new abstract states over a
sliding window drops below ``g_low``. Every screen it lands on is checked
for a pop-up first; pop-ups are dismissed and recorded before the screen is
resolved to an abstract state. When Back does not return to the expected
predecessor, the app is restarted and the path replayed from the
transition graph.
"""

from __future__ import annotations

import json
import logging
import random
import time
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Optional

from .detector import BackendFailure, DetectorConfig
from .device import DeviceDriver, DeviceUnavailable
from .dismissal import build_click_plan, dismiss
from .gui import GuiNode, ScreenSnapshot, clickable_components
from .records import OcrEngine, PowRecord, TriggerContext, build_record
from .signature import SignatureToken, StateRegistry, signature_of, token_for

log = logging.getLogger(__name__)

EVENT_SCHEMA_VERSION = 1
MAX_POW_ROUNDS = 3


class BudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class ActionDescriptor:
    kind: str  # "tap" | "back" | "restart"
    token: Optional[SignatureToken] = None
    raw_point: Optional[tuple[int, int]] = field(default=None, compare=False)
    text: str = field(default="", compare=False)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "tap":
            d["token"] = list(self.token)
            d["point"] = list(self.raw_point) if self.raw_point else None
            d["text"] = self.text
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ActionDescriptor":
        if d["kind"] != "tap":
            return cls(d["kind"])
        point = tuple(d["point"]) if d.get("point") else None
        return cls("tap", SignatureToken(*d["token"]), point, d.get("text", ""))

    def with_point(self, point: tuple[int, int]) -> "ActionDescriptor":
        return ActionDescriptor(self.kind, self.token, point, self.text)


BACK = ActionDescriptor("back")
RESTART = ActionDescriptor("restart")


def tap_action(node: GuiNode, grid: int) -> ActionDescriptor:
    return ActionDescriptor("tap", token_for(node, grid), node.bounds.center, node.first_text())


@dataclass
class ExplorerConfig:
    d0: int = 5
    d_max: int = 12
    window: int = 20
    g_low: float = 0.10
    depth_step: int = 2
    threshold: float = 0.8
    grid: int = 32
    action_budget: int = 500
    time_budget: Optional[float] = None  # seconds
    click_budget: int = 8
    settle_ms: int = 800
    seed: int = 0
    max_replans: int = 3
    device_retries: int = 3

    def __post_init__(self) -> None:
        if not 1 <= self.d0 <= self.d_max:
            raise ValueError("need 1 <= d0 <= d_max")
        if not 0.0 < self.g_low < 1.0:
            raise ValueError("g_low must lie in (0, 1)")
        if self.window < 1 or self.depth_step < 1 or self.click_budget < 1:
            raise ValueError("window, depth_step and click_budget must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExplorerConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class ExplorationEvent:
    seq: int
    from_state: int
    to_state: int
    action: ActionDescriptor
    pows: tuple[str, ...] = ()
    timestamp: int = 0

    def to_dict(self) -> dict:
        return {
            "schema_version": EVENT_SCHEMA_VERSION,
            "seq": self.seq,
            "from_state": self.from_state,
            "to_state": self.to_state,
            "action": self.action.to_dict(),
            "pows": list(self.pows),
            "timestamp": self.timestamp,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ExplorationEvent":
        return cls(
            seq=d["seq"],
            from_state=d["from_state"],
            to_state=d["to_state"],
            action=ActionDescriptor.from_dict(d["action"]),
            pows=tuple(d.get("pows", [])),
            timestamp=d.get("timestamp", 0),
        )


def read_events(lines: Iterable[str]) -> list[ExplorationEvent]:
    return [ExplorationEvent.from_dict(json.loads(line)) for line in lines if line.strip()]


class TransitionGraph:
    def __init__(self) -> None:
        self.entry_state: Optional[int] = None
        self._edges: dict[tuple[int, ActionDescriptor, int], None] = {}
        self.frontier: dict[int, list[ActionDescriptor]] = {}
        self.unreachable: set[int] = set()

    @property
    def edges(self) -> list[tuple[int, ActionDescriptor, int]]:
        return list(self._edges)

    def add_edge(self, src: int, action: ActionDescriptor, dst: int) -> None:
        self._edges.setdefault((src, action, dst), None)

    def _tap_adjacency(self) -> dict[int, list[tuple[ActionDescriptor, int]]]:
        adj: dict[int, list[tuple[ActionDescriptor, int]]] = {}
        for a, act, b in self._edges:
            if act.kind == "tap" and a != b:
                adj.setdefault(a, []).append((act, b))
        return adj

    def tap_distances(self, src: int) -> dict[int, int]:
        """Tap-edge hop counts from ``src`` to every state it reaches."""
        adj = self._tap_adjacency()
        dist = {src: 0}
        queue = deque([src])
        while queue:
            node = queue.popleft()
            for _act, nxt in adj.get(node, []):
                if nxt not in dist:
                    dist[nxt] = dist[node] + 1
                    queue.append(nxt)
        return dist

    def tap_path(self, src: int, dst: int) -> Optional[list[tuple[ActionDescriptor, int]]]:
        """Shortest tap-only action path, first-recorded edges preferred."""
        if src == dst:
            return []
        adj = self._tap_adjacency()
        prev: dict[int, tuple[int, ActionDescriptor]] = {}
        seen = {src}
        queue = deque([src])
        while queue:
            node = queue.popleft()
            for act, nxt in adj.get(node, []):
                if nxt in seen:
                    continue
                seen.add(nxt)
                prev[nxt] = (node, act)
                if nxt == dst:
                    path = []
                    cur = dst
                    while cur != src:
                        p, a = prev[cur]
                        path.append((a, cur))
                        cur = p
                    return path[::-1]
                queue.append(nxt)
        return None

    def distance_from_entry(self, state: int) -> Optional[int]:
        if self.entry_state is None:
            return None
        path = self.tap_path(self.entry_state, state)
        return None if path is None else len(path)

    def to_json(self, registry: Optional[StateRegistry] = None) -> dict:
        out = {
            "schema_version": 1,
            "entry_state": self.entry_state,
            "edges": [{"from": a, "action": act.to_dict(), "to": b} for a, act, b in self._edges],
            "frontier": {str(k): [a.to_dict() for a in v] for k, v in sorted(self.frontier.items())},
            "unreachable": sorted(self.unreachable),
        }
        if registry is not None:
            out["registry"] = registry.to_json()
        return out

    @classmethod
    def from_events(cls, events: Iterable[ExplorationEvent], entry_state: Optional[int] = None) -> "TransitionGraph":
        g = cls()
        g.entry_state = entry_state
        for ev in events:
            if g.entry_state is None:
                g.entry_state = ev.from_state
            g.add_edge(ev.from_state, ev.action, ev.to_state)
        return g


@dataclass
class ExplorationStats:
    states: int = 0
    actions: int = 0
    recoveries: int = 0
    restarts: int = 0
    replans: int = 0
    depth_history: list[int] = field(default_factory=list)
    aborted: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExplorationResult:
    graph: TransitionGraph
    events: list[ExplorationEvent]
    records: list[PowRecord]
    registry: StateRegistry
    stats: ExplorationStats


class Explorer:
    """One exploration run over one device. Not thread-safe by design."""

    def __init__(
        self,
        device: DeviceDriver,
        config: Optional[ExplorerConfig] = None,
        detector: Optional[DetectorConfig] = None,
        ocr: Optional[OcrEngine] = None,
    ):
        self.device = device
        self.config = config or ExplorerConfig()
        self.detector = detector or DetectorConfig()
        self.ocr = ocr
        self.registry = StateRegistry(self.config.threshold)
        self.graph = TransitionGraph()
        self.events: list[ExplorationEvent] = []
        self.records: list[PowRecord] = []
        self.stats = ExplorationStats()
        self.current_depth = self.config.d0
        self.stats.depth_history.append(self.current_depth)
        self.current_state: Optional[int] = None
        self.current_snapshot: Optional[ScreenSnapshot] = None
        self._window: deque[int] = deque(maxlen=self.config.window)
        self._record_keys: dict[tuple, PowRecord] = {}
        self._started_at = time.monotonic()

    # ------------------------------------------------------------------
    # budget

    def budget_left(self) -> bool:
        if self.stats.actions >= self.config.action_budget:
            return False
        if self.config.time_budget is not None and time.monotonic() - self._started_at > self.config.time_budget:
            return False
        return True

    # ------------------------------------------------------------------
    # observation pipeline

    def _identify(self, snapshot: ScreenSnapshot):
        try:
            return self.detector.identify(snapshot)
        except BackendFailure as exc:
            log.warning("detector backend failed, skipping visual analysis: %s", exc)
            return None

    def _record(self, snapshot, detection, trigger, outcome, chain_parent=None) -> str:
        # a chained pop-up keeps its own plan; the outcome's plan spans the chain
        targets = build_click_plan(snapshot, detection) if chain_parent else list(outcome.plan)
        candidate = build_record(
            f"pow-{len(self.records) + 1:04d}",
            snapshot,
            detection,
            trigger,
            outcome,
            self.device.app_package(),
            targets=targets,
            ocr=self.ocr,
            state_id=self.current_state,
            chain_parent=chain_parent,
        )
        key = candidate.dedup_key()
        seen = self._record_keys.get(key)
        if seen is not None:
            seen.occurrences += 1
            return seen.id
        self._record_keys[key] = candidate
        self.records.append(candidate)
        return candidate.id

    def _observe(self, trigger: TriggerContext) -> tuple[ScreenSnapshot, list[str]]:
        """Capture, then dismiss and record any pop-ups until the screen is clear."""
        snap = self.device.capture()
        pow_ids: list[str] = []
        for _ in range(MAX_POW_ROUNDS):
            det = self._identify(snap)
            if det is None:
                break
            outcome = dismiss(self.device, (snap, det), self.config.click_budget, self.detector)
            rec_id = self._record(snap, det, trigger, outcome)
            pow_ids.append(rec_id)
            for ch in outcome.chain:
                chained_trigger = TriggerContext("tap", ch.trigger_text, False)
                pow_ids.append(self._record(ch.snapshot, ch.detection, chained_trigger, outcome, chain_parent=rec_id))
            snap = outcome.observations[-1][0]
            if outcome.dismissed:
                break
            # stuck behind a pop-up: start over from the launcher
            self.device.restart_app()
            self.stats.restarts += 1
            snap = self.device.capture()
            trigger = TriggerContext("restart", "", True)
        if snap.app_package and snap.app_package != self.device.app_package() and self._identify(snap) is None:
            self.device.restart_app()
            self.stats.restarts += 1
            snap2, more = self._observe(TriggerContext("restart", "", True))
            return snap2, pow_ids + more
        return snap, pow_ids

    def _resolve(self, snap: ScreenSnapshot) -> tuple[int, bool]:
        sig = signature_of(snap, self.config.grid)
        state, is_new = self.registry.resolve(sig)
        if is_new:
            seen = set()
            frontier = []
            for node in clickable_components(snap.root):
                act = tap_action(node, self.config.grid)
                if act.token in seen:
                    continue
                seen.add(act.token)
                frontier.append(act)
            self.graph.frontier[state] = frontier
            self.stats.states = len(self.registry)
        return state, is_new

    def start(self) -> int:
        snap, _ids = self._observe(TriggerContext("none", "", True))
        state, _ = self._resolve(snap)
        self.current_state = state
        self.current_snapshot = snap
        self.graph.entry_state = state
        return state

    # ------------------------------------------------------------------
    # actions

    def locate(self, action: ActionDescriptor, snap: ScreenSnapshot) -> Optional[tuple[int, int]]:
        """Live coordinates for a tap token: exact match, else nearest within one grid cell."""
        best, best_key = None, None
        for node in clickable_components(snap.root):
            tok = token_for(node, self.config.grid)
            dx, dy = abs(tok.gx - action.token.gx), abs(tok.gy - action.token.gy)
            if dx > 1 or dy > 1:
                continue
            size_diff = abs(tok.wb - action.token.wb) + abs(tok.hb - action.token.hb)
            key = (dx + dy, size_diff)
            if best_key is None or key < best_key:
                best, best_key = node.bounds.center, key
        return best

    def _trigger_for(self, action: ActionDescriptor) -> TriggerContext:
        if action.kind == "tap":
            return TriggerContext("tap", action.text, False)
        if action.kind == "back":
            return TriggerContext("back", "", False)
        return TriggerContext("restart", "", True)

    def act(self, action: ActionDescriptor) -> tuple[int, bool]:
        """Deliver one action, observe, resolve, log; returns (state, is_new)."""
        if not self.budget_left():
            raise BudgetExhausted()
        from_state = self.current_state
        if action.kind == "tap":
            point = self.locate(action, self.current_snapshot) or action.raw_point
            if point is None:
                raise ValueError(f"cannot place tap for {action}")
            action = action.with_point(tuple(int(v) for v in point))
            self.device.tap(*action.raw_point)
        elif action.kind == "back":
            self.device.back()
        elif action.kind == "restart":
            self.device.restart_app()
            self.stats.restarts += 1
        else:
            raise ValueError(f"unknown action kind {action.kind!r}")
        self.stats.actions += 1
        snap, pow_ids = self._observe(self._trigger_for(action))
        state, is_new = self._resolve(snap)
        self.events.append(ExplorationEvent(
            seq=len(self.events), from_state=from_state, to_state=state, action=action,
            pows=tuple(pow_ids), timestamp=snap.capture_time,
        ))
        self.graph.add_edge(from_state, action, state)
        self.current_state = state
        self.current_snapshot = snap
        self._note_gain(is_new)
        return state, is_new

    def _note_gain(self, is_new: bool) -> None:
        self._window.append(1 if is_new else 0)
        if len(self._window) < self.config.window:
            return
        gain = sum(self._window) / self.config.window
        if gain < self.config.g_low:
            self._deepen()

    def _deepen(self) -> bool:
        if self.current_depth >= self.config.d_max:
            return False
        self.current_depth = min(self.current_depth + self.config.depth_step, self.config.d_max)
        self.stats.depth_history.append(self.current_depth)
        self._window.clear()
        log.debug("depth cap raised to %d", self.current_depth)
        return True

    # ------------------------------------------------------------------
    # navigation

    def _abandon(self, target: int) -> None:
        self.graph.unreachable.add(target)
        self.graph.frontier[target] = []

    def recover_path(self, target: int, restart: bool = True) -> bool:
        """Restart and replay the shortest known tap path to ``target``.

        A replay that lands off-path is re-planned from wherever it ended up,
        at most ``max_replans`` times; after that the target is marked
        unreachable and its frontier abandoned.
        """
        if target >= len(self.registry):
            raise ValueError(f"unknown state {target}")
        try:
            if restart:
                self.act(RESTART)
            failures = 0
            while True:
                if self.current_state == target:
                    return True
                path = self.graph.tap_path(self.current_state, target)
                if path is None and self.current_state != self.graph.entry_state:
                    self.act(RESTART)
                    if self.current_state == target:
                        return True
                    path = self.graph.tap_path(self.current_state, target)
                if path is None:
                    self._abandon(target)
                    return False
                if self._replay(path):
                    return True
                if failures >= self.config.max_replans:
                    self._abandon(target)
                    return False
                failures += 1
                self.stats.replans += 1
        except BudgetExhausted:
            return False

    def _replay(self, path: list[tuple[ActionDescriptor, int]]) -> bool:
        for action, expected in path:
            if self.locate(action, self.current_snapshot) is None:
                return False
            state, _ = self.act(action)
            if state != expected:
                return False
        return True

    def rollback(self, expected_predecessor: int) -> int:
        self.act(BACK)
        if self.current_state != expected_predecessor:
            self.stats.recoveries += 1
            self.recover_path(expected_predecessor)
        return self.current_state

    def _stack_to(self, state: int) -> list[int]:
        entry = self.graph.entry_state
        path = self.graph.tap_path(entry, state) if entry is not None else None
        if path is None:
            return [state]
        return [entry] + [s for _a, s in path]

    def _open_states(self) -> list[tuple[int, int]]:
        """(distance, state) for every reachable state with untried actions."""
        dist = self.graph.tap_distances(self.graph.entry_state)
        return sorted(
            (dist[s], s) for s, frontier in self.graph.frontier.items()
            if frontier and s not in self.graph.unreachable and s in dist
        )

    def _next_target(self) -> Optional[int]:
        for d, state in self._open_states():
            if d < self.current_depth:
                return state
        return None

    def _pending_deeper(self) -> bool:
        return bool(self._open_states())

    def _recover_device(self) -> bool:
        for attempt in range(self.config.device_retries):
            try:
                self.device.restart_app()
                self.stats.restarts += 1
                snap, _ = self._observe(TriggerContext("restart", "", True))
                self.current_state, _ = self._resolve(snap)
                self.current_snapshot = snap
                return True
            except DeviceUnavailable as exc:
                log.warning("device recovery attempt %d failed: %s", attempt + 1, exc)
        return False

    # ------------------------------------------------------------------
    # main loop

    def explore(self) -> ExplorationResult:
        try:
            self.start()
        except DeviceUnavailable:
            if not self._recover_device():
                self.stats.aborted = True
                return self.result()
            self.graph.entry_state = self.current_state
        stack = [self.current_state]
        while self.budget_left():
            try:
                stack = self._step(stack)
            except BudgetExhausted:
                break
            except DeviceUnavailable as exc:
                log.warning("device unavailable: %s", exc)
                if not self._recover_device():
                    self.stats.aborted = True
                    break
                stack = self._stack_to(self.current_state)
            if stack is None:
                break
        return self.result()

    def _step(self, stack: list[int]) -> Optional[list[int]]:
        cur = stack[-1]
        frontier = self.graph.frontier.get(cur, [])
        if frontier and len(stack) - 1 < self.current_depth:
            action = frontier.pop(0)
            to, _ = self.act(action)
            if to == cur:
                return stack
            if to in stack:
                return stack[:stack.index(to) + 1]
            return stack + [to]
        if len(stack) > 1:
            expected = stack[-2]
            reached = self.rollback(expected)
            if reached == expected:
                return stack[:-1]
            return self._stack_to(reached)
        target = self._next_target()
        if target is None:
            if self._pending_deeper() and self._deepen():
                return stack
            return None
        self.recover_path(target, restart=self.current_state != self.graph.entry_state)
        return self._stack_to(self.current_state)

    def result(self) -> ExplorationResult:
        self.stats.states = len(self.registry)
        return ExplorationResult(self.graph, self.events, self.records, self.registry, self.stats)


def explore(
    device: DeviceDriver,
    config: Optional[ExplorerConfig] = None,
    detector: Optional[DetectorConfig] = None,
    ocr: Optional[OcrEngine] = None,
) -> ExplorationResult:
    return Explorer(device, config, detector, ocr).explore()


def random_walk(
    device: DeviceDriver,
    seed: int,
    action_budget: int,
    config: Optional[ExplorerConfig] = None,
    detector: Optional[DetectorConfig] = None,
) -> ExplorationResult:
    """Monkey-style baseline: uniform choice among live clickables plus Back."""
    base = config or ExplorerConfig()
    cfg = ExplorerConfig.from_dict({**base.to_dict(), "action_budget": action_budget, "seed": seed})
    ex = Explorer(device, cfg, detector)
    rng = random.Random(seed)
    if action_budget <= 0:
        return ex.result()
    ex.start()
    while ex.budget_left():
        choices = [tap_action(n, cfg.grid) for n in clickable_components(ex.current_snapshot.root)]
        choices.append(BACK)
        try:
            ex.act(rng.choice(choices))
        except BudgetExhausted:
            break
        except DeviceUnavailable:
            if not ex._recover_device():
                ex.stats.aborted = True
                break
    return ex.result()


def replay_events(
    events: list[ExplorationEvent],
    device: DeviceDriver,
    config: Optional[ExplorerConfig] = None,
    detector: Optional[DetectorConfig] = None,
) -> Optional[int]:
    """Re-run a logged action sequence; returns the first divergent seq or None."""
    if not events:
        return None
    cfg = ExplorerConfig.from_dict({**(config or ExplorerConfig()).to_dict(), "action_budget": len(events) + 1})
    ex = Explorer(device, cfg, detector)
    ex.start()
    for ev in events:
        if ex.current_state != ev.from_state:
            return ev.seq
        action = ev.action
        if action.kind == "tap" and ex.locate(action, ex.current_snapshot) is None and action.raw_point is None:
            return ev.seq
        state, _ = ex.act(action)
        if state != ev.to_state:
            return ev.seq
    return None
