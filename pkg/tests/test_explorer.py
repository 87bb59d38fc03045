import json

import pytest

from popscan.device import DeviceUnavailable
from popscan.explorer import (
    BACK,
    RESTART,
    ActionDescriptor,
    ExplorationEvent,
    Explorer,
    ExplorerConfig,
    TransitionGraph,
    explore,
    random_walk,
    read_events,
    replay_events,
    tap_action,
)
from popscan.gui import GuiNode, Rect
from popscan.simulator import SimulatedDevice
from support import chain_script, make_script, row, screen, simple_pow, tree_script


def cfg(**kw):
    return ExplorerConfig(**{"action_budget": 500, **kw})


def test_tap_action_tokenises_and_round_trips():
    node = GuiNode("b", "Buy", "p", Rect(40, 100, 120, 140), clickable=True, enabled=True)
    a = tap_action(node, 32)
    assert a.kind == "tap" and a.text == "Buy" and a.raw_point == (80, 120)
    again = ActionDescriptor.from_dict(json.loads(json.dumps(a.to_dict())))
    assert again == a and again.raw_point == a.raw_point


def test_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        ExplorerConfig(d0=13, d_max=12)
    c = cfg(seed=4, time_budget=3.5)
    assert ExplorerConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c


def test_graph_shortest_tap_path_ignores_back_edges():
    g = TransitionGraph()
    t = [ActionDescriptor("tap", (i, 0, 5, 5)) for i in range(4)]
    g.entry_state = 0
    g.add_edge(0, t[0], 1)
    g.add_edge(1, t[1], 2)
    g.add_edge(0, t[2], 2)
    g.add_edge(2, BACK, 3)
    g.add_edge(2, t[3], 3)
    assert [s for _, s in g.tap_path(0, 3)] == [2, 3]
    assert g.tap_path(3, 0) is None
    assert g.distance_from_entry(3) == 2


def test_graph_from_events():
    evs = [ExplorationEvent(0, 0, 1, ActionDescriptor("tap", (1, 1, 5, 5))), ExplorationEvent(1, 1, 0, BACK)]
    g = TransitionGraph.from_events(evs)
    assert g.entry_state == 0 and len(g.edges) == 2


@pytest.mark.parametrize("seed", range(3))
def test_full_coverage_on_small_trees(seed):
    script = tree_script(30, seed=seed)
    dev = SimulatedDevice(script)
    res = explore(dev, cfg())
    assert dev.sim.visited == set(script.screens)
    assert res.stats.states == 30
    assert len(res.events) <= 500


def test_depth_cap_grows_for_deep_chain():
    script = chain_script(12)
    dev = SimulatedDevice(script)
    res = explore(dev, cfg())
    assert res.stats.depth_history[0] == 5
    assert res.stats.depth_history == sorted(res.stats.depth_history)
    assert "c11" in dev.sim.visited


def test_depth_never_exceeds_maximum():
    script = chain_script(16)
    dev = SimulatedDevice(script)
    res = explore(dev, cfg())
    assert max(res.stats.depth_history) == 12
    assert "c12" in dev.sim.visited and "c13" not in dev.sim.visited


def test_back_jump_triggers_recovery():
    script = chain_script(6, back_map={f"c{i}": "c0" for i in range(2, 6)})
    dev = SimulatedDevice(script)
    res = explore(dev, cfg())
    assert dev.sim.visited == set(script.screens)
    assert res.stats.recoveries > 0


def test_recover_path_reaches_every_visited_state():
    script = chain_script(7, back_map={"c6": "c0", "c3": "c0"})
    ex = Explorer(SimulatedDevice(script), cfg())
    ex.explore()
    for state in range(len(ex.registry)):
        assert ex.recover_path(state)
        assert ex.current_state == state


def test_one_shot_target_is_abandoned():
    script = chain_script(4, one_shot=("c1",))
    ex = Explorer(SimulatedDevice(script), cfg())
    ex.explore()
    before = ex.stats.replans
    assert not ex.recover_path(2)
    assert 2 in ex.graph.unreachable and ex.graph.frontier[2] == []
    assert ex.stats.replans - before <= 3


def test_recover_path_rejects_unknown_state():
    ex = Explorer(SimulatedDevice(chain_script(2)), cfg())
    ex.start()
    with pytest.raises(ValueError):
        ex.recover_path(99)


HOME = screen("home", [row("shop", 100, "Shop"), row("news", 200, "News")], [("shop", "shop"), ("news", "news")])
SHOP = screen("shop", [row("buy", 300, "Buy")])
NEWS = screen("news", [row("read", 400, "Read"), row("more", 480, "More")])


def test_pows_recorded_with_trigger_and_dismissal():
    script = make_script([HOME, SHOP, NEWS], triggers=[{"when": {"on_enter": "shop"}, "pow": simple_pow()}])
    res = explore(SimulatedDevice(script), cfg())
    (rec,) = res.records
    assert rec.trigger.prev_action_kind == "tap" and rec.trigger.prev_component_text == "Shop"
    assert rec.dismissal.dismissed and rec.dismissal.clicks_used == 1
    assert "Special offer" in rec.texts
    pow_events = [e for e in res.events if e.pows]
    assert pow_events and pow_events[0].pows == (rec.id,)


def test_repeated_pow_is_deduplicated():
    trig = [{"when": {"on_enter": "shop"}, "once": False, "pow": simple_pow()}]
    news = screen("news", [row("read", 400, "Read"), row("more", 480, "More")], [("more", "shop")])
    res = explore(SimulatedDevice(make_script([HOME, SHOP, news], triggers=trig)), cfg())
    (rec,) = res.records
    assert rec.occurrences >= 2


def test_chained_pow_gets_own_record():
    second = simple_pow(text="Also this", bbox=[60, 420, 300, 620], confirm="")
    trig = [{"when": {"on_enter": "shop"}, "pow": simple_pow(confirm="", bbox=[30, 60, 330, 360],
                                                             chained_pow=second)}]
    res = explore(SimulatedDevice(make_script([HOME, SHOP, NEWS], triggers=trig)), cfg())
    first, chained = res.records
    assert chained.chain_parent == first.id and chained.trigger.prev_component_text == "Close"


def test_permission_dialog_from_other_package():
    trig = [{"when": {"on_enter": "news"}, "pow": simple_pow(text="Allow access?", package="com.android.perm")}]
    res = explore(SimulatedDevice(make_script([HOME, SHOP, NEWS], triggers=trig)), cfg())
    (rec,) = res.records
    assert rec.dialog_package == "com.android.perm" and rec.source_app_package != rec.dialog_package


def test_action_budget_caps_events():
    res = explore(SimulatedDevice(tree_script(40, seed=1)), cfg(action_budget=25))
    assert len(res.events) <= 25
    assert [e.seq for e in res.events] == list(range(len(res.events)))


def test_runs_are_deterministic():
    script = tree_script(25, seed=3, triggers=[{"when": {"on_enter": "s5"}, "pow": simple_pow()}])
    a = explore(SimulatedDevice(script), cfg(action_budget=200))
    b = explore(SimulatedDevice(script), cfg(action_budget=200))
    assert [e.to_json() for e in a.events] == [e.to_json() for e in b.events]


def test_events_serialise_and_replay():
    script = tree_script(20, seed=2)
    res = explore(SimulatedDevice(script), cfg(action_budget=120))
    lines = [e.to_json() for e in res.events]
    events = read_events(lines)
    assert [e.to_json() for e in events] == lines
    assert replay_events(events, SimulatedDevice(script), cfg()) is None
    assert replay_events([], SimulatedDevice(script)) is None


def test_replay_detects_divergence():
    script = tree_script(20, seed=2)
    events = explore(SimulatedDevice(script), cfg(action_budget=60)).events
    other = tree_script(20, seed=9)
    assert replay_events(events, SimulatedDevice(other), cfg()) is not None


def test_random_walk_is_seeded():
    script = tree_script(20, seed=5)
    a = random_walk(SimulatedDevice(script), seed=1, action_budget=80)
    b = random_walk(SimulatedDevice(script), seed=1, action_budget=80)
    c = random_walk(SimulatedDevice(script), seed=2, action_budget=80)
    assert [e.to_json() for e in a.events] == [e.to_json() for e in b.events]
    assert [e.to_json() for e in a.events] != [e.to_json() for e in c.events]
    assert len(a.events) == 80
    assert {e.action.kind for e in a.events} <= {"tap", "back", "restart"}


class Flaky(SimulatedDevice):
    """Drops the connection for a number of captures starting at a given call."""

    def __init__(self, script, fail_at, failures):
        super().__init__(script)
        self.calls = 0
        self.fail_at = fail_at
        self.failures = failures

    def capture(self):
        self.calls += 1
        if self.fail_at <= self.calls < self.fail_at + self.failures:
            raise DeviceUnavailable("adb offline")
        return super().capture()


def test_transient_device_loss_is_recovered():
    script = tree_script(15, seed=1)
    dev = Flaky(script, fail_at=10, failures=2)
    res = explore(dev, cfg())
    assert not res.stats.aborted
    assert dev.sim.visited == set(script.screens)


def test_persistent_device_loss_aborts():
    res = explore(Flaky(tree_script(15, seed=1), fail_at=10, failures=10**6), cfg())
    assert res.stats.aborted
    assert res.stats.states >= 1


def test_restart_events_are_logged():
    script = chain_script(5, back_map={"c4": "c0"})
    res = explore(SimulatedDevice(script), cfg())
    assert RESTART in [e.action for e in res.events]
