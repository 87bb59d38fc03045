"""Builders for app scripts and corpora, plus a scripted fake ADB server."""

from __future__ import annotations

import random
import re
import socket
import socketserver
import threading
from typing import Optional

from popscan.adb import encode_png
from popscan.simulator import AppScript, SimulatedDevice

W, H = 360, 640
PKG = "com.test.app"
POW_BOX = [30, 160, 330, 480]


# --------------------------------------------------------------------------
# script builders

def comp(cid, bounds, text="", **kw) -> dict:
    d = {"id": cid, "bounds": list(bounds), "text": text}
    d.update(kw)
    return d


def row(cid, top, text="", height=56, **kw) -> dict:
    return comp(cid, [20, top, 340, top + height], text or cid, **kw)


def screen(sid, components, transitions=(), **kw) -> dict:
    d = {"id": sid, "components": list(components), "transitions": [list(t) for t in transitions]}
    d.update(kw)
    return d


def pow_dict(bbox=POW_BOX, buttons=(), texts=(), toggles=(), **kw) -> dict:
    d = {"bbox": list(bbox), "buttons": list(buttons), "texts": list(texts), "toggles": list(toggles)}
    d.update(kw)
    return d


def pow_button(kind, bounds, text="", action="dismiss", **kw) -> dict:
    d = {"kind": kind, "bounds": list(bounds), "text": text, "action": action}
    d.update(kw)
    return d


def make_script(screens, entry=None, triggers=(), back_map=None, package=PKG, **kw) -> AppScript:
    data = {
        "schema_version": 1,
        "app_package": package,
        "screen": [W, H],
        "entry_screen": entry or screens[0]["id"],
        "screens": list(screens),
        "back_map": dict(back_map or {}),
        "pow_triggers": list(triggers),
    }
    data.update(kw)
    return AppScript.from_dict(data)


def simple_pow(text="Special offer", confirm="OK", exit_text="Close", bbox=POW_BOX, **kw) -> dict:
    l, t, r, b = bbox
    buttons = []
    if exit_text:
        buttons.append(pow_button("neutral", [l + 20, b - 70, r - 20, b - 20], exit_text))
    if confirm:
        buttons.append(pow_button("confirm", [l + 20, b - 140, r - 20, b - 90], confirm))
    return pow_dict(bbox, buttons=buttons, texts=[{"bounds": [l + 20, t + 30, r - 20, t + 70], "text": text}], **kw)


# --------------------------------------------------------------------------
# distinct layouts: no two styles share a signature token

STYLES = [(col, w, h) for h in (40, 70) for w in (40, 80) for col in range(1, 10)]
STYLES += [(col, 150, h) for h in (40, 70) for col in range(3, 9)]


def styled_buttons(style: int, ids: list[str]) -> list[dict]:
    col, w, h = STYLES[style]
    left = min(max(col * 32 + 16 - w // 2, 0), W - w)
    out = []
    for k, cid in enumerate(ids):
        top = 70 + k * (h + 10)
        out.append(comp(cid, [left, top, left + w, top + h], cid))
    return out


def tree_script(n_states: int, seed: int = 0, max_children: int = 3, depth_cap: Optional[int] = None,
                triggers=(), back_map=None) -> AppScript:
    """Random navigation tree; each screen carries a marker plus one button per child."""
    if n_states > len(STYLES):
        raise ValueError("not enough distinct layouts")
    rng = random.Random(seed)
    depth = {"s0": 0}
    children: dict[str, list[str]] = {"s0": []}
    for i in range(1, n_states):
        parents = [p for p in children if len(children[p]) < max_children
                   and (depth_cap is None or depth[p] < depth_cap)]
        parent = rng.choice(parents)
        sid = f"s{i}"
        children[parent].append(sid)
        children[sid] = []
        depth[sid] = depth[parent] + 1
    screens = []
    for i, (sid, kids) in enumerate(children.items()):
        ids = ["mark"] + [f"to_{k}" for k in kids]
        screens.append(screen(sid, styled_buttons(i, ids), [(f"to_{k}", k) for k in kids]))
    return make_script(screens, "s0", triggers, back_map)


def chain_script(length: int, back_map=None, one_shot=(), triggers=()) -> AppScript:
    ids = [f"c{i}" for i in range(length)]
    screens = []
    for i, sid in enumerate(ids):
        btns = ["mark"] + ([f"next{i}"] if i + 1 < length else [])
        trans = [(f"next{i}", ids[i + 1])] if i + 1 < length else []
        screens.append(screen(sid, styled_buttons(i, btns), trans, one_shot=sid in one_shot))
    return make_script(screens, "c0", triggers, back_map)


def pow_path_script(n_states: int = 36, seed: int = 11, n_pows: int = 6) -> AppScript:
    """Tree whose pop-ups only appear on its deepest screens."""
    base = tree_script(n_states, seed=seed)
    depths = base.screen_depths()
    deepest = sorted(depths, key=lambda sid: (-depths[sid], int(sid[1:])))[:n_pows]
    triggers = []
    for k, sid in enumerate(deepest):
        t = 150 + 12 * k
        triggers.append({"when": {"on_enter": sid}, "pow": simple_pow(text=f"Offer {k}", bbox=[30, t, 330, t + 320])})
    return tree_script(n_states, seed=seed, triggers=triggers)


# --------------------------------------------------------------------------
# detection corpus

BG_COLORS = [(205, 222, 245), (240, 240, 240), (255, 255, 255), (230, 245, 230), (250, 235, 215), (90, 140, 220)]


def _random_background(rng: random.Random, sid: str) -> dict:
    comps = []
    top = 60
    i = 0
    while top < H - 80:
        h = rng.randint(40, 110)
        left = rng.randint(0, 40)
        right = rng.randint(W - 40, W)
        comps.append(comp(f"c{i}", [left, top, right, min(top + h, H)], f"item {i}",
                          color=list(rng.choice(BG_COLORS)), clickable=rng.random() < 0.7))
        top += h + rng.randint(4, 30)
        i += 1
    comps.append(comp("bar", [0, 0, W, 50], "Title", color=[60, 60, 60], clickable=False))
    return screen(sid, comps)


def _random_pow(rng: random.Random, inner=None) -> dict:
    w = rng.randint(200, 330)
    h = rng.randint(160, 420)
    left = rng.randint(0, W - w)
    top = rng.randint(60, H - h)
    box = [left, top, left + w, top + h]
    buttons = [pow_button("confirm", [left + 15, top + h - 60, left + w - 15, top + h - 15], "OK")]
    if rng.random() < 0.6:
        buttons.append(pow_button("exit", [left + w - 34, top + 6, left + w - 8, top + 32], "×"))
    texts = [{"bounds": [left + 15, top + 40, left + w - 15, top + 70], "text": "Offer"}]
    d = pow_dict(box, buttons=buttons, texts=texts, shadow_alpha=round(rng.uniform(0.25, 0.42), 2))
    if inner is not None:
        d["chained_pow"] = inner
    return d


def detection_corpus(seed: int = 7, single: int = 120, none: int = 40, double: int = 40):
    """Yield (label, image, ground-truth bbox or None) over simulator renders."""
    from popscan.simulator import ActivePow, pow_spec_from_dict, render

    rng = random.Random(seed)
    plan = ["single"] * single + ["none"] * none + ["double"] * double
    for idx, kind in enumerate(plan):
        script = make_script([_random_background(rng, "home")])
        pows = []
        if kind in ("single", "double"):
            pows.append(pow_spec_from_dict(_random_pow(rng)))
        if kind == "double":
            pows.append(pow_spec_from_dict(_random_pow(rng)))
        active = [ActivePow(p, [t.initially_checked for t in p.toggles]) for p in pows]
        truth = pows[-1].bbox if pows else None
        yield kind, render(script, "home", active), truth


# --------------------------------------------------------------------------
# dismissal corpus

def dismissal_corpus() -> list[tuple[str, AppScript, str]]:
    """30 scripts, one pop-up at launch each; (name, script, expectation)."""
    home = screen("home", [row("go", 520, "Go")])
    out = []

    def add(name, pow_spec, expect="dismissable"):
        out.append((name, make_script([home], triggers=[{"when": {"on_enter": "home"}, "pow": pow_spec}]), expect))

    for i in range(10):
        t = 150 + 10 * i
        add(f"close-first-{i}", pow_dict([30, t, 330, t + 300], buttons=[
            pow_button("neutral", [50, t + 230, 310, t + 280], "Close"),
            pow_button("confirm", [50, t + 160, 310, t + 210], "Buy"),
        ]))
    for i in range(8):
        t = 140 + 12 * i
        add(f"exit-corner-{i}", pow_dict([30, t, 330, t + 320], buttons=[
            pow_button("exit", [296, t + 6, 322, t + 32], "×"),
            pow_button("confirm", [50, t + 250, 310, t + 300], "Subscribe", action="none"),
        ]))
    for i in range(6):
        t = 160 + 8 * i
        add(f"confirm-dismisses-{i}", pow_dict([40, t, 320, t + 260], buttons=[
            pow_button("confirm", [60, t + 190, 300, t + 240], "Got it"),
        ], texts=[{"bounds": [60, t + 30, 300, t + 70], "text": "New features"}]))
    for i in range(2):
        t = 180
        add(f"second-try-{i}", pow_dict([30, t, 330, t + 300], buttons=[
            pow_button("confirm", [50, t + 160, 310, t + 210], "Upgrade", action="none"),
            pow_button("neutral", [50, t + 230, 310, t + 280], "Later"),
        ]))
    add("third-try", pow_dict([30, 150, 330, 500], buttons=[
        pow_button("confirm", [50, 200, 310, 250], "Upgrade", action="none"),
        pow_button("confirm", [50, 270, 310, 320], "Trial", action="none"),
        pow_button("neutral", [50, 420, 310, 470], "Skip"),
    ]))
    add("back-only", pow_dict([30, 180, 330, 480], buttons=[
        pow_button("confirm", [50, 400, 310, 450], "Rate", action="none"),
    ]))
    add("forced-next", pow_dict([30, 180, 330, 480], back_dismisses=False, buttons=[
        pow_button("confirm", [50, 400, 310, 450], "Next", action="none"),
    ]), expect="forced")
    add("forced-terms", pow_dict([30, 180, 330, 480], back_dismisses=False, buttons=[
        pow_button("confirm", [50, 330, 310, 380], "Accept terms", action="none"),
        pow_button("neutral", [50, 400, 310, 450], "Read more", action="none"),
    ]), expect="forced")
    assert len(out) == 30
    return out


# --------------------------------------------------------------------------
# fake ADB server

DUMP_PATH = "/sdcard/window_dump.xml"


class FakeAdbServer:
    """Smart-socket server that answers like adb and drives a simulated device.

    Every received request frame is appended to ``received`` so tests can
    assert exact client byte sequences.
    """

    def __init__(self, script: AppScript, serial: str = "emu-1", package: Optional[str] = None):
        self.device = SimulatedDevice(script, settle_ms=0)
        self.serial = serial
        self.package = package or script.app_package
        self.received: list[bytes] = []
        self.commands: list[str] = []
        self._dump = ""
        self._lock = threading.Lock()
        outer = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                outer._serve(self.request)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server(("127.0.0.1", 0), Handler)
        self.port = self._server.server_address[1]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    def __enter__(self) -> "FakeAdbServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()

    @property
    def env(self) -> dict:
        return {"ADB_SERVER_SOCKET": f"tcp:127.0.0.1:{self.port}"}

    @staticmethod
    def _read(sock: socket.socket, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = sock.recv(n - len(buf))
            if not chunk:
                return buf
            buf += chunk
        return buf

    def _serve(self, sock: socket.socket) -> None:
        transported = False
        while True:
            head = self._read(sock, 4)
            if len(head) < 4:
                return
            body = self._read(sock, int(head, 16))
            with self._lock:
                self.received.append(head + body)
            service = body.decode()
            if service == "host:version":
                sock.sendall(b"OKAY" + b"0004" + b"0029")
                return
            if service.startswith("host:transport:"):
                if service.split(":", 2)[2] != self.serial:
                    msg = f"device '{service.split(':', 2)[2]}' not found".encode()
                    sock.sendall(b"FAIL" + b"%04x" % len(msg) + msg)
                    return
                sock.sendall(b"OKAY")
                transported = True
                continue
            if service.startswith("shell:") and transported:
                with self._lock:
                    out = self._shell(service[len("shell:"):])
                sock.sendall(b"OKAY" + out)
                return
            msg = b"unknown host service"
            sock.sendall(b"FAIL" + b"%04x" % len(msg) + msg)
            return

    def _shell(self, cmd: str) -> bytes:
        self.commands.append(cmd)
        dev = self.device
        if cmd == f"uiautomator dump {DUMP_PATH}":
            self._dump = dev.sim.dump_xml()
            return f"UI hierchary dumped to: {DUMP_PATH}\n".encode()
        if cmd == "screencap -p":
            return encode_png(dev.sim.render())
        if cmd == f"cat {DUMP_PATH}":
            return self._dump.encode()
        m = re.fullmatch(r"input tap (\d+) (\d+)", cmd)
        if m:
            dev.tap(int(m.group(1)), int(m.group(2)))
            return b""
        if cmd == "input keyevent 4":
            dev.back()
            return b""
        if cmd == f"am force-stop {self.package}":
            return b""
        if cmd.startswith("am start"):
            dev.restart_app()
            return b"Starting: Intent { act=android.intent.action.MAIN }\nStatus: ok\n"
        if cmd == "wm size":
            w, h = dev.script.screen_size
            return f"Physical size: {w}x{h}\n".encode()
        return f"/system/bin/sh: {cmd.split()[0]}: not found\n".encode()
