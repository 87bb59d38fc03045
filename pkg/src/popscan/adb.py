"""Client for the host ADB server's smart-socket protocol, plus a driver.

Requests are ``%04x`` length-prefixed ASCII service names. The server
answers ``OKAY`` or ``FAIL``; a failure carries a length-prefixed message.
After ``OKAY`` the payload depends on the service: ``host:version`` and
friends send a length-prefixed blob, ``host:transport:<serial>`` sends
nothing (the socket is now bound to that device), and ``shell:`` streams
raw bytes until the server closes the connection.
"""

from __future__ import annotations

import io
import logging
import os
import shlex
import socket
import time
from typing import Callable, Optional

import numpy as np

from .device import DeviceUnavailable
from .gui import ScreenSnapshot, parse_hierarchy, MalformedDocument

log = logging.getLogger(__name__)

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 5037
MAX_SERVICE_LEN = 0xFFFF
OKAY = b"OKAY"
FAIL = b"FAIL"


class AdbError(Exception):
    pass


class AdbConnectionRefused(AdbError):
    pass


class ProtocolFail(AdbError):
    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class CaptureSkew(DeviceUnavailable):
    """Hierarchy dump and screenshot were taken too far apart."""


# --------------------------------------------------------------------------
# framing

def encode_request(service: str) -> bytes:
    if not service:
        raise ValueError("empty ADB service request")
    data = service.encode("utf-8")
    if len(data) > MAX_SERVICE_LEN:
        raise ValueError("ADB service request too long")
    return b"%04x" % len(data) + data


def _parse_hex_len(raw: bytes) -> int:
    if len(raw) != 4:
        raise ProtocolFail(f"truncated length prefix {raw!r}")
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError:
        raise ProtocolFail(f"non-ascii length prefix {raw!r}") from None
    if any(c not in "0123456789abcdefABCDEF" for c in text):
        raise ProtocolFail(f"bad length prefix {raw!r}")
    return int(text, 16)


def decode_request(frame: bytes) -> tuple[str, bytes]:
    """Split one request frame off ``frame``; returns (service, remainder)."""
    length = _parse_hex_len(frame[:4])
    body = frame[4:4 + length]
    if len(body) != length:
        raise ProtocolFail("truncated request body")
    if length == 0:
        raise ProtocolFail("empty service in request")
    try:
        service = body.decode("utf-8")
    except UnicodeDecodeError:
        raise ProtocolFail("service is not valid utf-8") from None
    return service, frame[4 + length:]


def encode_blob(data: bytes) -> bytes:
    if len(data) > MAX_SERVICE_LEN:
        raise ValueError("blob too long for a length-prefixed frame")
    return b"%04x" % len(data) + data


def encode_okay(payload: bytes = b"") -> bytes:
    return OKAY + payload


def encode_fail(message: str) -> bytes:
    return FAIL + encode_blob(message.encode("utf-8"))


def decode_response(frame: bytes, length_prefixed: bool = True) -> bytes:
    """Decode a complete status frame; raises :class:`ProtocolFail` on FAIL or junk."""
    status = frame[:4]
    if status == FAIL:
        n = _parse_hex_len(frame[4:8])
        msg = frame[8:8 + n]
        if len(msg) != n:
            raise ProtocolFail("truncated FAIL message")
        raise ProtocolFail(msg.decode("utf-8", errors="replace"))
    if status != OKAY:
        raise ProtocolFail(f"unexpected status {status!r}")
    rest = frame[4:]
    if not length_prefixed:
        return rest
    n = _parse_hex_len(rest[:4])
    body = rest[4:4 + n]
    if len(body) != n:
        raise ProtocolFail("truncated payload")
    return body


# --------------------------------------------------------------------------
# socket transport

class AdbConnection:
    def __init__(self, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT, timeout: float = 10.0):
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout)
        except ConnectionRefusedError as exc:
            raise AdbConnectionRefused(f"ADB server refused connection at {host}:{port}") from exc
        except OSError as exc:
            raise AdbConnectionRefused(f"cannot reach ADB server at {host}:{port}: {exc}") from exc

    def send(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise ProtocolFail(f"send failed: {exc}") from exc

    def read_exact(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining:
            try:
                chunk = self.sock.recv(remaining)
            except OSError as exc:
                raise ProtocolFail(f"recv failed: {exc}") from exc
            if not chunk:
                raise ProtocolFail(f"connection closed with {remaining} of {n} bytes outstanding")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def read_all(self) -> bytes:
        chunks = []
        while True:
            try:
                chunk = self.sock.recv(65536)
            except OSError as exc:
                raise ProtocolFail(f"recv failed: {exc}") from exc
            if not chunk:
                return b"".join(chunks)
            chunks.append(chunk)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self) -> "AdbConnection":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def payload_mode(service: str) -> str:
    if service.startswith("host:transport"):
        return "none"
    if service.startswith(("shell:", "exec:")):
        return "stream"
    return "length"


def adb_request(conn: AdbConnection, service: str, mode: Optional[str] = None) -> bytes:
    """One request/response exchange on ``conn``."""
    frame = encode_request(service)  # rejects empty services before anything is sent
    conn.send(frame)
    status = conn.read_exact(4)
    if status == FAIL:
        n = _parse_hex_len(conn.read_exact(4))
        raise ProtocolFail(conn.read_exact(n).decode("utf-8", errors="replace"))
    if status != OKAY:
        raise ProtocolFail(f"unexpected status {status!r}")
    mode = mode or payload_mode(service)
    if mode == "none":
        return b""
    if mode == "stream":
        return conn.read_all()
    n = _parse_hex_len(conn.read_exact(4))
    return conn.read_exact(n)


def server_endpoint_from_env(environ=None) -> tuple[str, int]:
    """Honour ``ADB_SERVER_SOCKET=tcp:host:port`` like the stock adb client."""
    environ = os.environ if environ is None else environ
    spec = environ.get("ADB_SERVER_SOCKET", "")
    if spec.startswith("tcp:"):
        host, _, port = spec[4:].rpartition(":")
        return (host or DEFAULT_HOST, int(port))
    port = environ.get("ANDROID_ADB_SERVER_PORT")
    return (DEFAULT_HOST, int(port) if port else DEFAULT_PORT)


class AdbClient:
    def __init__(self, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT, timeout: float = 30.0):
        self.host = host
        self.port = port
        self.timeout = timeout

    def _connect(self) -> AdbConnection:
        return AdbConnection(self.host, self.port, self.timeout)

    def version(self) -> str:
        with self._connect() as conn:
            return adb_request(conn, "host:version").decode("ascii")

    def shell(self, serial: str, command: str) -> bytes:
        with self._connect() as conn:
            adb_request(conn, f"host:transport:{serial}")
            return adb_request(conn, f"shell:{command}")


# --------------------------------------------------------------------------
# device driver

DUMP_PATH = "/sdcard/window_dump.xml"


def decode_png(data: bytes) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()
    except (UnidentifiedImageError, OSError) as exc:
        raise DeviceUnavailable(f"screencap returned undecodable data ({len(data)} bytes)") from exc


def encode_png(image: np.ndarray) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return buf.getvalue()


class AdbDriver:
    """:class:`~popscan.device.DeviceDriver` for a real device behind an ADB server.

    ``capture`` runs ``uiautomator dump`` then ``screencap -p`` back to back
    and only afterwards reads the dump file, so the gap between the two
    observations stays small. A gap above ``max_skew_ms`` is retried once.
    """

    def __init__(
        self,
        client: AdbClient,
        serial: str,
        package: str,
        settle_ms: int = 800,
        max_skew_ms: int = 200,
        launch_activity: str = "",
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.client = client
        self.serial = serial
        self.package = package
        self.settle_ms = settle_ms
        self.max_skew_ms = max_skew_ms
        self.launch_activity = launch_activity
        self._clock = clock
        self._sleep = sleep
        self._dims: Optional[tuple[int, int]] = None

    def _shell(self, command: str) -> bytes:
        try:
            return self.client.shell(self.serial, command)
        except AdbError as exc:
            raise DeviceUnavailable(f"{self.serial}: {exc}") from exc

    def _settle(self) -> None:
        if self.settle_ms > 0:
            self._sleep(self.settle_ms / 1000.0)

    def _capture_once(self) -> tuple[ScreenSnapshot, float]:
        self._shell(f"uiautomator dump {DUMP_PATH}")
        dumped_at = self._clock()
        shot_started = self._clock()
        png = self._shell("screencap -p")
        xml = self._shell(f"cat {DUMP_PATH}").decode("utf-8", errors="replace")
        image = decode_png(png)
        h, w = image.shape[:2]
        self._dims = (w, h)
        start = xml.find("<?xml")
        if start < 0:
            start = xml.find("<hierarchy")
        if start > 0:
            xml = xml[start:]
        try:
            root = parse_hierarchy(xml, (w, h))
        except MalformedDocument as exc:
            raise DeviceUnavailable(f"corrupt hierarchy dump: {exc}") from exc
        skew_ms = (shot_started - dumped_at) * 1000.0
        snap = ScreenSnapshot(
            root=root,
            screenshot=image,
            activity_name="",
            app_package=root.package_id,
            capture_time=int(dumped_at * 1000),
        )
        return snap, skew_ms

    def capture(self) -> ScreenSnapshot:
        snap, skew = self._capture_once()
        if skew <= self.max_skew_ms:
            return snap
        log.info("capture skew %.0f ms above bound, retrying", skew)
        snap, skew = self._capture_once()
        if skew > self.max_skew_ms:
            raise CaptureSkew(f"dump/screenshot skew {skew:.0f} ms")
        return snap

    def tap(self, x: int, y: int) -> None:
        self._shell(f"input tap {int(x)} {int(y)}")
        self._settle()

    def back(self) -> None:
        self._shell("input keyevent 4")
        self._settle()

    def restart_app(self) -> None:
        pkg = shlex.quote(self.package)
        self._shell(f"am force-stop {pkg}")
        if self.launch_activity:
            self._shell(f"am start -W -n {pkg}/{shlex.quote(self.launch_activity)}")
        else:
            self._shell(
                f"am start -W -a android.intent.action.MAIN -c android.intent.category.LAUNCHER -p {pkg}"
            )
        self._settle()

    def screen_dims(self) -> tuple[int, int]:
        if self._dims is None:
            out = self._shell("wm size").decode("ascii", errors="replace")
            # "Physical size: 1080x1920" (an override line may follow)
            sizes = [line.split(":")[-1].strip() for line in out.splitlines() if "size" in line]
            if not sizes:
                raise DeviceUnavailable(f"cannot read screen size from {out!r}")
            w, h = sizes[-1].split("x")
            self._dims = (int(w), int(h))
        return self._dims

    def app_package(self) -> str:
        return self.package
