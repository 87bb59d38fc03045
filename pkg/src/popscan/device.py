"""Device driver interface shared by the simulator and the ADB adapter."""

from __future__ import annotations

from typing import Protocol

from .gui import ScreenSnapshot


class DeviceUnavailable(RuntimeError):
    """The device stopped answering; the exploration layer may attempt recovery."""


class DeviceDriver(Protocol):
    def capture(self) -> ScreenSnapshot:
        ...

    def tap(self, x: int, y: int) -> None:
        ...

    def back(self) -> None:
        ...

    def restart_app(self) -> None:
        ...

    def screen_dims(self) -> tuple[int, int]:
        ...

    def app_package(self) -> str:
        ...
