"""Headless-browser render harness speaking the debugging wire protocol.

The harness launches one browser process, attaches a page per render call,
injects the readiness shim, navigates to the chart document, waits until the
page reports readiness (load event fired, fonts loaded, two consecutive
animation frames with stable document height), lets a fixed settle interval
pass, and captures a PNG screenshot. Console entries are subscribed before
navigation so nothing emitted during load is lost.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import re
import subprocess
import tempfile
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from websockets.sync.client import connect as ws_connect

from .imaging import png_dimensions

logger = logging.getLogger(__name__)

_DEVTOOLS_LINE_RE = re.compile(r"DevTools listening on (ws://\S+)")
_MAX_WS_MESSAGE = 2**27  # screenshots ride the socket as base64

DEFAULT_BROWSER_FLAGS = (
    "--headless=new",
    "--disable-gpu",
    "--hide-scrollbars",
    "--no-first-run",
    "--no-default-browser-check",
    "--no-sandbox",
    "--force-color-profile=srgb",
    "--remote-debugging-port=0",
)


class RenderError(Exception):
    pass


class BrowserLaunchError(RenderError):
    pass


class NavigationError(RenderError):
    pass


class RenderTimeout(RenderError):
    """Readiness never arrived; carries the console collected so far."""

    def __init__(self, message: str, console: list["ConsoleEntry"]):
        super().__init__(message)
        self.console = console


@dataclass(frozen=True)
class ConsoleEntry:
    severity: str  # error | warning | info
    text: str
    source: str | None = None

    def __post_init__(self):
        if not self.text:
            raise ValueError("console entry text must be non-empty")


@dataclass
class RenderResult:
    console: list[ConsoleEntry]
    screenshot: bytes
    load_ms: float
    settle_ms: float

    @property
    def screenshot_size(self) -> tuple[int, int]:
        return png_dimensions(self.screenshot)

    def errors(self) -> list[ConsoleEntry]:
        return [e for e in self.console if e.severity == "error"]


@dataclass
class RenderOptions:
    width: int = 1280
    height: int = 960
    scale: int = 2
    settle_ms: int = 1000
    timeout_s: float = 15.0
    poll_interval_s: float = 0.1
    browser_path: str | None = None
    browser_command: tuple[str, ...] = ()
    launch_timeout_s: float = 30.0

    def command(self) -> list[str]:
        if self.browser_command:
            return list(self.browser_command)
        path = self.browser_path or os.environ.get("CW_BROWSER_PATH")
        if not path:
            raise BrowserLaunchError(
                "no browser configured: set browser_path, browser_command, or CW_BROWSER_PATH"
            )
        return [path, *DEFAULT_BROWSER_FLAGS]


def shim_source() -> str:
    return resources.files("chartweaver").joinpath("shim.js").read_text(encoding="utf-8")


_SNAPSHOT_EXPR = (
    "window.__cw_ready__ ? JSON.stringify(window.__cw_ready__.snapshot()) : null"
)

_SEVERITY_BY_CONSOLE_TYPE = {"error": "error", "assert": "error", "warning": "warning"}
_SEVERITY_BY_LOG_LEVEL = {"error": "error", "warning": "warning"}


class _CdpConnection:
    """One debugging-protocol socket with id-matched request/response."""

    def __init__(self, url: str, on_event):
        self.ws = ws_connect(url, max_size=_MAX_WS_MESSAGE)
        self.on_event = on_event
        self._next_id = 0
        self._abandoned: set[int] = set()

    def close(self) -> None:
        try:
            self.ws.close()
        except Exception:
            pass

    def request(
        self,
        method: str,
        params: dict | None = None,
        session_id: str | None = None,
        timeout_s: float = 30.0,
    ) -> dict:
        self._next_id += 1
        call_id = self._next_id
        payload: dict = {"id": call_id, "method": method, "params": params or {}}
        if session_id is not None:
            payload["sessionId"] = session_id
        self.ws.send(json.dumps(payload))
        deadline = time.monotonic() + timeout_s
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._abandoned.add(call_id)
                raise TimeoutError(f"no response to {method} within {timeout_s}s")
            try:
                raw = self.ws.recv(timeout=remaining)
            except TimeoutError:
                self._abandoned.add(call_id)
                raise TimeoutError(f"no response to {method} within {timeout_s}s") from None
            message = json.loads(raw)
            if "id" not in message:
                self.on_event(message)
                continue
            if message["id"] in self._abandoned:
                self._abandoned.discard(message["id"])
                continue
            if message["id"] != call_id:
                continue
            if "error" in message:
                raise NavigationError(f"{method} failed: {message['error']}")
            return message.get("result", {})

    def pump(self, duration_s: float) -> None:
        """Dispatch incoming events for a fixed wall-clock interval."""
        deadline = time.monotonic() + duration_s
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return
            try:
                raw = self.ws.recv(timeout=remaining)
            except TimeoutError:
                return
            message = json.loads(raw)
            if "id" not in message:
                self.on_event(message)
            elif message["id"] in self._abandoned:
                self._abandoned.discard(message["id"])


def _console_text(args: list[dict]) -> str:
    pieces = []
    for arg in args:
        if "value" in arg:
            value = arg["value"]
            pieces.append(value if isinstance(value, str) else json.dumps(value))
        elif "description" in arg:
            pieces.append(str(arg["description"]))
        else:
            pieces.append(arg.get("type", "?"))
    return " ".join(pieces) or "(no message)"


@dataclass
class _PageState:
    console: list[ConsoleEntry] = field(default_factory=list)
    load_fired: bool = False


class RenderHarness:
    """One browser process per harness; safe to call from multiple workers
    (render calls are serialized internally, one page per call)."""

    def __init__(self, options: RenderOptions | None = None):
        self.options = options or RenderOptions()
        self._lock = threading.Lock()
        self._stderr_lines: deque[str] = deque(maxlen=200)
        self._proc: subprocess.Popen | None = None
        self._conn: _CdpConnection | None = None
        self._page: _PageState | None = None
        self._shim = shim_source()
        self._launch()

    # -- lifecycle ---------------------------------------------------------

    def _launch(self) -> None:
        command = self.options.command()
        try:
            self._proc = subprocess.Popen(
                command,
                stdout=subprocess.DEVNULL,
                stderr=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            raise BrowserLaunchError(f"cannot launch {command[0]!r}: {exc}") from exc

        url_holder: list[str] = []
        ready = threading.Event()

        def _drain():
            assert self._proc is not None and self._proc.stderr is not None
            for line in self._proc.stderr:
                self._stderr_lines.append(line.rstrip())
                if not url_holder:
                    match = _DEVTOOLS_LINE_RE.search(line)
                    if match:
                        url_holder.append(match.group(1))
                        ready.set()
            ready.set()

        threading.Thread(target=_drain, daemon=True).start()
        if not ready.wait(self.options.launch_timeout_s) or not url_holder:
            self.close()
            tail = "\n".join(self._stderr_lines)
            raise BrowserLaunchError(f"browser never advertised a DevTools endpoint:\n{tail}")
        try:
            self._conn = _CdpConnection(url_holder[0], self._dispatch_event)
        except Exception as exc:
            self.close()
            raise BrowserLaunchError(f"cannot connect to DevTools endpoint: {exc}") from exc

    def close(self) -> None:
        if self._conn is not None:
            try:
                self._conn.request("Browser.close", timeout_s=2.0)
            except Exception:
                pass
            self._conn.close()
            self._conn = None
        if self._proc is not None:
            try:
                self._proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                self._proc.terminate()
                try:
                    self._proc.wait(timeout=3.0)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
                    self._proc.wait()
            self._proc = None

    def __enter__(self) -> "RenderHarness":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    @property
    def pid(self) -> int | None:
        return self._proc.pid if self._proc else None

    # -- events ------------------------------------------------------------

    def _dispatch_event(self, message: dict) -> None:
        page = self._page
        if page is None:
            return
        method = message.get("method")
        params = message.get("params", {})
        if method == "Runtime.consoleAPICalled":
            severity = _SEVERITY_BY_CONSOLE_TYPE.get(params.get("type", ""), "info")
            frames = (params.get("stackTrace") or {}).get("callFrames") or []
            source = None
            if frames:
                source = f"{frames[0].get('url', '')}:{frames[0].get('lineNumber', 0)}"
            page.console.append(
                ConsoleEntry(severity, _console_text(params.get("args", [])), source)
            )
        elif method == "Runtime.exceptionThrown":
            details = params.get("exceptionDetails", {})
            exception = details.get("exception") or {}
            text = exception.get("description") or details.get("text") or "uncaught exception"
            source = f"{details.get('url', '')}:{details.get('lineNumber', 0)}"
            page.console.append(ConsoleEntry("error", text, source))
        elif method == "Log.entryAdded":
            entry = params.get("entry", {})
            severity = _SEVERITY_BY_LOG_LEVEL.get(entry.get("level", ""), "info")
            text = entry.get("text") or "(no message)"
            page.console.append(ConsoleEntry(severity, text, entry.get("url")))
        elif method == "Page.loadEventFired":
            page.load_fired = True

    # -- rendering ---------------------------------------------------------

    def render(self, document: str) -> RenderResult:
        """Render one self-contained document and capture its screenshot."""
        if not document.strip():
            raise ValueError("document must be non-empty")
        if self._conn is None:
            raise RenderError("harness is closed")
        with self._lock:
            return self._render_locked(document)

    def _render_locked(self, document: str) -> RenderResult:
        conn = self._conn
        assert conn is not None
        opts = self.options
        tmp = tempfile.NamedTemporaryFile(
            mode="w", suffix=".html", delete=False, encoding="utf-8"
        )
        target_id: str | None = None
        self._page = page = _PageState()
        try:
            tmp.write(document)
            tmp.close()
            target_id = conn.request("Target.createTarget", {"url": "about:blank"})["targetId"]
            session = conn.request(
                "Target.attachToTarget", {"targetId": target_id, "flatten": True}
            )["sessionId"]
            for method in ("Page.enable", "Runtime.enable", "Log.enable"):
                conn.request(method, session_id=session)
            conn.request(
                "Page.addScriptToEvaluateOnNewDocument",
                {"source": self._shim},
                session_id=session,
            )
            conn.request(
                "Emulation.setDeviceMetricsOverride",
                {
                    "width": opts.width,
                    "height": opts.height,
                    "deviceScaleFactor": opts.scale,
                    "mobile": False,
                },
                session_id=session,
            )
            start = time.monotonic()
            navigation = conn.request(
                "Page.navigate", {"url": Path(tmp.name).as_uri()}, session_id=session
            )
            if navigation.get("errorText"):
                raise NavigationError(f"navigation failed: {navigation['errorText']}")

            deadline = start + opts.timeout_s
            if not self._await_ready(conn, session, page, deadline):
                raise RenderTimeout(
                    f"page not ready within {opts.timeout_s}s", list(page.console)
                )
            load_ms = (time.monotonic() - start) * 1000.0

            settle_start = time.monotonic()
            conn.pump(opts.settle_ms / 1000.0)
            settle_ms = (time.monotonic() - settle_start) * 1000.0

            data = conn.request(
                "Page.captureScreenshot", {"format": "png"}, session_id=session, timeout_s=30.0
            )["data"]
            screenshot = base64.b64decode(data)
            expected = (opts.width * opts.scale, opts.height * opts.scale)
            actual = png_dimensions(screenshot)
            if actual != expected:
                raise RenderError(f"screenshot is {actual}, expected {expected}")
            return RenderResult(list(page.console), screenshot, load_ms, settle_ms)
        finally:
            self._page = None
            if target_id is not None:
                try:
                    conn.request("Target.closeTarget", {"targetId": target_id}, timeout_s=5.0)
                except Exception:
                    logger.warning("failed to close page target %s", target_id)
            try:
                os.unlink(tmp.name)
            except OSError:
                pass

    def _await_ready(self, conn, session: str, page: _PageState, deadline: float) -> bool:
        opts = self.options
        while time.monotonic() < deadline:
            snapshot = self._poll_snapshot(conn, session, deadline)
            if snapshot is not None:
                if (
                    snapshot.get("load_fired")
                    and snapshot.get("fonts_ready")
                    and snapshot.get("stable_frames", 0) >= 2
                ):
                    return True
            elif page.load_fired:
                # shim unavailable: degrade to plain load-event readiness
                return True
            conn.pump(opts.poll_interval_s)
        return False

    def _poll_snapshot(self, conn, session: str, deadline: float) -> dict | None:
        remaining = max(0.05, deadline - time.monotonic())
        try:
            result = conn.request(
                "Runtime.evaluate",
                {"expression": _SNAPSHOT_EXPR, "returnByValue": True},
                session_id=session,
                timeout_s=min(remaining, 5.0),
            )
        except (TimeoutError, NavigationError):
            return None
        value = result.get("result", {}).get("value")
        if not isinstance(value, str):
            return None
        try:
            return json.loads(value)
        except json.JSONDecodeError:
            return None
