"""Line-delimited JSON notification protocol over local TCP."""

from __future__ import annotations

import json
import socket
import socketserver
import threading
import time
from dataclasses import dataclass
from pathlib import Path

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 48100
MAX_LINE_BYTES = 4096
MAX_SOURCE_CHARS = 64
CLIENT_TIMEOUT_S = 30.0


class ProtocolError(Exception):
    """A well-formed reply can still be sent for these."""


@dataclass
class WireMessage:
    type: str
    level: int = 0
    source: str = "unknown"
    client_ts: float | None = None


def parse_message(raw: bytes | str) -> WireMessage:
    """Validate one line. Unknown fields are ignored, unknown types are not."""
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ProtocolError(f"invalid utf-8: {e}") from None
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"invalid json: {e.msg}") from None
    if not isinstance(obj, dict):
        raise ProtocolError("message must be a json object")
    mtype = obj.get("type")
    if mtype == "ping":
        return WireMessage(type="ping")
    if mtype != "notify":
        raise ProtocolError(f"unknown type: {mtype!r}")
    level = obj.get("level")
    if not isinstance(level, int) or isinstance(level, bool) \
            or not 1 <= level <= 3:
        raise ProtocolError("level must be an integer in 1..3")
    source = obj.get("source", "unknown")
    if not isinstance(source, str) or len(source) > MAX_SOURCE_CHARS:
        raise ProtocolError(f"source must be a string of at most "
                            f"{MAX_SOURCE_CHARS} chars")
    client_ts = obj.get("client_ts")
    if client_ts is not None:
        if isinstance(client_ts, bool) or not isinstance(client_ts, (int, float)):
            raise ProtocolError("client_ts must be a number")
    return WireMessage(type="notify", level=level, source=source,
                       client_ts=None if client_ts is None else float(client_ts))


def encode_reply(ok: bool, **fields) -> bytes:
    return (json.dumps({"ok": ok, **fields}) + "\n").encode("utf-8")


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        self.request.settimeout(CLIENT_TIMEOUT_S)
        while True:
            try:
                line = self.rfile.readline(MAX_LINE_BYTES + 1)
            except (socket.timeout, OSError):
                return
            if not line:
                return
            if len(line) > MAX_LINE_BYTES:
                # oversized: reply once, then drop the connection
                self._reply(encode_reply(False, error="line too long"))
                return
            if not line.strip():
                continue
            try:
                msg = parse_message(line)
            except ProtocolError as e:
                self._reply(encode_reply(False, error=str(e)))
                continue
            if msg.type == "ping":
                self._reply(encode_reply(True, type="pong"))
                continue
            accepted, info = self.server.dispatch(msg)
            self._reply(encode_reply(accepted, **info))

    def _reply(self, data: bytes) -> None:
        try:
            self.wfile.write(data)
            self.wfile.flush()
        except OSError:
            pass


class NotificationServer(socketserver.ThreadingTCPServer):
    """Accepts notify messages and hands them to a callback."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address=(DEFAULT_HOST, DEFAULT_PORT), on_notify=None):
        super().__init__(address, _Handler)
        self.on_notify = on_notify

    def dispatch(self, msg: WireMessage) -> tuple[bool, dict]:
        if self.on_notify is None:
            return False, {"error": "no session attached"}
        return self.on_notify(msg)

    def serve_in_thread(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t


# ----- Client helpers -----

def send_message(obj: dict, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT,
                 timeout: float = 5.0) -> dict:
    """One request, one reply."""
    with socket.create_connection((host, port), timeout=timeout) as sock:
        sock.sendall((json.dumps(obj) + "\n").encode("utf-8"))
        reader = sock.makefile("rb")
        line = reader.readline(MAX_LINE_BYTES + 1)
    if not line:
        raise ConnectionError("server closed the connection without a reply")
    return json.loads(line.decode("utf-8"))


def send_notification(level: int, source: str = "client",
                      host: str = DEFAULT_HOST, port: int = DEFAULT_PORT) -> dict:
    return send_message({"type": "notify", "level": level, "source": source,
                         "client_ts": time.time()}, host, port)


def watch_file(path: str | Path, host: str = DEFAULT_HOST,
               port: int = DEFAULT_PORT, poll_s: float = 0.25,
               stop: threading.Event | None = None) -> int:
    """Tail a text file; each appended line "LEVEL [SOURCE]" becomes a notify.

    Returns the number of notifications sent. Lines that do not start with a
    level digit are skipped.
    """
    path = Path(path)
    sent = 0
    offset = path.stat().st_size if path.exists() else 0
    while stop is None or not stop.is_set():
        if path.exists():
            size = path.stat().st_size
            if size < offset:
                offset = 0
            if size > offset:
                with open(path, "r") as fh:
                    fh.seek(offset)
                    chunk = fh.read()
                    offset = fh.tell()
                for line in chunk.splitlines():
                    parts = line.strip().split(maxsplit=1)
                    if not parts or not parts[0].isdigit():
                        continue
                    level = int(parts[0])
                    if not 1 <= level <= 3:
                        continue
                    source = parts[1] if len(parts) > 1 else "watch"
                    try:
                        send_notification(level, source[:MAX_SOURCE_CHARS],
                                          host, port)
                        sent += 1
                    except OSError:
                        pass
        if stop is not None and stop.wait(poll_s):
            break
        if stop is None:
            time.sleep(poll_s)
    return sent
