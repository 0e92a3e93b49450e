from __future__ import annotations

import json
import socket
import threading

import pytest

from songcue.protocol import (MAX_LINE_BYTES, NotificationServer,
                              ProtocolError, WireMessage, encode_reply,
                              parse_message, send_message, send_notification,
                              watch_file)


# ----- Parsing -----

def test_parse_minimal_notify():
    msg = parse_message('{"type": "notify", "level": 2}')
    assert msg == WireMessage(type="notify", level=2, source="unknown")


def test_parse_full_notify_and_unknown_fields():
    raw = json.dumps({"type": "notify", "level": 3, "source": "mail",
                      "client_ts": 12.5, "shiny": [1, 2]})
    msg = parse_message(raw)
    assert (msg.level, msg.source, msg.client_ts) == (3, "mail", 12.5)


def test_parse_accepts_bytes_and_unicode():
    msg = parse_message('{"type": "notify", "level": 1, "source": "mañana"}'
                        .encode("utf-8"))
    assert msg.source == "mañana"


def test_parse_ping():
    assert parse_message('{"type": "ping"}').type == "ping"


@pytest.mark.parametrize("raw", [
    "not json at all",
    "[1, 2, 3]",
    '"just a string"',
    '{"type": "explode", "level": 2}',
    '{"level": 2}',
    '{"type": "notify"}',
    '{"type": "notify", "level": 0}',
    '{"type": "notify", "level": 4}',
    '{"type": "notify", "level": true}',
    '{"type": "notify", "level": "2"}',
    '{"type": "notify", "level": 2.0}',
    '{"type": "notify", "level": 2, "source": 7}',
    '{"type": "notify", "level": 2, "source": "' + "x" * 65 + '"}',
    '{"type": "notify", "level": 2, "client_ts": true}',
    '{"type": "notify", "level": 2, "client_ts": "now"}',
    b"\xff\xfe\x00garbage",
])
def test_parse_rejects_malformed(raw):
    with pytest.raises(ProtocolError):
        parse_message(raw)


def test_encode_reply_shape():
    line = encode_reply(True, type="pong")
    assert line.endswith(b"\n")
    assert json.loads(line) == {"ok": True, "type": "pong"}


# ----- Live server -----

@pytest.fixture()
def server():
    seen = []
    lock = threading.Lock()

    def on_notify(msg):
        with lock:
            seen.append(msg)
        return True, {}

    srv = NotificationServer(("127.0.0.1", 0), on_notify=on_notify)
    srv.seen = seen
    srv.serve_in_thread()
    yield srv
    srv.shutdown()
    srv.server_close()


def _port(server):
    return server.server_address[1]


def test_ping_pong(server):
    reply = send_message({"type": "ping"}, port=_port(server))
    assert reply == {"ok": True, "type": "pong"}


def test_notify_dispatches_to_the_callback(server):
    reply = send_notification(2, source="mail", port=_port(server))
    assert reply["ok"] is True
    assert server.seen[0].level == 2 and server.seen[0].source == "mail"


def test_malformed_lines_get_error_replies_and_the_listener_survives(server):
    port = _port(server)
    with socket.create_connection(("127.0.0.1", port), timeout=5) as sock:
        reader = sock.makefile("rb")
        for raw in [b"junk", b"[1]", b'{"type": "notify", "level": 9}',
                    b'{"type": "notify", "level": true}']:
            sock.sendall(raw + b"\n")
            reply = json.loads(reader.readline())
            assert reply["ok"] is False and "error" in reply
        # the same connection still serves valid traffic
        sock.sendall(b'{"type": "notify", "level": 1}\n')
        assert json.loads(reader.readline())["ok"] is True
    assert send_message({"type": "ping"}, port=port)["ok"] is True


def test_oversized_line_closes_the_connection(server):
    port = _port(server)
    with socket.create_connection(("127.0.0.1", port), timeout=5) as sock:
        reader = sock.makefile("rb")
        big = b'{"type": "notify", "level": 2, "source": "' \
            + b"x" * (MAX_LINE_BYTES + 100) + b'"}\n'
        sock.sendall(big)
        reply = json.loads(reader.readline())
        assert reply["ok"] is False
        assert reader.readline() == b""  # closed
    assert send_message({"type": "ping"}, port=port)["ok"] is True


def test_no_session_attached_rejects():
    srv = NotificationServer(("127.0.0.1", 0), on_notify=None)
    srv.serve_in_thread()
    try:
        reply = send_notification(1, port=srv.server_address[1])
        assert reply["ok"] is False and "no session" in reply["error"]
    finally:
        srv.shutdown()
        srv.server_close()


def test_concurrent_clients_all_acknowledged(server):
    port = _port(server)
    per_client = 20
    errors = []

    def client(k):
        try:
            for i in range(per_client):
                reply = send_notification(1 + (i % 3), source=f"c{k}",
                                          port=port)
                assert reply["ok"] is True
        except Exception as e:  # noqa: BLE001
            errors.append(e)

    threads = [threading.Thread(target=client, args=(k,)) for k in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert len(server.seen) == 3 * per_client


def test_watch_file_tails_levels(server, tmp_path):
    port = _port(server)
    f = tmp_path / "signals.txt"
    f.write_text("")
    stop = threading.Event()
    result = {}

    def run():
        result["sent"] = watch_file(f, port=port, poll_s=0.05, stop=stop)

    t = threading.Thread(target=run)
    t.start()
    with open(f, "a") as fh:
        fh.write("2 mail\n")
        fh.write("nonsense line\n")
        fh.write("9 out of range\n")
        fh.write("3\n")
    deadline = threading.Event()
    for _ in range(100):
        if len(server.seen) >= 2:
            break
        deadline.wait(0.05)
    stop.set()
    t.join(timeout=5)
    assert result["sent"] == 2
    assert [m.level for m in server.seen] == [2, 3]
    assert server.seen[0].source == "mail"
    assert server.seen[1].source == "watch"
