"""Remote debugging endpoint.

Streams rule-evaluation log records to connected clients, filtered by a
per-rule logging state (ALWAYS / NEVER / IF_TRUE / IF_FALSE, settable per
rule, per rule subtree, or per module).  On connect a client receives the
rule tree and the current state map; afterwards it gets one `log` message
per admissible record, `ack`s for its commands and `drops` notices when it
reads too slowly.

Transport is newline-delimited JSON over a plain TCP socket.  A connection
whose first bytes look like an HTTP request is upgraded to a WebSocket
carrying the same messages (one per text frame); plain GETs serve the
bundled browser UI when a directory is configured.  The engine hands
records over through a bounded queue and is never blocked by clients.
"""

from __future__ import annotations

import base64
import hashlib
import json
import socket
import struct
import threading
from collections import deque
from pathlib import Path

from .engine import Engine, RuleLogRecord

PROTOCOL_VERSION = 1

ALWAYS = "ALWAYS"
NEVER = "NEVER"
IF_TRUE = "IF_TRUE"
IF_FALSE = "IF_FALSE"
STATES = (ALWAYS, NEVER, IF_TRUE, IF_FALSE)

_WS_MAGIC = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
}


def admissible(state: str, final: bool) -> bool:
    """The tri-state filter: which records a rule's logging state lets through."""
    if state == ALWAYS:
        return True
    if state == IF_TRUE:
        return final
    if state == IF_FALSE:
        return not final
    return False


def build_rule_tree(program) -> list:
    """Module -> nested rule structure mirroring the compiled IR."""
    children: dict[int | None, list] = {}
    for rule in program.rules:
        children.setdefault(rule.parent, []).append(rule)

    def node(rule) -> dict:
        return {
            "id": rule.rule_id,
            "label": rule.label,
            "line": rule.line,
            "col": rule.col,
            "children": [node(child) for child in children.get(rule.rule_id, [])],
        }

    modules = []
    for name in program.module_order:
        roots = [r for r in children.get(None, []) if r.module == name]
        file_name = program.module_files.get(name, f"{name}.rudi")
        try:
            source = Path(file_name).read_text()
        except OSError:
            source = None  # artifact-only run; click-through shows position only
        modules.append(
            {
                "name": name,
                "file": file_name,
                "source": source,
                "rules": [node(r) for r in roots],
            }
        )
    return modules


def record_message(rec: RuleLogRecord) -> dict:
    return {
        "kind": "log",
        "t": rec.t,
        "rule": rec.rule_id,
        "label": rec.label,
        "final": rec.final,
        "terms": [{"i": t.term_id, "src": t.source, "v": t.value} for t in rec.terms],
    }


class LoggingState:
    """Effective per-rule logging states with subtree/module write-through."""

    def __init__(self, program):
        self.program = program
        self.states = {rule.rule_id: NEVER for rule in program.rules}

    def get(self, rule_id: int) -> str:
        return self.states.get(rule_id, NEVER)

    def _descendants(self, rule_id: int) -> list:
        ids = [rule_id]
        for rule in self.program.rules:
            if rule.parent == rule_id:
                ids.extend(self._descendants(rule.rule_id))
        return ids

    def apply(self, target: dict, state: str) -> None:
        if state not in STATES:
            raise ValueError(f"unknown logging state {state!r}")
        if "rule" in target:
            rule_id = int(target["rule"])
            if rule_id not in self.states:
                raise ValueError(f"unknown rule id {rule_id}")
            self.states[rule_id] = state
        elif "subtree" in target:
            root = int(target["subtree"])
            if root not in self.states:
                raise ValueError(f"unknown rule id {root}")
            for rid in self._descendants(root):
                self.states[rid] = state
        elif "module" in target:
            name = str(target["module"])
            ids = [r.rule_id for r in self.program.rules if r.module == name]
            if not ids:
                raise ValueError(f"unknown module {name!r}")
            for rid in ids:
                self.states[rid] = state
        else:
            raise ValueError("set-state target must name a rule, subtree or module")

    def snapshot(self) -> dict:
        return {str(rid): st for rid, st in sorted(self.states.items())}

    def load_snapshot(self, states: dict) -> None:
        parsed = {}
        for key, value in states.items():
            rid = int(key)
            if rid not in self.states:
                raise ValueError(f"unknown rule id {rid}")
            if value not in STATES:
                raise ValueError(f"unknown logging state {value!r}")
            parsed[rid] = value
        # all-or-nothing: only now mutate
        self.states.update(parsed)

    def save_config(self, path: Path) -> None:
        path.write_text(json.dumps({"states": self.snapshot()}, indent=2) + "\n")

    def load_config(self, path: Path) -> None:
        data = json.loads(path.read_text())
        self.load_snapshot(data.get("states", {}))


class _Client:
    _ids = 0

    def __init__(self, server: "DebugServer", sock: socket.socket, websocket: bool):
        _Client._ids += 1
        self.id = _Client._ids
        self.server = server
        self.sock = sock
        self.websocket = websocket
        self.buffer: deque = deque()
        self.drops = 0
        self.lock = threading.Lock()
        self.ready = threading.Condition(self.lock)
        self.closed = False

    def enqueue(self, message: dict) -> None:
        with self.lock:
            if self.closed:
                return
            if len(self.buffer) >= self.server.client_buffer:
                self.buffer.popleft()
                self.drops += 1
            self.buffer.append(message)
            self.ready.notify()

    def writer_loop(self) -> None:
        try:
            while True:
                with self.lock:
                    while not self.buffer and not self.closed and self.drops == 0:
                        self.ready.wait(timeout=0.5)
                    if self.closed:
                        return
                    if self.drops and not self.buffer:
                        message = {"kind": "drops", "count": self.drops}
                        self.drops = 0
                    elif self.buffer:
                        if self.drops:
                            message = {"kind": "drops", "count": self.drops}
                            self.drops = 0
                        else:
                            message = self.buffer.popleft()
                    else:
                        continue
                self._send(message)
        except OSError:
            pass
        finally:
            self.close()

    def _send(self, message: dict) -> None:
        payload = (json.dumps(message, sort_keys=True) + "\n").encode()
        if self.websocket:
            self.sock.sendall(_ws_frame(payload))
        else:
            self.sock.sendall(payload)

    def close(self) -> None:
        with self.lock:
            if self.closed:
                return
            self.closed = True
            self.ready.notify_all()
        try:
            self.sock.close()
        except OSError:
            pass
        self.server._remove_client(self)


class DebugServer:
    def __init__(
        self,
        engine: Engine,
        port: int = 0,
        host: str = "127.0.0.1",
        queue_size: int = 4096,
        client_buffer: int = 512,
        ui_dir: Path | None = None,
        allow_recompile: bool = False,
    ):
        self.engine = engine
        self.program = engine.program
        self.host = host
        self.requested_port = port
        self.port: int | None = None
        self.queue_size = queue_size
        self.client_buffer = client_buffer
        self.ui_dir = ui_dir
        self.allow_recompile = allow_recompile

        self.logging = LoggingState(self.program)
        self.tree_message = {
            "kind": "tree",
            "v": PROTOCOL_VERSION,
            "modules": build_rule_tree(self.program),
        }
        self.clients: list[_Client] = []
        self.clients_lock = threading.Lock()
        self._client_seen = threading.Event()
        self._command_seen = threading.Event()

        self._queue: deque = deque()
        self._queue_drops = 0
        self._queue_cond = threading.Condition()
        self._commands: deque = deque()  # (client, command dict)
        self._stop = threading.Event()
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._prev_sink = None

    # -- lifecycle ---------------------------------------------------------------

    def start(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.host, self.requested_port))
        listener.listen(8)
        listener.settimeout(0.2)
        self._listener = listener
        self.port = listener.getsockname()[1]
        self._prev_sink = self.engine.log_sink
        self.engine.log_sink = self.publish_log
        for target in (self._accept_loop, self._worker_loop):
            thread = threading.Thread(target=target, daemon=True)
            thread.start()
            self._threads.append(thread)

    def stop(self) -> None:
        self._stop.set()
        with self._queue_cond:
            self._queue_cond.notify_all()
        if self.engine.log_sink == self.publish_log:
            self.engine.log_sink = self._prev_sink
        if self._listener is not None:
            self._listener.close()
        with self.clients_lock:
            clients = list(self.clients)
        for client in clients:
            client.close()
        for thread in self._threads:
            thread.join(timeout=2)

    def wait_for_client(self, timeout: float | None = None) -> bool:
        return self._client_seen.wait(timeout)

    def wait_for_ping(self, timeout: float | None = None) -> bool:
        """Block until a client pings: its earlier commands are then applied.

        Harness aid for scripted runs: a client connects, configures logging
        states, then pings to signal it is ready for the replay.
        """
        return self._command_seen.wait(timeout)

    # -- engine side ---------------------------------------------------------------

    def publish_log(self, record: RuleLogRecord) -> None:
        """Called on the engine thread; must never block on clients."""
        if self._prev_sink is not None:
            self._prev_sink(record)
        with self._queue_cond:
            if len(self._queue) >= self.queue_size:
                self._queue.popleft()
                self._queue_drops += 1
            self._queue.append(record)
            self._queue_cond.notify()

    # -- worker -----------------------------------------------------------------------

    def _worker_loop(self) -> None:
        while not self._stop.is_set():
            with self._queue_cond:
                while not self._queue and not self._commands and not self._stop.is_set():
                    self._queue_cond.wait(timeout=0.2)
                if self._stop.is_set():
                    return
                records = list(self._queue)
                self._queue.clear()
                commands = list(self._commands)
                self._commands.clear()
                queue_drops, self._queue_drops = self._queue_drops, 0
            if queue_drops:
                self._broadcast({"kind": "drops", "count": queue_drops})
            # records queued before the commands are filtered under the old
            # states; the command batch applies atomically afterwards
            for record in records:
                state = self.logging.get(record.rule_id)
                if admissible(state, record.final):
                    self._broadcast(record_message(record))
            for client, command in commands:
                self._handle_command(client, command)

    def _broadcast(self, message: dict) -> None:
        with self.clients_lock:
            clients = list(self.clients)
        for client in clients:
            client.enqueue(message)

    def _state_message(self) -> dict:
        return {"kind": "state", "v": PROTOCOL_VERSION, "states": self.logging.snapshot()}

    def _handle_command(self, client: _Client, command: dict) -> None:
        seq = command.get("seq")
        kind = command.get("kind")
        try:
            if kind == "set-state":
                self.logging.apply(command.get("target", {}), command.get("state", ""))
            elif kind == "save-config":
                self.logging.save_config(Path(str(command["path"])))
            elif kind == "load-config":
                self.logging.load_config(Path(str(command["path"])))
            elif kind == "ping":
                pass
            else:
                raise ValueError(f"unknown command {kind!r}")
        except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
            client.enqueue({"kind": "ack", "ok": False, "seq": seq, "error": str(exc)})
            return
        client.enqueue({"kind": "ack", "ok": True, "seq": seq})
        if kind == "ping":
            self._command_seen.set()
        if kind in ("set-state", "load-config"):
            self._broadcast(self._state_message())

    # -- accepting clients ----------------------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stop.is_set():
            try:
                sock, _addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            threading.Thread(target=self._handshake, args=(sock,), daemon=True).start()

    def _handshake(self, sock: socket.socket) -> None:
        try:
            # HTTP/WebSocket clients speak first; plain protocol clients wait
            # for the server, so a silent peek window means plain TCP.
            sock.settimeout(0.25)
            try:
                head = sock.recv(4, socket.MSG_PEEK)
            except socket.timeout:
                self._attach_client(sock, websocket=False)
                return
            if head == b"":
                sock.close()
                return
            sock.settimeout(5)
            if head.startswith(b"GET ") or head.startswith(b"HEAD"):
                request = _read_http_request(sock)
                if request is None:
                    sock.close()
                    return
                headers, path = request
                if headers.get("upgrade", "").lower() == "websocket":
                    key = headers.get("sec-websocket-key", "")
                    accept = base64.b64encode(
                        hashlib.sha1((key + _WS_MAGIC).encode()).digest()
                    ).decode()
                    sock.sendall(
                        b"HTTP/1.1 101 Switching Protocols\r\n"
                        b"Upgrade: websocket\r\nConnection: Upgrade\r\n"
                        b"Sec-WebSocket-Accept: " + accept.encode() + b"\r\n\r\n"
                    )
                    self._attach_client(sock, websocket=True)
                    return
                self._serve_static(sock, path)
                return
            self._attach_client(sock, websocket=False)
        except OSError:
            sock.close()

    def _attach_client(self, sock: socket.socket, websocket: bool) -> None:
        sock.settimeout(None)
        client = _Client(self, sock, websocket)
        with self.clients_lock:
            self.clients.append(client)
        client.enqueue(self.tree_message)
        client.enqueue(self._state_message())
        threading.Thread(target=client.writer_loop, daemon=True).start()
        threading.Thread(target=self._reader_loop, args=(client,), daemon=True).start()
        self._client_seen.set()

    def _remove_client(self, client: _Client) -> None:
        with self.clients_lock:
            if client in self.clients:
                self.clients.remove(client)

    def _reader_loop(self, client: _Client) -> None:
        try:
            if client.websocket:
                for payload in _ws_messages(client.sock):
                    self._receive_line(client, payload)
            else:
                buf = b""
                while True:
                    chunk = client.sock.recv(4096)
                    if not chunk:
                        return
                    buf += chunk
                    while b"\n" in buf:
                        line, buf = buf.split(b"\n", 1)
                        self._receive_line(client, line)
        except OSError:
            pass
        finally:
            client.close()

    def _receive_line(self, client: _Client, line: bytes) -> None:
        text = line.decode(errors="replace").strip()
        if not text:
            return
        try:
            command = json.loads(text)
        except json.JSONDecodeError:
            client.enqueue({"kind": "ack", "ok": False, "seq": None, "error": "malformed JSON"})
            return
        with self._queue_cond:
            self._commands.append((client, command))
            self._queue_cond.notify()

    # -- static UI -----------------------------------------------------------------------

    def _serve_static(self, sock: socket.socket, path: str) -> None:
        try:
            if self.ui_dir is None:
                _http_response(sock, 404, b"no UI bundled\n")
                return
            rel = path.split("?", 1)[0].lstrip("/") or "index.html"
            target = (self.ui_dir / rel).resolve()
            if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
                _http_response(sock, 404, b"not found\n")
                return
            ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
            _http_response(sock, 200, target.read_bytes(), ctype)
        finally:
            sock.close()


# -- low-level helpers ---------------------------------------------------------------


def _read_http_request(sock: socket.socket):
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            return None
        data += chunk
        if len(data) > 65536:
            return None
    head = data.split(b"\r\n\r\n", 1)[0].decode(errors="replace")
    lines = head.split("\r\n")
    parts = lines[0].split()
    path = parts[1] if len(parts) > 1 else "/"
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            key, value = line.split(":", 1)
            headers[key.strip().lower()] = value.strip()
    return headers, path


def _http_response(sock: socket.socket, status: int, body: bytes, ctype: str = "text/plain") -> None:
    reason = {200: "OK", 404: "Not Found"}.get(status, "Error")
    head = (
        f"HTTP/1.1 {status} {reason}\r\nContent-Type: {ctype}\r\n"
        f"Content-Length: {len(body)}\r\nConnection: close\r\n\r\n"
    ).encode()
    try:
        sock.sendall(head + body)
    except OSError:
        pass


def _ws_frame(payload: bytes, opcode: int = 0x1) -> bytes:
    header = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        header += bytes([n])
    elif n < 65536:
        header += bytes([126]) + struct.pack(">H", n)
    else:
        header += bytes([127]) + struct.pack(">Q", n)
    return header + payload


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    data = b""
    while len(data) < n:
        chunk = sock.recv(n - len(data))
        if not chunk:
            return None
        data += chunk
    return data


def _ws_messages(sock: socket.socket):
    """Yield text-message payloads from a client WebSocket stream."""
    while True:
        head = _recv_exact(sock, 2)
        if head is None:
            return
        opcode = head[0] & 0x0F
        masked = head[1] & 0x80
        length = head[1] & 0x7F
        if length == 126:
            ext = _recv_exact(sock, 2)
            if ext is None:
                return
            length = struct.unpack(">H", ext)[0]
        elif length == 127:
            ext = _recv_exact(sock, 8)
            if ext is None:
                return
            length = struct.unpack(">Q", ext)[0]
        mask = b"\x00\x00\x00\x00"
        if masked:
            mask_data = _recv_exact(sock, 4)
            if mask_data is None:
                return
            mask = mask_data
        payload = _recv_exact(sock, length) if length else b""
        if payload is None:
            return
        if masked:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        if opcode == 0x8:  # close
            try:
                sock.sendall(_ws_frame(b"", opcode=0x8))
            except OSError:
                pass
            return
        if opcode == 0x9:  # ping -> pong
            sock.sendall(_ws_frame(payload, opcode=0xA))
            continue
        if opcode in (0x1, 0x2):
            yield payload
