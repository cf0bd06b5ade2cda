"""Proposal selection: deterministic and seeded builtins plus an external
request/response protocol over child-process pipes or a local socket.

The external protocol is synchronous JSON lines (one object per line,
versioned; see docs/protocols.md).  A selector that times out or dies
never halts the engine: the deterministic `first` rule takes over and a
warning is logged.
"""

from __future__ import annotations

import json
import logging
import random
import select as _select
import shlex
import socket
import subprocess
from dataclasses import dataclass

log = logging.getLogger("rudic.selection")

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class ProposalInfo:
    label: str
    rule_id: int
    iteration: int


@dataclass
class SelectionRequest:
    proposals: list  # of ProposalInfo, creation order; never empty
    features: dict  # flat feature name -> string | None


def first_choice(req: SelectionRequest) -> str:
    """Lowest document-order rule id wins; label breaks ties."""
    best = min(req.proposals, key=lambda p: (p.rule_id, p.label))
    return best.label


class FirstSelector:
    name = "first"

    def select(self, req: SelectionRequest) -> str:
        return first_choice(req)


class RandomSelector:
    """Uniform choice, reproducible per seed across a request sequence."""

    name = "random"

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = random.Random(seed)

    def select(self, req: SelectionRequest) -> str:
        labels = sorted(p.label for p in req.proposals)
        return self._rng.choice(labels)


def encode_request(req: SelectionRequest) -> str:
    return json.dumps(
        {
            "v": PROTOCOL_VERSION,
            "kind": "select",
            "proposals": [
                {"label": p.label, "rule": p.rule_id, "iteration": p.iteration}
                for p in req.proposals
            ],
            "features": req.features,
        },
        sort_keys=True,
    )


def decode_response(line: str) -> str | None:
    try:
        data = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(data, dict) or data.get("kind") != "choice":
        return None
    label = data.get("label")
    return label if isinstance(label, str) else None


class SubprocessTransport:
    """One long-lived child process; one request line, one response line."""

    def __init__(self, command):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = command
        self.proc: subprocess.Popen | None = None

    def start(self) -> None:
        self.proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def exchange(self, line: str, timeout: float) -> str | None:
        if self.proc is None:
            self.start()
        proc = self.proc
        assert proc is not None
        if proc.poll() is not None:
            return None
        try:
            assert proc.stdin is not None and proc.stdout is not None
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            ready, _, _ = _select.select([proc.stdout], [], [], timeout)
            if not ready:
                return None
            response = proc.stdout.readline()
            return response.strip() or None
        except (BrokenPipeError, ValueError, OSError):
            return None

    def close(self) -> None:
        if self.proc is not None and self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=1)
            except subprocess.TimeoutExpired:
                self.proc.kill()


class TcpTransport:
    """Line exchange over a persistent localhost connection."""

    def __init__(self, host: str, port: int):
        self.host = host
        self.port = port
        self.sock: socket.socket | None = None
        self._buf = b""

    def exchange(self, line: str, timeout: float) -> str | None:
        try:
            if self.sock is None:
                self.sock = socket.create_connection((self.host, self.port), timeout=timeout)
            self.sock.settimeout(timeout)
            self.sock.sendall(line.encode() + b"\n")
            while b"\n" not in self._buf:
                chunk = self.sock.recv(4096)
                if not chunk:
                    raise OSError("connection closed")
                self._buf += chunk
            response, self._buf = self._buf.split(b"\n", 1)
            return response.decode().strip() or None
        except OSError:
            if self.sock is not None:
                self.sock.close()
                self.sock = None
            return None

    def close(self) -> None:
        if self.sock is not None:
            self.sock.close()
            self.sock = None


class ExternalSelector:
    """Delegates to an external process; falls back to `first` on trouble."""

    name = "external"

    def __init__(self, transport, timeout_ms: int = 500):
        self.transport = transport
        self.timeout_ms = timeout_ms

    def select(self, req: SelectionRequest) -> str:
        line = self.transport.exchange(encode_request(req), self.timeout_ms / 1000.0)
        if line is None:
            log.warning("external selector unavailable; falling back to 'first'")
            return first_choice(req)
        label = decode_response(line)
        valid = {p.label for p in req.proposals}
        if label is None or label not in valid:
            log.warning("external selector returned an invalid choice; falling back to 'first'")
            return first_choice(req)
        return label

    def close(self) -> None:
        close = getattr(self.transport, "close", None)
        if close:
            close()
