"""Configurable mock agent servers for integration testing.

Each mock serves the agent wire protocol (POST /generate) on its own port
with a scripted behavior. Used by the test suite and the `mock-agents` CLI
command; handles concurrent connections via a threading HTTP server.
"""
from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Mapping

from .labels import DiseaseCategory


class AgentBehavior:
    """Scripts how a mock agent answers one request."""

    def respond(self, payload: dict) -> tuple[int, dict]:
        raise NotImplementedError


@dataclass(frozen=True)
class FixedSentence(AgentBehavior):
    text: str

    def respond(self, payload: dict) -> tuple[int, dict]:
        return 200, {"sentence": self.text}


@dataclass(frozen=True)
class Template(AgentBehavior):
    """Answer per study id; unknown studies get the default or a 404."""

    sentences: Mapping[str, str] = field(hash=False)
    default: str | None = None

    def respond(self, payload: dict) -> tuple[int, dict]:
        text = self.sentences.get(payload.get("study_id"), self.default)
        if text is None:
            return 404, {"error": "unknown study"}
        return 200, {"sentence": text}


@dataclass(frozen=True)
class FailAlways(AgentBehavior):
    status: int = 500

    def respond(self, payload: dict) -> tuple[int, dict]:
        return self.status, {"error": "scripted failure"}


@dataclass(frozen=True)
class DelayMs(AgentBehavior):
    delay_ms: int
    text: str = "Delayed reply."

    def respond(self, payload: dict) -> tuple[int, dict]:
        time.sleep(self.delay_ms / 1000.0)
        return 200, {"sentence": self.text}


class _Handler(BaseHTTPRequestHandler):
    server: "_MockServer"

    def do_POST(self):  # noqa: N802 - http.server API
        if self.path != "/generate":
            self._reply(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError):
            self._reply(400, {"error": "bad request body"})
            return
        self.server.owner.count_request()
        status, body = self.server.owner.behavior.respond(payload)
        self._reply(status, body)

    def _reply(self, status: int, body: dict):
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        try:
            self.wfile.write(data)
        except BrokenPipeError:
            pass  # client timed out and went away

    def log_message(self, *args):  # silence per-request stderr noise
        pass


class _MockServer(ThreadingHTTPServer):
    daemon_threads = True
    block_on_close = False
    owner: "MockAgent"


class MockAgent:
    """A running mock agent; close() releases the port."""

    def __init__(
        self,
        category: DiseaseCategory,
        behavior: AgentBehavior,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self.category = category
        self.behavior = behavior
        self._lock = threading.Lock()
        self._requests = 0
        self._server = _MockServer((host, port), _Handler)
        self._server.owner = self
        # small poll interval keeps shutdown() snappy when many mocks close
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.02}, daemon=True
        )
        self._thread.start()

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        host = self._server.server_address[0]
        return f"http://{host}:{self.port}"

    @property
    def request_count(self) -> int:
        with self._lock:
            return self._requests

    def count_request(self) -> None:
        with self._lock:
            self._requests += 1

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "MockAgent":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def serve_mock_agent(
    category: DiseaseCategory,
    behavior: AgentBehavior,
    host: str = "127.0.0.1",
    port: int = 0,
) -> MockAgent:
    """Start one mock agent server; port 0 picks a free ephemeral port.

    Raises OSError when the requested port is unavailable.
    """
    return MockAgent(category, behavior, host=host, port=port)


def serve_mock_registry(
    behaviors: Mapping[DiseaseCategory, AgentBehavior],
    host: str = "127.0.0.1",
) -> list[MockAgent]:
    """Start one mock per category on ephemeral ports; close all on error."""
    servers: list[MockAgent] = []
    try:
        for category, behavior in behaviors.items():
            servers.append(serve_mock_agent(category, behavior, host=host))
    except Exception:
        for server in servers:
            server.close()
        raise
    return servers
