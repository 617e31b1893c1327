"""Mock committee server speaking the chat-completions wire protocol.

Black-box integration tests point real HTTP endpoints at this server, so
the production client path (request shape, retries, content extraction) is
exercised end to end. Responses are a pure function of the incoming prompt
text and the policy, which keeps record/replay runs reproducible.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import yaml

from .clients import structured_answer_text
from .errors import ConfigError

_OPTION_IN_PROMPT_RE = re.compile(r'"option (\d+)"')


@dataclass(frozen=True)
class MockRule:
    question_contains: str
    answer: int
    reason: str
    confidence: float | None = None


@dataclass(frozen=True)
class MockPolicy:
    """Deterministic response selection for the mock server.

    Rules are checked first (first match on the prompt text wins); with no
    match the server derives an answer by hashing the prompt text, picking
    among however many "option N" keys it can see in the rendered question.
    """

    rules: tuple[MockRule, ...] = ()
    seed: int = 0
    emit_confidence: bool = False

    @classmethod
    def from_file(cls, path: str | Path) -> "MockPolicy":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"mock policy {path} must be a mapping")
        rules = []
        for entry in raw.get("rules", []):
            try:
                rules.append(
                    MockRule(
                        question_contains=entry["question_contains"],
                        answer=int(entry["answer"]),
                        reason=str(entry["reason"]),
                        confidence=(
                            float(entry["confidence"])
                            if "confidence" in entry
                            else None
                        ),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"mock policy {path}: bad rule {entry!r}: {exc}") from exc
        return cls(
            rules=tuple(rules),
            seed=int(raw.get("seed", 0)),
            emit_confidence=bool(raw.get("emit_confidence", False)),
        )

    def respond(self, prompt_text: str) -> str:
        for rule in self.rules:
            if rule.question_contains in prompt_text:
                return structured_answer_text(rule.answer, rule.reason, rule.confidence)
        return self._hashed_response(prompt_text)

    def _hashed_response(self, prompt_text: str) -> str:
        option_ids = [int(m) for m in _OPTION_IN_PROMPT_RE.findall(prompt_text)]
        option_count = max(option_ids) if option_ids else 4
        digest = hashlib.sha256(
            f"{self.seed}:{prompt_text}".encode("utf-8")
        ).digest()
        draw = int.from_bytes(digest[:8], "big")
        answer = 1 + draw % option_count
        reason = (
            f"Deterministic mock selection of option {answer} "
            f"(digest {digest[:4].hex()})."
        )
        confidence = float(40 + draw % 61) if self.emit_confidence else None
        return structured_answer_text(answer, reason, confidence)


class _Handler(BaseHTTPRequestHandler):
    policy: MockPolicy  # set on the subclass built per server

    def do_POST(self) -> None:  # noqa: N802  (http.server API)
        if not self.path.rstrip("/").endswith("/chat/completions"):
            self._send(404, {"error": "unknown endpoint"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length))
            messages = body["messages"]
            user_texts = [m["content"] for m in messages if m.get("role") == "user"]
            prompt_text = user_texts[-1]
            model = body.get("model", "mock")
        except (ValueError, KeyError, IndexError, TypeError):
            self._send(400, {"error": "malformed chat-completions request"})
            return
        content = self.policy.respond(prompt_text)
        self._send(
            200,
            {
                "id": "mock-completion",
                "object": "chat.completion",
                "model": model,
                "choices": [
                    {
                        "index": 0,
                        "message": {"role": "assistant", "content": content},
                        "finish_reason": "stop",
                    }
                ],
            },
        )

    def _send(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, format: str, *args) -> None:  # noqa: A002
        pass  # keep test output quiet


class MockCommitteeServer:
    """Threaded HTTP server; use as a context manager in tests."""

    def __init__(self, policy: MockPolicy, host: str = "127.0.0.1", port: int = 0):
        handler = type("BoundHandler", (_Handler,), {"policy": policy})
        self._server = ThreadingHTTPServer((host, port), handler)
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="mock-committee", daemon=True
        )

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockCommitteeServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "MockCommitteeServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


def serve_forever(policy: MockPolicy, host: str, port: int) -> None:
    """Blocking entry point for the CLI mock-serve command."""
    server = MockCommitteeServer(policy, host=host, port=port)
    print(f"mock committee listening on {server.base_url}/chat/completions")
    try:
        server._server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server._server.server_close()
