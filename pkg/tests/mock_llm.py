"""A local OpenAI-compatible mock server for oracle HTTP tests.

Parses the kind and context block out of the rendered prompt, answers with
the deterministic stub rules wrapped in a chat-completion envelope.  Failure
modes let tests exercise the retry and schema-error paths.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from citysim.oracle import OracleRequest, StubBackend

_KIND_RE = re.compile(r"### kind: (\w+)")
_CONTEXT_RE = re.compile(r"### context:\s*```json\s*(\{.*?\})\s*```", re.DOTALL)


class MockLLMServer:
    def __init__(self, seed: int = 0, break_first: int = 0, always_break: bool = False):
        self.stub = StubBackend(seed)
        self.break_first = break_first
        self.always_break = always_break
        self.requests_seen = 0
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                prompt = body["messages"][0]["content"]
                with outer._lock:
                    outer.requests_seen += 1
                    seen = outer.requests_seen
                if outer.always_break or seen <= outer.break_first:
                    content = "I would rather chat about the weather."
                else:
                    kind = _KIND_RE.search(prompt).group(1)
                    context = json.loads(_CONTEXT_RE.search(prompt).group(1))
                    payload = outer.stub.handle(OracleRequest(kind=kind, context=context))
                    content = "```json\n" + json.dumps(payload) + "\n```"
                reply = {
                    "choices": [{"message": {"role": "assistant", "content": content}}]
                }
                raw = json.dumps(reply).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}/v1"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
        return False
