"""Record/replay backends for bit-exact re-runs of oracle-backed simulations.

The log is JSONL of {request_hash, kind, response}; replay answers purely
from it and raises on any unseen request.
"""

from __future__ import annotations

import json
import threading

from citysim.oracle.types import OracleReplayMissError, OracleRequest, request_hash


class RecordingBackend:
    """Wraps another backend and appends each new (hash, response) pair."""

    def __init__(self, inner, path, seed: int = 0):
        self.inner = inner
        self.name = f"recording({inner.name})"
        self.seed = seed
        self._path = path
        self._seen: set[str] = set()
        self._lock = threading.Lock()
        self._fh = open(path, "a", encoding="utf-8")

    def handle(self, request: OracleRequest) -> dict:
        payload = self.inner.handle(request)
        digest = request_hash(request, self.seed)
        with self._lock:
            if digest not in self._seen:
                self._seen.add(digest)
                self._fh.write(
                    json.dumps(
                        {"request_hash": digest, "kind": request.kind, "response": payload},
                        sort_keys=True,
                    )
                )
                self._fh.write("\n")
                self._fh.flush()
        return payload

    def close(self) -> None:
        self._fh.close()


class ReplayBackend:
    name = "replay"

    def __init__(self, path, seed: int = 0):
        self.seed = seed
        self._responses: dict[str, dict] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self._responses[record["request_hash"]] = record["response"]

    def handle(self, request: OracleRequest) -> dict:
        digest = request_hash(request, self.seed)
        if digest not in self._responses:
            raise OracleReplayMissError(
                f"no recorded response for {request.kind} request {digest[:16]}"
            )
        return self._responses[digest]
