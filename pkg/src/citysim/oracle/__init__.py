"""The decision oracle: one abstraction for every open-ended judgment.

Backends: a deterministic stub (rule tables), an OpenAI-compatible HTTP
client, and a replay log.  A shared cache sits in front of any backend;
with the stub it never changes semantics, only latency.
"""

from __future__ import annotations

import threading
import time

from citysim.oracle.schemas import RESPONSE_SCHEMAS, validate_response
from citysim.oracle.stub import StubBackend
from citysim.oracle.types import (
    KINDS,
    OracleConfig,
    OracleError,
    OracleReplayMissError,
    OracleRequest,
    OracleResponse,
    OracleSchemaError,
    OracleTimeoutError,
    OracleTransportError,
    request_hash,
)

__all__ = [
    "KINDS",
    "Oracle",
    "OracleConfig",
    "OracleError",
    "OracleReplayMissError",
    "OracleRequest",
    "OracleResponse",
    "OracleSchemaError",
    "OracleTimeoutError",
    "OracleTransportError",
    "RESPONSE_SCHEMAS",
    "StubBackend",
    "appraise_visit",
    "build_oracle",
    "request_hash",
]


class Oracle:
    """Front end shared by all callers: cache, validation, backend dispatch."""

    def __init__(self, backend, cache: bool = True, seed: int = 0):
        self.backend = backend
        self.seed = seed
        self.cache_enabled = cache
        self._cache: dict[str, dict] = {}
        self._lock = threading.Lock()

    @classmethod
    def stub(cls, seed: int = 0, cache: bool = True) -> "Oracle":
        return cls(StubBackend(seed), cache=cache, seed=seed)

    def call(self, request: OracleRequest) -> OracleResponse:
        digest = request_hash(request, self.seed)
        if self.cache_enabled:
            with self._lock:
                cached = self._cache.get(digest)
            if cached is not None:
                return OracleResponse(payload=cached, latency_ms=0.0, from_cache=True)
        started = time.perf_counter()
        payload = self.backend.handle(request)
        validate_response(request.kind, payload)
        latency_ms = (time.perf_counter() - started) * 1000.0
        if self.cache_enabled:
            with self._lock:
                self._cache[digest] = payload
        return OracleResponse(payload=payload, latency_ms=latency_ms)

    def close(self) -> None:
        close = getattr(self.backend, "close", None)
        if close is not None:
            close()


def build_oracle(config: OracleConfig) -> Oracle:
    config.validate()
    if config.backend == "stub":
        backend = StubBackend(config.seed)
    elif config.backend == "http":
        from citysim.oracle.http import HttpBackend

        backend = HttpBackend(config)
    else:
        from citysim.oracle.replay import ReplayBackend

        backend = ReplayBackend(config.replay_path, seed=config.seed)
    if config.record_path:
        from citysim.oracle.replay import RecordingBackend

        backend = RecordingBackend(backend, config.record_path, seed=config.seed)
    return Oracle(backend, cache=config.cache, seed=config.seed)


def appraise_visit(oracle: Oracle, agent_id: int, poi_digest: dict) -> tuple[list[float], str] | None:
    """Subjective 4-dim observation of a visit, clamped to [0, 1].

    Returns None on oracle failure; the caller leaves the belief untouched.
    """
    request = OracleRequest(
        kind="appraise_visit", context={"agent_id": agent_id, "poi": poi_digest}
    )
    try:
        response = oracle.call(request)
    except OracleError:
        return None
    observation = response.payload["observation"]
    dims = [
        min(1.0, max(0.0, float(observation[d])))
        for d in ("price", "atmosphere", "satisfaction", "convenience")
    ]
    return dims, str(response.payload["reasoning"])
