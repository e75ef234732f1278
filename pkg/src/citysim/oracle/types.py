"""Request/response types shared by every oracle backend."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from citysim.errors import CitySimError

# Every open-ended judgment in the simulation names one of these kinds.
# The registry test asserts call sites and stub handlers stay 1:1 with it.
KINDS = (
    "init_needs",
    "need_effects",
    "appraise_visit",
    "plan_mandatory",
    "fill_medium",
    "leisure_candidates",
    "select_area",
    "extract_intention",
    "select_vehicle",
    "dispatch",
    "converse",
    "reflect",
    "revise_goals",
)


class OracleError(CitySimError):
    """Base class for oracle failures; callers apply their declared fallbacks."""


class OracleTimeoutError(OracleError):
    pass


class OracleTransportError(OracleError):
    pass


class OracleSchemaError(OracleError):
    """Response failed schema validation after all repair retries."""


class OracleReplayMissError(OracleError):
    """Replay log holds no response for this request hash."""


@dataclass(frozen=True)
class OracleRequest:
    kind: str
    context: dict

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown oracle kind {self.kind!r}")

    @property
    def schema_id(self) -> str:
        return self.kind  # response schemas are keyed 1:1 by kind


@dataclass
class OracleResponse:
    payload: dict
    raw_text: str | None = None
    latency_ms: float = 0.0
    from_cache: bool = False


@dataclass
class OracleConfig:
    backend: str = "stub"  # stub | http | replay
    seed: int = 0
    base_url: str = ""
    model: str = ""
    api_key_env: str = ""
    max_retries: int = 2
    timeout_ms: int = 30_000
    cache: bool = True
    max_in_flight: int = 8
    replay_path: str = ""
    record_path: str = ""

    def validate(self) -> None:
        if self.backend not in ("stub", "http", "replay"):
            raise ValueError(f"unknown oracle backend {self.backend!r}")
        if self.backend == "http" and (not self.base_url or not self.model):
            raise ValueError("http oracle backend requires base_url and model")
        if self.backend == "replay" and not self.replay_path:
            raise ValueError("replay oracle backend requires replay_path")


def canonical_context(context: dict) -> str:
    return json.dumps(context, sort_keys=True, separators=(",", ":"))


def request_hash(request: OracleRequest, seed: int = 0) -> str:
    payload = f"{seed}|{request.kind}|{canonical_context(request.context)}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
