"""OpenAI-compatible chat-completions backend.

Prompts come from plain-text template files keyed by kind, so prompt
iteration needs no code change.  The model is instructed to answer with a
single fenced JSON object; responses failing schema validation are retried
with a repair note, transport failures back off exponentially.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from pathlib import Path

import requests

from citysim.oracle.schemas import RESPONSE_SCHEMAS
from citysim.oracle.types import (
    OracleConfig,
    OracleRequest,
    OracleSchemaError,
    OracleTimeoutError,
    OracleTransportError,
    canonical_context,
)

TEMPLATE_DIR = Path(__file__).parent / "templates"
BACKOFF_BASE_S = 0.5
BACKOFF_FACTOR = 2.0

_JSON_FENCE = re.compile(r"```(?:json)?\s*(\{.*?\})\s*```", re.DOTALL)


def load_template(kind: str) -> str:
    path = TEMPLATE_DIR / f"{kind}.txt"
    return path.read_text(encoding="utf-8")


def render_prompt(request: OracleRequest) -> str:
    template = load_template(request.kind)
    return template.format(
        kind=request.kind,
        context_json=canonical_context(request.context),
        schema_json=json.dumps(RESPONSE_SCHEMAS[request.kind], sort_keys=True),
    )


def extract_json(text: str) -> dict:
    match = _JSON_FENCE.search(text)
    candidate = match.group(1) if match else None
    if candidate is None:
        start, end = text.find("{"), text.rfind("}")
        if start == -1 or end <= start:
            raise OracleSchemaError("no JSON object in model reply")
        candidate = text[start : end + 1]
    try:
        payload = json.loads(candidate)
    except json.JSONDecodeError as exc:
        raise OracleSchemaError(f"model reply is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise OracleSchemaError("model reply JSON is not an object")
    return payload


class HttpBackend:
    name = "http"

    def __init__(self, config: OracleConfig):
        config.validate()
        self.config = config
        self._semaphore = threading.BoundedSemaphore(config.max_in_flight)
        self._session = requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "") if self.config.api_key_env else ""
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, prompt: str) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        timeout_s = self.config.timeout_ms / 1000.0
        last_exc: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(BACKOFF_BASE_S * BACKOFF_FACTOR ** (attempt - 1))
            try:
                resp = self._session.post(url, json=body, headers=self._headers(), timeout=timeout_s)
            except requests.Timeout as exc:
                last_exc = OracleTimeoutError(f"oracle request timed out after {timeout_s}s")
                continue
            except requests.RequestException as exc:
                last_exc = OracleTransportError(f"oracle transport failure: {exc}")
                continue
            if resp.status_code != 200:
                last_exc = OracleTransportError(f"oracle HTTP {resp.status_code}: {resp.text[:200]}")
                continue
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                last_exc = OracleTransportError(f"malformed completion envelope: {exc}")
                continue
        assert last_exc is not None
        raise last_exc

    def handle(self, request: OracleRequest) -> dict:
        from citysim.oracle.schemas import validate_response

        prompt = render_prompt(request)
        with self._semaphore:
            repair_note = ""
            last_error: OracleSchemaError | None = None
            for _ in range(self.config.max_retries + 1):
                text = self._post(prompt + repair_note)
                try:
                    payload = extract_json(text)
                    validate_response(request.kind, payload)
                    return payload
                except OracleSchemaError as exc:
                    last_error = exc
                    repair_note = (
                        "\n\nYour previous reply failed validation: "
                        f"{exc}. Reply again with ONLY one fenced JSON object matching the schema."
                    )
            assert last_error is not None
            raise last_error
