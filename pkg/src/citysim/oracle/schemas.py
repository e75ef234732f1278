"""Response schemas, one per oracle kind.

Every payload is validated against its schema before leaving the oracle,
regardless of backend.
"""

from __future__ import annotations

import jsonschema

from citysim.oracle.types import KINDS, OracleSchemaError

_UNIT = {"type": "number", "minimum": -5.0, "maximum": 5.0}
_NEEDS_OBJ = {
    "type": "object",
    "properties": {n: _UNIT for n in ("hunger", "energy", "safety", "social")},
    "required": ["hunger", "energy", "safety", "social"],
}
_BELIEF_OBJ = {
    "type": "object",
    "properties": {d: _UNIT for d in ("price", "atmosphere", "satisfaction", "convenience")},
    "required": ["price", "atmosphere", "satisfaction", "convenience"],
}

RESPONSE_SCHEMAS: dict[str, dict] = {
    "init_needs": {
        "type": "object",
        "properties": {"scores": _NEEDS_OBJ},
        "required": ["scores"],
    },
    "need_effects": {
        "type": "object",
        "properties": {"deltas": {"type": "object", "additionalProperties": _UNIT}},
        "required": ["deltas"],
    },
    "appraise_visit": {
        "type": "object",
        "properties": {"observation": _BELIEF_OBJ, "reasoning": {"type": "string"}},
        "required": ["observation", "reasoning"],
    },
    "plan_mandatory": {
        "type": "object",
        "properties": {
            "blocks": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "start": {"type": "integer"},
                        "duration": {"type": "integer"},
                        "content": {"type": "string"},
                        "tag": {"type": "string"},
                    },
                    "required": ["start", "duration", "content", "tag"],
                },
            }
        },
        "required": ["blocks"],
    },
    "fill_medium": {
        "type": "object",
        "properties": {
            "task": {
                "type": ["object", "null"],
                "properties": {
                    "name": {"type": "string"},
                    "duration": {"type": "integer"},
                    "tag": {"type": "string"},
                },
                "required": ["name", "duration", "tag"],
            }
        },
        "required": ["task"],
    },
    "leisure_candidates": {
        "type": "object",
        "properties": {
            "candidates": {
                "type": "array",
                "minItems": 1,
                "maxItems": 3,
                "items": {
                    "type": "object",
                    "properties": {
                        "description": {"type": "string"},
                        "duration": {"type": "integer"},
                        "imagined": _NEEDS_OBJ,
                        "category": {"type": ["string", "null"]},
                        "tag": {"type": "string"},
                        "goal_tags": {"type": "array", "items": {"type": "string"}},
                    },
                    "required": ["description", "duration", "imagined", "category", "tag", "goal_tags"],
                },
            }
        },
        "required": ["candidates"],
    },
    "select_area": {
        "type": "object",
        "properties": {"area_id": {"type": "integer"}},
        "required": ["area_id"],
    },
    "extract_intention": {
        "type": "object",
        "properties": {
            "categories": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "max_radius_m": {"type": "number", "exclusiveMinimum": 0},
        },
        "required": ["categories", "max_radius_m"],
    },
    "select_vehicle": {
        "type": "object",
        "properties": {
            "vehicle": {"type": "string"},
            "justification": {"type": "string"},
        },
        "required": ["vehicle", "justification"],
    },
    "dispatch": {
        "type": "object",
        "properties": {
            "module": {"type": "string"},
            "explanation": {"type": "string"},
            "parameters": {"type": "object"},
        },
        "required": ["module", "explanation", "parameters"],
    },
    "converse": {
        "type": "object",
        "properties": {
            "outcome": {"enum": ["positive", "neutral", "negative"]},
            "transcript": {"type": "array", "items": {"type": "string"}},
        },
        "required": ["outcome", "transcript"],
    },
    "reflect": {
        "type": "object",
        "properties": {
            "insights": {
                "type": "array",
                "maxItems": 5,
                "items": {
                    "type": "object",
                    "properties": {
                        "text": {"type": "string"},
                        "evidence": {
                            "type": "array",
                            "items": {"type": "integer"},
                            "minItems": 1,
                        },
                    },
                    "required": ["text", "evidence"],
                },
            }
        },
        "required": ["insights"],
    },
    "revise_goals": {
        "type": "object",
        "properties": {
            "short_goals": {"type": "array", "items": {"type": "string"}},
            "long_goals": {"type": "array", "items": {"type": "string"}},
            "tags": {"type": "array", "items": {"type": "string"}},
        },
        "required": ["short_goals", "long_goals", "tags"],
    },
}

assert set(RESPONSE_SCHEMAS) == set(KINDS)

# Compiled once; jsonschema.validate would re-check the schema per call.
_VALIDATORS = {
    kind: jsonschema.Draft202012Validator(schema) for kind, schema in RESPONSE_SCHEMAS.items()
}


def validate_response(kind: str, payload: dict) -> None:
    error = jsonschema.exceptions.best_match(_VALIDATORS[kind].iter_errors(payload))
    if error is not None:
        raise OracleSchemaError(f"{kind} response invalid: {error.message}")
