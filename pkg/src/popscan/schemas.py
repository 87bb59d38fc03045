"""JSON Schemas (draft 2020-12) for the run artifacts.

The package itself never validates against these at runtime; they are the
published contract for downstream readers and are checked in the tests.
"""

RECT = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 4, "maxItems": 4}
POINT = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}
TOKEN = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 4, "maxItems": 4}

ACTION = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["tap", "back", "restart"]},
        "token": TOKEN,
        "point": {"anyOf": [POINT, {"type": "null"}]},
        "text": {"type": "string"},
    },
    "additionalProperties": False,
}

EVENT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "seq", "from_state", "to_state", "action", "pows", "timestamp"],
    "properties": {
        "schema_version": {"const": 1},
        "seq": {"type": "integer", "minimum": 0},
        "from_state": {"type": "integer", "minimum": 0},
        "to_state": {"type": "integer", "minimum": 0},
        "action": ACTION,
        "pows": {"type": "array", "items": {"type": "string"}},
        "timestamp": {"type": "integer"},
    },
    "additionalProperties": False,
}

GRAPH = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "entry_state", "edges", "frontier", "unreachable"],
    "properties": {
        "schema_version": {"const": 1},
        "entry_state": {"type": ["integer", "null"]},
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from", "action", "to"],
                "properties": {"from": {"type": "integer"}, "action": ACTION, "to": {"type": "integer"}},
            },
        },
        "frontier": {"type": "object", "additionalProperties": {"type": "array", "items": ACTION}},
        "unreachable": {"type": "array", "items": {"type": "integer"}},
        "registry": {
            "type": "object",
            "required": ["threshold", "states"],
            "properties": {
                "threshold": {"type": "number"},
                "states": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["state_id", "tokens"],
                        "properties": {"state_id": {"type": "integer"}, "tokens": {"type": "array", "items": TOKEN}},
                    },
                },
            },
        },
    },
}

BUTTON = {
    "type": "object",
    "required": ["bbox", "kind", "confidence"],
    "properties": {
        "bbox": RECT,
        "kind": {"enum": ["confirmation", "exit"]},
        "confidence": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

TARGET = {
    "type": "object",
    "required": ["point", "tier", "source_text", "bbox"],
    "properties": {
        "point": POINT,
        "tier": {"enum": ["model_exit", "model_confirm", "in_box_clickable"]},
        "source_text": {"type": "string"},
        "bbox": {"anyOf": [RECT, {"type": "null"}]},
    },
}

LABELS = {
    "type": "object",
    "required": ["type", "patterns", "sneaky", "low_confidence"],
    "properties": {
        "type": {"enum": ["Promotional", "FunctionalPermissionRelated", "FunctionalPermissionUnrelated"]},
        "patterns": {
            "type": "array",
            "items": {"enum": ["TextMislead", "UiMislead", "ForcedAction", "PrivacyIntrusiveDefault", "OutOfContext"]},
        },
        "sneaky": {"type": "boolean"},
        "low_confidence": {"type": "object", "additionalProperties": {"type": "boolean"}},
    },
}

POW_RECORD = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "schema_version", "id", "screenshot_ref", "detection", "texts", "trigger", "pre_checked_toggles",
        "targets", "dismissal", "source_app_package", "dialog_package", "occurrences", "labels",
    ],
    "properties": {
        "schema_version": {"const": 1},
        "id": {"type": "string"},
        "screenshot_ref": {"type": "string"},
        "detection": {
            "type": "object",
            "required": ["bbox", "confidence", "buttons"],
            "properties": {
                "bbox": RECT,
                "confidence": {"type": "number", "minimum": 0, "maximum": 1},
                "buttons": {"type": "array", "items": BUTTON},
            },
        },
        "texts": {"type": "array", "items": {"type": "string"}},
        "trigger": {
            "type": "object",
            "required": ["prev_action_kind", "prev_component_text", "spontaneous"],
            "properties": {
                "prev_action_kind": {"enum": ["tap", "back", "restart", "none"]},
                "prev_component_text": {"type": "string"},
                "spontaneous": {"type": "boolean"},
            },
        },
        "pre_checked_toggles": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["context_text", "bounds"],
                "properties": {"context_text": {"type": "string"}, "bounds": RECT},
            },
        },
        "targets": {"type": "array", "items": TARGET},
        "dismissal": {
            "type": "object",
            "required": ["dismissed", "clicks_used", "back_used", "forced_action_evidence"],
            "properties": {
                "dismissed": {"type": "boolean"},
                "clicks_used": {"type": "integer", "minimum": 0},
                "back_used": {"type": "boolean"},
                "forced_action_evidence": {"type": "boolean"},
                "taps": {"type": "array", "items": TARGET},
                "plan": {"type": "array", "items": TARGET},
            },
        },
        "source_app_package": {"type": "string", "minLength": 1},
        "dialog_package": {"type": "string", "minLength": 1},
        "state_id": {"type": ["integer", "null"]},
        "occurrences": {"type": "integer", "minimum": 1},
        "chain_parent": {"type": ["string", "null"]},
        "labels": {"anyOf": [LABELS, {"type": "null"}]},
    },
}

ROW = {
    "type": "object",
    "required": ["type", "pow_count", "sneaky_count", "distribution_pct", "pow_share_pct", "ratio_pct"],
    "properties": {
        "type": {"type": "string"},
        "pow_count": {"type": "integer", "minimum": 1},
        "sneaky_count": {"type": "integer", "minimum": 0},
        "distribution_pct": {"type": "number", "minimum": 0, "maximum": 100},
        "pow_share_pct": {"type": "number", "minimum": 0, "maximum": 100},
        "ratio_pct": {"type": "number", "minimum": 0, "maximum": 100},
    },
}

SUMMARY = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "rows", "totals", "click_histogram", "pattern_counts", "stats"],
    "properties": {
        "schema_version": {"const": 1},
        "rows": {"type": "array", "items": ROW},
        "totals": {"type": "object"},
        "click_histogram": {
            "type": "object",
            "required": ["by_clicks", "back", "forced", "total"],
            "properties": {
                "by_clicks": {"type": "object", "additionalProperties": {"type": "integer"}},
                "back": {"type": "integer"},
                "forced": {"type": "integer"},
                "total": {"type": "integer"},
            },
        },
        "pattern_counts": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}},
        "low_confidence_records": {"type": "integer", "minimum": 0},
        "stats": {"type": "object"},
    },
}

CONFIG = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "mode", "target", "explorer", "detector"],
    "properties": {
        "schema_version": {"const": 1},
        "mode": {"enum": ["simulate", "device"]},
        "target": {"type": "string", "minLength": 1},
        "explorer": {"type": "object"},
        "detector": {"type": "object"},
        "rules": {"type": ["string", "null"]},
        "baseline_seeds": {"type": "array", "items": {"type": "integer"}},
    },
}

SCHEMAS = {
    "event": EVENT,
    "graph": GRAPH,
    "pow_record": POW_RECORD,
    "summary": SUMMARY,
    "config": CONFIG,
}
