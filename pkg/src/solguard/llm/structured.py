"""Extraction of structured records from free-form model replies."""

from __future__ import annotations

import json
from dataclasses import dataclass

from solguard.errors import ExtractionError, SchemaError


@dataclass(frozen=True)
class StructuredSchema:
    """Required fields and their accepted Python types for one agent role."""

    name: str
    fields: dict[str, tuple[type, ...]]


def _candidate_objects(text: str):
    """Balanced {...} regions in order of appearance, string-aware."""
    i = 0
    n = len(text)
    while i < n:
        start = text.find("{", i)
        if start == -1:
            return
        depth = 0
        in_string = False
        escaped = False
        for j in range(start, n):
            ch = text[j]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield text[start : j + 1]
                    break
        else:
            return  # unbalanced tail; no further candidates
        i = start + 1


def extract_structured(response: str, schema: StructuredSchema) -> dict:
    """Parse the first well-formed JSON object in ``response`` and validate it.

    Raises :class:`ExtractionError` when no object parses, and
    :class:`SchemaError` naming the field when the first parsed object is
    missing or mistypes a required field. The raw response text is carried
    on the error untouched.
    """
    for candidate in _candidate_objects(response):
        try:
            record = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if not isinstance(record, dict):
            continue
        for field_name, types in schema.fields.items():
            if field_name not in record:
                raise SchemaError(
                    f"{schema.name}: missing required field: {field_name}",
                    response,
                    field_name,
                )
            if not isinstance(record[field_name], types):
                raise SchemaError(
                    f"{schema.name}: field {field_name} has wrong type "
                    f"{type(record[field_name]).__name__}",
                    response,
                    field_name,
                )
        return record
    raise ExtractionError(f"{schema.name}: no structured object found in response", response)


DETECTOR_SCHEMA = StructuredSchema(
    "detector", {"verdict": (str,), "score": (int, float), "findings": (list,)}
)
ADVISOR_SCHEMA = StructuredSchema(
    "advisor",
    {
        "vulnerability_name": (str,),
        "cause_analysis": (str,),
        "impact_assessment": (str,),
        "repair_steps": (list,),
        "preventive_measures": (list,),
    },
)
ASSESSOR_SCHEMA = StructuredSchema("assessor", {"level": (str,)})
FIXER_SCHEMA = StructuredSchema("fixer", {"repaired_source": (str,), "rationale": (str,)})
VERIFIER_SCHEMA = StructuredSchema("verifier", {"passed": (bool,), "new_issues": (list,)})
