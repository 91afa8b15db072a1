"""Run reports: JSON-safe conversion and schema validation."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, is_dataclass
from fractions import Fraction
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np

SCHEMA_NAME = "report.schema.json"


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays, fractions and dataclasses; non-finite floats become None."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        obj = float(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


@lru_cache(maxsize=1)
def load_schema() -> dict:
    text = resources.files("heisgeom").joinpath(SCHEMA_NAME).read_text(encoding="utf-8")
    return json.loads(text)


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``report`` does not match the shipped schema."""
    jsonschema.validate(report, load_schema())


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False)
