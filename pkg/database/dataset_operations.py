"""
Dataset operations - ingest and export of observation records.

Handles the canonical CSV file (UTF-8, comma separated, dot decimal, header
``class,instance,repetition,<eight property columns>``) and a JSON mirror of
the same fields. Every row is validated; problems are collected per row and
reported together.
"""

import json
import logging
import math
import os
from typing import Any, Dict, Iterable, List, Tuple

import pandas as pd
from pydantic import ValidationError

from concept_engine.errors import IngestError, SchemaError
from database.records import CSV_COLUMNS, ObservationRecord, RecordSet

logger = logging.getLogger(__name__)


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _clean_cell(value: Any) -> Any:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return value


def _validate_rows(path: str, rows: Iterable[Dict[str, Any]]) -> RecordSet:
    records: List[ObservationRecord] = []
    errors: List[Tuple[int, str]] = []
    seen: Dict[tuple, int] = {}

    for number, row in enumerate(rows, start=1):
        data = {k: _clean_cell(v) for k, v in row.items()}
        if data.get("roughness") == "":
            data["roughness"] = None
        try:
            record = ObservationRecord.model_validate(data)
        except ValidationError as e:
            detail = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
            errors.append((number, detail))
            continue
        if record.key in seen:
            errors.append((number, f"duplicate key {record.key} (first seen in row {seen[record.key]})"))
            continue
        seen[record.key] = number
        records.append(record)

    if errors:
        raise IngestError(path, errors)
    return RecordSet(records)


# =============================================================================
# Ingest
# =============================================================================

def ingest(path: str) -> RecordSet:
    """
    Load and validate a dataset file (``.csv`` or ``.json``).

    Args:
        path: Dataset file

    Returns:
        RecordSet; empty (with a warning) for an empty file

    Raises:
        SchemaError: Header does not match the dataset schema
        IngestError: One or more rows are malformed, duplicated or out of range
    """
    if not os.path.exists(path):
        raise SchemaError(f"dataset file not found: {path}")
    if path.lower().endswith(".json"):
        return _ingest_json(path)
    return _ingest_csv(path)


def _ingest_csv(path: str) -> RecordSet:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        logger.warning(f"[Dataset] {path} is empty; no records loaded")
        return RecordSet()
    except pd.errors.ParserError as e:
        raise IngestError(path, [(0, f"malformed CSV: {e}")]) from e

    columns = [c.strip() for c in frame.columns]
    if set(columns) != set(CSV_COLUMNS) or len(columns) != len(CSV_COLUMNS):
        missing = sorted(set(CSV_COLUMNS) - set(columns))
        extra = sorted(set(columns) - set(CSV_COLUMNS))
        raise SchemaError(f"{path}: header mismatch (missing {missing}, unexpected {extra})")
    frame.columns = columns

    if frame.empty:
        logger.warning(f"[Dataset] {path} has a header but no rows")
        return RecordSet()
    return _validate_rows(path, frame.to_dict(orient="records"))


def _ingest_json(path: str) -> RecordSet:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    if not text.strip():
        logger.warning(f"[Dataset] {path} is empty; no records loaded")
        return RecordSet()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise IngestError(path, [(0, f"malformed JSON: {e}")]) from e
    rows = payload.get("records") if isinstance(payload, dict) else payload
    if not isinstance(rows, list) or not all(isinstance(r, dict) for r in rows):
        raise SchemaError(f"{path}: expected a list of record objects")
    return _validate_rows(path, rows)


# =============================================================================
# Export
# =============================================================================

def render_csv(records: Iterable[ObservationRecord]) -> str:
    """Canonical CSV text; floats use their shortest round-trip form."""
    record_set = records if isinstance(records, RecordSet) else RecordSet(records)
    rows = [[_format_value(r.to_row()[c]) for c in CSV_COLUMNS] for r in record_set]
    frame = pd.DataFrame(rows, columns=list(CSV_COLUMNS))
    return frame.to_csv(index=False, lineterminator="\n")


def export_csv(records: Iterable[ObservationRecord], path: str) -> str:
    text = render_csv(records)
    _write_text(path, text)
    return path


def export_json(records: Iterable[ObservationRecord], path: str) -> str:
    record_set = records if isinstance(records, RecordSet) else RecordSet(records)
    payload = {"columns": list(CSV_COLUMNS), "records": [r.to_row() for r in record_set]}
    _write_text(path, json.dumps(payload, indent=2) + "\n")
    return path


def _write_text(path: str, text: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
