"""Reading and writing of result files.

Results are written as CSV tables with JSON sidecars. Both are written so
that identical inputs give byte-identical files; keys are sorted, floats use
their shortest round-trip representation and nothing time dependent is
stored.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, TYPE_CHECKING

import numpy as np
import pandas as pd

from .errors import UnreadableInputError

if TYPE_CHECKING:
    from collections.abc import Mapping


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: Path, data: Mapping[str, Any]) -> Path:
    """Write a JSON document with sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(data), indent=2, sort_keys=True)
    path.write_text(text + '\n', encoding='utf-8')
    return path


def read_json(path: Path) -> dict[str, Any]:
    """Read a JSON document."""
    try:
        return json.loads(Path(path).read_text(encoding='utf-8'))
    except OSError as exc:
        msg = f'Cannot read {path}: {exc.strerror}'
        raise UnreadableInputError(msg) from exc
    except json.JSONDecodeError as exc:
        msg = f'Invalid JSON in {path}: {exc}'
        raise UnreadableInputError(msg) from exc


def write_table(path: Path, table: pd.DataFrame) -> Path:
    """Write a table as CSV, without the pandas index."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, lineterminator='\n')
    return path


def read_table(path: Path, **kwargs: Any) -> pd.DataFrame:
    """Read a CSV table written by `write_table`."""
    try:
        return pd.read_csv(path, **kwargs)
    except OSError as exc:
        msg = f'Cannot read {path}: {exc.strerror}'
        raise UnreadableInputError(msg) from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        msg = f'Invalid CSV in {path}: {exc}'
        raise UnreadableInputError(msg) from exc


def sidecar_path(path: Path) -> Path:
    """The JSON sidecar path for a CSV file."""
    return Path(path).with_suffix('.json')
