"""Tabular experiment results with deterministic CSV/JSON serialization."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ExperimentResult", "atomic_write_text"]

_VERSION = "ulab/0.1.0"


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file + rename so partial outputs are never visible."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class ExperimentResult:
    """Ordered columns, numeric/str rows, and a config-echo metadata block."""

    schema: tuple[str, ...]
    rows: list[tuple]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.schema = tuple(self.schema)
        for row in self.rows:
            if len(row) != len(self.schema):
                raise ValueError("row width does not match schema")
        self.metadata.setdefault("version", _VERSION)

    def column(self, name: str) -> np.ndarray:
        i = self.schema.index(name)
        values = [row[i] for row in self.rows]
        if values and isinstance(values[0], str):
            return np.array(values, dtype=object)
        return np.array(values, dtype=float)

    def where(self, **conditions) -> "ExperimentResult":
        """Rows whose named columns equal the given values."""
        idx = [self.schema.index(k) for k in conditions]
        vals = list(conditions.values())
        kept = [r for r in self.rows
                if all(r[i] == v for i, v in zip(idx, vals))]
        return ExperimentResult(self.schema, kept, dict(self.metadata))

    def to_csv(self) -> str:
        lines = [",".join(self.schema)]
        lines.extend(",".join(_fmt(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def metadata_json(self, runtime_seconds: float | None = None) -> str:
        meta = dict(self.metadata)
        if runtime_seconds is not None:
            meta["runtime_seconds"] = runtime_seconds
        return json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n"

    def write(self, path: str, runtime_seconds: float | None = None) -> None:
        """Write the CSV atomically plus a sibling .json metadata file."""
        atomic_write_text(path, self.to_csv())
        base, _ = os.path.splitext(path)
        atomic_write_text(base + ".json", self.metadata_json(runtime_seconds))
