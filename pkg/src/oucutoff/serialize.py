"""Deterministic CSV/JSON emission.

Every float renders as %.17g, JSON keys are sorted, line endings are fixed to
"\\n", and nothing here writes timestamps: reruns with the same config and
seed must produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path


def fmt17(x) -> str:
    return f"{float(x):.17g}"


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return fmt17(x)


def write_csv(path, header, rows) -> None:
    """Write rows of mixed str/number cells under a mandatory header row."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(c) for c in row) + "\n")


def json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(json_dumps(obj), encoding="utf-8")
