"""Writing run records to CSV or JSON and reading them back.

CSV has one row per G-evaluation with columns ``method, eval_index, residual,
lambda_selected, status``; ``eval_index`` starts at 1 and ``lambda_selected``
is filled on the row of the evaluation at which a ridge parameter was chosen.
JSON stores every serialized field of :class:`RunRecord` as is.
Floats are written with ``repr`` so a round trip is exact.
"""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from collections.abc import Sequence
from pathlib import Path

from .drivers.config import RunRecord, Status
from .errors import IoError

CSV_COLUMNS = ("method", "eval_index", "residual", "lambda_selected", "status")
FORMATS = ("csv", "json")


def record_to_dict(rec: RunRecord) -> dict:
    return {
        "method": rec.method,
        "status": rec.status.value,
        "g_eval_count": rec.g_eval_count,
        "iterations": rec.iterations,
        "wall_ms": rec.wall_ms,
        "message": rec.message,
        "residuals": list(rec.residuals),
        "lambdas": [[int(i), float(lam)] for i, lam in rec.lambdas],
    }


def record_from_dict(d: dict) -> RunRecord:
    rec = RunRecord(
        method=d["method"],
        residuals=[float(r) for r in d["residuals"]],
        lambdas=[(int(i), float(lam)) for i, lam in d.get("lambdas", [])],
        status=Status(d["status"]),
        message=d.get("message", ""),
        iterations=int(d.get("iterations", 0)),
        wall_ms=float(d.get("wall_ms", 0.0)),
    )
    if "g_eval_count" in d and d["g_eval_count"] != rec.g_eval_count:
        raise ValueError(f"{rec.method}: g_eval_count {d['g_eval_count']} disagrees with {rec.g_eval_count} residuals")
    return rec


def _fmt(x: float) -> str:
    return repr(float(x))


def dumps_json(records: Sequence[RunRecord]) -> str:
    return json.dumps([record_to_dict(r) for r in records], indent=1) + "\n"


def loads_json(text: str) -> list[RunRecord]:
    return [record_from_dict(d) for d in json.loads(text)]


def dumps_csv(records: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        chosen = defaultdict(list)
        for i, lam in rec.lambdas:
            chosen[i].append(_fmt(lam))
        for i, r in enumerate(rec.residuals, start=1):
            writer.writerow((rec.method, i, _fmt(r), ";".join(chosen.get(i, ())), rec.status.value))
    return buf.getvalue()


def loads_csv(text: str) -> list[RunRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
        raise ValueError(f"expected CSV columns {', '.join(CSV_COLUMNS)}")
    records: list[RunRecord] = []
    for row in reader:
        index = int(row["eval_index"])
        if index == 1 or not records or records[-1].method != row["method"]:
            records.append(RunRecord(row["method"], status=Status(row["status"])))
        rec = records[-1]
        if index != rec.g_eval_count + 1:
            raise ValueError(f"{rec.method}: eval_index {index} out of sequence")
        rec.residuals.append(float(row["residual"]))
        if row["lambda_selected"]:
            rec.lambdas.extend((index, float(v)) for v in row["lambda_selected"].split(";"))
    return records


def emit_records(records: Sequence[RunRecord], path, fmt: str = "csv") -> Path:
    """Write ``records`` to ``path`` in ``fmt`` and return the path.

    Raises:
        ValueError: empty ``records`` or unknown format.
        IoError: the file could not be written.
    """
    if not records:
        raise ValueError("no records to emit")
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose csv or json")
    text = dumps_csv(records) if fmt == "csv" else dumps_json(records)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def read_records(path, fmt: str | None = None) -> list[RunRecord]:
    """Read records written by :func:`emit_records`; the format defaults to the suffix.

    CSV keeps only the per-evaluation columns, so ``message``, ``iterations``
    and ``wall_ms`` come back empty.
    """
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose csv or json")
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return loads_csv(text) if fmt == "csv" else loads_json(text)
