"""Deterministic report serialization: canonical JSON and flat CSV."""
from __future__ import annotations

import csv
import io
import json
import math
import sys

SECTIONS = ("metrics", "residuals", "estimates", "deltas")


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if hasattr(obj, "item"):
        return _encode(obj.item(), indent, level)
    return json.dumps(str(obj))


def to_json(report: dict) -> str:
    """Sorted keys; every real written with 17 significant digits."""
    return _encode(report, 2, 0) + "\n"


CSV_FIELDS = ["model", "kind", "section", "metric", "value", "units", "source", "half_width_95", "samples"]


def csv_rows(report: dict) -> list[dict]:
    rows = []
    for block in report.get("models", []):
        for section in SECTIONS:
            for key in sorted(block.get(section, {})):
                item = block[section][key]
                value = item.get("value", item.get("point", item.get("delta")))
                rows.append({
                    "model": block["name"], "kind": block["kind"], "section": section, "metric": key,
                    "value": format(float(value), ".17g"), "units": item.get("units", ""),
                    "source": item.get("source", ""),
                    "half_width_95": "" if "half_width_95" not in item else format(float(item["half_width_95"]), ".17g"),
                    "samples": item.get("samples", ""),
                })
    return rows


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(csv_rows(report))
    return buf.getvalue()


def emit_report(report: dict, fmt: str = "json", path=None) -> str:
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    text = to_json(report) if fmt == "json" else to_csv(report)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
