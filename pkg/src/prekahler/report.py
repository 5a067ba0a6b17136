"""Report documents: canonical JSON, human summaries, CSV tables.

Every analysis command produces one :class:`ReportDocument`.  The JSON
rendering is canonical: keys sorted, no whitespace, complex numbers as
``{"re": .., "im": ..}`` pairs and infinities as the string ``"inf"``, so the
same input, seed and version always serialize to identical bytes.  The human
summary prints rounded figures for the terminal; each of those numbers is
carried at full precision in the JSON body.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np


def jsonable(value: Any) -> Any:
    """Rewrite a report tree into plain JSON-serializable data."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (np.ndarray,)):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.generic,)):
        return jsonable(value.item())
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, complex):
        return {"im": jsonable(value.imag), "re": jsonable(value.real)}
    if isinstance(value, float):
        if value != value:
            return "nan"
        if value == float("inf"):
            return "inf"
        if value == float("-inf"):
            return "-inf"
        return value
    if isinstance(value, int):
        return value
    raise TypeError("cannot serialize %r of type %s" % (value, type(value)))


@dataclass
class ReportDocument:
    """Structured result of one command run.

    ``records`` holds the per-point rows, ``aggregate`` the summary figures
    and verdicts, ``inputs`` an echo of everything that determined the run.
    """
    command: str
    version: str
    inputs: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def tree(self) -> dict:
        return {
            "command": self.command,
            "version": self.version,
            "inputs": self.inputs,
            "tolerances": self.tolerances,
            "records": self.records,
            "aggregate": self.aggregate,
            "notes": self.notes,
        }


def canonical_json(doc: "ReportDocument | dict") -> str:
    tree = doc.tree() if isinstance(doc, ReportDocument) else doc
    return json.dumps(jsonable(tree), sort_keys=True,
                      separators=(",", ":"), allow_nan=False) + "\n"


def fmt_number(x: Any) -> str:
    """Terminal rendering of one numeric value."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, complex):
        return "%s%s%si" % (fmt_number(x.real),
                            "+" if x.imag >= 0 else "-",
                            fmt_number(abs(x.imag)))
    if isinstance(x, float):
        if x != x:
            return "nan"
        if x in (float("inf"), float("-inf")):
            return "inf" if x > 0 else "-inf"
        return "%.12g" % x
    if isinstance(x, int):
        return str(x)
    return str(x)


def _summary_value(v: Any) -> str:
    if isinstance(v, Mapping):
        if set(v) == {"re", "im"}:
            return fmt_number(complex(v["re"], v["im"]))
        inner = ", ".join("%s=%s" % (k, _summary_value(v[k])) for k in sorted(v))
        return "{%s}" % inner
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_summary_value(x) for x in v) + "]"
    if isinstance(v, str) and v in ("inf", "-inf", "nan"):
        return v
    return fmt_number(v)


def human_summary(tree: "ReportDocument | dict") -> str:
    """Short terminal text: inputs on one line, then the aggregate block.

    Only aggregate figures are printed; the per-point table stays in the
    JSON / CSV outputs.  Numbers are rounded for reading, the JSON keeps the
    exact values.
    """
    if isinstance(tree, ReportDocument):
        tree = jsonable(tree.tree())
    lines = []
    inputs = tree.get("inputs", {})
    head = "prekahler %s" % tree.get("command", "?")
    bits = []
    for key in ("builtin", "potential_file", "samples", "seed"):
        if inputs.get(key) is not None:
            bits.append("%s=%s" % (key, inputs[key]))
    params = inputs.get("params") or {}
    for k in sorted(params):
        bits.append("%s=%s" % (k, fmt_number(params[k])))
    if bits:
        head += "  (" + ", ".join(bits) + ")"
    lines.append(head)
    tol = tree.get("tolerances", {})
    if tol:
        lines.append("tolerances: " + ", ".join(
            "%s=%s" % (k, _summary_value(tol[k])) for k in sorted(tol)))
    for key in sorted(tree.get("aggregate", {})):
        value = tree["aggregate"][key]
        if value is None:
            continue
        lines.append("  %-24s %s" % (key, _summary_value(value)))
    n = len(tree.get("records", []))
    if n:
        lines.append("records: %d (full precision in the JSON report)" % n)
    for note in tree.get("notes", []):
        lines.append("note: %s" % note)
    return "\n".join(lines) + "\n"


def _flatten_record(rec: Mapping, prefix: str = "") -> dict:
    flat: dict = {}
    for k in rec:
        v = rec[k]
        name = prefix + str(k)
        if isinstance(v, complex):
            flat[name + "_re"] = v.real
            flat[name + "_im"] = v.imag
        elif isinstance(v, Mapping) and set(v) == {"re", "im"}:
            flat[name + "_re"] = v["re"]
            flat[name + "_im"] = v["im"]
        elif isinstance(v, Mapping):
            flat.update(_flatten_record(v, name + "."))
        elif isinstance(v, (list, tuple)):
            for i, x in enumerate(v):
                flat.update(_flatten_record({str(i): x}, name + "."))
        else:
            flat[name] = v
    return flat


def records_csv(records: Sequence[Mapping]) -> str:
    """Plot-ready CSV: one row per sample, complex values split re/im."""
    rows = [_flatten_record(r) for r in records]
    cols: list[str] = sorted({k for r in rows for k in r})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in rows:
        line = []
        for c in cols:
            v = r.get(c, "")
            line.append(repr(v) if isinstance(v, float) else v)
        writer.writerow(line)
    return buf.getvalue()
