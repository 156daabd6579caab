"""CSV and JSON writers with a commented config header and 17-digit floats."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Mapping, Sequence

from . import __version__


def fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        return fmt(v.item())
    if v is None:
        return ""
    return str(v)


def header_lines(config: Mapping[str, Any]) -> list[str]:
    """``# key = value`` lines; nested mappings use dotted keys."""
    out = [f"# radius-lab {__version__}"]

    def walk(prefix, obj):
        for k in sorted(obj):
            v = obj[k]
            key = f"{prefix}{k}"
            if isinstance(v, Mapping):
                walk(key + ".", v)
            else:
                out.append(f"# {key} = {json.dumps(_jsonable(v), sort_keys=True)}")

    walk("", config)
    return out


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]],
             config: Mapping[str, Any] | None = None) -> str:
    buf = io.StringIO()
    if config is not None:
        buf.write("\n".join(header_lines(config)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(v: Any) -> Any:
    if isinstance(v, Mapping):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "tolist"):
        return _jsonable(v.tolist())
    if isinstance(v, float) and not math.isfinite(v):
        return fmt(v)
    if hasattr(v, "value") and hasattr(v, "name"):  # enums
        return v.name.lower() if not isinstance(v.value, str) else v.value
    return v


def _emit(v: Any, indent: int) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_emit(v[k], indent + 1)}" for k in sorted(v)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(v, list):
        if not v:
            return "[]"
        return "[\n" + ",\n".join(inner + _emit(x, indent + 1) for x in v) + "\n" + pad + "]"
    if isinstance(v, float):
        return "%.17g" % v
    return json.dumps(v)


def json_text(payload: Mapping[str, Any], config: Mapping[str, Any] | None = None) -> str:
    """JSON object with floats at 17 significant digits.

    The echoed config and version live under a ``header`` key. Non-finite
    floats are written as the strings "inf", "-inf" and "nan".
    """
    body: dict = {}
    if config is not None:
        body["header"] = {"version": __version__, "config": _jsonable(config)}
    body.update(_jsonable(payload))
    return _emit(body, 0) + "\n"
