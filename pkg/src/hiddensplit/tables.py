"""Plot-ready tabular output: CSV with ``#`` metadata lines, or JSON."""
from __future__ import annotations

import json
import math

from . import __version__


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v + 0.0:.17g}"  # + 0.0 drops the sign of -0.0
    try:
        return fmt(float(v))
    except (TypeError, ValueError):
        return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        return _jsonable(v.item())
    return v


def render_csv(columns, rows, meta=None) -> str:
    lines = [f"# hiddensplit {__version__}"]
    for k, v in (meta or {}).items():
        if isinstance(v, (dict, list)):
            v = json.dumps(_jsonable(v), sort_keys=True)
        lines.append(f"# {k}: {v}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def render_json(columns, rows, meta=None) -> str:
    doc = {"version": __version__, "meta": _jsonable(meta or {}), "columns": list(columns),
           "rows": [[_jsonable(v) for v in r] for r in rows]}
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def render(columns, rows, meta=None, fmt_name="csv") -> str:
    return render_json(columns, rows, meta) if fmt_name == "json" else render_csv(columns, rows, meta)
