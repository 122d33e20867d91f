"""Plot specification: a small JSON document describing one figure.

Schema (all paths are resolved relative to the spec file's directory):

.. code-block:: json

    {
      "kind": "heatmap | lines | orbit | scatter",
      "input": "delta_number.csv",
      "output": "figure.png",
      "title": "optional title",
      "x_label": "optional x-axis label",
      "y_label": "optional y-axis label",
      "color_range": "symmetric" | [lo, hi],   // heatmap only
      "pair": [7, 8],                           // orbit only: two index values
      "wrap": 6.2832,                           // orbit only: wrap values into [0, wrap)
      "x": "energy", "y": "entropy"             // scatter only: column names
    }

Expected CSV schemas per kind:

* ``heatmap`` — long-format grid: three columns ``(t, <index>, <value>)``
  such as ``t,site,value``, ``t,cut,S`` or ``t,offset,C``.
* ``lines`` — either two columns ``(x, y)`` or three columns
  ``(t, <group>, <value>)`` such as ``t,m,F`` or ``generation,best_loss``.
* ``orbit`` — a long-format grid as for ``heatmap`` plus a ``pair`` of two
  index values; the trajectory of value(pair[1]) is plotted against
  value(pair[0]).
* ``scatter`` — any CSV containing the two named columns ``x`` and ``y``,
  such as ``index,energy,overlap,entropy``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

KINDS = ("heatmap", "lines", "orbit", "scatter")


class SpecError(ValueError):
    """Raised when a plot spec document is malformed."""


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    input: Path
    output: Path
    title: str | None = None
    x_label: str | None = None
    y_label: str | None = None
    color_range: object = None
    pair: tuple[int, int] | None = None
    x: str | None = None
    y: str | None = None
    extra: dict = field(default_factory=dict)


def _validate(doc: dict, base: Path) -> PlotSpec:
    if not isinstance(doc, dict):
        raise SpecError("spec document must be a JSON object")
    missing = [k for k in ("kind", "input", "output") if k not in doc]
    if missing:
        raise SpecError(f"spec is missing required fields: {', '.join(missing)}")
    kind = doc["kind"]
    if kind not in KINDS:
        raise SpecError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")

    input_path = base / doc["input"]
    if not input_path.exists():
        raise SpecError(f"input CSV not found: {input_path}")

    color_range = doc.get("color_range")
    if color_range is not None:
        if color_range == "symmetric":
            pass
        elif (
            isinstance(color_range, (list, tuple))
            and len(color_range) == 2
            and all(isinstance(v, (int, float)) for v in color_range)
        ):
            color_range = (float(color_range[0]), float(color_range[1]))
        else:
            raise SpecError('color_range must be "symmetric" or a [lo, hi] pair')

    pair = doc.get("pair")
    if kind == "orbit":
        if (
            not isinstance(pair, (list, tuple))
            or len(pair) != 2
            or not all(isinstance(v, int) for v in pair)
        ):
            raise SpecError("orbit requires `pair`: two integer index values")
        pair = (pair[0], pair[1])

    x = doc.get("x")
    y = doc.get("y")
    if kind == "scatter" and (not isinstance(x, str) or not isinstance(y, str)):
        raise SpecError("scatter requires `x` and `y` column names")

    known = {
        "kind", "input", "output", "title", "x_label", "y_label",
        "color_range", "pair", "x", "y",
    }
    extra = {k: v for k, v in doc.items() if k not in known}

    return PlotSpec(
        kind=kind,
        input=input_path,
        output=base / doc["output"],
        title=doc.get("title"),
        x_label=doc.get("x_label"),
        y_label=doc.get("y_label"),
        color_range=color_range,
        pair=pair,
        x=x,
        y=y,
        extra=extra,
    )


def load_spec(path: str | Path) -> PlotSpec:
    """Load and validate a plot spec JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: not valid JSON ({exc})") from exc
    return _validate(doc, path.parent)
