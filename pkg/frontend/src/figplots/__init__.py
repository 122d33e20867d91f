"""Render figures from rydsol CSV outputs.

This package consumes only the documented CSV schemas written by the
`rydsol` command-line tool; it has no in-process coupling to the
simulation engines.
"""

from .spec import PlotSpec, SpecError, load_spec
from .render import RenderResult, SchemaError, render

__all__ = [
    "PlotSpec",
    "SpecError",
    "load_spec",
    "RenderResult",
    "SchemaError",
    "render",
]
