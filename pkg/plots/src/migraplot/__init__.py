"""Static figure reproduction from migrasim CSV outputs."""

from .render import (KINDS, REQUIRED_COLUMNS, FigureSpec, SchemaError,
                     build_figure, read_table, render)

__version__ = "0.1.0"

__all__ = ["FigureSpec", "SchemaError", "render", "build_figure",
           "read_table", "KINDS", "REQUIRED_COLUMNS"]
