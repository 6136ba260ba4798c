"""Static figure rendering for the robust-adrf benchmark CSV outputs."""

from .figures import FIGURE_KINDS, FigureSpec, SchemaError, render

__all__ = ["FIGURE_KINDS", "FigureSpec", "SchemaError", "render"]
