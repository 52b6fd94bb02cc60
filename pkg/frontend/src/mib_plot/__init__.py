"""CSV-to-figure renderer for the MI-bound benchmark artifacts."""

from .render import FigureSpec, RenderError, SchemaError, build_figure, render, render_all

__all__ = ["FigureSpec", "RenderError", "SchemaError", "build_figure", "render", "render_all"]
