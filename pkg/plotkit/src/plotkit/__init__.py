"""Offline figure rendering for admission-control experiment CSVs."""

from .figures import FIGURE_KINDS, FigureError, FigureSpec, render

__all__ = ["FIGURE_KINDS", "FigureError", "FigureSpec", "render"]
__version__ = "0.1.0"
