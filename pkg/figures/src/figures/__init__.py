"""Render figures from communitygt experiment CSV files."""
from .core import FigureError, FigureSpec, load_rows, render

__all__ = ["FigureError", "FigureSpec", "load_rows", "render"]
