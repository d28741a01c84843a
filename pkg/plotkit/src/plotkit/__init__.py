"""Figure rendering for the torus-NLS experiment suite's CSV outputs."""

__version__ = "0.1.0"

from .figures import KINDS, FigureSpec, RenderResult, SchemaMismatch, render
