"""Static sensitivity figures from training-log CSVs."""

from .render import FigureSpec, SchemaError, read_series, render_sensitivity_figure

__version__ = "0.1.0"
