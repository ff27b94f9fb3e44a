"""Figure generation for epifam experiment CSV outputs."""

__version__ = "0.1.0"

from epifam_plots.figures import FIGURE_KINDS, FigureSpec, MissingColumnsError, render

__all__ = ["__version__", "FIGURE_KINDS", "FigureSpec", "MissingColumnsError", "render"]
