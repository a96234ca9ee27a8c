"""Offline figure generation for wri2d run outputs."""

__version__ = "0.1.0"

from .figures import plot_all, plot_convergence, plot_model  # noqa: F401
