"""2D frequency-domain waveform inversion by wavefield reconstruction,
with bound constraints and isotropic total-variation regularization."""

__version__ = "0.1.0"

from .model import Bounds, Grid, Model  # noqa: F401
from .survey import DataSet, Survey  # noqa: F401
