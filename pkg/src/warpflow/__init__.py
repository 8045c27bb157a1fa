"""Mean curvature flow of geodesic graphs in warped products r(z)^2 g_M + dz^2."""

from . import csf, mcf_sym, neckpinch, parallel, residual, warp
from .config import ExperimentConfig
from .errors import ConfigError, WarpflowError
from .registry import list_registry, run_entry
from .runner import run_experiment

__version__ = "0.1.0"

__all__ = [
    "warp",
    "parallel",
    "csf",
    "mcf_sym",
    "residual",
    "neckpinch",
    "ExperimentConfig",
    "ConfigError",
    "WarpflowError",
    "list_registry",
    "run_entry",
    "run_experiment",
]
