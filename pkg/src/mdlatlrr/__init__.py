"""Multi-level latent low-rank decomposition and infrared/visible image fusion."""

__version__ = "0.1.0"

from .decompose import Decomposition, dlatlrr, mdlatlrr
from .errors import ArgumentError, DataError, MDLatLRRError, NumericalError, PoolSizeError
from .fusion import FusionConfig, fuse_images
from .latlrr import LatLrrParams, ProjectionMatrix, solve_latlrr, train_projection
from .metrics import evaluate
from .patches import extract_patches, reconstruct_image

__all__ = [
    "ArgumentError",
    "DataError",
    "Decomposition",
    "FusionConfig",
    "LatLrrParams",
    "MDLatLRRError",
    "NumericalError",
    "PoolSizeError",
    "ProjectionMatrix",
    "dlatlrr",
    "evaluate",
    "extract_patches",
    "fuse_images",
    "mdlatlrr",
    "reconstruct_image",
    "solve_latlrr",
    "train_projection",
]
