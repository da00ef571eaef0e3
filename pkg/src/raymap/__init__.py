"""Indoor EM propagation simulator, dataset builder, and evaluation metrics."""

from .materials import Material, get_material
from .propagation import ComplexPermittivity, PathLossParams, ci_path_loss, fspl
from .raytracer import Heatmap, PathRecord, PathSet, TraceConfig
from .scene import EncodedGeometry, GridSpec, Scene, TxLocation, WallSegment

__all__ = [
    "Material",
    "get_material",
    "ComplexPermittivity",
    "PathLossParams",
    "ci_path_loss",
    "fspl",
    "Heatmap",
    "PathRecord",
    "PathSet",
    "TraceConfig",
    "EncodedGeometry",
    "GridSpec",
    "Scene",
    "TxLocation",
    "WallSegment",
]

__version__ = "0.1.0"
