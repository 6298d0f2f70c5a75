"""changeforge: synthetic change-detection datasets, the center-point
box/map codec with losses, and AP/generalization-distance evaluation."""

from .codec import ChangeBox, CodecConfig, Detection, TargetMaps, decode_maps, encode_targets, gaussian_sigma
from .imageops import Patch, Rect
from .losses import LossConfig, LossReport, loss_gradients, total_loss
from .metrics import EvalResult, ResultsMatrix, average_precision, generalization_distance, iou
from .shapes import AnchorSpec, Polygon, PolygonSpec, gen_irregular_polygon, rasterize_polygon, sample_anchor_rect
from .synthgen import GenerationConfig, Manifest, Restrictions, generate_dataset, generate_pair, load_dataset

__version__ = "0.1.0"

__all__ = [
    "AnchorSpec",
    "ChangeBox",
    "CodecConfig",
    "Detection",
    "EvalResult",
    "GenerationConfig",
    "LossConfig",
    "LossReport",
    "Manifest",
    "Patch",
    "Polygon",
    "PolygonSpec",
    "Rect",
    "Restrictions",
    "ResultsMatrix",
    "TargetMaps",
    "average_precision",
    "decode_maps",
    "encode_targets",
    "gaussian_sigma",
    "gen_irregular_polygon",
    "generalization_distance",
    "generate_dataset",
    "generate_pair",
    "iou",
    "load_dataset",
    "loss_gradients",
    "rasterize_polygon",
    "sample_anchor_rect",
    "total_loss",
]
