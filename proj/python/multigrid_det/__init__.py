"""Multi-grid detector target encoding, decoding, loss and evaluation."""

from ._core import (
    DEFAULT_BETA,
    IoError,
    NumericError,
    ValidationError,
    coord_activation,
    decode,
    default_anchors,
    encode,
    evaluate,
    gradient_check,
    inverse_coord_activation,
    iou,
    kmeans,
    loss,
    multi_grid_cells,
    nms,
    perfect_raw,
    roundtrip_check,
)

__all__ = [
    "DEFAULT_BETA",
    "IoError",
    "NumericError",
    "ValidationError",
    "coord_activation",
    "decode",
    "default_anchors",
    "encode",
    "evaluate",
    "gradient_check",
    "inverse_coord_activation",
    "iou",
    "kmeans",
    "loss",
    "multi_grid_cells",
    "nms",
    "perfect_raw",
    "roundtrip_check",
]
