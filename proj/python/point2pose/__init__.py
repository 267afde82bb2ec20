"""Point cloud to pose estimation: geometry, filtering, synthetic data and model inference."""

from ._core import (
    Checkpoint,
    Config,
    ConfigError,
    DatasetFormatError,
    DegenerateRotation,
    EmptyInput,
    EmptyResult,
    EmptySegmentation,
    Error,
    InvalidRotation,
    InvalidSkeleton,
    IoError,
    NumericalError,
    ShapeError,
    angular_error,
    chamfer,
    dbscan,
    decode_rotation,
    encode_rotation,
    farthest_from_centroid,
    farthest_point_sampling,
    generate_sequence,
    gpc,
    k_nearest,
    mpjpe,
    read_dataset,
    skeleton_parents,
    sor,
)

__all__ = [name for name in dir() if not name.startswith("_")]
