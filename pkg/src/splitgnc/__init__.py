"""Robust rigid registration with an annealed Geman-McClure loss and sub-cloud splitting."""

from .errors import (
    AllSplitsFailedError,
    ConfigError,
    DegenerateGeometryError,
    EmptyIndexError,
    InsufficientCorrespondencesError,
    PlyParseError,
    RegistrationError,
    ValidationError,
)
from .features import CorrespondenceSet, FeatureParams, compute_fpfh, estimate_normals, mutual_match, prepare_cloud
from .geometry import NeighborIndex, PointCloud, RigidTransform, voxel_downsample
from .solver import GncConfig, SolveReport, irls_solve, weighted_svd
from .splitting import SplitConfig, SplitReport, partition, solve_with_splits

__version__ = "0.1.0"

__all__ = [
    "AllSplitsFailedError", "ConfigError", "CorrespondenceSet", "DegenerateGeometryError",
    "EmptyIndexError", "FeatureParams", "GncConfig", "InsufficientCorrespondencesError",
    "NeighborIndex", "PlyParseError", "PointCloud", "RegistrationError", "RigidTransform",
    "SolveReport", "SplitConfig", "SplitReport", "ValidationError", "compute_fpfh",
    "estimate_normals", "irls_solve", "mutual_match", "partition", "prepare_cloud",
    "solve_with_splits", "voxel_downsample", "weighted_svd",
]
