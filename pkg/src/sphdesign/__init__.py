"""Well-separated spherical designs from convex equal-area partitions."""

__version__ = "0.1.0"

from .designer import DesignerConfig, anchor_configuration, design_residual, solve_positions
from .harmonics import HarmonicSpace, Poly, kernel
from .partition import ConvexPartition, build_partition, partition_norm
from .verifier import lower_bound, verify_design, verify_partition

__all__ = [
    "ConvexPartition",
    "DesignerConfig",
    "HarmonicSpace",
    "Poly",
    "anchor_configuration",
    "build_partition",
    "design_residual",
    "kernel",
    "lower_bound",
    "partition_norm",
    "solve_positions",
    "verify_design",
    "verify_partition",
]
