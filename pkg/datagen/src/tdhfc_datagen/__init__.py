"""One-time generator of STO-3G interchange files for small molecules."""

from .generate import BUNDLED_SYSTEMS, GeometrySpec, compute_matrices, write_interchange

__all__ = ["BUNDLED_SYSTEMS", "GeometrySpec", "compute_matrices", "write_interchange"]
