"""Surrogate-guided tiling exploration for GEMM on an AIE-array accelerator."""

__version__ = "0.1.0"
