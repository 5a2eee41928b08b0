"""Structured-matrix Hartree-Fock solver on regular finite-element grids."""

from ._core import (
    GridhfError,
    System,
    assemble,
    compress,
    gradient,
    norm_ratios,
    scf,
    scf_tensor,
    total_energy,
)

__all__ = [
    "GridhfError",
    "System",
    "assemble",
    "compress",
    "gradient",
    "norm_ratios",
    "scf",
    "scf_tensor",
    "total_energy",
]
